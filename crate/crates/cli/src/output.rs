//! Solver artifacts: snapshot CSVs, the reference solution, and the run
//! manifest.

use std::io::Write;
use std::path::Path;

use serde_json::{json, Value};

use qbmm_core::solver::{
    delta_shock_metric, free_streaming_moments, l1_density_error, run_riemann, FieldState, SimConfig,
};

use crate::Failure;

pub fn write_csv(field: &FieldState, path: &Path) -> Result<(), Failure> {
    let file = std::fs::File::create(path)
        .map_err(|e| Failure::io(format!("cannot create {}: {e}", path.display())))?;
    write_csv_to(field, file)
}

pub fn write_csv_to<W: Write>(field: &FieldState, sink: W) -> Result<(), Failure> {
    let io = |e: csv::Error| Failure::io(format!("CSV write failed: {e}"));
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(field.csv_header()).map_err(io)?;
    for row in field.csv_rows()? {
        w.write_record(row.iter().map(|v| format!("{v:?}"))).map_err(io)?;
    }
    w.flush().map_err(|e| Failure::io(format!("CSV write failed: {e}")))
}

/// Collisionless solution at `t_end` on the configured cell centres
/// (at least `M_0..M_2`, so the macroscopic columns are defined).
pub fn reference_field(cfg: &SimConfig, k_max: usize) -> Result<FieldState, Failure> {
    let (left, right) = (cfg.left()?, cfg.right()?);
    let dx = cfg.dx();
    let x: Vec<f64> = (0..cfg.cells).map(|i| cfg.x_lo + (i as f64 + 0.5) * dx).collect();
    let moments = x
        .iter()
        .map(|&xi| free_streaming_moments(xi, cfg.t_end, &left, &right, k_max.max(2)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FieldState { time: cfg.t_end, x, dx, moments })
}

/// Runs the solver, writes `snapshot_XXX.csv` files and `manifest.json`
/// into `dir`, and returns a short summary.
pub fn run_and_write(cfg: &SimConfig, dir: &Path) -> Result<Value, Failure> {
    let out = run_riemann(cfg)?;
    std::fs::create_dir_all(dir).map_err(|e| Failure::io(format!("cannot create {}: {e}", dir.display())))?;
    let (left, right) = (cfg.left()?, cfg.right()?);
    let collisionless = cfg.kappa == 0.0;

    let mut snapshots = Vec::new();
    for (i, snap) in out.snapshots.iter().enumerate() {
        let name = format!("snapshot_{i:03}.csv");
        write_csv(snap, &dir.join(&name))?;
        let mut entry = json!({ "index": i, "time": snap.time, "file": name });
        if collisionless && snap.time > 0.0 {
            entry["l1_density_error"] = json!(l1_density_error(snap, &left, &right)?);
            entry["delta_shock_metric"] = json!(delta_shock_metric(snap, &left, &right)?);
        }
        snapshots.push(entry);
    }
    let last = snapshots.last().cloned().unwrap_or(Value::Null);
    let manifest = json!({
        "config": cfg,
        "steps": out.diagnostics.steps,
        "wall_time_s": out.diagnostics.wall_time_s,
        "diagnostics": out.diagnostics,
        "snapshots": snapshots,
    });
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text).map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))?;

    let mut summary = json!({
        "manifest": path,
        "steps": out.diagnostics.steps,
        "wall_time_s": out.diagnostics.wall_time_s,
        "time": last["time"],
    });
    if collisionless {
        summary["l1_density_error"] = last["l1_density_error"].clone();
        summary["delta_shock_metric"] = last["delta_shock_metric"].clone();
    }
    Ok(summary)
}
