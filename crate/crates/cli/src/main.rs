//! `qbmm`: moment inversion, closure, spectral and stability audits, and the
//! shock-tube solver from the command line. Results go to stdout as JSON;
//! solver runs also write CSV snapshots and a manifest.

mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use qbmm_core::closure::{
    char_poly_eqmom, char_poly_qmom, closed_moment_eqmom, closed_moment_qmom, closure_coeffs_eqmom,
    closure_coeffs_qmom, g_polynomial, u_tilde,
};
use qbmm_core::inversion::{eqmom_forward, eqmom_invert, qmom_forward, qmom_invert, MomentVector};
use qbmm_core::solver::{Method, SimConfig};
use qbmm_core::spectral::{analyze_eqmom, analyze_qmom};
use qbmm_core::stability::{stability_report, SourceModel, StabilityReport};
use qbmm_core::Error;

const EXIT_REALIZABILITY: u8 = 2;
const EXIT_STABILITY: u8 = 3;
const EXIT_USAGE: u8 = 64;
const EXIT_IO: u8 = 66;

const BUNDLED: [(&str, &str); 2] = [
    ("riemann-kpa0-eqmom", include_str!("../configs/riemann-kpa0-eqmom.toml")),
    ("riemann-kpa0-qmom", include_str!("../configs/riemann-kpa0-qmom.toml")),
];

#[derive(Parser)]
#[command(name = "qbmm", version, about = "Quadrature-based moment closures for the 1-D kinetic equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Recover nodes (QMOM) or nodes and variance (EQMOM) from moments.
    Invert(MomentArgs),
    /// Closure coefficients and the closed moment.
    Closure(MomentArgs),
    /// Eigenvalues, gaps and defects of the coefficient matrix.
    Spectrum(MomentArgs),
    /// Structural stability conditions at an equilibrium.
    StabilityCheck(StabilityArgs),
    /// Run the shock-tube solver and write CSV snapshots plus a manifest.
    Riemann(RiemannArgs),
    /// Write the collisionless reference solution as CSV.
    Oracle(OracleArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Qmom,
    Eqmom,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Qmom => Method::Qmom,
            MethodArg::Eqmom => Method::Eqmom,
        }
    }
}

#[derive(Args)]
struct MomentArgs {
    #[arg(long, value_enum)]
    method: MethodArg,
    #[arg(long)]
    n: usize,
    /// Read moments from a file (whitespace or comma separated).
    #[arg(long, conflicts_with = "moments")]
    file: Option<PathBuf>,
    /// Moments M_0, M_1, … (2N for QMOM, 2N+1 for EQMOM).
    #[arg(allow_negative_numbers = true)]
    moments: Vec<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Bgk,
    Shakhov,
}

#[derive(Args)]
struct StabilityArgs {
    #[arg(long, value_enum)]
    model: ModelArg,
    /// Prandtl number (Shakhov only).
    #[arg(long)]
    pr: Option<f64>,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    u: f64,
    #[arg(long, default_value_t = 1.0)]
    theta: f64,
    /// Positive weights Λ for the symmetrizer LᵀΛL (default: all ones).
    #[arg(long, value_delimiter = ',')]
    lambda: Option<Vec<f64>>,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML configuration file.
    config: Option<PathBuf>,
    /// Use a bundled configuration instead of a file.
    #[arg(long, conflicts_with = "config")]
    bundled: Option<String>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    cells: Option<usize>,
    #[arg(long)]
    cfl: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    /// Collision parameter; `inf` for instantaneous relaxation.
    #[arg(long, value_parser = parse_kappa)]
    kappa: Option<f64>,
}

#[derive(Args)]
struct RiemannArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Additional snapshot times (comma separated); `t_end` is always written.
    #[arg(long, value_delimiter = ',')]
    output_times: Option<Vec<f64>>,
    /// Output directory for snapshots and manifest.json.
    #[arg(long, default_value = "riemann-out")]
    out: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Highest moment written.
    #[arg(long, default_value_t = 4)]
    k_max: usize,
    /// CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_kappa(s: &str) -> Result<f64, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "inf" | "infinity" => Ok(f64::INFINITY),
        v => v.parse::<f64>().map_err(|e| e.to_string()),
    }
}

/// A command failure carrying its exit code and a JSON diagnostic.
#[derive(Debug)]
pub(crate) struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
    report: Option<Value>,
}

impl Failure {
    pub(crate) fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, kind: "usage", message: message.into(), report: None }
    }

    pub(crate) fn io(message: impl Into<String>) -> Self {
        Self { code: EXIT_IO, kind: "io", message: message.into(), report: None }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, kind) = match e {
            Error::NotRealizable { .. }
            | Error::InversionFailed { .. }
            | Error::RootFinding { .. }
            | Error::Realizability { .. } => (EXIT_REALIZABILITY, "realizability"),
            Error::Domain(_) | Error::Unsupported(_) | Error::Config(_) => (EXIT_USAGE, "usage"),
        };
        let report = match &e {
            Error::Realizability { cell, time, moments, .. } => {
                Some(json!({ "cell": cell, "time": time, "moments": moments }))
            }
            _ => None,
        };
        Self { code, kind, message: e.to_string(), report }
    }
}

type CmdResult = Result<Value, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Invert(a) => cmd_invert(&a),
        Command::Closure(a) => cmd_closure(&a),
        Command::Spectrum(a) => cmd_spectrum(&a),
        Command::StabilityCheck(a) => cmd_stability(&a),
        Command::Riemann(a) => cmd_riemann(&a),
        Command::Oracle(a) => cmd_oracle(&a),
    };
    match result {
        Ok(Value::Null) => ExitCode::SUCCESS,
        Ok(v) => {
            println!("{}", pretty(&v));
            ExitCode::SUCCESS
        }
        Err(f) => {
            let mut diag = json!({ "error": f.kind, "message": f.message });
            if let Some(r) = f.report {
                diag["report"] = r;
            }
            if f.code == EXIT_USAGE || f.code == EXIT_IO {
                eprintln!("error: {}", f.message);
            } else {
                println!("{}", pretty(&diag));
                eprintln!("error: {}", f.message);
            }
            ExitCode::from(f.code)
        }
    }
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON values always serialize")
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize to JSON")
}

fn read_moments(a: &MomentArgs) -> Result<MomentVector, Failure> {
    let m = match &a.file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::io(format!("cannot read {}: {e}", path.display())))?;
            text.split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<f64>().map_err(|e| Failure::usage(format!("bad moment {t:?}: {e}"))))
                .collect::<Result<Vec<_>, _>>()?
        }
        None => a.moments.clone(),
    };
    if a.n == 0 {
        return Err(Failure::usage("--n must be at least 1"));
    }
    let want = match a.method {
        MethodArg::Qmom => 2 * a.n,
        MethodArg::Eqmom => 2 * a.n + 1,
    };
    if m.len() != want {
        return Err(Failure::usage(format!(
            "{} with N = {} needs {want} moments, got {}",
            method_name(a.method),
            a.n,
            m.len()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Failure::usage("moments must be finite"));
    }
    Ok(MomentVector(m))
}

fn method_name(m: MethodArg) -> &'static str {
    match m {
        MethodArg::Qmom => "qmom",
        MethodArg::Eqmom => "eqmom",
    }
}

/// Largest `|forward(M) − M|` relative to `max |M|`.
fn residual(back: &MomentVector, m: &MomentVector) -> f64 {
    let scale = m.max_abs().max(f64::MIN_POSITIVE);
    back.as_slice().iter().zip(m.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale
}

fn cmd_invert(a: &MomentArgs) -> CmdResult {
    let m = read_moments(a)?;
    match a.method {
        MethodArg::Qmom => {
            let r = qmom_invert(&m)?;
            let back = qmom_forward(&r.nodes, m.len() - 1);
            Ok(json!({
                "method": "qmom",
                "n": a.n,
                "nodes": r.nodes.nodes(),
                "near_degenerate": r.near_degenerate,
                "residual": residual(&back, &m),
            }))
        }
        MethodArg::Eqmom => {
            let r = eqmom_invert(&m)?;
            let back = eqmom_forward(&r.state, m.len() - 1);
            Ok(json!({
                "method": "eqmom",
                "n": a.n,
                "nodes": r.state.nodes.nodes(),
                "sigma2": r.state.sigma2,
                "on_boundary": r.on_boundary,
                "residual": residual(&back, &m),
            }))
        }
    }
}

fn cmd_closure(a: &MomentArgs) -> CmdResult {
    let m = read_moments(a)?;
    match a.method {
        MethodArg::Qmom => {
            let ns = qmom_invert(&m)?.nodes;
            Ok(json!({
                "method": "qmom",
                "n": a.n,
                "closed_index": 2 * a.n,
                "closed_moment": closed_moment_qmom(&ns),
                "a": closure_coeffs_qmom(&ns).a(),
                "char_poly": char_poly_qmom(&ns).coeffs(),
            }))
        }
        MethodArg::Eqmom => {
            let st = eqmom_invert(&m)?.state;
            Ok(json!({
                "method": "eqmom",
                "n": a.n,
                "closed_index": 2 * a.n + 1,
                "closed_moment": closed_moment_eqmom(&st),
                "a": closure_coeffs_eqmom(&st).a(),
                "char_poly": char_poly_eqmom(&st).coeffs(),
                "g": g_polynomial(&st).coeffs(),
                "u_tilde": u_tilde(&st.nodes),
            }))
        }
    }
}

fn cmd_spectrum(a: &MomentArgs) -> CmdResult {
    let m = read_moments(a)?;
    let report = match a.method {
        MethodArg::Qmom => analyze_qmom(&qmom_invert(&m)?.nodes)?,
        MethodArg::Eqmom => analyze_eqmom(&eqmom_invert(&m)?.state)?,
    };
    Ok(json!({
        "method": method_name(a.method),
        "n": a.n,
        "spectral_radius": report.spectral_radius(),
        "report": to_value(&report),
    }))
}

fn cmd_stability(a: &StabilityArgs) -> CmdResult {
    let model = match (a.model, a.pr) {
        (ModelArg::Bgk, None) => SourceModel::Bgk,
        (ModelArg::Bgk, Some(_)) => return Err(Failure::usage("--pr only applies to --model shakhov")),
        (ModelArg::Shakhov, Some(prandtl)) => SourceModel::Shakhov { prandtl },
        (ModelArg::Shakhov, None) => return Err(Failure::usage("--model shakhov needs --pr")),
    };
    let report = stability_report(a.rho, a.u, a.theta, a.n, model, a.lambda.as_deref())?;
    let v = to_value(&report);
    if report.pass {
        return Ok(v);
    }
    Err(Failure {
        code: EXIT_STABILITY,
        kind: "stability",
        message: failing_conditions(&report).join("; "),
        report: Some(v),
    })
}

fn failing_conditions(r: &StabilityReport) -> Vec<String> {
    let mut out = Vec::new();
    if !r.cond_i.pass {
        out.push(format!("condition (i) failed: residual {:e}", r.cond_i.residual));
    }
    if !r.cond_ii.pass {
        out.push(format!(
            "condition (ii) failed: symmetry_residual {:e}, min_eigenvalue {:e}",
            r.cond_ii.symmetry_residual, r.cond_ii.min_eigenvalue
        ));
    }
    if !r.cond_iii.pass {
        out.push(format!(
            "condition (iii) failed: relative_off_block {:e}, epsilon {:?}",
            r.cond_iii.relative_off_block, r.cond_iii.epsilon
        ));
    }
    out
}

/// Bundled or file configuration with command-line overrides applied.
fn load_config(a: &ConfigArgs) -> Result<SimConfig, Failure> {
    let text = match (&a.config, &a.bundled) {
        (Some(path), _) => read_config(path)?,
        (None, Some(name)) => BUNDLED
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t.to_string())
            .ok_or_else(|| {
                let names: Vec<&str> = BUNDLED.iter().map(|(n, _)| *n).collect();
                Failure::usage(format!("unknown bundled config {name:?}; available: {}", names.join(", ")))
            })?,
        (None, None) => return Err(Failure::usage("a config file or --bundled NAME is required")),
    };
    let mut cfg: SimConfig =
        toml::from_str(&text).map_err(|e| Failure::usage(format!("invalid config: {e}")))?;
    if let Some(m) = a.method {
        cfg.method = m.into();
    }
    if let Some(n) = a.n {
        cfg.n = n;
    }
    if let Some(c) = a.cells {
        cfg.cells = c;
    }
    if let Some(c) = a.cfl {
        cfg.cfl = c;
    }
    if let Some(t) = a.t_end {
        cfg.t_end = t;
    }
    if let Some(k) = a.kappa {
        cfg.kappa = k;
    }
    Ok(cfg)
}

fn read_config(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::io(format!("cannot read config {}: {e}", path.display())))
}

fn cmd_riemann(a: &RiemannArgs) -> CmdResult {
    let mut cfg = load_config(&a.config)?;
    if let Some(t) = &a.output_times {
        cfg.output_times = t.clone();
    }
    cfg.validate()?;
    let summary = output::run_and_write(&cfg, &a.out)?;
    Ok(summary)
}

fn cmd_oracle(a: &OracleArgs) -> CmdResult {
    let cfg = load_config(&a.config)?;
    cfg.validate()?;
    let field = output::reference_field(&cfg, a.k_max)?;
    match &a.out {
        Some(path) => {
            output::write_csv(&field, path)?;
            Ok(json!({ "file": path, "time": field.time, "cells": field.x.len() }))
        }
        None => {
            output::write_csv_to(&field, std::io::stdout().lock())?;
            Ok(Value::Null)
        }
    }
}
