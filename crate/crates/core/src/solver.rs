//! First-order finite-volume solver for the 1-D moment systems with BGK
//! relaxation, and the free-streaming oracle for the `κ = 0` Riemann problem.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::inversion::{eqmom_invert, eqmom_invert_nearest, qmom_invert, EqmomState, MomentVector, NodeSet};
use crate::linalg;
use crate::closure::{closure_coeffs_eqmom, closure_coeffs_qmom};
use crate::polykit::{gaussian_moments_signed, half_gaussian_moments, Side};
use crate::stability::{macro_from_moments, MacroState};
use crate::{Error, Result};

/// EQMOM cells whose inversion fails are advected as a single Gaussian when
/// their standardized moments are this close to Gaussian ones.
pub const GAUSSIAN_FALLBACK_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Qmom,
    Eqmom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Closure {
    pub method: Method,
    pub n: usize,
}

impl Closure {
    pub fn qmom(n: usize) -> Self {
        Self { method: Method::Qmom, n }
    }

    pub fn eqmom(n: usize) -> Self {
        Self { method: Method::Eqmom, n }
    }

    /// Number of transported moments: `2N` (QMOM) or `2N+1` (EQMOM).
    pub fn num_moments(&self) -> usize {
        match self.method {
            Method::Qmom => 2 * self.n,
            Method::Eqmom => 2 * self.n + 1,
        }
    }
}

mod kappa_serde {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(k: &f64, s: S) -> Result<S::Ok, S::Error> {
        if k.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*k)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Text(t) if matches!(t.as_str(), "inf" | "infinity" | "Inf" | "Infinity") => {
                Ok(f64::INFINITY)
            }
            Raw::Text(t) => Err(de::Error::custom(format!("invalid kappa {t:?}"))),
        }
    }
}

fn default_x_lo() -> f64 {
    -1.0
}
fn default_x_hi() -> f64 {
    1.0
}
fn default_cells() -> usize {
    1000
}
fn default_cfl() -> f64 {
    0.45
}
fn default_t_end() -> f64 {
    0.1
}
fn default_one() -> f64 {
    1.0
}
fn default_theta() -> f64 {
    1.0 / 3.0
}
fn default_minus_one() -> f64 {
    -1.0
}
fn default_max_steps() -> usize {
    1_000_000
}

/// Riemann-problem configuration. Flat key-value layout so it maps directly
/// onto a TOML document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub method: Method,
    pub n: usize,
    #[serde(default = "default_x_lo")]
    pub x_lo: f64,
    #[serde(default = "default_x_hi")]
    pub x_hi: f64,
    #[serde(default = "default_cells")]
    pub cells: usize,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    /// `ν = κρ`; `inf` projects onto equilibrium every step.
    #[serde(default, with = "kappa_serde")]
    pub kappa: f64,
    #[serde(default = "default_one")]
    pub rho_left: f64,
    #[serde(default = "default_one")]
    pub u_left: f64,
    #[serde(default = "default_theta")]
    pub theta_left: f64,
    #[serde(default = "default_one")]
    pub rho_right: f64,
    #[serde(default = "default_minus_one")]
    pub u_right: f64,
    #[serde(default = "default_theta")]
    pub theta_right: f64,
    /// Snapshot times; `t_end` is always included.
    #[serde(default)]
    pub output_times: Vec<f64>,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
}

impl SimConfig {
    /// The standard shock-tube setup: `[−1, 1]`, 1000 cells, `ρ = 1`,
    /// `θ = 1/3`, `U = ±1`, `t = 0.1`, `κ = 0`.
    pub fn riemann_default(closure: Closure) -> Self {
        Self {
            method: closure.method,
            n: closure.n,
            x_lo: default_x_lo(),
            x_hi: default_x_hi(),
            cells: default_cells(),
            cfl: default_cfl(),
            t_end: default_t_end(),
            kappa: 0.0,
            rho_left: 1.0,
            u_left: 1.0,
            theta_left: default_theta(),
            rho_right: 1.0,
            u_right: -1.0,
            theta_right: default_theta(),
            output_times: Vec::new(),
            max_steps: default_max_steps(),
        }
    }

    pub fn closure(&self) -> Closure {
        Closure { method: self.method, n: self.n }
    }

    pub fn left(&self) -> Result<MacroState> {
        MacroState::new(self.rho_left, self.u_left, self.theta_left)
    }

    pub fn right(&self) -> Result<MacroState> {
        MacroState::new(self.rho_right, self.u_right, self.theta_right)
    }

    pub fn dx(&self) -> f64 {
        (self.x_hi - self.x_lo) / self.cells as f64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if self.cells < 2 {
            return bad(format!("cells must be at least 2, got {}", self.cells));
        }
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return bad(format!("cfl must lie in (0, 1), got {}", self.cfl));
        }
        if !(self.x_hi > self.x_lo) {
            return bad(format!("empty domain [{}, {}]", self.x_lo, self.x_hi));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return bad(format!("t_end must be finite and nonnegative, got {}", self.t_end));
        }
        if !(self.kappa >= 0.0) {
            return bad(format!("kappa must be nonnegative, got {}", self.kappa));
        }
        if let Some(t) = self.output_times.iter().find(|&&t| !(0.0..=self.t_end).contains(&t)) {
            return bad(format!("output time {t} outside [0, t_end]"));
        }
        self.left().map_err(|e| Error::Config(format!("left state: {e}")))?;
        self.right().map_err(|e| Error::Config(format!("right state: {e}")))?;
        Ok(())
    }

    fn snapshot_times(&self) -> Vec<f64> {
        let mut t = self.output_times.clone();
        t.push(self.t_end);
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }
}

/// Cell averages at one instant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub time: f64,
    pub x: Vec<f64>,
    pub dx: f64,
    pub moments: Vec<MomentVector>,
}

impl FieldState {
    pub fn macro_fields(&self) -> Result<Vec<MacroState>> {
        self.moments.iter().map(macro_from_moments).collect()
    }

    /// `Σ_cells M_j Δx`.
    pub fn totals(&self) -> Vec<f64> {
        let k = self.moments.first().map_or(0, |m| m.len());
        (0..k)
            .map(|j| self.moments.iter().map(|m| m[j]).sum::<f64>() * self.dx)
            .collect()
    }

    /// CSV header `x, M_0..M_K, rho, U, theta, q`.
    pub fn csv_header(&self) -> Vec<String> {
        let k = self.moments.first().map_or(0, |m| m.len());
        let mut h = vec!["x".to_string()];
        h.extend((0..k).map(|j| format!("M_{j}")));
        h.extend(["rho", "U", "theta", "q"].map(String::from));
        h
    }

    /// One row per cell matching [`FieldState::csv_header`]. With only
    /// `M_0, M_1` carried, `theta` and `q` are written as 0.
    pub fn csv_rows(&self) -> Result<Vec<Vec<f64>>> {
        let mac = self
            .moments
            .iter()
            .map(|m| {
                if m.len() >= 3 {
                    macro_from_moments(m)
                } else {
                    Ok(MacroState { rho: m[0], u: m[1] / m[0], theta: 0.0, q: 0.0 })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self
            .x
            .iter()
            .zip(&self.moments)
            .zip(&mac)
            .map(|((&x, m), s)| {
                let mut row = vec![x];
                row.extend_from_slice(m.as_slice());
                row.extend([s.rho, s.u, s.theta, s.q]);
                row
            })
            .collect())
    }
}

/// Split fluxes `(F⁻, F⁺)` with `F^±_j = Σ_i w_i ∫_{ξ ≷ 0} ξ^{j+1} δ_{σ²}(ξ; u_i)`,
/// `j = 0..=k_max`.
pub fn kinetic_flux_eqmom(state: &EqmomState, k_max: usize) -> Result<(MomentVector, MomentVector)> {
    if !(state.sigma2 > 0.0) {
        return kinetic_flux_qmom(&state.nodes, k_max);
    }
    let mut minus = vec![0.0; k_max + 1];
    let mut plus = vec![0.0; k_max + 1];
    for node in state.nodes.nodes() {
        let above = half_gaussian_moments(k_max + 1, node.abscissa, state.sigma2, 0.0, Side::Above)?;
        let below = half_gaussian_moments(k_max + 1, node.abscissa, state.sigma2, 0.0, Side::Below)?;
        for j in 0..=k_max {
            plus[j] += node.weight * above[j + 1];
            minus[j] += node.weight * below[j + 1];
        }
    }
    Ok((MomentVector(minus), MomentVector(plus)))
}

/// Split fluxes for delta nodes; a node exactly at zero goes to `F⁺`.
pub fn kinetic_flux_qmom(ns: &NodeSet, k_max: usize) -> Result<(MomentVector, MomentVector)> {
    let mut minus = vec![0.0; k_max + 1];
    let mut plus = vec![0.0; k_max + 1];
    for node in ns.nodes() {
        let side = if node.abscissa >= 0.0 { &mut plus } else { &mut minus };
        let mut p = node.weight * node.abscissa;
        for v in side.iter_mut() {
            *v += p;
            p *= node.abscissa;
        }
    }
    Ok((MomentVector(minus), MomentVector(plus)))
}

/// Exact BGK relaxation over `dt` at frozen `(ρ, U, θ)`:
/// `M ← E + e^{−ν dt}(M − E)`, `E_j = ρΔ_j(U, θ)`. `M_0..M_2` are copied.
pub fn collision_step(m: &MomentVector, nu: f64, dt: f64) -> Result<MomentVector> {
    if !(nu >= 0.0) || !(dt >= 0.0) {
        return Err(Error::Domain(format!("collision step needs nu, dt >= 0, got {nu}, {dt}")));
    }
    let mac = macro_from_moments(m)?;
    let nudt = nu * dt;
    if nudt == 0.0 {
        return Ok(m.clone());
    }
    let decay = if nudt.is_finite() { (-nudt).exp() } else { 0.0 };
    let e = mac.equilibrium_moments(m.len() - 1);
    let mut out = m.clone();
    for j in 3..m.len() {
        out.0[j] = e[j] + decay * (m[j] - e[j]);
    }
    Ok(out)
}

/// Moments `0..=k_max` of the `κ = 0` solution for Maxwellian data with a
/// jump at `x = 0`.
pub fn free_streaming_moments(
    x: f64,
    t: f64,
    left: &MacroState,
    right: &MacroState,
    k_max: usize,
) -> Result<MomentVector> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("free streaming needs t >= 0, got {t}")));
    }
    if t == 0.0 {
        let s = if x < 0.0 { left } else { right };
        return Ok(s.equilibrium_moments(k_max));
    }
    let c = x / t;
    let l = half_gaussian_moments(k_max, left.u, left.theta, c, Side::Above)?;
    let r = half_gaussian_moments(k_max, right.u, right.theta, c, Side::Below)?;
    Ok(MomentVector(
        l.iter()
            .zip(&r)
            .map(|(a, b)| left.rho * a + right.rho * b)
            .collect(),
    ))
}

pub fn free_streaming_reference(x: f64, t: f64, left: &MacroState, right: &MacroState) -> Result<MacroState> {
    macro_from_moments(&free_streaming_moments(x, t, left, right, 3)?)
}

/// Largest cell density divided by the reference density at that cell.
pub fn delta_shock_metric(field: &FieldState, left: &MacroState, right: &MacroState) -> Result<f64> {
    let (i, rho) = field
        .moments
        .iter()
        .enumerate()
        .map(|(i, m)| (i, m[0]))
        .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    let reference = free_streaming_reference(field.x[i], field.time, left, right)?;
    Ok(rho / reference.rho)
}

/// `Σ |ρ_i − ρ_ref(x_i)| Δx` at cell centres.
pub fn l1_density_error(field: &FieldState, left: &MacroState, right: &MacroState) -> Result<f64> {
    let mut err = 0.0;
    for (x, m) in field.x.iter().zip(&field.moments) {
        let r = free_streaming_reference(*x, field.time, left, right)?;
        err += (m[0] - r.rho).abs();
    }
    Ok(err * field.dx)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub steps: usize,
    pub wall_time_s: f64,
    pub min_dt: f64,
    pub max_dt: f64,
    /// Largest `max|λ| dt / Δx` actually taken.
    pub max_cfl: f64,
    /// Largest per-step imbalance of `Σ M_j Δx` after accounting for the
    /// boundary fluxes, relative to `Σ |M_j| Δx`.
    pub max_transport_defect: f64,
    /// Largest change of `M_0..M_2` in any cell across a collision step,
    /// relative to the cell's moment magnitude.
    pub max_collision_defect: f64,
    /// EQMOM cells advected as a single Gaussian after a failed inversion.
    pub gaussian_fallbacks: usize,
    /// EQMOM cells outside the EQMOM moment range, advected with the
    /// barrier state that matches all but the highest moment.
    pub nearest_states: usize,
    /// Largest standardized moment mismatch among those cells.
    pub max_nearest_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub snapshots: Vec<FieldState>,
    pub diagnostics: Diagnostics,
}

impl RunOutput {
    pub fn last(&self) -> &FieldState {
        self.snapshots.last().expect("run_riemann always records t_end")
    }
}

pub fn initial_field(cfg: &SimConfig) -> Result<FieldState> {
    cfg.validate()?;
    let (left, right) = (cfg.left()?, cfg.right()?);
    let k_max = cfg.closure().num_moments() - 1;
    let dx = cfg.dx();
    let x: Vec<f64> = (0..cfg.cells).map(|i| cfg.x_lo + (i as f64 + 0.5) * dx).collect();
    let moments = x
        .iter()
        .map(|&xi| if xi < 0.0 { left } else { right }.equilibrium_moments(k_max))
        .collect();
    Ok(FieldState { time: 0.0, x, dx, moments })
}

struct CellFlux {
    minus: Vec<f64>,
    plus: Vec<f64>,
    speed: f64,
    kind: Representation,
}

#[derive(Clone, Copy, PartialEq)]
enum Representation {
    Exact,
    Gaussian,
    Nearest(f64),
}

fn realizability(cell: usize, time: f64, m: &MomentVector, e: &Error) -> Error {
    Error::Realizability {
        cell,
        time,
        moments: m.0.clone(),
        reason: e.to_string(),
    }
}

/// Largest root of a real-rooted monic polynomial by Newton's method from
/// the Fujiwara bound; from above the iterates decrease monotonically and
/// never undershoot. `None` if the iteration does not settle.
fn largest_real_root(monic: &[f64]) -> Option<f64> {
    let d = monic.len() - 1;
    let bound = (0..d)
        .map(|j| {
            let c = monic[j].abs();
            let k = (d - j) as f64;
            if j == 0 { (c / 2.0).powf(1.0 / k) } else { c.powf(1.0 / k) }
        })
        .fold(0.0_f64, f64::max);
    let mut x = 2.0 * bound + f64::MIN_POSITIVE;
    for _ in 0..200 {
        let (mut p, mut dp) = (0.0, 0.0);
        for &c in monic.iter().rev() {
            dp = dp * x + p;
            p = p * x + c;
        }
        if !(dp > 0.0) {
            return None;
        }
        let step = p / dp;
        if step < 0.0 {
            return None;
        }
        x -= step;
        if step <= 1e-10 * (1.0 + x.abs()) {
            // stay on the safe side of the root
            return Some(x + step);
        }
    }
    None
}

fn max_root_modulus(a: &[f64]) -> Result<f64> {
    let monic: Vec<f64> = a.iter().map(|v| -v).chain([1.0]).collect();
    let mirrored: Vec<f64> = monic
        .iter()
        .enumerate()
        .map(|(j, c)| if (monic.len() - 1 - j) % 2 == 1 { -c } else { *c })
        .collect();
    if let (Some(hi), Some(lo)) = (largest_real_root(&monic), largest_real_root(&mirrored)) {
        return Ok(hi.abs().max(lo.abs()));
    }
    Ok(linalg::companion_eigenvalues(&monic)?
        .iter()
        .fold(0.0, |m, z| m.max(z.norm())))
}

fn gaussian_distance(m: &MomentVector, mac: &MacroState) -> f64 {
    let k = m.len() - 1;
    let sd = mac.theta.sqrt();
    let e = mac.equilibrium_moments(k);
    let scale = gaussian_moments_signed(k, mac.u.abs(), mac.theta);
    (3..=k)
        .map(|j| (m[j] - e[j]).abs() / (mac.rho * scale[j].abs().max(sd.powi(j as i32))))
        .fold(0.0, f64::max)
}

fn cell_flux(closure: Closure, m: &MomentVector, cell: usize, time: f64) -> Result<CellFlux> {
    let k = m.len() - 1;
    let err = |e: Error| realizability(cell, time, m, &e);
    match closure.method {
        Method::Qmom => {
            let inv = qmom_invert(m).map_err(err)?;
            let (minus, plus) = kinetic_flux_qmom(&inv.nodes, k)?;
            let speed = inv.nodes.abscissas().iter().fold(0.0_f64, |s, u| s.max(u.abs()));
            Ok(CellFlux { minus: minus.0, plus: plus.0, speed, kind: Representation::Exact })
        }
        Method::Eqmom => {
            let (state, kind) = match eqmom_invert(m) {
                Ok(inv) => (inv.state, Representation::Exact),
                Err(Error::InversionFailed { .. }) => {
                    let inv = eqmom_invert_nearest(m).map_err(err)?;
                    (inv.state, Representation::Nearest(inv.residual))
                }
                Err(e) => {
                    let mac = macro_from_moments(m).map_err(err)?;
                    if gaussian_distance(m, &mac) > GAUSSIAN_FALLBACK_TOL {
                        return Err(err(e));
                    }
                    let state = crate::stability::equilibrium_state(mac.rho, mac.u, mac.theta, closure.n)
                        .map_err(err)?;
                    (state, Representation::Gaussian)
                }
            };
            let (minus, plus) = kinetic_flux_eqmom(&state, k).map_err(err)?;
            let speed = if state.sigma2 > 0.0 {
                max_root_modulus(closure_coeffs_eqmom(&state).a()).map_err(err)?
            } else {
                max_root_modulus(closure_coeffs_qmom(&state.nodes).a()).map_err(err)?
            };
            Ok(CellFlux { minus: minus.0, plus: plus.0, speed, kind })
        }
    }
}

/// Positive density, and positive temperature when `M_2` is carried.
fn check_cell(m: &MomentVector) -> Result<()> {
    if m.len() >= 3 {
        return macro_from_moments(m).map(|_| ());
    }
    if !(m[0] > 0.0) {
        return Err(Error::Domain(format!("nonpositive density {}", m[0])));
    }
    Ok(())
}

/// Transport substep followed by per-cell relaxation, until `t_end`.
pub fn run_riemann(cfg: &SimConfig) -> Result<RunOutput> {
    let start = Instant::now();
    let mut field = initial_field(cfg)?;
    let closure = cfg.closure();
    let cells = cfg.cells;
    let dx = field.dx;
    let k = closure.num_moments();
    let targets = cfg.snapshot_times();
    let mut next_target = 0;
    let mut snapshots = Vec::new();
    let mut diag = Diagnostics {
        min_dt: f64::INFINITY,
        ..Diagnostics::default()
    };
    while next_target < targets.len() && targets[next_target] <= 0.0 {
        snapshots.push(field.clone());
        next_target += 1;
    }

    while next_target < targets.len() {
        if diag.steps >= cfg.max_steps {
            return Err(Error::Config(format!(
                "max_steps = {} reached at t = {}",
                cfg.max_steps, field.time
            )));
        }
        let fluxes = field
            .moments
            .iter()
            .enumerate()
            .map(|(i, m)| cell_flux(closure, m, i, field.time))
            .collect::<Result<Vec<_>>>()?;
        let speed = fluxes.iter().fold(0.0_f64, |s, f| s.max(f.speed));
        for f in &fluxes {
            match f.kind {
                Representation::Exact => {}
                Representation::Gaussian => diag.gaussian_fallbacks += 1,
                Representation::Nearest(r) => {
                    diag.nearest_states += 1;
                    diag.max_nearest_residual = diag.max_nearest_residual.max(r);
                }
            }
        }

        let target = targets[next_target];
        let mut dt = if speed > 0.0 { cfg.cfl * dx / speed } else { target - field.time };
        let hit = field.time + dt >= target;
        if hit {
            dt = target - field.time;
        }
        let lambda = dt / dx;

        // interface fluxes G_{i+1/2}, i = −1..cells−1, with copied ghost cells
        let g = |left: usize, right: usize, j: usize| fluxes[left].plus[j] + fluxes[right].minus[j];
        let before = field.totals();
        let mut next = field.moments.clone();
        for (i, m) in next.iter_mut().enumerate() {
            let l = i.saturating_sub(1);
            let r = (i + 1).min(cells - 1);
            for j in 0..k {
                m.0[j] -= lambda * (g(i, r, j) - g(l, i, j));
            }
        }
        field.moments = next;
        let after = field.totals();
        for j in 0..k {
            let boundary = g(cells - 1, cells - 1, j) - g(0, 0, j);
            let scale: f64 = field.moments.iter().map(|m| m[j].abs()).sum::<f64>() * dx;
            let defect = (after[j] - before[j] + dt * boundary).abs() / scale.max(f64::MIN_POSITIVE);
            diag.max_transport_defect = diag.max_transport_defect.max(defect);
        }

        // with k ≤ 3 every moment is a collision invariant
        if cfg.kappa > 0.0 && k > 3 {
            for (i, m) in field.moments.iter_mut().enumerate() {
                let mac = macro_from_moments(m).map_err(|e| realizability(i, field.time + dt, m, &e))?;
                let nu = cfg.kappa * mac.rho;
                let relaxed = collision_step(m, nu, dt).map_err(|e| realizability(i, field.time + dt, m, &e))?;
                let scale = m.max_abs();
                for j in 0..3 {
                    diag.max_collision_defect =
                        diag.max_collision_defect.max((relaxed[j] - m[j]).abs() / scale);
                }
                *m = relaxed;
            }
        }
        for (i, m) in field.moments.iter().enumerate() {
            check_cell(m).map_err(|e| realizability(i, field.time + dt, m, &e))?;
        }

        field.time = if hit { target } else { field.time + dt };
        diag.steps += 1;
        diag.min_dt = diag.min_dt.min(dt);
        diag.max_dt = diag.max_dt.max(dt);
        diag.max_cfl = diag.max_cfl.max(speed * lambda);
        while next_target < targets.len() && targets[next_target] <= field.time {
            snapshots.push(field.clone());
            next_target += 1;
        }
    }
    if diag.steps == 0 {
        diag.min_dt = 0.0;
    }
    diag.wall_time_s = start.elapsed().as_secs_f64();
    Ok(RunOutput { snapshots, diagnostics: diag })
}
