//! BGK and Shakhov moment sources, the equilibrium manifold, and numerical
//! checks of the structural stability conditions (i)–(iii).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::closure::{closure_coeffs_eqmom, companion_matrix};
use crate::inversion::{EqmomState, MomentVector, NodeSet};
use crate::linalg;
use crate::polykit::gaussian_moments_signed;
use crate::spectral::analyze_eqmom;
use crate::{Error, Result};

/// `‖S(m)‖ ≤ EQUILIBRIUM_REL_TOL · ‖m‖` counts as equilibrium.
pub const EQUILIBRIUM_REL_TOL: f64 = 1e-10;
pub const CONDITION_I_TOL: f64 = 1e-10;
pub const CONDITION_II_TOL: f64 = 1e-8;
pub const OFF_BLOCK_TOL: f64 = 1e-8;
/// Search interval for the dissipation scale in condition (iii).
pub const EPSILON_RANGE: (f64, f64) = (1e-12, 1e6);

/// Density, bulk velocity, temperature and heat flux.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MacroState {
    pub rho: f64,
    #[serde(rename = "U")]
    pub u: f64,
    pub theta: f64,
    pub q: f64,
}

impl MacroState {
    pub fn new(rho: f64, u: f64, theta: f64) -> Result<Self> {
        if !(rho > 0.0 && theta > 0.0) || !u.is_finite() {
            return Err(Error::Domain(format!(
                "macro state needs rho > 0 and theta > 0, got rho={rho}, theta={theta}"
            )));
        }
        Ok(Self { rho, u, theta, q: 0.0 })
    }

    /// `ρ Δ_j(U, θ)` for `j = 0..=k_max`.
    pub fn equilibrium_moments(&self, k_max: usize) -> MomentVector {
        MomentVector(
            gaussian_moments_signed(k_max, self.u, self.theta)
                .into_iter()
                .map(|d| self.rho * d)
                .collect(),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SourceModel {
    Bgk,
    Shakhov { prandtl: f64 },
}

impl SourceModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SourceModel::Bgk => Ok(()),
            SourceModel::Shakhov { prandtl } if prandtl > 0.0 && prandtl <= 1.0 => Ok(()),
            SourceModel::Shakhov { prandtl } => Err(Error::Domain(format!(
                "Prandtl number must lie in (0, 1], got {prandtl}"
            ))),
        }
    }

    /// Shakhov with `Pr = 1` is BGK.
    pub fn normalized(&self) -> SourceModel {
        match *self {
            SourceModel::Shakhov { prandtl: 1.0 } => SourceModel::Bgk,
            other => other,
        }
    }
}

fn check_len(m: &MomentVector, min: usize) -> Result<()> {
    if m.len() < min {
        return Err(Error::Domain(format!(
            "need at least {min} moments, got {}",
            m.len()
        )));
    }
    Ok(())
}

/// `ρ = M_0`, `U = M_1/M_0`, `θ = M_2/M_0 − U²`, `q = (M_3 − ρ(U³+3Uθ))/2`
/// (`q = 0` when `M_3` is absent).
pub fn macro_from_moments(m: &MomentVector) -> Result<MacroState> {
    check_len(m, 3)?;
    let rho = m[0];
    if !(rho > 0.0) {
        return Err(Error::Domain(format!("nonpositive density {rho}")));
    }
    let u = m[1] / rho;
    let theta = m[2] / rho - u * u;
    if !(theta > 0.0) {
        return Err(Error::Domain(format!("nonpositive temperature {theta}")));
    }
    let q = if m.len() > 3 {
        0.5 * (m[3] - rho * (u * u * u + 3.0 * u * theta))
    } else {
        0.0
    };
    Ok(MacroState { rho, u, theta, q })
}

/// Canonical equilibrium representative: `N` equal weights `ρ/N` at `U`,
/// `σ² = θ`.
pub fn equilibrium_state(rho: f64, u: f64, theta: f64, n: usize) -> Result<EqmomState> {
    MacroState::new(rho, u, theta)?;
    if n == 0 {
        return Err(Error::Domain("N must be at least 1".into()));
    }
    let pairs = vec![(rho / n as f64, u); n];
    EqmomState::new(NodeSet::from_pairs(&pairs)?, theta)
}

/// `S_j = ρΔ_j(U,θ) − M_j`, with components 0..2 set to zero.
pub fn bgk_source(m: &MomentVector) -> Result<MomentVector> {
    let mac = macro_from_moments(m)?;
    let e = mac.equilibrium_moments(m.len() - 1);
    let mut s: Vec<f64> = e.0.iter().zip(m.as_slice()).map(|(e, m)| e - m).collect();
    s[..3].fill(0.0);
    Ok(MomentVector(s))
}

/// BGK source plus `binom(j,3)(1−Pr)(2q)Δ_{j−3}(U,θ)` for `j ≥ 3`.
pub fn shakhov_source(m: &MomentVector, prandtl: f64) -> Result<MomentVector> {
    SourceModel::Shakhov { prandtl }.validate()?;
    let mut s = bgk_source(m)?;
    if prandtl == 1.0 {
        return Ok(s);
    }
    let mac = macro_from_moments(m)?;
    let delta = gaussian_moments_signed(m.len(), mac.u, mac.theta);
    let c = (1.0 - prandtl) * 2.0 * mac.q;
    for j in 3..m.len() {
        s.0[j] += binom(j, 3) * c * delta[j - 3];
    }
    Ok(s)
}

pub fn source(m: &MomentVector, model: SourceModel) -> Result<MomentVector> {
    match model {
        SourceModel::Bgk => bgk_source(m),
        SourceModel::Shakhov { prandtl } => shakhov_source(m, prandtl),
    }
}

/// Whether `‖S_BGK(m)‖ ≤ 1e-10·‖m‖`. The Shakhov equilibrium set is the same.
pub fn is_equilibrium(m: &MomentVector) -> Result<bool> {
    let s = bgk_source(m)?;
    let ns = s.0.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nm = m.0.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(ns <= EQUILIBRIUM_REL_TOL * nm)
}

pub(crate) fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

/// `∂S/∂M`. BGK at any valid `m`; Shakhov only on the equilibrium manifold.
pub fn source_jacobian(m: &MomentVector, model: SourceModel) -> Result<DMatrix<f64>> {
    model.validate()?;
    let s_m = bgk_jacobian(m)?;
    match model.normalized() {
        SourceModel::Bgk => Ok(s_m),
        SourceModel::Shakhov { prandtl } => {
            if !is_equilibrium(m)? {
                return Err(Error::Unsupported(
                    "Shakhov source Jacobian is only available on the equilibrium manifold".into(),
                ));
            }
            let mac = macro_from_moments(m)?;
            let delta = gaussian_moments_signed(m.len(), mac.u, mac.theta);
            let n = m.len();
            let mut t = DMatrix::<f64>::identity(n, n);
            for i in 3..n {
                t[(i, 3)] -= (1.0 - prandtl) * binom(i, 3) * delta[i - 3];
            }
            Ok(t * s_m)
        }
    }
}

fn bgk_jacobian(m: &MomentVector) -> Result<DMatrix<f64>> {
    let mac = macro_from_moments(m)?;
    let (rho, u, th) = (mac.rho, mac.u, mac.theta);
    let n = m.len();
    let delta = gaussian_moments_signed(n, u, th);
    let d_rho = [1.0, 0.0, 0.0];
    let d_u = [-u / rho, 1.0 / rho, 0.0];
    let d_th = [(u * u - th) / rho, -2.0 * u / rho, 1.0 / rho];
    let mut s = DMatrix::zeros(n, n);
    for i in 3..n {
        let du = i as f64 * delta[i - 1];
        let dth = binom(i, 2) * delta[i - 2];
        for j in 0..3 {
            s[(i, j)] = d_rho[j] * delta[i] + rho * d_u[j] * du + rho * d_th[j] * dth;
        }
        s[(i, i)] = -1.0;
    }
    Ok(s)
}

/// The transformation `P` of condition (i) and its inverse.
///
/// BGK: `P = [I 0; −Ŝ I]`. Shakhov: `P⁻¹` gains `binom(i,3)Δ_{i−3}` in
/// column 3 for `i ≥ 4`.
pub fn transform_p(m: &MomentVector, model: SourceModel) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let s_m = bgk_jacobian(m)?;
    let n = m.len();
    let mut p_inv = DMatrix::identity(n, n);
    for i in 3..n {
        for j in 0..3 {
            p_inv[(i, j)] = s_m[(i, j)];
        }
    }
    if let SourceModel::Shakhov { .. } = model.normalized() {
        let mac = macro_from_moments(m)?;
        let delta = gaussian_moments_signed(n, mac.u, mac.theta);
        for i in 4..n {
            p_inv[(i, 3)] += binom(i, 3) * delta[i - 3];
        }
    }
    let p = unit_lower_inverse(&p_inv);
    Ok((p, p_inv))
}

/// Forward substitution for a unit lower triangular matrix.
fn unit_lower_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let mut inv = DMatrix::identity(n, n);
    for c in 0..n {
        for r in (c + 1)..n {
            let mut acc = 0.0;
            for k in c..r {
                acc += l[(r, k)] * inv[(k, c)];
            }
            inv[(r, c)] = -acc;
        }
    }
    inv
}

/// Diagonal of `D` in `P S_M P⁻¹ = D`.
pub fn target_diagonal(n: usize, model: SourceModel) -> Vec<f64> {
    let mut d = vec![-1.0; n];
    d[..3].fill(0.0);
    if let SourceModel::Shakhov { prandtl } = model.normalized() {
        if n > 3 {
            d[3] = -prandtl;
        }
    }
    d
}

/// Left eigenvectors of `A` as rows, each scaled to last entry 1, along
/// with the eigenvalues in the same (ascending) order.
pub fn left_eigenmatrix(state: &EqmomState) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let report = analyze_eqmom(state)?;
    if !report.strictly_hyperbolic {
        return Err(Error::Domain(
            "left eigenmatrix needs distinct real eigenvalues".into(),
        ));
    }
    let a = closure_coeffs_eqmom(state);
    let a = a.a();
    let n = a.len();
    let mut l = DMatrix::zeros(n, n);
    for (i, &lam) in report.eigenvalues.iter().enumerate() {
        // r_{j-1} = λ r_j − a_j, starting from r_{n-1} = 1
        l[(i, n - 1)] = 1.0;
        for j in (1..n).rev() {
            l[(i, j - 1)] = lam * l[(i, j)] - a[j];
        }
    }
    Ok((l, report.eigenvalues))
}

fn rows(a: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..a.nrows())
        .map(|r| a.row(r).iter().copied().collect())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionI {
    pub p: Vec<Vec<f64>>,
    pub diagonal: Vec<f64>,
    /// `‖P S_M − D P‖_F / (‖P‖_F ‖S_M‖_F)`.
    pub residual: f64,
    pub absolute_residual: f64,
    pub r: usize,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionII {
    pub a0: Vec<Vec<f64>>,
    /// `‖A₀A − AᵀA₀‖_F / ‖A₀A‖_F`.
    pub symmetry_residual: f64,
    pub min_eigenvalue: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionIII {
    pub k_norm: f64,
    /// Frobenius norm of the block of `K` coupling columns 0..3 with 3..
    pub off_block_norm: f64,
    pub relative_off_block: f64,
    /// Smallest eigenvalue of `−(K₂D₂ + D₂K₂)` on the dissipative block;
    /// `None` when that block is empty (`N = 1`).
    pub dissipation_margin: Option<f64>,
    pub epsilon: Option<f64>,
    /// Largest eigenvalue of `A₀S_M + S_MᵀA₀ + ε²Pᵀdiag(0,I_r)P` at `epsilon`.
    pub max_eigenvalue: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub model: SourceModel,
    pub n: usize,
    pub state: MacroState,
    pub cond_i: ConditionI,
    pub cond_ii: ConditionII,
    pub cond_iii: ConditionIII,
    pub pass: bool,
}

fn require_equilibrium(m: &MomentVector) -> Result<MacroState> {
    if m.len().is_multiple_of(2) || m.len() < 3 {
        return Err(Error::Domain(format!(
            "EQMOM moment vectors have odd length 2N+1 >= 3, got {}",
            m.len()
        )));
    }
    if !is_equilibrium(m)? {
        return Err(Error::Domain("moments are not on the equilibrium manifold".into()));
    }
    macro_from_moments(m)
}

pub fn check_condition_i(m: &MomentVector, model: SourceModel) -> Result<ConditionI> {
    model.validate()?;
    require_equilibrium(m)?;
    let s_m = source_jacobian(m, model)?;
    let (p, _) = transform_p(m, model)?;
    let diagonal = target_diagonal(m.len(), model);
    let d = DMatrix::from_diagonal(&linalg::vector(&diagonal));
    let diff = &p * &s_m - &d * &p;
    let absolute_residual = diff.norm();
    let scale = p.norm() * s_m.norm();
    let residual = if scale > 0.0 { absolute_residual / scale } else { absolute_residual };
    Ok(ConditionI {
        p: rows(&p),
        diagonal,
        residual,
        absolute_residual,
        r: m.len() - 3,
        pass: residual < CONDITION_I_TOL,
    })
}

/// Symmetrizer `A₀ = LᵀΛL`; `lambda = None` means `Λ = I`.
pub fn symmetrizer(state: &EqmomState, lambda: Option<&[f64]>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (l, _) = left_eigenmatrix(state)?;
    let n = l.nrows();
    let scaled = match lambda {
        None => l.clone(),
        Some(lam) => {
            if lam.len() != n || lam.iter().any(|&v| !(v > 0.0)) {
                return Err(Error::Domain(format!(
                    "Lambda must have {n} positive entries"
                )));
            }
            let mut s = l.clone();
            for (i, &v) in lam.iter().enumerate() {
                s.row_mut(i).scale_mut(v.sqrt());
            }
            s
        }
    };
    Ok((scaled.transpose() * &scaled, scaled))
}

pub fn check_condition_ii(state: &EqmomState, lambda: Option<&[f64]>) -> Result<ConditionII> {
    let (a0, scaled_l) = symmetrizer(state, lambda)?;
    let a = companion_matrix(&closure_coeffs_eqmom(state));
    let a0a = &a0 * &a;
    let symmetry_residual = (&a0a - a0a.transpose()).norm() / a0a.norm();
    // eigenvalues of LᵀL are squared singular values of L
    let s = linalg::singular_values(&scaled_l);
    let smin = s.last().copied().unwrap_or(0.0);
    let min_eigenvalue = smin * smin;
    Ok(ConditionII {
        a0: rows(&a0),
        symmetry_residual,
        min_eigenvalue,
        pass: symmetry_residual < CONDITION_II_TOL && min_eigenvalue > 0.0,
    })
}

pub fn check_condition_iii(
    m: &MomentVector,
    model: SourceModel,
    lambda: Option<&[f64]>,
) -> Result<ConditionIII> {
    model.validate()?;
    let mac = require_equilibrium(m)?;
    let n = (m.len() - 1) / 2;
    let state = equilibrium_state(mac.rho, mac.u, mac.theta, n)?;
    let (a0, scaled_l) = symmetrizer(&state, lambda)?;
    let s_m = source_jacobian(m, model)?;
    let (p, p_inv) = transform_p(m, model)?;
    let dim = m.len();
    let r = dim - 3;

    let lp = &scaled_l * &p_inv;
    let k = lp.transpose() * &lp;
    let k_norm = k.norm();
    let off_block_norm = k.view((0, 3), (3, r)).norm();
    let relative_off_block = off_block_norm / k_norm;

    let dissipation_margin = (r > 0).then(|| {
        let d2 = DMatrix::from_diagonal(&linalg::vector(&target_diagonal(dim, model)[3..]));
        let k2 = k.view((3, 3), (r, r)).into_owned();
        let neg = -(&k2 * &d2 + &d2 * &k2);
        -linalg::max_symmetric_eigenvalue(&(-neg))
    });

    let base = &a0 * &s_m + s_m.transpose() * &a0;
    let mut e = DMatrix::zeros(dim, dim);
    for i in 3..dim {
        e[(i, i)] = 1.0;
    }
    let pep = p.transpose() * e * &p;
    let tolerance = 1e-9 * base.norm();
    let max_eig = |eps: f64| linalg::max_symmetric_eigenvalue(&(&base + &pep * (eps * eps)));

    let (lo, hi) = EPSILON_RANGE;
    let (epsilon, max_eigenvalue) = if max_eig(lo) > tolerance {
        (None, None)
    } else if max_eig(hi) <= tolerance {
        (Some(hi), Some(max_eig(hi)))
    } else {
        // bisection in log ε for the largest admissible ε
        let (mut a, mut b) = (lo.ln(), hi.ln());
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if max_eig(mid.exp()) <= tolerance {
                a = mid;
            } else {
                b = mid;
            }
            if b - a < 1e-6 {
                break;
            }
        }
        let eps = 0.5 * a.exp();
        (Some(eps), Some(max_eig(eps)))
    };

    Ok(ConditionIII {
        k_norm,
        off_block_norm,
        relative_off_block,
        dissipation_margin,
        epsilon,
        max_eigenvalue,
        tolerance,
        pass: relative_off_block < OFF_BLOCK_TOL && epsilon.is_some(),
    })
}

/// All three conditions at the equilibrium `(ρ, U, θ)` with `N` nodes.
pub fn stability_report(
    rho: f64,
    u: f64,
    theta: f64,
    n: usize,
    model: SourceModel,
    lambda: Option<&[f64]>,
) -> Result<StabilityReport> {
    model.validate()?;
    let model = model.normalized();
    let state = equilibrium_state(rho, u, theta, n)?;
    let m = MacroState::new(rho, u, theta)?.equilibrium_moments(2 * n);
    let cond_i = check_condition_i(&m, model)?;
    let cond_ii = check_condition_ii(&state, lambda)?;
    let cond_iii = check_condition_iii(&m, model, lambda)?;
    let pass = cond_i.pass && cond_ii.pass && cond_iii.pass;
    Ok(StabilityReport {
        model,
        n,
        state: MacroState { rho, u, theta, q: 0.0 },
        cond_i,
        cond_ii,
        cond_iii,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inversion::eqmom_forward;

    fn mv(v: &[f64]) -> MomentVector {
        MomentVector(v.to_vec())
    }

    #[test]
    fn macro_examples() {
        let s = macro_from_moments(&mv(&[1.0, 0.0, 1.0, 0.0])).unwrap();
        assert_eq!((s.rho, s.u, s.theta, s.q), (1.0, 0.0, 1.0, 0.0));
        let s = macro_from_moments(&mv(&[1.0, 1.0, 4.0 / 3.0])).unwrap();
        assert_eq!(s.u, 1.0);
        assert!((s.theta - 1.0 / 3.0).abs() < 1e-15);
        let s = macro_from_moments(&mv(&[2.0, 0.0, 2.0 * 0.7, 0.0])).unwrap();
        assert_eq!(s.rho, 2.0);
        assert!((s.theta - 0.7).abs() < 1e-15);
        assert!(macro_from_moments(&mv(&[0.0, 0.0, 1.0])).is_err());
        assert!(macro_from_moments(&mv(&[1.0, 1.0, 1.0])).is_err());
    }

    #[test]
    fn equilibrium_state_examples() {
        let s = equilibrium_state(1.0, 0.0, 1.0 / 3.0, 2).unwrap();
        assert_eq!(s.nodes.weights(), vec![0.5, 0.5]);
        assert_eq!(s.nodes.abscissas(), vec![0.0, 0.0]);
        let m = eqmom_forward(&equilibrium_state(1.0, 0.0, 1.0, 3).unwrap(), 6);
        for (g, w) in m.as_slice().iter().zip([1.0, 0.0, 1.0, 0.0, 3.0, 0.0, 15.0]) {
            assert!((g - w).abs() < 1e-13);
        }
        assert!(bgk_source(&m).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn source_examples() {
        let m = mv(&[1.0, 0.0, 1.0, 1.0, 3.0]);
        let s = bgk_source(&m).unwrap();
        assert_eq!(&s.as_slice()[..3], &[0.0, 0.0, 0.0]);
        assert!((s[3] + 1.0).abs() < 1e-15);
        assert_eq!(shakhov_source(&m, 1.0).unwrap(), s);
        // q = 1/2, so the j = 3 correction is (1−Pr)·2q
        let pr = 0.4;
        let sh = shakhov_source(&m, pr).unwrap();
        assert!((sh[3] - s[3] - (1.0 - pr)).abs() < 1e-15);
        let eq = MacroState::new(1.2, 0.3, 0.8).unwrap().equilibrium_moments(6);
        assert!(shakhov_source(&eq, 2.0 / 3.0).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn jacobian_structure_and_fd() {
        let m = mv(&[1.1, 0.3, 0.9, 0.5, 1.7]);
        let j = source_jacobian(&m, SourceModel::Bgk).unwrap();
        for c in 0..5 {
            for r in 0..3 {
                assert_eq!(j[(r, c)], 0.0);
            }
        }
        assert_eq!(j[(3, 3)], -1.0);
        assert_eq!(j[(4, 4)], -1.0);
        assert_eq!(j[(3, 4)], 0.0);
        let h = 1e-6;
        for c in 0..5 {
            let mut mp = m.clone();
            let mut mm = m.clone();
            mp.0[c] += h;
            mm.0[c] -= h;
            let sp = bgk_source(&mp).unwrap();
            let sm = bgk_source(&mm).unwrap();
            for r in 0..5 {
                let fd = (sp[r] - sm[r]) / (2.0 * h);
                assert!((fd - j[(r, c)]).abs() < 1e-6, "({r},{c}) {fd} vs {}", j[(r, c)]);
            }
        }
    }

    #[test]
    fn shakhov_jacobian_only_at_equilibrium() {
        let m = mv(&[1.1, 0.3, 0.9, 0.5, 1.7]);
        let model = SourceModel::Shakhov { prandtl: 0.5 };
        assert!(matches!(source_jacobian(&m, model), Err(Error::Unsupported(_))));
        let eq = MacroState::new(1.0, 0.2, 0.6).unwrap().equilibrium_moments(6);
        let j = source_jacobian(&eq, model).unwrap();
        // finite differences of the Shakhov source at equilibrium
        let h = 1e-6;
        for c in 0..7 {
            let mut mp = eq.clone();
            let mut mm = eq.clone();
            mp.0[c] += h;
            mm.0[c] -= h;
            let sp = shakhov_source(&mp, 0.5).unwrap();
            let sm = shakhov_source(&mm, 0.5).unwrap();
            for r in 0..7 {
                let fd = (sp[r] - sm[r]) / (2.0 * h);
                assert!((fd - j[(r, c)]).abs() < 1e-5 * (1.0 + j[(r, c)].abs()));
            }
        }
    }

    #[test]
    fn left_eigenvectors() {
        let st = EqmomState::from_pairs(&[(1.0, 0.0)], 1.0).unwrap();
        let (l, lam) = left_eigenmatrix(&st).unwrap();
        let a = companion_matrix(&closure_coeffs_eqmom(&st));
        for (i, &li) in lam.iter().enumerate() {
            let row = l.row(i);
            let lhs = row * &a;
            let rhs = row * li;
            assert!((lhs - rhs).norm() < 1e-9);
            assert_eq!(l[(i, 2)], 1.0);
        }
        // direct construction with a = (0, 3, 0): r = (λ² − 3, λ, 1)
        for (i, &x) in lam.iter().enumerate() {
            assert!((l[(i, 0)] - (x * x - 3.0)).abs() < 1e-12);
            assert!((l[(i, 1)] - x).abs() < 1e-12);
        }
        assert!(l.determinant().abs() > 0.0);
    }

    #[test]
    fn condition_ii_n1_by_hand() {
        // rows (λ²−3, λ, 1) at λ ∈ {−√3, 0, √3}: (0,−√3,1), (−3,0,1), (0,√3,1)
        let st = EqmomState::from_pairs(&[(1.0, 0.0)], 1.0).unwrap();
        let c = check_condition_ii(&st, None).unwrap();
        let want = [[9.0, 0.0, -3.0], [0.0, 6.0, 0.0], [-3.0, 0.0, 3.0]];
        for (got, want) in c.a0.iter().zip(want) {
            for (g, w) in got.iter().zip(want) {
                assert!((g - w).abs() < 1e-12);
            }
        }
        assert!(c.pass);
    }

    #[test]
    fn conditions_at_equilibrium() {
        let m = MacroState::new(1.0, 0.0, 1.0).unwrap().equilibrium_moments(4);
        let c = check_condition_i(&m, SourceModel::Bgk).unwrap();
        assert!(c.residual < 1e-10);
        let c = check_condition_i(&m, SourceModel::Shakhov { prandtl: 2.0 / 3.0 }).unwrap();
        assert!(c.residual < 1e-10);
        assert!((c.diagonal[3] + 2.0 / 3.0).abs() < 1e-15);
        let c = check_condition_iii(&m, SourceModel::Bgk, None).unwrap();
        assert!(c.relative_off_block < 1e-8);
        assert!(c.epsilon.is_some());
        let c = check_condition_iii(&m, SourceModel::Shakhov { prandtl: 2.0 / 3.0 }, None).unwrap();
        assert!(c.relative_off_block < 1e-8);
    }

    #[test]
    fn single_node_has_no_dissipative_block() {
        let r = stability_report(1.0, 0.5, 0.7, 1, SourceModel::Bgk, None).unwrap();
        assert_eq!(r.cond_i.r, 0);
        assert_eq!(r.cond_iii.dissipation_margin, None);
        assert!(r.pass);
    }

    #[test]
    fn shakhov_unit_prandtl_matches_bgk() {
        let a = stability_report(1.0, 0.4, 0.7, 2, SourceModel::Bgk, None).unwrap();
        let b = stability_report(1.0, 0.4, 0.7, 2, SourceModel::Shakhov { prandtl: 1.0 }, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn off_equilibrium_rejected() {
        let m = mv(&[1.0, 0.0, 1.0, 0.5, 3.0]);
        assert!(check_condition_i(&m, SourceModel::Bgk).is_err());
    }
}
