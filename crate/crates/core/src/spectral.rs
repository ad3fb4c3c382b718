//! Eigenstructure audits of the coefficient matrix `A(M)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::closure::{
    char_poly_eqmom, char_poly_qmom, closure_coeffs_eqmom, closure_coeffs_qmom, companion_matrix,
};
use crate::inversion::{EqmomState, NodeSet};
use crate::linalg;
use crate::polykit::{real_roots_default, Polynomial};
use crate::{Error, Result};

/// Relative singular-value threshold used for rank decisions.
pub const RANK_TOL: f64 = 1e-10;

/// A repeated eigenvalue with its algebraic and geometric multiplicity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Defect {
    pub eigenvalue: f64,
    pub algebraic: usize,
    pub geometric: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    /// Sorted, repeated according to algebraic multiplicity.
    pub eigenvalues: Vec<f64>,
    pub min_gap: f64,
    pub gap_tol: f64,
    pub all_real: bool,
    pub strictly_hyperbolic: bool,
    /// Eigenvalues with algebraic multiplicity above one.
    pub defects: Vec<Defect>,
}

impl SpectralReport {
    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `1e-9 · (1 + ρ(A))`.
pub fn default_gap_tol(spectral_radius: f64) -> f64 {
    1e-9 * (1.0 + spectral_radius)
}

/// Dimension of the null space of `A − λI`, counting singular values below
/// `tol · σ_max`.
pub fn geometric_multiplicity(a: &DMatrix<f64>, lambda: f64, tol: f64) -> usize {
    let n = a.nrows();
    let shifted = a - DMatrix::identity(n, n) * lambda;
    let s = linalg::singular_values(&shifted);
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return n;
    }
    s.iter().filter(|&&v| v <= tol * smax).count()
}

fn analyze(c: &Polynomial, a: &DMatrix<f64>) -> Result<SpectralReport> {
    let degree = c.degree().unwrap_or(0);
    let roots = real_roots_default(c)?;
    let mut eigenvalues = Vec::with_capacity(degree);
    let mut defects = Vec::new();
    for r in &roots {
        eigenvalues.extend(std::iter::repeat_n(r.value, r.multiplicity));
        if r.multiplicity > 1 {
            defects.push(Defect {
                eigenvalue: r.value,
                algebraic: r.multiplicity,
                geometric: geometric_multiplicity(a, r.value, RANK_TOL),
            });
        }
    }
    let all_real = eigenvalues.len() == degree;
    let min_gap = roots
        .windows(2)
        .map(|w| w[1].value - w[0].value)
        .fold(f64::INFINITY, f64::min);
    let min_gap = if defects.is_empty() { min_gap } else { 0.0 };
    let radius = eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let gap_tol = default_gap_tol(radius);
    Ok(SpectralReport {
        strictly_hyperbolic: all_real && min_gap > gap_tol,
        eigenvalues,
        min_gap,
        gap_tol,
        all_real,
        defects,
    })
}

/// Spectrum of the EQMOM coefficient matrix (size `2N+1`).
pub fn analyze_eqmom(state: &EqmomState) -> Result<SpectralReport> {
    if state.sigma2 <= 0.0 {
        return Err(Error::Domain(format!(
            "EQMOM spectral analysis needs sigma2 > 0, got {}",
            state.sigma2
        )));
    }
    let a = companion_matrix(&closure_coeffs_eqmom(state));
    analyze(&char_poly_eqmom(state), &a)
}

/// Spectrum of the QMOM coefficient matrix (size `2N`).
pub fn analyze_qmom(ns: &NodeSet) -> Result<SpectralReport> {
    let a = companion_matrix(&closure_coeffs_qmom(ns));
    analyze(&char_poly_qmom(ns), &a)
}
