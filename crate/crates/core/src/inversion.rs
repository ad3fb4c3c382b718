//! Forward moment maps and their inverses.
//!
//! QMOM represents a distribution by `N` weighted Dirac masses and is fixed by
//! the `2N` moments `M_0..M_{2N−1}`. Gaussian EQMOM replaces each mass by a
//! Gaussian with a shared variance `σ²` and is fixed by `M_0..M_{2N}`.
//!
//! Both inversions work on standardized moments (mean 0, variance 1) and map
//! the result back, which keeps the Hankel systems well scaled.

use std::ops::Index;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::polykit::gaussian_moments_signed;
use crate::{Error, Result};

/// One quadrature node: a positive weight at an abscissa.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub weight: f64,
    pub abscissa: f64,
}

/// `N` weight/abscissa pairs, kept sorted by abscissa.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeSet {
    nodes: Vec<Node>,
}

impl NodeSet {
    pub fn new(mut nodes: Vec<Node>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Domain("a node set needs at least one node".into()));
        }
        for n in &nodes {
            if !(n.weight > 0.0) || !n.weight.is_finite() || !n.abscissa.is_finite() {
                return Err(Error::Domain(format!(
                    "node weights must be positive and finite, got ({}, {})",
                    n.weight, n.abscissa
                )));
            }
        }
        nodes.sort_by(|a, b| a.abscissa.total_cmp(&b.abscissa));
        Ok(Self { nodes })
    }

    /// From `(weight, abscissa)` pairs.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            pairs
                .iter()
                .map(|&(weight, abscissa)| Node { weight, abscissa })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn weights(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.weight).collect()
    }

    pub fn abscissas(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.abscissa).collect()
    }

    pub fn total_weight(&self) -> f64 {
        self.nodes.iter().map(|n| n.weight).sum()
    }

    /// Smallest gap between consecutive abscissas (infinite for one node).
    pub fn min_separation(&self) -> f64 {
        self.nodes
            .windows(2)
            .map(|w| w[1].abscissa - w[0].abscissa)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn all_coincident(&self) -> bool {
        let first = self.nodes[0].abscissa;
        self.nodes.iter().all(|n| n.abscissa == first)
    }
}

/// Velocity moments `M_0..M_K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MomentVector(pub Vec<f64>);

impl MomentVector {
    pub fn new(m: Vec<f64>) -> Self {
        Self(m)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Largest moment index `K`.
    pub fn order(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Index<usize> for MomentVector {
    type Output = f64;
    fn index(&self, j: usize) -> &f64 {
        &self.0[j]
    }
}

impl From<Vec<f64>> for MomentVector {
    fn from(m: Vec<f64>) -> Self {
        Self(m)
    }
}

/// Where an EQMOM state sits relative to the admissible parameter set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateDomain {
    /// Distinct abscissas, `σ² > 0`.
    Interior,
    /// All abscissas equal, `σ² > 0`.
    EquilibriumBoundary,
    /// `σ² = 0`: the QMOM limit.
    ZeroVariance,
    /// Some but not all abscissas coincide.
    PartiallyCoincident,
}

/// Gaussian EQMOM parameters `(w_1, u_1, …, w_N, u_N, σ²)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EqmomState {
    pub nodes: NodeSet,
    pub sigma2: f64,
}

impl EqmomState {
    pub fn new(nodes: NodeSet, sigma2: f64) -> Result<Self> {
        if !(sigma2 >= 0.0) || !sigma2.is_finite() {
            return Err(Error::Domain(format!("sigma2 must be >= 0, got {sigma2}")));
        }
        Ok(Self { nodes, sigma2 })
    }

    /// From `(weight, abscissa)` pairs and a shared variance.
    pub fn from_pairs(pairs: &[(f64, f64)], sigma2: f64) -> Result<Self> {
        Self::new(NodeSet::from_pairs(pairs)?, sigma2)
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn domain(&self) -> StateDomain {
        if self.sigma2 == 0.0 {
            StateDomain::ZeroVariance
        } else if self.nodes.len() > 1 && self.nodes.all_coincident() {
            StateDomain::EquilibriumBoundary
        } else if self.nodes.min_separation() > 0.0 {
            StateDomain::Interior
        } else {
            StateDomain::PartiallyCoincident
        }
    }
}

/// `M_j = Σ w_i u_i^j` for `j = 0..=k_max`.
pub fn qmom_forward(ns: &NodeSet, k_max: usize) -> MomentVector {
    let mut m = vec![0.0; k_max + 1];
    for n in ns.nodes() {
        let mut p = n.weight;
        for slot in m.iter_mut() {
            *slot += p;
            p *= n.abscissa;
        }
    }
    MomentVector(m)
}

/// `M_j = Σ w_i Δ_j(u_i, σ²)` for `j = 0..=k_max`.
pub fn eqmom_forward(state: &EqmomState, k_max: usize) -> MomentVector {
    let mut m = vec![0.0; k_max + 1];
    for n in state.nodes.nodes() {
        let d = gaussian_moments_signed(k_max, n.abscissa, state.sigma2);
        for (slot, dj) in m.iter_mut().zip(d) {
            *slot += n.weight * dj;
        }
    }
    MomentVector(m)
}

/// `Σ_k j!/(k!(j−2k)!) (v/2)^k M_{j−2k}` for every `j`: convolution with a
/// centred Gaussian of (signed) variance `v`.
pub(crate) fn shift_variance(m: &[f64], v: f64) -> Vec<f64> {
    let half = 0.5 * v;
    (0..m.len())
        .map(|j| {
            let mut coef = 1.0;
            let mut acc = m[j];
            let mut k = 1;
            while 2 * k <= j {
                let a = (j - 2 * k + 2) as f64;
                let b = (j - 2 * k + 1) as f64;
                coef *= half * a * b / k as f64;
                acc += coef * m[j - 2 * k];
                k += 1;
            }
            acc
        })
        .collect()
}

/// `M*_j = Σ w_i u_i^j` recovered from Gaussian-mixture moments with common
/// variance `σ²`.
pub fn deconvolve(m: &MomentVector, sigma2: f64) -> Result<MomentVector> {
    if m.is_empty() {
        return Err(Error::Domain("deconvolve needs at least M_0".into()));
    }
    if !(sigma2 >= 0.0) || !sigma2.is_finite() {
        return Err(Error::Domain(format!("sigma2 must be >= 0, got {sigma2}")));
    }
    Ok(MomentVector(shift_variance(m.as_slice(), -sigma2)))
}

/// Squared Cholesky pivots `d_0..d_{levels−1}` of the Hankel matrix
/// `H_{ij} = m_{i+j}`, stopping at the first non-positive pivot.
///
/// Level `k` needs `m_0..m_{2k}`. The leading minor of order `k+1` equals
/// `d_0 ⋯ d_k`, so strict realizability up to order `n` means the first
/// `n` pivots are positive.
pub fn hankel_pivots(m: &[f64], levels: usize) -> Vec<f64> {
    let mut r = vec![vec![0.0; levels]; levels];
    let mut pivots = Vec::with_capacity(levels);
    for i in 0..levels {
        let d = m[2 * i] - (0..i).map(|k| r[k][i] * r[k][i]).sum::<f64>();
        pivots.push(d);
        if !(d > 0.0) {
            break;
        }
        r[i][i] = d.sqrt();
        for j in i + 1..levels {
            let s = m[i + j] - (0..i).map(|k| r[k][i] * r[k][j]).sum::<f64>();
            r[i][j] = s / r[i][i];
        }
    }
    pivots
}

/// Standardized moments `E[((ξ − μ)/s)^k]` with `μ = M_1/M_0`, `s² = θ`.
fn standardize(m: &[f64], mean: f64, scale: f64) -> Vec<f64> {
    let m0 = m[0];
    let raw: Vec<f64> = m.iter().map(|v| v / m0).collect();
    let mut out = Vec::with_capacity(m.len());
    let mut s_pow = 1.0;
    for k in 0..m.len() {
        // Σ_i C(k,i) raw_i (−μ)^{k−i}
        let mut acc = 0.0;
        let mut binom = 1.0;
        for (i, r) in raw.iter().enumerate().take(k + 1) {
            acc += binom * r * (-mean).powi((k - i) as i32);
            binom = binom * (k - i) as f64 / (i + 1) as f64;
        }
        out.push(acc / s_pow);
        s_pow *= scale;
    }
    out
}

/// Mean and variance of the distribution behind `m`, validated.
fn mean_and_variance(m: &[f64]) -> Result<(f64, f64)> {
    if !(m[0] > 0.0) {
        return Err(Error::NotRealizable { order: 1, pivot: m[0] });
    }
    let mean = m[1] / m[0];
    let var = m[2] / m[0] - mean * mean;
    if !(var > 0.0) {
        return Err(Error::NotRealizable { order: 2, pivot: var });
    }
    Ok((mean, var))
}

/// Output of [`qmom_invert`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QmomInversion {
    pub nodes: NodeSet,
    /// Nodes closer than `1e-6` standard deviations, or a Hankel pivot below
    /// `1e-12` of the variance.
    pub near_degenerate: bool,
}

/// Recurrence coefficients `(α_0..α_{n−1}, β_1..β_{n−1})` of the monic
/// orthogonal polynomials of standardized moments `z_0..z_{2n−1}`, built from
/// the Cholesky factor of the Hankel matrix.
fn jacobi_from_moments(z: &[f64], n: usize) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    // R is n × (n+1); entries with i + j ≤ 2n − 1 only.
    let mut r = vec![vec![0.0; n + 1]; n];
    let mut min_pivot = f64::INFINITY;
    for i in 0..n {
        let d = z[2 * i] - (0..i).map(|k| r[k][i] * r[k][i]).sum::<f64>();
        if !(d > 0.0) {
            return Err(Error::NotRealizable { order: i + 1, pivot: d });
        }
        min_pivot = min_pivot.min(d);
        r[i][i] = d.sqrt();
        for j in i + 1..=n {
            let s = z[i + j] - (0..i).map(|k| r[k][i] * r[k][j]).sum::<f64>();
            r[i][j] = s / r[i][i];
        }
    }
    let mut alpha = Vec::with_capacity(n);
    let mut off = Vec::with_capacity(n.saturating_sub(1));
    for j in 0..n {
        let prev = if j == 0 { 0.0 } else { r[j - 1][j] / r[j - 1][j - 1] };
        alpha.push(r[j][j + 1] / r[j][j] - prev);
        if j + 1 < n {
            off.push(r[j + 1][j + 1] / r[j][j]);
        }
    }
    Ok((alpha, off, min_pivot))
}

/// Gauss quadrature of standardized moments: `(weights, abscissas)` with
/// weights summing to one.
fn gauss_from_standardized(z: &[f64], n: usize) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    if n == 1 {
        return Ok((vec![1.0], vec![z[1]], 1.0));
    }
    let (alpha, off, min_pivot) = jacobi_from_moments(z, n)?;
    let (x, vecs) = linalg::symmetric_tridiagonal_eigen(&alpha, &off);
    let w = (0..n).map(|i| vecs[(0, i)] * vecs[(0, i)]).collect();
    Ok((w, x, min_pivot))
}

/// Recovers `N` nodes from `M_0..M_{2N−1}` (Golub–Welsch on the Jacobi matrix).
pub fn qmom_invert(m: &MomentVector) -> Result<QmomInversion> {
    let len = m.len();
    if len == 0 || !len.is_multiple_of(2) {
        return Err(Error::Domain(format!(
            "QMOM inversion needs an even number of moments, got {len}"
        )));
    }
    let n = len / 2;
    let ms = m.as_slice();
    if !(ms[0] > 0.0) {
        return Err(Error::NotRealizable { order: 1, pivot: ms[0] });
    }
    if n == 1 {
        let nodes = NodeSet::from_pairs(&[(ms[0], ms[1] / ms[0])])?;
        return Ok(QmomInversion {
            nodes,
            near_degenerate: false,
        });
    }
    let (mean, var) = mean_and_variance(ms)?;
    let scale = var.sqrt();
    let z = standardize(ms, mean, scale);
    let (w, x, min_pivot) = gauss_from_standardized(&z, n)?;
    let nodes: Vec<Node> = w
        .iter()
        .zip(&x)
        .map(|(&wi, &xi)| Node {
            weight: ms[0] * wi,
            abscissa: mean + scale * xi,
        })
        .collect();
    let min_gap = x.windows(2).map(|p| p[1] - p[0]).fold(f64::INFINITY, f64::min);
    let nodes = NodeSet::new(nodes).map_err(|_| Error::NotRealizable {
        order: n,
        pivot: min_pivot,
    })?;
    Ok(QmomInversion {
        nodes,
        near_degenerate: min_gap < 1e-6 || min_pivot < 1e-12,
    })
}

/// Output of [`eqmom_invert`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EqmomInversion {
    pub state: EqmomState,
    /// Largest forward-map mismatch in standardized moments.
    pub residual: f64,
    /// The input was recognised as a Gaussian (equilibrium) moment vector.
    pub on_boundary: bool,
}

/// Relative tolerance for recognising equilibrium (single-Gaussian) moments.
pub const EQUILIBRIUM_TOL: f64 = 1e-10;
/// Largest accepted standardized residual of the EQMOM round trip.
pub const EQMOM_RESIDUAL_TOL: f64 = 1e-9;

/// `J(s)`: last Hankel pivot of the standardized moments deconvolved by `s`,
/// or `None` when the lower-order pivots are not all positive (past the
/// realizability barrier).
fn closure_gap(z: &[f64], n: usize, s: f64) -> Option<f64> {
    let d = shift_variance(z, -s);
    let pivots = hankel_pivots(&d, n + 1);
    if pivots.len() < n + 1 || pivots[..n].iter().any(|p| !(*p > 0.0)) {
        return None;
    }
    Some(pivots[n])
}

/// Brent's method on a bracket with `f(a)·f(b) ≤ 0`.
fn brent<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, mut fa: f64, mut fb: f64, tol: f64) -> f64 {
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return b;
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return b;
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
    }
    b
}

fn standardized_residual(z: &[f64], w: &[f64], x: &[f64], s: f64) -> f64 {
    let k = z.len() - 1;
    let mut fwd = vec![0.0; k + 1];
    for (wi, xi) in w.iter().zip(x) {
        for (slot, d) in fwd.iter_mut().zip(gaussian_moments_signed(k, *xi, s)) {
            *slot += wi * d;
        }
    }
    fwd.iter()
        .zip(z)
        .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
        .fold(0.0, f64::max)
}

/// Newton refinement of `(w, x, s)` against standardized moments `z`; each
/// step is kept only if it lowers the residual and stays admissible.
fn newton_polish(z: &[f64], w: &mut [f64], x: &mut [f64], s: &mut f64) {
    newton_polish_bounded(z, w, x, s, 1.0)
}

fn newton_polish_bounded(z: &[f64], w: &mut [f64], x: &mut [f64], s: &mut f64, s_max: f64) {
    let n = w.len();
    let k = 2 * n;
    let mut best = standardized_residual(z, w, x, *s);
    for _ in 0..3 {
        if best <= 4.0 * f64::EPSILON {
            break;
        }
        let pairs: Vec<(f64, f64)> = w.iter().copied().zip(x.iter().copied()).collect();
        let state = match EqmomState::from_pairs(&pairs, *s) {
            Ok(st) => st,
            Err(_) => break,
        };
        let fwd = eqmom_forward(&state, k);
        let jac = forward_jacobian_ordered(w, x, *s, &fwd);
        let rhs = linalg::vector(&z.iter().zip(fwd.as_slice()).map(|(a, b)| a - b).collect::<Vec<_>>());
        let step = match jac.lu().solve(&rhs) {
            Some(st) => st,
            None => break,
        };
        let mut w2 = w.to_vec();
        let mut x2 = x.to_vec();
        for i in 0..n {
            w2[i] += step[2 * i];
            x2[i] += step[2 * i + 1];
        }
        let s2 = *s + step[2 * n];
        if w2.iter().any(|v| !(*v > 0.0)) || !(s2 >= 0.0) || s2 > s_max || step.iter().any(|v| !v.is_finite()) {
            break;
        }
        let r = standardized_residual(z, &w2, &x2, s2);
        if r < best {
            best = r;
            w.copy_from_slice(&w2);
            x.copy_from_slice(&x2);
            *s = s2;
        } else {
            break;
        }
    }
}

/// Recovers the Gaussian EQMOM state from `M_0..M_{2N}`.
///
/// The shared variance is the root of the closure gap `J(σ²)` on `[0, θ]`,
/// bracketed by a scan that treats loss of Hankel realizability as a
/// barrier and refined by Brent's method. Equilibrium (single-Gaussian)
/// moments return the canonical boundary state with equal weights.
pub fn eqmom_invert(m: &MomentVector) -> Result<EqmomInversion> {
    let len = m.len();
    if len < 3 || len.is_multiple_of(2) {
        return Err(Error::Domain(format!(
            "EQMOM inversion needs 2N+1 >= 3 moments, got {len}"
        )));
    }
    let n = (len - 1) / 2;
    let ms = m.as_slice();
    let (mean, theta) = mean_and_variance(ms)?;
    let scale = theta.sqrt();
    let z = standardize(ms, mean, scale);

    let build = |w: &[f64], x: &[f64], s: f64, residual: f64, on_boundary: bool| -> Result<EqmomInversion> {
        let nodes: Vec<Node> = w
            .iter()
            .zip(x)
            .map(|(&wi, &xi)| Node {
                weight: ms[0] * wi,
                abscissa: mean + scale * xi,
            })
            .collect();
        let state = EqmomState::new(NodeSet::new(nodes)?, (theta * s).clamp(0.0, theta))?;
        Ok(EqmomInversion {
            state,
            residual,
            on_boundary,
        })
    };

    let gauss = gaussian_moments_signed(2 * n, 0.0, 1.0);
    let eq_gap = z
        .iter()
        .zip(&gauss)
        .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
        .fold(0.0, f64::max);
    if n == 1 || eq_gap <= EQUILIBRIUM_TOL {
        let w = vec![1.0 / n as f64; n];
        let x = vec![0.0; n];
        return build(&w, &x, 1.0, eq_gap, n > 1);
    }

    let fail = |reason: &str, lo: f64, hi: f64, residual: f64| Error::InversionFailed {
        reason: reason.to_string(),
        lo: theta * lo,
        hi: theta * hi,
        residual,
    };

    let j0 = closure_gap(&z, n, 0.0).ok_or(Error::NotRealizable { order: n, pivot: 0.0 })?;
    if j0 < 0.0 {
        let pivots = hankel_pivots(&z, n + 1);
        return Err(Error::NotRealizable {
            order: n + 1,
            pivot: pivots.last().copied().unwrap_or(j0),
        });
    }

    // Scan for a sign change, treating non-realizable points as a barrier.
    const SCAN: usize = 16;
    let mut lo = 0.0;
    let mut f_lo = j0;
    let mut bracket = None;
    for k in 1..=SCAN {
        let s = k as f64 / SCAN as f64;
        match closure_gap(&z, n, s) {
            Some(j) if j <= 0.0 => {
                bracket = Some((lo, s, f_lo, j));
                break;
            }
            Some(j) => {
                lo = s;
                f_lo = j;
            }
            None => {
                let mut hi = s;
                for _ in 0..200 {
                    if hi - lo <= 1e-16 {
                        break;
                    }
                    let mid = 0.5 * (lo + hi);
                    match closure_gap(&z, n, mid) {
                        None => hi = mid,
                        Some(j) if j <= 0.0 => {
                            bracket = Some((lo, mid, f_lo, j));
                            break;
                        }
                        Some(j) => {
                            lo = mid;
                            f_lo = j;
                        }
                    }
                }
                break;
            }
        }
    }
    let (a, b, fa, fb) = bracket.ok_or_else(|| fail("no sign change of the closure gap before the realizability barrier", lo, 1.0, f_lo))?;

    let root = brent(
        // past the barrier the gap is treated as negative
        |s| closure_gap(&z, n, s).unwrap_or(-f64::MIN_POSITIVE),
        a,
        b,
        fa,
        fb,
        1e-15,
    );

    let d = shift_variance(&z, -root);
    let (mut w, mut x, _) = match gauss_from_standardized(&d[..2 * n], n) {
        Ok(v) => v,
        Err(_) => return Err(fail("deconvolved moments not invertible at the root", a, b, f64::NAN)),
    };
    let mut s = root;
    newton_polish(&z, &mut w, &mut x, &mut s);
    let residual = standardized_residual(&z, &w, &x, s);
    if !(residual <= EQMOM_RESIDUAL_TOL) {
        return Err(fail("round-trip residual above tolerance", a, b, residual));
    }
    // Standardization loses digits when |mean| ≫ spread; finish against the raw moments.
    let mut raw_w: Vec<f64> = w.iter().map(|v| ms[0] * v).collect();
    let mut raw_x: Vec<f64> = x.iter().map(|v| mean + scale * v).collect();
    let mut raw_s = theta * s;
    newton_polish_bounded(ms, &mut raw_w, &mut raw_x, &mut raw_s, theta);
    let unit_w: Vec<f64> = raw_w.iter().map(|v| v / ms[0]).collect();
    let unit_x: Vec<f64> = raw_x.iter().map(|v| (v - mean) / scale).collect();
    build(&unit_w, &unit_x, raw_s / theta, residual, false)
}

/// Like [`eqmom_invert`], but when the moments lie outside the EQMOM range
/// (the closure gap keeps its sign up to the realizability barrier) returns
/// the state at the barrier that matches `M_0..M_{2N−1}` exactly. The
/// mismatch in `M_{2N}` is reported in `residual`.
pub fn eqmom_invert_nearest(m: &MomentVector) -> Result<EqmomInversion> {
    let lo = match eqmom_invert(m) {
        Err(Error::InversionFailed { lo, .. }) => lo,
        other => return other,
    };
    let ms = m.as_slice();
    let n = (ms.len() - 1) / 2;
    let (mean, theta) = mean_and_variance(ms)?;
    let scale = theta.sqrt();
    let z = standardize(ms, mean, scale);
    let mut s = lo / theta;
    for _ in 0..60 {
        let d = shift_variance(&z, -s);
        if let Ok((w, x, _)) = gauss_from_standardized(&d[..2 * n], n) {
            let residual = standardized_residual(&z, &w, &x, s);
            let nodes: Vec<Node> = w
                .iter()
                .zip(&x)
                .map(|(&wi, &xi)| Node {
                    weight: ms[0] * wi,
                    abscissa: mean + scale * xi,
                })
                .collect();
            if let Ok(ns) = NodeSet::new(nodes) {
                return Ok(EqmomInversion {
                    state: EqmomState::new(ns, theta * s)?,
                    residual,
                    on_boundary: false,
                });
            }
        }
        s *= 1.0 - 1e-6;
    }
    eqmom_invert(m)
}

fn forward_jacobian_ordered(w: &[f64], x: &[f64], s: f64, fwd: &MomentVector) -> DMatrix<f64> {
    let n = w.len();
    let dim = 2 * n + 1;
    let mut jac = DMatrix::zeros(dim, dim);
    for i in 0..n {
        let d = gaussian_moments_signed(2 * n, x[i], s);
        for j in 0..dim {
            jac[(j, 2 * i)] = d[j];
            jac[(j, 2 * i + 1)] = if j == 0 { 0.0 } else { j as f64 * w[i] * d[j - 1] };
        }
    }
    for j in 2..dim {
        jac[(j, 2 * n)] = (j * (j - 1)) as f64 / 2.0 * fwd[j - 2];
    }
    jac
}

/// `∂M/∂W`, columns ordered `(w_1, u_1, …, w_N, u_N, σ²)`.
pub fn forward_jacobian(state: &EqmomState) -> DMatrix<f64> {
    let w = state.nodes.weights();
    let x = state.nodes.abscissas();
    let fwd = eqmom_forward(state, 2 * state.n());
    forward_jacobian_ordered(&w, &x, state.sigma2, &fwd)
}

/// `det ∂M/∂W = (Π w_i) · (Σ_i w_i Π_{j≠i} (u_i − u_j)²) · Π_{i<j} (u_i − u_j)⁴`.
pub fn forward_jacobian_det(state: &EqmomState) -> f64 {
    let nodes = state.nodes.nodes();
    let prod_w: f64 = nodes.iter().map(|n| n.weight).product();
    let mixed: f64 = nodes
        .iter()
        .enumerate()
        .map(|(i, ni)| {
            ni.weight
                * nodes
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, nj)| (ni.abscissa - nj.abscissa).powi(2))
                    .product::<f64>()
        })
        .sum();
    let mut vander = 1.0;
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            vander *= (nodes[i].abscissa - nodes[j].abscissa).powi(4);
        }
    }
    prod_w * mixed * vander
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * y.abs().max(1.0))
    }

    #[test]
    fn qmom_forward_examples() {
        let ns = NodeSet::from_pairs(&[(1.0, 0.0)]).unwrap();
        assert_eq!(qmom_forward(&ns, 1).0, vec![1.0, 0.0]);
        let ns = NodeSet::from_pairs(&[(0.5, -1.0), (0.5, 1.0)]).unwrap();
        assert_eq!(qmom_forward(&ns, 3).0, vec![1.0, 0.0, 1.0, 0.0]);
        let ns = NodeSet::from_pairs(&[(0.3, -0.5), (0.7, 2.0)]).unwrap();
        assert!(close(&qmom_forward(&ns, 3).0, &[1.0, 1.25, 2.875, 5.5625], 1e-15));
    }

    #[test]
    fn qmom_invert_examples() {
        let r = qmom_invert(&MomentVector(vec![1.0, 0.0])).unwrap();
        assert_eq!(r.nodes.nodes(), &[Node { weight: 1.0, abscissa: 0.0 }]);

        let r = qmom_invert(&MomentVector(vec![1.0, 0.0, 1.0, 0.0])).unwrap();
        assert!(close(&r.nodes.weights(), &[0.5, 0.5], 1e-14));
        assert!(close(&r.nodes.abscissas(), &[-1.0, 1.0], 1e-14));

        let r = qmom_invert(&MomentVector(vec![1.0, 1.25, 2.875, 5.5625])).unwrap();
        assert!(close(&r.nodes.weights(), &[0.3, 0.7], 1e-13));
        assert!(close(&r.nodes.abscissas(), &[-0.5, 2.0], 1e-13));
        assert!(!r.near_degenerate);
    }

    #[test]
    fn qmom_invert_rejects_unrealizable() {
        // variance zero
        let err = qmom_invert(&MomentVector(vec![1.0, 1.0, 1.0, 1.0])).unwrap_err();
        assert!(matches!(err, Error::NotRealizable { order: 2, .. }));
        let err = qmom_invert(&MomentVector(vec![-1.0, 0.0])).unwrap_err();
        assert!(matches!(err, Error::NotRealizable { order: 1, .. }));
        // 3x3 Hankel of (1,0,1,0,0.5,·) is indefinite: z4 < z2²
        let err = qmom_invert(&MomentVector(vec![1.0, 0.0, 1.0, 0.0, 0.5, 0.0])).unwrap_err();
        assert!(matches!(err, Error::NotRealizable { order: 3, .. }));
        assert!(matches!(qmom_invert(&MomentVector(vec![1.0, 0.0, 1.0])), Err(Error::Domain(_))));
    }

    #[test]
    fn eqmom_forward_examples() {
        let st = EqmomState::from_pairs(&[(1.0, 0.0)], 1.0 / 3.0).unwrap();
        assert!(close(&eqmom_forward(&st, 2).0, &[1.0, 0.0, 1.0 / 3.0], 1e-15));
        let st = EqmomState::from_pairs(&[(0.5, -1.0), (0.5, 1.0)], 0.25).unwrap();
        assert!(close(&eqmom_forward(&st, 4).0, &[1.0, 0.0, 1.25, 0.0, 2.6875], 1e-15));
        let st = EqmomState::from_pairs(&[(0.3, -0.5), (0.7, 2.0)], 0.0).unwrap();
        assert_eq!(eqmom_forward(&st, 5), qmom_forward(&st.nodes, 5));
    }

    #[test]
    fn deconvolve_examples() {
        let m = MomentVector(vec![1.0, 0.3, 2.0, -1.0, 5.0]);
        assert_eq!(deconvolve(&m, 0.0).unwrap(), m);
        let m = MomentVector(vec![1.0, 0.0, 1.25, 0.0, 2.6875]);
        assert!(close(&deconvolve(&m, 0.25).unwrap().0, &[1.0, 0.0, 1.0, 0.0, 1.0], 1e-15));
        // ρ Δ_j(U, θ) → ρ U^j
        let (rho, u, t) = (1.7, -0.4, 0.9);
        let m = MomentVector(gaussian_moments_signed(7, u, t).iter().map(|d| rho * d).collect());
        let want: Vec<f64> = (0..8).map(|j| rho * u.powi(j)).collect();
        assert!(close(&deconvolve(&m, t).unwrap().0, &want, 1e-13));
        assert!(deconvolve(&m, -1.0).is_err());
    }

    #[test]
    fn eqmom_invert_examples() {
        let r = eqmom_invert(&MomentVector(vec![1.0, 0.0, 1.0 / 3.0])).unwrap();
        assert!(close(&r.state.nodes.weights(), &[1.0], 1e-15));
        assert!(close(&r.state.nodes.abscissas(), &[0.0], 1e-15));
        assert!((r.state.sigma2 - 1.0 / 3.0).abs() < 1e-15);

        let r = eqmom_invert(&MomentVector(vec![1.0, 0.0, 1.25, 0.0, 2.6875])).unwrap();
        assert!(close(&r.state.nodes.weights(), &[0.5, 0.5], 1e-12));
        assert!(close(&r.state.nodes.abscissas(), &[-1.0, 1.0], 1e-12));
        assert!((r.state.sigma2 - 0.25).abs() < 1e-12);
        assert_eq!(r.state.domain(), StateDomain::Interior);
        assert!(!r.on_boundary);

        let r = eqmom_invert(&MomentVector(vec![1.0, 0.0, 1.0, 0.0, 3.0])).unwrap();
        assert!(r.on_boundary);
        assert_eq!(r.state.domain(), StateDomain::EquilibriumBoundary);
        assert!(close(&r.state.nodes.weights(), &[0.5, 0.5], 1e-15));
        assert!(close(&r.state.nodes.abscissas(), &[0.0, 0.0], 1e-15));
        assert!((r.state.sigma2 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eqmom_invert_rejects_bad_input() {
        assert!(matches!(eqmom_invert(&MomentVector(vec![1.0, 0.0, 1.0, 0.0])), Err(Error::Domain(_))));
        assert!(matches!(
            eqmom_invert(&MomentVector(vec![1.0, 1.0, 1.0])),
            Err(Error::NotRealizable { .. })
        ));
        // M_4 below the QMOM closure value: not realizable at order 3
        assert!(matches!(
            eqmom_invert(&MomentVector(vec![1.0, 0.0, 1.0, 0.0, 0.5])),
            Err(Error::NotRealizable { .. })
        ));
    }

    #[test]
    fn jacobian_n1_and_determinant() {
        let (w, u, s2) = (0.7, 1.3, 0.4);
        let st = EqmomState::from_pairs(&[(w, u)], s2).unwrap();
        let j = forward_jacobian(&st);
        let want = [[1.0, 0.0, 0.0], [u, w, 0.0], [u * u + s2, 2.0 * w * u, w]];
        for r in 0..3 {
            for c in 0..3 {
                assert!((j[(r, c)] - want[r][c]).abs() < 1e-15);
            }
        }
        assert!((forward_jacobian_det(&st) - w * w).abs() < 1e-15);

        let st = EqmomState::from_pairs(&[(0.5, -1.0), (0.5, 1.0)], 0.3).unwrap();
        assert!((forward_jacobian_det(&st) - 16.0).abs() < 1e-12);
        assert!((forward_jacobian(&st).determinant() - 16.0).abs() < 1e-10);

        let st = EqmomState::from_pairs(&[(0.5, 0.2), (0.5, 0.2)], 0.3).unwrap();
        assert_eq!(forward_jacobian_det(&st), 0.0);
    }

    #[test]
    fn jacobian_last_column_at_zero_variance() {
        let st = EqmomState::from_pairs(&[(0.4, -0.3), (0.6, 0.8)], 0.0).unwrap();
        let j = forward_jacobian(&st);
        let m = qmom_forward(&st.nodes, 4);
        assert_eq!(j[(0, 4)], 0.0);
        assert_eq!(j[(1, 4)], 0.0);
        for r in 2..5 {
            assert!((j[(r, 4)] - (r * (r - 1)) as f64 / 2.0 * m[r - 2]).abs() < 1e-15);
        }
    }

    #[test]
    fn hankel_pivots_detect_order() {
        let p = hankel_pivots(&[1.0, 0.0, 1.0, 0.0, 3.0], 3);
        assert_eq!(p.len(), 3);
        assert!(p.iter().all(|v| *v > 0.0));
        let p = hankel_pivots(&[1.0, 0.0, 1.0, 0.0, 1.0], 3);
        assert!(p[2].abs() < 1e-15);
    }
}
