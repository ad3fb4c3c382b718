//! Closure relations and the coefficient matrix `A(M)`.
//!
//! For EQMOM the characteristic polynomial of `A` is
//! `c(u; W) = u^{2N+1} − Σ a_j u^j` with `a_j = ∂M̄_{2N+1}/∂M_j`, and its
//! smoothed form `g = D_{σ²} c` factors as `Π (u − u_i)² (u − Ũ)`. The
//! coefficients are therefore built from that product, then unsmoothed.
//! For QMOM, `c(λ) = Π (λ − u_i)²`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::inversion::{EqmomState, NodeSet};
use crate::linalg;
use crate::polykit::{gaussian_moments_signed, smooth, Polynomial};

/// Last-row coefficients `a_0..a_top` of the companion coefficient matrix.
///
/// `top = 2N − 1` for QMOM and `2N` for EQMOM; the convention
/// `a_{top+1} = −1` makes `c(u) = −Σ_{j ≤ top+1} a_j u^j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosureCoefficients {
    a: Vec<f64>,
}

impl ClosureCoefficients {
    pub fn new(a: Vec<f64>) -> Self {
        Self { a }
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    /// Size of the coefficient matrix.
    pub fn dim(&self) -> usize {
        self.a.len()
    }

    /// `a_0..a_top` followed by `a_{top+1} = −1`.
    pub fn with_sentinel(&self) -> Vec<f64> {
        let mut v = self.a.clone();
        v.push(-1.0);
        v
    }

    /// The monic characteristic polynomial `u^{top+1} − Σ a_j u^j`.
    pub fn char_poly(&self) -> Polynomial {
        Polynomial::new(self.with_sentinel().iter().map(|c| -c).collect())
    }

    fn from_char_poly(c: &Polynomial, dim: usize) -> Self {
        Self {
            a: (0..dim).map(|j| -c.coeff(j)).collect(),
        }
    }
}

/// `Ũ = Σ w_i u_i Π_{j≠i}(u_j − u_i)² / Σ w_i Π_{j≠i}(u_j − u_i)²`.
///
/// Coincident abscissas return their common value. If every node has a
/// coincident partner (both sums vanish) the weighted mean is returned.
pub fn u_tilde(ns: &NodeSet) -> f64 {
    let nodes = ns.nodes();
    if ns.all_coincident() {
        return nodes[0].abscissa;
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, ni) in nodes.iter().enumerate() {
        let mut prod = ni.weight;
        for (j, nj) in nodes.iter().enumerate() {
            if j != i {
                let d = nj.abscissa - ni.abscissa;
                prod *= d * d;
            }
        }
        num += prod * ni.abscissa;
        den += prod;
    }
    if den > 0.0 {
        num / den
    } else {
        nodes.iter().map(|n| n.weight * n.abscissa).sum::<f64>() / ns.total_weight()
    }
}

/// `g(u; W) = Π (u − u_i)² (u − Ũ)`; independent of `σ²`.
pub fn g_polynomial(state: &EqmomState) -> Polynomial {
    let mut roots: Vec<f64> = state
        .nodes
        .abscissas()
        .iter()
        .flat_map(|&u| [u, u])
        .collect();
    roots.push(u_tilde(&state.nodes));
    Polynomial::from_roots(&roots)
}

/// `c(u; W) = D_{−σ²} g(u; W)`.
pub fn char_poly_eqmom(state: &EqmomState) -> Polynomial {
    smooth(&g_polynomial(state), -state.sigma2)
}

/// `a_j = ∂M̄_{2N+1}/∂M_j`, read off the characteristic polynomial.
pub fn closure_coeffs_eqmom(state: &EqmomState) -> ClosureCoefficients {
    ClosureCoefficients::from_char_poly(&char_poly_eqmom(state), 2 * state.n() + 1)
}

/// `M̄_{2N+1} = Σ w_i Δ_{2N+1}(u_i, σ²)`.
pub fn closed_moment_eqmom(state: &EqmomState) -> f64 {
    let k = 2 * state.n() + 1;
    state
        .nodes
        .nodes()
        .iter()
        .map(|n| n.weight * gaussian_moments_signed(k, n.abscissa, state.sigma2)[k])
        .sum()
}

/// `c(λ) = Π (λ − u_i)²`.
pub fn char_poly_qmom(ns: &NodeSet) -> Polynomial {
    let roots: Vec<f64> = ns.abscissas().iter().flat_map(|&u| [u, u]).collect();
    Polynomial::from_roots(&roots)
}

/// `a_j = ∂M̄_{2N}/∂M_j`.
pub fn closure_coeffs_qmom(ns: &NodeSet) -> ClosureCoefficients {
    ClosureCoefficients::from_char_poly(&char_poly_qmom(ns), 2 * ns.len())
}

/// `M̄_{2N} = Σ w_i u_i^{2N}`.
pub fn closed_moment_qmom(ns: &NodeSet) -> f64 {
    let k = 2 * ns.len() as i32;
    ns.nodes().iter().map(|n| n.weight * n.abscissa.powi(k)).sum()
}

/// The coefficient matrix `A(M)`: ones on the superdiagonal, `a` as last row.
pub fn companion_matrix(a: &ClosureCoefficients) -> DMatrix<f64> {
    linalg::companion(a.a())
}
