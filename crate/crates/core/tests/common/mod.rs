#![allow(dead_code)]

use qbmm_core::inversion::{eqmom_forward, forward_jacobian, EqmomState, NodeSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sorted abscissas in `[lo, hi]` with pairwise separation at least `sep`.
pub fn abscissas(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64, sep: f64) -> Vec<f64> {
    loop {
        let mut u: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
        u.sort_by(f64::total_cmp);
        if u.windows(2).all(|w| w[1] - w[0] >= sep) {
            return u;
        }
    }
}

pub fn node_set(rng: &mut ChaCha8Rng, n: usize) -> NodeSet {
    let u = abscissas(rng, n, -2.0, 2.0, 0.05);
    let pairs: Vec<(f64, f64)> = u.iter().map(|&x| (rng.random_range(0.1..2.0), x)).collect();
    NodeSet::from_pairs(&pairs).unwrap()
}

/// Interior state: weights in [0.1, 2], abscissas in [−2, 2] at least 0.05
/// apart, σ² in `s2_range`.
pub fn interior_state(rng: &mut ChaCha8Rng, n: usize, s2_range: (f64, f64)) -> EqmomState {
    let ns = node_set(rng, n);
    let s2 = rng.random_range(s2_range.0..s2_range.1);
    EqmomState::new(ns, s2).unwrap()
}

/// First-order bound on the round-trip error from rounding the moments:
/// `‖ |J⁻¹| · ε|M| ‖∞`.
pub fn roundtrip_error_bound(state: &EqmomState) -> f64 {
    let n = state.n();
    let m = eqmom_forward(state, 2 * n);
    let inv = match forward_jacobian(state).try_inverse() {
        Some(v) => v,
        None => return f64::INFINITY,
    };
    let dm = nalgebra::DVector::from_iterator(2 * n + 1, m.as_slice().iter().map(|v| v.abs() * f64::EPSILON));
    (inv.abs() * dm).max()
}

/// Largest relative discrepancy between two states with the same node count
/// (abscissas relative to max(|u|, 1)).
pub fn state_distance(a: &EqmomState, b: &EqmomState) -> f64 {
    let mut e = ((a.sigma2 - b.sigma2) / b.sigma2).abs();
    for (x, y) in a.nodes.nodes().iter().zip(b.nodes.nodes()) {
        e = e
            .max(((x.weight - y.weight) / y.weight).abs())
            .max((x.abscissa - y.abscissa).abs() / y.abscissa.abs().max(1.0));
    }
    e
}

/// `Δ_j(u, σ²)` from the explicit sum `Σ_k j!/(k!(j−2k)!) u^{j−2k} (σ²/2)^k`.
pub fn delta_explicit(j: usize, u: f64, s2: f64) -> f64 {
    let mut total = 0.0;
    for k in 0..=j / 2 {
        let mut coef = 1.0;
        for i in 0..(2 * k) {
            coef *= (j - i) as f64;
        }
        for i in 1..=k {
            coef /= i as f64;
        }
        total += coef * u.powi((j - 2 * k) as i32) * (s2 / 2.0).powi(k as i32);
    }
    total
}

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let x = a + i as f64 * h;
        s += if i % 2 == 1 { 4.0 * f(x) } else { 2.0 * f(x) };
    }
    s * h / 3.0
}
