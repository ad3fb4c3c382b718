mod common;

use nalgebra::DMatrix;
use qbmm_core::closure::{
    char_poly_eqmom, char_poly_qmom, closed_moment_eqmom, closed_moment_qmom, closure_coeffs_eqmom,
    closure_coeffs_qmom, companion_matrix, g_polynomial,
};
use qbmm_core::inversion::{eqmom_forward, eqmom_invert, forward_jacobian, qmom_forward, qmom_invert, EqmomState, MomentVector};
use qbmm_core::polykit::{newton_power_sums, real_roots_default, Polynomial};

/// `u^K − Σ a_j u^j` evaluated directly from the coefficients.
fn char_from_coeffs(a: &[f64], u: f64) -> f64 {
    u.powi(a.len() as i32) - a.iter().enumerate().map(|(j, aj)| aj * u.powi(j as i32)).sum::<f64>()
}

/// `Δ_K(u) − Σ a_j Δ_j(u)`, i.e. `D_{σ²}` applied to the characteristic
/// polynomial, from the explicit Gaussian-moment sum.
fn g_from_coeffs(a: &[f64], u: f64, s2: f64) -> f64 {
    common::delta_explicit(a.len(), u, s2)
        - a.iter().enumerate().map(|(j, aj)| aj * common::delta_explicit(j, u, s2)).sum::<f64>()
}

fn well_separated(rng: &mut rand_chacha::ChaCha8Rng, n: usize) -> qbmm_core::inversion::NodeSet {
    use rand::Rng;
    let u = common::abscissas(rng, n, -2.0, 2.0, 0.3);
    let pairs: Vec<(f64, f64)> = u.iter().map(|&x| (rng.random_range(0.2..2.0), x)).collect();
    qbmm_core::inversion::NodeSet::from_pairs(&pairs).unwrap()
}

fn well_conditioned_states(seed: u64, count: usize) -> Vec<EqmomState> {
    use rand::Rng;
    let mut rng = common::rng(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let n = 1 + out.len() % 3;
        let ns = well_separated(&mut rng, n);
        let st = EqmomState::new(ns, rng.random_range(0.05..2.0)).unwrap();
        if common::roundtrip_error_bound(&st) < 1e-12 {
            out.push(st);
        }
    }
    out
}

/// Richardson-extrapolated central difference of `f` along moment `j`.
fn moment_derivative<F: Fn(&MomentVector) -> f64>(f: F, m: &MomentVector, j: usize, h: f64) -> f64 {
    let central = |h: f64| {
        let mut up = m.clone();
        let mut dn = m.clone();
        up.0[j] += h;
        dn.0[j] -= h;
        (f(&up) - f(&dn)) / (2.0 * h)
    };
    (4.0 * central(h / 2.0) - central(h)) / 3.0
}

#[test]
fn eqmom_coefficients_are_closure_derivatives() {
    for st in well_conditioned_states(11, 60) {
        let k = 2 * st.n();
        let m = eqmom_forward(&st, k);
        let a = closure_coeffs_eqmom(&st);
        let closed = |mm: &MomentVector| closed_moment_eqmom(&eqmom_invert(mm).unwrap().state);
        let jinv = forward_jacobian(&st).try_inverse().unwrap();
        for j in 0..=k {
            // keep the induced change of (w, u, σ²) near 1e-4
            let h = 1e-4 / jinv.column(j).amax();
            let fd = moment_derivative(closed, &m, j, h);
            let scale = a.a().iter().fold(1.0_f64, |s, v| s.max(v.abs()));
            assert!(
                (fd - a.a()[j]).abs() < 1e-5 * scale,
                "N={} j={j}: fd {fd} vs a {} at {:?}",
                st.n(),
                a.a()[j],
                st
            );
        }
    }
}

#[test]
fn qmom_coefficients_are_closure_derivatives() {
    let mut rng = common::rng(12);
    for t in 0..60 {
        let ns = well_separated(&mut rng, 1 + t % 3);
        let k = 2 * ns.len();
        let m = qmom_forward(&ns, k - 1);
        let a = closure_coeffs_qmom(&ns);
        let closed = |mm: &MomentVector| closed_moment_qmom(&qmom_invert(mm).unwrap().nodes);
        let scale = a.a().iter().fold(1.0_f64, |s, v| s.max(v.abs()));
        for j in 0..k {
            let fd = moment_derivative(closed, &m, j, 1e-5 * m.max_abs());
            assert!((fd - a.a()[j]).abs() < 1e-5 * scale, "j={j}: fd {fd} vs a {}", a.a()[j]);
        }
    }
}

#[test]
fn smoothed_characteristic_polynomial_factorizes() {
    let mut rng = common::rng(13);
    for t in 0..60 {
        let st = common::interior_state(&mut rng, 1 + t % 4, (1e-3, 3.0));
        let a = closure_coeffs_eqmom(&st);
        let g = g_polynomial(&st);
        let u_nodes = st.nodes.abscissas();
        let ut = g.coeffs()[g.coeffs().len() - 2];
        let ut = -ut - 2.0 * u_nodes.iter().sum::<f64>();
        for i in 0..=20 {
            let u = -3.0 + 0.3 * i as f64;
            let direct = u_nodes.iter().map(|x| (u - x).powi(2)).product::<f64>() * (u - ut);
            let via_coeffs = g_from_coeffs(a.a(), u, st.sigma2);
            let scale = 1.0 + u_nodes.iter().map(|x| (u.abs() + x.abs()).powi(2)).product::<f64>() * (u.abs() + ut.abs());
            assert!((direct - via_coeffs).abs() < 1e-9 * scale, "u={u}: {direct} vs {via_coeffs}");
        }
    }
}

#[test]
fn smoothed_polynomial_is_independent_of_variance() {
    let mut rng = common::rng(14);
    for t in 0..30 {
        let ns = common::node_set(&mut rng, 1 + t % 3);
        let gs: Vec<Vec<f64>> = [0.1, 1.0, 10.0]
            .iter()
            .map(|&s2| {
                let st = EqmomState::new(ns.clone(), s2).unwrap();
                let a = closure_coeffs_eqmom(&st);
                (0..=12).map(|i| g_from_coeffs(a.a(), -3.0 + 0.5 * i as f64, s2)).collect()
            })
            .collect();
        for ((g0, g1), g2) in gs[0].iter().zip(&gs[1]).zip(&gs[2]) {
            let scale = 1.0 + g0.abs();
            assert!((g1 - g0).abs() < 1e-6 * scale);
            assert!((g2 - g0).abs() < 1e-4 * scale);
        }
    }
}

#[test]
fn qmom_characteristic_polynomial_has_double_roots_at_nodes() {
    let mut rng = common::rng(15);
    for t in 0..60 {
        let ns = common::node_set(&mut rng, 1 + t % 4);
        let a = closure_coeffs_qmom(&ns);
        for u in ns.abscissas() {
            let c = char_from_coeffs(a.a(), u);
            let k = a.dim();
            let dc = k as f64 * u.powi(k as i32 - 1)
                - a.a().iter().enumerate().skip(1).map(|(j, aj)| j as f64 * aj * u.powi(j as i32 - 1)).sum::<f64>();
            let scale: f64 = a.a().iter().map(|v| v.abs()).sum::<f64>() + 2f64.powi(k as i32) * k as f64;
            assert!(c.abs() < 1e-13 * scale, "c({u}) = {c}");
            assert!(dc.abs() < 1e-13 * scale, "c'({u}) = {dc}");
        }
    }
}

#[test]
fn single_node_qmom_closure() {
    let mut rng = common::rng(16);
    for _ in 0..50 {
        let ns = common::node_set(&mut rng, 1);
        let m = qmom_forward(&ns, 1);
        let closed = closed_moment_qmom(&qmom_invert(&m).unwrap().nodes);
        assert!((closed - m[1] * m[1] / m[0]).abs() < 1e-13 * (1.0 + closed.abs()));
    }
}

#[test]
fn derivatives_of_smoothed_polynomial_have_real_roots() {
    let mut rng = common::rng(17);
    for t in 0..60 {
        // a single node gives g = (u − u₁)³, a triple root by construction
        let st = EqmomState::new(well_separated(&mut rng, 2 + t % 3), 1.0).unwrap();
        let g = g_polynomial(&st);
        let d = g.degree().unwrap();
        for j in 1..d {
            let gj = g.nth_derivative(j);
            let count: usize = real_roots_default(&gj).unwrap().iter().map(|r| r.multiplicity).sum();
            assert_eq!(count, d - j, "derivative {j} of degree-{d} g");
        }
    }
}

#[test]
fn trace_powers_match_power_sums() {
    let mut rng = common::rng(18);
    for t in 0..40 {
        let st = common::interior_state(&mut rng, 1 + t % 3, (0.05, 2.0));
        for (a, c) in [
            (closure_coeffs_eqmom(&st), char_poly_eqmom(&st)),
            (closure_coeffs_qmom(&st.nodes), char_poly_qmom(&st.nodes)),
        ] {
            let mat = companion_matrix(&a);
            let sums = newton_power_sums(&c, 6).unwrap();
            let mut pow = DMatrix::<f64>::identity(mat.nrows(), mat.nrows());
            for (k, s) in sums.iter().enumerate() {
                let tr = pow.trace();
                assert!((tr - s).abs() < 1e-9 * tr.abs().max(1.0), "k={k}: tr {tr} vs {s}");
                pow = &pow * &mat;
            }
        }
    }
}

#[test]
fn derivative_roots_interlace() {
    let mut rng = common::rng(19);
    for t in 0..60 {
        let st = common::interior_state(&mut rng, 1 + t % 4, (0.01, 3.0));
        let c = char_poly_eqmom(&st);
        let roots: Vec<f64> = real_roots_default(&c).unwrap().iter().map(|r| r.value).collect();
        let droots: Vec<f64> = real_roots_default(&c.derivative()).unwrap().iter().map(|r| r.value).collect();
        assert_eq!(roots.len(), c.degree().unwrap());
        assert_eq!(droots.len(), roots.len() - 1);
        for (i, d) in droots.iter().enumerate() {
            assert!(roots[i] < *d && *d < roots[i + 1]);
        }
    }
}

#[test]
fn qmom_companion_spectrum_has_nodes_as_eigenvalues() {
    let ns = qbmm_core::inversion::NodeSet::from_pairs(&[(0.4, -1.5), (1.0, 0.25), (0.6, 1.75)]).unwrap();
    let c = char_poly_qmom(&ns);
    let want = Polynomial::from_roots(&[-1.5, -1.5, 0.25, 0.25, 1.75, 1.75]);
    for k in 0..=6 {
        assert!((c.coeff(k) - want.coeff(k)).abs() < 1e-14);
    }
}
