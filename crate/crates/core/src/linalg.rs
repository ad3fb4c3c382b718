//! Dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use crate::{Error, Result};

/// Companion matrix in the coefficient-matrix convention: ones on the
/// superdiagonal and `last_row` as the final row.
pub fn companion(last_row: &[f64]) -> DMatrix<f64> {
    let n = last_row.len();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n.saturating_sub(1) {
        a[(i, i + 1)] = 1.0;
    }
    for (j, &v) in last_row.iter().enumerate() {
        a[(n - 1, j)] = v;
    }
    a
}

/// Parlett–Reinsch balancing by powers of two (similarity transform, exact
/// in floating point).
pub fn balance(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    let radix = 2.0_f64;
    let sqrdx = radix * radix;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut g = r / radix;
                let mut f = 1.0;
                let s = c + r;
                while c < g {
                    f *= radix;
                    c *= sqrdx;
                }
                g = r * radix;
                while c > g {
                    f /= radix;
                    c /= sqrdx;
                }
                if (c + r) / f < 0.95 * s {
                    done = false;
                    let g = 1.0 / f;
                    for j in 0..n {
                        a[(i, j)] *= g;
                    }
                    for j in 0..n {
                        a[(j, i)] *= f;
                    }
                }
            }
        }
    }
}

/// Eigenvalues of the companion matrix of the monic polynomial with
/// ascending coefficients `monic` (last entry 1), via balancing and the
/// Hessenberg QR (real Schur) iteration.
pub fn companion_eigenvalues(monic: &[f64]) -> Result<Vec<Complex<f64>>> {
    let d = monic.len() - 1;
    if d == 1 {
        return Ok(vec![Complex::new(-monic[0], 0.0)]);
    }
    let last_row: Vec<f64> = monic[..d].iter().map(|c| -c).collect();
    let mut a = companion(&last_row);
    balance(&mut a);
    let schur = nalgebra::linalg::Schur::try_new(a, f64::EPSILON, 10_000).ok_or_else(|| {
        Error::RootFinding {
            reason: format!("Schur iteration failed on a degree-{d} companion matrix"),
            residuals: Vec::new(),
        }
    })?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Eigenvalues (ascending) and normalized eigenvectors of a symmetric
/// tridiagonal matrix given by its diagonal and off-diagonal.
pub fn symmetric_tridiagonal_eigen(diag: &[f64], off: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let n = diag.len();
    let mut t = DMatrix::zeros(n, n);
    for i in 0..n {
        t[(i, i)] = diag[i];
        if i + 1 < n {
            t[(i, i + 1)] = off[i];
            t[(i + 1, i)] = off[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

pub fn frobenius(a: &DMatrix<f64>) -> f64 {
    a.norm()
}

/// Singular values of `a` in descending order.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_symmetric_eigenvalue(a: &DMatrix<f64>) -> f64 {
    let sym = (a + a.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .fold(f64::NEG_INFINITY, |m, &v| m.max(v))
}

pub fn vector(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}
