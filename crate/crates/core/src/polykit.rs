//! Univariate polynomials and Gaussian moment machinery.
//!
//! Polynomials are dense, real, and stored in ascending degree order. The
//! Gaussian moment `Δ_j(u, σ²) = ∫ ξ^j δ_{σ²}(ξ; u) dξ` and the smoothing
//! operator `D_θ f = Σ_k (θ/2)^k f^{(2k)} / k!` are related by
//! `D_{σ²} u^j = Δ_j(u, σ²)`.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::{Error, Result};

/// Coefficients with magnitude at or below this are treated as zero when
/// trimming the leading end.
pub const TRIM_THRESHOLD: f64 = 1e-300;

/// Dense real polynomial, coefficients in ascending degree order.
///
/// Trailing zeros are trimmed so the zero polynomial has no coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last().is_some_and(|c| c.abs() <= TRIM_THRESHOLD) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    /// `u^k`
    pub fn monomial(k: usize) -> Self {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = 1.0;
        Self { coeffs }
    }

    /// Monic polynomial `Π (u − r)` over the given roots.
    pub fn from_roots(roots: &[f64]) -> Self {
        let mut coeffs = vec![1.0];
        for &r in roots {
            let mut next = vec![0.0; coeffs.len() + 1];
            for (k, &c) in coeffs.iter().enumerate() {
                next[k + 1] += c;
                next[k] -= r * c;
            }
            coeffs = next;
        }
        Self::new(coeffs)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> f64 {
        self.coeffs.last().copied().unwrap_or(0.0)
    }

    /// Coefficient of `u^k` (zero beyond the degree).
    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn is_monic(&self, tol: f64) -> bool {
        !self.is_zero() && (self.leading() - 1.0).abs() <= tol
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * u + c)
    }

    /// `Σ |c_k| |u|^k`, the natural scale for rounding errors of [`Self::eval`].
    pub fn eval_abs(&self, u: f64) -> f64 {
        let au = u.abs();
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * au + c.abs())
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() <= 1 {
            return Self::zero();
        }
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    pub fn nth_derivative(&self, n: usize) -> Self {
        (0..n).fold(self.clone(), |p, _| p.derivative())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    /// `u · p(u)`
    pub fn shift_up(&self) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let mut coeffs = Vec::with_capacity(self.coeffs.len() + 1);
        coeffs.push(0.0);
        coeffs.extend_from_slice(&self.coeffs);
        Self { coeffs }
    }

    pub fn pow(&self, n: usize) -> Self {
        (0..n).fold(Self::constant(1.0), |acc, _| &acc * self)
    }

    /// Largest coefficient magnitude.
    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, &c) in self.coeffs.iter().enumerate().rev() {
            if c == 0.0 {
                continue;
            }
            if !first {
                write!(f, " {} ", if c < 0.0 { '-' } else { '+' })?;
            } else if c < 0.0 {
                write!(f, "-")?;
            }
            first = false;
            match k {
                0 => write!(f, "{}", c.abs())?,
                1 => write!(f, "{}·u", c.abs())?,
                _ => write!(f, "{}·u^{}", c.abs(), k)?,
            }
        }
        Ok(())
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Polynomial::new((0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Polynomial::new((0..n).map(|k| self.coeff(k) - rhs.coeff(k)).collect())
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        if self.is_zero() || rhs.is_zero() {
            return Polynomial::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

/// Gaussian kernel `δ_{σ²}(ξ; u)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianKernel {
    pub u: f64,
    pub sigma2: f64,
}

impl GaussianKernel {
    pub fn new(u: f64, sigma2: f64) -> Result<Self> {
        if !(sigma2 >= 0.0) || !u.is_finite() || !sigma2.is_finite() {
            return Err(Error::Domain(format!(
                "Gaussian kernel needs finite u and sigma2 >= 0, got u = {u}, sigma2 = {sigma2}"
            )));
        }
        Ok(Self { u, sigma2 })
    }

    pub fn density(&self, xi: f64) -> f64 {
        gaussian_density(xi, self.u, self.sigma2)
    }

    pub fn moment(&self, j: usize) -> f64 {
        gaussian_moments_signed(j, self.u, self.sigma2)[j]
    }
}

fn gaussian_density(xi: f64, u: f64, sigma2: f64) -> f64 {
    let d = xi - u;
    (-0.5 * d * d / sigma2).exp() / (2.0 * PI * sigma2).sqrt()
}

fn check_variance(sigma2: f64) -> Result<()> {
    if sigma2 >= 0.0 && sigma2.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("variance must be >= 0, got {sigma2}")))
    }
}

/// `Δ_0 .. Δ_{j_max}` by the three-term recurrence, for any real `v`.
///
/// A negative `v` is the formal extension used by `D_{−θ}`.
pub(crate) fn gaussian_moments_signed(j_max: usize, u: f64, v: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(j_max + 1);
    out.push(1.0);
    if j_max >= 1 {
        out.push(u);
    }
    for j in 2..=j_max {
        let next = u * out[j - 1] + (j - 1) as f64 * v * out[j - 2];
        out.push(next);
    }
    out
}

/// `Δ_j(u, σ²)`, the `j`-th moment of a Gaussian with mean `u` and variance `σ²`.
pub fn gaussian_moment(j: usize, u: f64, sigma2: f64) -> Result<f64> {
    check_variance(sigma2)?;
    Ok(gaussian_moments_signed(j, u, sigma2)[j])
}

/// `Δ_0 .. Δ_{j_max}` in one pass.
pub fn gaussian_moments(j_max: usize, u: f64, sigma2: f64) -> Result<Vec<f64>> {
    check_variance(sigma2)?;
    Ok(gaussian_moments_signed(j_max, u, sigma2))
}

/// Applies `D_θ f = Σ_k (θ/2)^k f^{(2k)} / k!`.
///
/// Degree and leading coefficient are preserved; `smooth(·, −θ)` inverts
/// `smooth(·, θ)`.
pub fn smooth(p: &Polynomial, theta: f64) -> Polynomial {
    let c = p.coeffs();
    let n = c.len();
    let half = 0.5 * theta;
    let mut out = vec![0.0; n];
    for (m, slot) in out.iter_mut().enumerate() {
        // term k: (θ/2)^k / k! · c_{m+2k} · (m+2k)! / m!
        let mut factor = 1.0;
        let mut acc = c[m];
        let mut k = 1;
        while m + 2 * k < n {
            let top = (m + 2 * k) as f64;
            factor *= half * top * (top - 1.0) / k as f64;
            acc += factor * c[m + 2 * k];
            k += 1;
        }
        *slot = acc;
    }
    Polynomial::new(out)
}

/// A real root together with its multiplicity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealRoot {
    pub value: f64,
    pub multiplicity: usize,
}

/// Default clustering tolerance `1e-7 · (1 + max |root|)`.
pub fn default_cluster_tol(max_abs_root: f64) -> f64 {
    1e-7 * (1.0 + max_abs_root)
}

/// Real roots of `p` sorted ascending. Nearby eigenvalues of the balanced
/// companion matrix (within `1e-3 · (1 + max |root|)`, real or a complex
/// pair) are merged into a root of multiplicity `m` only when the polished
/// point makes `p, p′, …, p^{(m−2)}` vanish to rounding; isolated eigenvalues
/// count as real when their imaginary part is below the default tolerance.
pub fn real_roots_default(p: &Polynomial) -> Result<Vec<RealRoot>> {
    let (monic, eig) = monic_eigenvalues(p)?;
    if eig.is_empty() {
        return Ok(Vec::new());
    }
    let max_abs = eig.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
    let tight = default_cluster_tol(max_abs);
    let loose = 1e-3 * (1.0 + max_abs);
    let mut eig = eig;
    eig.sort_by(|a, b| a.re.total_cmp(&b.re));

    let mut roots: Vec<RealRoot> = Vec::new();
    let mut i = 0;
    while i < eig.len() {
        let mut size = 1;
        let mut value = eig[i].re;
        while i + size < eig.len() {
            let next = eig[i + size];
            let mean = eig[i..=i + size].iter().map(|z| z.re).sum::<f64>() / (size + 1) as f64;
            if (next.re - mean).abs() > loose || next.im.abs() > loose {
                break;
            }
            match verified_multiple_root(&monic, mean, size + 1, loose) {
                Some(x) => {
                    value = x;
                    size += 1;
                }
                None => break,
            }
        }
        if size > 1 || eig[i].im.abs() <= tight {
            if size == 1 {
                value = polish_root(&monic, value, 1, tight);
            }
            roots.push(RealRoot {
                value,
                multiplicity: size,
            });
        }
        i += size;
    }
    roots.sort_by(|a, b| a.value.total_cmp(&b.value));
    check_residuals(&monic, &roots)?;
    Ok(roots)
}

/// Real roots of `p` sorted ascending; eigenvalues closer than `tol` (and
/// with imaginary parts below `tol`) are merged into one root.
pub fn real_roots(p: &Polynomial, tol: f64) -> Result<Vec<RealRoot>> {
    let (monic, eig) = monic_eigenvalues(p)?;
    let mut reals: Vec<f64> = eig
        .iter()
        .filter(|z| z.im.abs() <= tol)
        .map(|z| z.re)
        .collect();
    reals.sort_by(f64::total_cmp);

    let mut clusters: Vec<Vec<f64>> = Vec::new();
    for r in reals {
        match clusters.last_mut() {
            Some(cl) if r - cl[cl.len() - 1] <= tol => cl.push(r),
            _ => clusters.push(vec![r]),
        }
    }
    let roots: Vec<RealRoot> = clusters
        .into_iter()
        .map(|cl| {
            let multiplicity = cl.len();
            let guess = cl.iter().sum::<f64>() / multiplicity as f64;
            RealRoot {
                value: polish_root(&monic, guess, multiplicity, tol),
                multiplicity,
            }
        })
        .collect();
    check_residuals(&monic, &roots)?;
    Ok(roots)
}

fn monic_eigenvalues(p: &Polynomial) -> Result<(Polynomial, Vec<nalgebra::Complex<f64>>)> {
    let degree = p
        .degree()
        .ok_or_else(|| Error::Domain("real_roots of the zero polynomial".into()))?;
    if degree == 0 {
        return Ok((p.clone(), Vec::new()));
    }
    let lead = p.leading();
    let monic: Vec<f64> = p.coeffs().iter().map(|c| c / lead).collect();
    let eig = linalg::companion_eigenvalues(&monic)?;
    Ok((Polynomial::new(monic), eig))
}

/// Polished root of multiplicity `m` near `guess`, if `p^{(j)}` vanishes
/// there to rounding for every `j < m − 1`.
fn verified_multiple_root(p: &Polynomial, guess: f64, m: usize, radius: f64) -> Option<f64> {
    let x = polish_root(p, guess, m, radius);
    let slack = 16.0 * (p.degree().unwrap_or(0) + 1) as f64 * f64::EPSILON;
    let mut d = p.clone();
    for _ in 0..m - 1 {
        if d.eval(x).abs() > slack * d.eval_abs(x) {
            return None;
        }
        d = d.derivative();
    }
    Some(x)
}

/// The `(m−1)`-th derivative has a simple root at a root of multiplicity `m`.
fn check_residuals(p: &Polynomial, roots: &[RealRoot]) -> Result<()> {
    let bad: Vec<f64> = roots
        .iter()
        .filter_map(|r| {
            let d = p.nth_derivative(r.multiplicity - 1);
            let scale = d.eval_abs(r.value).max(f64::MIN_POSITIVE);
            let rel = d.eval(r.value).abs() / scale;
            (rel > 1e-6).then_some(rel)
        })
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::RootFinding {
            reason: format!("{} root(s) failed the residual check", bad.len()),
            residuals: bad,
        })
    }
}

/// Newton iteration on `p^{(m−1)}`, where a root of multiplicity `m` is simple.
/// The polished value is kept only if it stays inside the cluster radius.
fn polish_root(p: &Polynomial, guess: f64, multiplicity: usize, tol: f64) -> f64 {
    let f = p.nth_derivative(multiplicity - 1);
    let df = f.derivative();
    let mut x = guess;
    for _ in 0..8 {
        let d = df.eval(x);
        if d == 0.0 || !d.is_finite() {
            break;
        }
        let step = f.eval(x) / d;
        if !step.is_finite() {
            break;
        }
        x -= step;
        if step.abs() <= 4.0 * f64::EPSILON * (1.0 + x.abs()) {
            break;
        }
    }
    if (x - guess).abs() <= tol.max(f64::EPSILON) && x.is_finite() {
        x
    } else {
        guess
    }
}

/// Which half line a half-Gaussian moment integrates over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Below,
    Above,
}

/// `∫ ξ^j δ_{σ²}(ξ; u) dξ` over `ξ < cut` or `ξ > cut`.
pub fn half_gaussian_moment(j: usize, u: f64, sigma2: f64, cut: f64, side: Side) -> Result<f64> {
    Ok(half_gaussian_moments(j, u, sigma2, cut, side)?[j])
}

/// Half-Gaussian moments `0..=j_max`, by the recurrence
/// `I_j = u I_{j−1} + (j−1) σ² I_{j−2} ± σ² cut^{j−1} δ_{σ²}(cut; u)`
/// seeded with the complementary error function.
pub fn half_gaussian_moments(
    j_max: usize,
    u: f64,
    sigma2: f64,
    cut: f64,
    side: Side,
) -> Result<Vec<f64>> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::Domain(format!(
            "half-Gaussian moments need sigma2 > 0, got {sigma2}"
        )));
    }
    let sigma = sigma2.sqrt();
    let z = (cut - u) / sigma;
    let (mass, sign) = match side {
        Side::Above => (0.5 * libm::erfc(z / std::f64::consts::SQRT_2), 1.0),
        Side::Below => (0.5 * libm::erfc(-z / std::f64::consts::SQRT_2), -1.0),
    };
    let boundary = sign * sigma2 * gaussian_density(cut, u, sigma2);
    let mut out = Vec::with_capacity(j_max + 1);
    out.push(mass);
    let mut cut_pow = 1.0; // cut^{j-1}
    for j in 1..=j_max {
        let prev2 = if j >= 2 { (j - 1) as f64 * sigma2 * out[j - 2] } else { 0.0 };
        out.push(u * out[j - 1] + prev2 + boundary * cut_pow);
        cut_pow *= cut;
    }
    Ok(out)
}

/// Power sums `p_k = Σ λ_i^k` of the roots of a monic polynomial, from its
/// coefficients by Newton's identities.
pub fn newton_power_sums(p: &Polynomial, k_max: usize) -> Result<Vec<f64>> {
    let d = match p.degree() {
        Some(d) if d >= 1 => d,
        _ => return Err(Error::Domain("newton_power_sums needs degree >= 1".into())),
    };
    if p.leading() != 1.0 && (p.leading() - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!(
            "newton_power_sums needs a monic polynomial, leading coefficient is {}",
            p.leading()
        )));
    }
    // λ^d + b_1 λ^{d−1} + … + b_d
    let b = |i: usize| p.coeff(d - i);
    let mut sums = Vec::with_capacity(k_max + 1);
    sums.push(d as f64);
    for k in 1..=k_max {
        let mut acc = 0.0;
        for i in 1..k.min(d + 1) {
            acc += b(i) * sums[k - i];
        }
        if k <= d {
            acc += k as f64 * b(k);
        }
        sums.push(-acc);
    }
    Ok(sums)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn explicit_delta(j: usize, u: f64, s2: f64) -> f64 {
        // Σ j!/(k!(j−2k)!) (σ²/2)^k u^{j−2k}
        let fact = |n: usize| (1..=n).fold(1.0, |a, b| a * b as f64);
        (0..=j / 2)
            .map(|k| {
                fact(j) / (fact(k) * fact(j - 2 * k)) * (s2 / 2.0).powi(k as i32) * u.powi((j - 2 * k) as i32)
            })
            .sum()
    }

    #[test]
    fn gaussian_moment_examples() {
        assert_eq!(gaussian_moment(0, 3.7, 2.0).unwrap(), 1.0);
        assert!((gaussian_moment(2, 1.0, 0.5).unwrap() - 1.5).abs() < 1e-15);
        let t = 1.0 / 3.0;
        assert!((gaussian_moment(4, 0.0, t).unwrap() - 3.0 * t * t).abs() < 1e-15);
        assert!((gaussian_moment(4, 0.0, t).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(matches!(gaussian_moment(2, 0.0, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn recursion_matches_explicit_sum() {
        for &(u, s2) in &[(0.3, 0.7), (-2.1, 0.01), (1.5, 3.0), (0.0, 1.0)] {
            for j in 0..=12 {
                let a = gaussian_moment(j, u, s2).unwrap();
                let b = explicit_delta(j, u, s2);
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "j={j} {a} {b}");
            }
        }
    }

    #[test]
    fn smooth_of_monomial_is_gaussian_moment() {
        for j in 0..9 {
            let p = smooth(&Polynomial::monomial(j), 0.8);
            for &u in &[-1.3, 0.0, 0.4, 2.0] {
                let want = gaussian_moment(j, u, 0.8).unwrap();
                assert!((p.eval(u) - want).abs() < 1e-12 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn smooth_identity_and_inverse() {
        let p = Polynomial::new(vec![0.5, -1.0, 2.0, 0.25, -3.0, 1.0]);
        assert_eq!(smooth(&p, 0.0), p);
        let back = smooth(&smooth(&p, 1.7), -1.7);
        for k in 0..6 {
            assert!((back.coeff(k) - p.coeff(k)).abs() < 1e-12);
        }
        let s = smooth(&p, 2.0);
        assert_eq!(s.degree(), p.degree());
        assert_eq!(s.leading(), p.leading());
    }

    #[test]
    fn real_roots_examples() {
        let p = Polynomial::new(vec![0.0, -3.0, 0.0, 1.0]);
        let r = real_roots_default(&p).unwrap();
        let s3 = 3f64.sqrt();
        assert_eq!(r.len(), 3);
        for (got, want) in r.iter().zip([-s3, 0.0, s3]) {
            assert!((got.value - want).abs() < 1e-12);
            assert_eq!(got.multiplicity, 1);
        }

        let q = Polynomial::from_roots(&[1.0, 1.0, -1.0, -1.0]);
        let r = real_roots_default(&q).unwrap();
        assert_eq!(r.len(), 2);
        assert!((r[0].value + 1.0).abs() < 1e-12 && r[0].multiplicity == 2);
        assert!((r[1].value - 1.0).abs() < 1e-12 && r[1].multiplicity == 2);

        assert!(real_roots_default(&Polynomial::constant(1.0)).unwrap().is_empty());
        assert!(real_roots_default(&Polynomial::zero()).is_err());
    }

    #[test]
    fn complex_roots_are_dropped() {
        // (u² + 1)(u − 2)
        let p = &Polynomial::new(vec![1.0, 0.0, 1.0]) * &Polynomial::from_roots(&[2.0]);
        let r = real_roots_default(&p).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r[0].value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn half_gaussian_examples() {
        let v = half_gaussian_moment(0, 0.0, 1.0, 0.0, Side::Above).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
        let s2 = 0.7;
        let v = half_gaussian_moment(1, 0.0, s2, 0.0, Side::Above).unwrap();
        assert!((v - (s2 / (2.0 * PI)).sqrt()).abs() < 1e-15);
        assert!(half_gaussian_moment(1, 0.0, 0.0, 0.0, Side::Above).is_err());
    }

    #[test]
    fn half_gaussian_additivity() {
        for &(u, s2, cut) in &[(0.3, 0.5, -0.2), (-1.0, 2.0, 1.5), (2.0, 0.1, 0.0)] {
            let lo = half_gaussian_moments(8, u, s2, cut, Side::Below).unwrap();
            let hi = half_gaussian_moments(8, u, s2, cut, Side::Above).unwrap();
            let full = gaussian_moments(8, u, s2).unwrap();
            for j in 0..=8 {
                assert!((lo[j] + hi[j] - full[j]).abs() < 1e-12 * full[j].abs().max(1.0));
            }
        }
    }

    #[test]
    fn newton_power_sum_examples() {
        let p = Polynomial::from_roots(&[1.0, 1.0, 2.0, 2.0]);
        let s = newton_power_sums(&p, 3).unwrap();
        assert_eq!(s[0], 4.0);
        assert!((s[1] - 6.0).abs() < 1e-14);
        assert!((s[3] - 18.0).abs() < 1e-12);
        let q = Polynomial::new(vec![1.0, -2.0, 1.0]);
        assert!((newton_power_sums(&q, 2).unwrap()[2] - 2.0).abs() < 1e-14);
        assert!(newton_power_sums(&Polynomial::new(vec![1.0, 2.0]), 2).is_err());
    }

    #[test]
    fn polynomial_ops() {
        let p = Polynomial::new(vec![1.0, 2.0, 0.0, 0.0]);
        assert_eq!(p.degree(), Some(1));
        assert_eq!(p.derivative(), Polynomial::constant(2.0));
        assert_eq!(Polynomial::constant(3.0).derivative(), Polynomial::zero());
        let sq = &p * &p;
        assert_eq!(sq.coeffs(), &[1.0, 4.0, 4.0]);
        assert_eq!((&sq - &sq), Polynomial::zero());
        assert_eq!(p.shift_up().coeffs(), &[0.0, 1.0, 2.0]);
    }
}
