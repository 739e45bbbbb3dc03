//! Special functions and probability kernels.
//!
//! Accuracy contracts:
//! - [`bessel_i0`]: relative error ≤ 1e-12 on `[0, 700]`.
//! - [`noise_geq`]: absolute error ≤ 1e-12.
//! - [`displaced_overlap`]: relative error ≤ 1e-10 away from zeros of the
//!   underlying Laguerre polynomial, for `|beta|^2 <= 4000`.
//!
//! Quadrature convention for [`oscillator_eigenfunction`]: `X = a + a^†`,
//! so the vacuum has variance 1.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

/// Largest Fock index accepted by [`oscillator_eigenfunction`].
pub const MAX_EIGENFUNCTION_INDEX: usize = 200;
/// Largest Fock index accepted by [`displaced_overlap`].
pub const MAX_OVERLAP_INDEX: usize = 50_000;
/// Largest `|beta|^2` accepted by [`displaced_overlap`].
pub const MAX_OVERLAP_INTENSITY: f64 = 4000.0;

/// Additive Gaussian detector noise, in photon-count units.
///
/// `sigma == 0` is the noiseless step limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianNoise {
    sigma: f64,
}

impl GaussianNoise {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidInput(format!(
                "noise sigma must be finite and >= 0, got {sigma}"
            )));
        }
        Ok(Self { sigma })
    }

    pub const fn noiseless() -> Self {
        Self { sigma: 0.0 }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// Modified Bessel function of the first kind, order zero.
pub fn bessel_i0(x: f64) -> Result<f64> {
    if !(0.0..=700.0).contains(&x) {
        return Err(Error::Domain(format!("bessel_i0 needs 0 <= x <= 700, got {x}")));
    }
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = NeumaierSum::default();
    sum.add(term);
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= q / (n * n);
        sum.add(term);
        if term < 1e-17 * sum.value() && n > q.sqrt() {
            break;
        }
    }
    Ok(sum.value())
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

/// Probability that the noise is at least `x`.
///
/// For `sigma == 0` this is the step `1[x <= 0]`, so that "n + noise >= 0"
/// collapses to "n >= 0".
pub fn noise_geq(x: f64, noise: GaussianNoise) -> f64 {
    let s = noise.sigma;
    if s == 0.0 {
        if x <= 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        0.5 * libm::erfc(x / (s * SQRT_2))
    }
}

/// Orthonormal quadrature eigenfunction `u_n(x)` with vacuum variance 1.
pub fn oscillator_eigenfunction(n: usize, x: f64) -> Result<f64> {
    if n > MAX_EIGENFUNCTION_INDEX {
        return Err(Error::IndexOutOfRange {
            index: n,
            max: MAX_EIGENFUNCTION_INDEX,
        });
    }
    Ok(oscillator_eigenfunctions(n, x)[n])
}

/// All of `u_0(x) ..= u_nmax(x)` by upward recurrence
/// `x u_n = sqrt(n+1) u_{n+1} + sqrt(n) u_{n-1}`.
pub fn oscillator_eigenfunctions(nmax: usize, x: f64) -> Vec<f64> {
    let mut u = Vec::with_capacity(nmax + 1);
    u.push((2.0 * PI).powf(-0.25) * (-0.25 * x * x).exp());
    if nmax >= 1 {
        u.push(x * u[0]);
    }
    for n in 1..nmax {
        let next = (x * u[n] - (n as f64).sqrt() * u[n - 1]) / ((n + 1) as f64).sqrt();
        u.push(next);
    }
    u
}

fn ln_factorial(n: usize) -> f64 {
    libm::lgamma(n as f64 + 1.0)
}

/// Generalized Laguerre polynomial `L_n^{(a)}(x)` as `(sign, ln|value|)`.
fn laguerre_log(n: usize, a: f64, x: f64) -> (f64, f64) {
    const BIG: f64 = 1e150;
    let mut prev = 1.0;
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut cur = 1.0 + a - x;
    let mut log_scale = 0.0;
    for m in 1..n {
        let m = m as f64;
        let next = ((2.0 * m + 1.0 + a - x) * cur - (m + a) * prev) / (m + 1.0);
        prev = cur;
        cur = next;
        let mag = cur.abs().max(prev.abs());
        if mag > BIG {
            prev /= mag;
            cur /= mag;
            log_scale += mag.ln();
        }
    }
    if cur == 0.0 {
        (0.0, f64::NEG_INFINITY)
    } else {
        (cur.signum(), cur.abs().ln() + log_scale)
    }
}

/// Matrix element `<k| D(beta) |n>` of the displacement operator.
pub fn displaced_overlap(k: usize, n: usize, beta: Complex64) -> Result<Complex64> {
    let max = k.max(n);
    if max > MAX_OVERLAP_INDEX {
        return Err(Error::Truncation(format!(
            "Fock index {max} exceeds the overlap limit {MAX_OVERLAP_INDEX}"
        )));
    }
    let intensity = beta.norm_sqr();
    if intensity > MAX_OVERLAP_INTENSITY {
        return Err(Error::Truncation(format!(
            "|beta|^2 = {intensity} exceeds {MAX_OVERLAP_INTENSITY}"
        )));
    }
    if intensity == 0.0 {
        return Ok(if k == n { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) });
    }
    // k >= n: sqrt(n!/k!) beta^(k-n) e^{-|b|^2/2} L_n^(k-n)(|b|^2)
    // k <  n: sqrt(k!/n!) (-beta*)^(n-k) e^{-|b|^2/2} L_k^(n-k)(|b|^2)
    let (lo, hi, base) = if k >= n { (n, k, beta) } else { (k, n, -beta.conj()) };
    let power = hi - lo;
    let (sign, log_lag) = laguerre_log(lo, power as f64, intensity);
    if sign == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let log_mag = 0.5 * (ln_factorial(lo) - ln_factorial(hi)) + power as f64 * base.norm().ln()
        - 0.5 * intensity
        + log_lag;
    let phase = base.arg() * power as f64;
    Ok(Complex64::from_polar(sign * log_mag.exp(), phase))
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let nf = order as f64;
    for i in 0..order.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 1..=order {
                let jf = j as f64;
                let p3 = p2;
                p2 = p1;
                p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
            }
            dp = nf * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[order - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss–Legendre rule over consecutive breakpoints.
pub fn composite_gauss_legendre(breaks: &[f64], order: usize) -> (Vec<f64>, Vec<f64>) {
    let (gx, gw) = gauss_legendre(order);
    let mut xs = Vec::with_capacity(breaks.len() * order);
    let mut ws = Vec::with_capacity(breaks.len() * order);
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (x, w) in gx.iter().zip(&gw) {
            xs.push(mid + half * x);
            ws.push(half * w);
        }
    }
    (xs, ws)
}

/// Compensated (Neumaier) summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = NeumaierSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// erf by its Maclaurin series with compensated summation, |z| <= 3.
    fn erf_series(z: f64) -> f64 {
        let mut term = z;
        let mut s = NeumaierSum::default();
        s.add(z);
        for n in 1..200 {
            let nf = n as f64;
            term *= -z * z / nf;
            s.add(term / (2.0 * nf + 1.0));
        }
        2.0 / PI.sqrt() * s.value()
    }

    #[test]
    fn i0_at_zero_and_series() {
        assert_eq!(bessel_i0(0.0).unwrap(), 1.0);
        // oracle: 80-term power series
        let x: f64 = 2.42;
        let mut term = 1.0;
        let mut sum = 1.0;
        for n in 1..80 {
            term *= (x / 2.0).powi(2) / (n as f64).powi(2);
            sum += term;
        }
        let v = bessel_i0(x).unwrap();
        assert!(((v - sum) / sum).abs() < 1e-12, "{v} vs {sum}");
        assert!(bessel_i0(3.0).unwrap() > bessel_i0(2.0).unwrap());
    }

    #[test]
    fn i0_large_argument_matches_asymptotic() {
        // I0(x) ~ e^x / sqrt(2 pi x) (1 + 1/(8x) + 9/(128x^2) + 225/(3072 x^3))
        let x: f64 = 600.0;
        let asym = x.exp() / (2.0 * PI * x).sqrt()
            * (1.0 + 1.0 / (8.0 * x) + 9.0 / (128.0 * x * x) + 225.0 / (3072.0 * x.powi(3)));
        let v = bessel_i0(x).unwrap();
        assert!(((v - asym) / asym).abs() < 1e-10);
    }

    #[test]
    fn i0_domain_errors() {
        assert!(bessel_i0(-0.1).is_err());
        assert!(bessel_i0(700.5).is_err());
        assert!(bessel_i0(700.0).unwrap().is_finite());
    }

    #[test]
    fn noise_geq_examples() {
        let one = GaussianNoise::new(1.0).unwrap();
        assert!((noise_geq(0.0, one) - 0.5).abs() < 1e-15);
        let step = GaussianNoise::noiseless();
        assert_eq!(noise_geq(-3.0, step), 1.0);
        assert_eq!(noise_geq(0.0, step), 1.0);
        assert_eq!(noise_geq(2.0, step), 0.0);
        let phi1 = 0.5 * (1.0 + erf_series(1.0 / SQRT_2));
        assert!((noise_geq(-1.0, one) - phi1).abs() < 1e-12);
    }

    #[test]
    fn noise_geq_against_series_on_grid() {
        let noise = GaussianNoise::new(2.5).unwrap();
        for i in -100..=100 {
            let x = i as f64 * 0.1;
            let z = -x / 2.5;
            let oracle = 0.5 * (1.0 + erf_series(z / SQRT_2));
            assert!((noise_geq(x, noise) - oracle).abs() < 1e-12, "x = {x}");
        }
    }

    #[test]
    fn noise_rejects_negative_sigma() {
        assert!(GaussianNoise::new(-1e-9).is_err());
        assert!(GaussianNoise::new(f64::NAN).is_err());
    }

    #[test]
    fn eigenfunction_values() {
        assert!((oscillator_eigenfunction(0, 0.0).unwrap() - (2.0 * PI).powf(-0.25)).abs() < 1e-15);
        assert_eq!(oscillator_eigenfunction(1, 0.0).unwrap(), 0.0);
        assert!(oscillator_eigenfunction(201, 0.0).is_err());
    }

    #[test]
    fn eigenfunction_orthonormality() {
        let breaks: Vec<f64> = (0..=80).map(|i| -20.0 + 0.5 * i as f64).collect();
        let (xs, ws) = composite_gauss_legendre(&breaks, 20);
        let nmax = 30;
        let table: Vec<Vec<f64>> = xs.iter().map(|&x| oscillator_eigenfunctions(nmax, x)).collect();
        for n in 0..=nmax {
            for m in 0..=n {
                let s: f64 = table.iter().zip(&ws).map(|(u, w)| w * u[n] * u[m]).sum();
                let want = if n == m { 1.0 } else { 0.0 };
                assert!((s - want).abs() < 1e-8, "({n},{m}) -> {s}");
            }
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(10);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        // x^18 integrates to 2/19
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert!((s - 2.0 / 19.0).abs() < 1e-14);
    }

    #[test]
    fn overlap_trivial_cases() {
        let b = Complex64::new(1.3, -0.4);
        let v = displaced_overlap(0, 0, b).unwrap();
        assert!((v - Complex64::new((-b.norm_sqr() / 2.0).exp(), 0.0)).norm() < 1e-15);
        for k in 0..5 {
            for n in 0..5 {
                let v = displaced_overlap(k, n, Complex64::new(0.0, 0.0)).unwrap();
                assert_eq!(v.re, if k == n { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn overlap_high_precision_value() {
        // 40-digit reference for <15|D(2.1+0.7i)|10>
        let v = displaced_overlap(15, 10, Complex64::new(2.1, 0.7)).unwrap();
        let want = Complex64::new(-0.000_309_187_546_881_199_9, 0.008_141_938_734_538_297);
        assert!((v - want).norm() < 1e-15, "{v}");
    }

    #[test]
    fn overlap_against_column_recurrence() {
        // Independent route: D(b)|n+1> = (a^† - b*) D(b)|n> / sqrt(n+1)
        let b = Complex64::new(2.1, 0.7);
        let kmax = 80;
        let mut col: Vec<Complex64> = (0..=kmax)
            .map(|k| {
                let lm = -0.5 * b.norm_sqr() + k as f64 * b.norm().ln() - 0.5 * ln_factorial(k);
                Complex64::from_polar(lm.exp(), k as f64 * b.arg())
            })
            .collect();
        for n in 0..15 {
            for k in 0..=40 {
                let v = displaced_overlap(k, n, b).unwrap();
                let diff = (v - col[k]).norm();
                assert!(diff <= 1e-9 * col[k].norm().max(1e-3), "k={k} n={n}: {v} vs {}", col[k]);
            }
            let mut next = vec![Complex64::new(0.0, 0.0); kmax + 1];
            for k in 0..=kmax {
                let up = if k > 0 { col[k - 1] * (k as f64).sqrt() } else { Complex64::new(0.0, 0.0) };
                next[k] = (up - b.conj() * col[k]) / ((n + 1) as f64).sqrt();
            }
            col = next;
        }
    }

    #[test]
    fn overlap_column_unitarity() {
        for &bm in &[0.5, 3.0, 10.0] {
            let b = Complex64::from_polar(bm, 0.3);
            for n in 0..=20 {
                // adaptive cutoff: well past the Poisson bulk
                let kmax = (bm * bm + 12.0 * bm + 60.0) as usize;
                let s: f64 = (0..=kmax).map(|k| displaced_overlap(k, n, b).unwrap().norm_sqr()).sum();
                assert!((s - 1.0).abs() < 1e-8, "|b|={bm} n={n}: {s}");
            }
        }
    }

    #[test]
    fn overlap_limits() {
        assert!(displaced_overlap(0, 0, Complex64::new(64.0, 0.0)).is_err());
        assert!(displaced_overlap(MAX_OVERLAP_INDEX + 1, 0, Complex64::new(1.0, 0.0)).is_err());
        // large-amplitude entry stays finite
        let v = displaced_overlap(4000, 20, Complex64::new(63.0, 0.0)).unwrap();
        assert!(v.re.is_finite() && v.norm() > 1e-10);
    }

    proptest! {
        #[test]
        fn noise_geq_symmetry(x in -50.0f64..50.0, s in 0.01f64..20.0) {
            let n = GaussianNoise::new(s).unwrap();
            prop_assert!((noise_geq(x, n) + noise_geq(-x, n) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn noise_geq_nonincreasing(x in -50.0f64..50.0, dx in 0.0f64..5.0, s in 0.0f64..20.0) {
            let n = GaussianNoise::new(s).unwrap();
            prop_assert!(noise_geq(x + dx, n) <= noise_geq(x, n));
        }

        #[test]
        fn eigenfunction_recurrence(n in 1usize..199, x in -15.0f64..15.0) {
            let u = oscillator_eigenfunctions(n + 1, x);
            let lhs = x * u[n];
            let rhs = ((n + 1) as f64).sqrt() * u[n + 1] + (n as f64).sqrt() * u[n - 1];
            prop_assert!((lhs - rhs).abs() < 1e-9);
        }

        #[test]
        fn overlap_conjugate_symmetry(k in 0usize..40, n in 0usize..40, re in -4.0f64..4.0, im in -4.0f64..4.0) {
            let b = Complex64::new(re, im);
            let lhs = displaced_overlap(k, n, b).unwrap();
            let rhs = displaced_overlap(n, k, -b).unwrap().conj();
            prop_assert!((lhs - rhs).norm() <= 1e-10 * lhs.norm().max(1e-300));
        }
    }

    #[test]
    fn noise_limits() {
        let n = GaussianNoise::new(3.0).unwrap();
        assert_eq!(noise_geq(f64::INFINITY, n), 0.0);
        assert_eq!(noise_geq(f64::NEG_INFINITY, n), 1.0);
        assert_eq!(normal_cdf(0.0), 0.5);
    }
}
