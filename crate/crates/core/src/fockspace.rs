//! Pair-coherent states and the noisy sign POVMs of the photon-number
//! difference measurement.
//!
//! A coherent local oscillator `|alpha>` in mode `a+` is mixed with the
//! microscopic mode `a-` on a balanced splitter after a phase shift `theta`,
//! giving outputs `c'± = (a+ ± a- e^{-i theta}) / sqrt(2)`. The photon-count
//! difference `k+ - k-` plus Gaussian noise is classified `+1` when it is
//! `>= 0`. Tracing out the oscillator leaves a binary POVM on `a-`.
//!
//! The input factors as a two-mode displacement `D(alpha/√2) ⊗ D(alpha/√2)`
//! acting on a binomially split Fock state, so every output amplitude is a
//! finite sum of displaced-number-state overlaps. The dense
//! matrix-exponential route in [`brute`] is kept as an independent check.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::{bessel_i0, displaced_overlap, noise_geq, GaussianNoise, NeumaierSum};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub mod brute;

/// Default tail tolerance for [`pair_coherent`].
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;

/// Probability mass a column may lose to the outcome truncation.
pub const MASS_LOSS_TOL: f64 = 1e-10;

/// Entangled component `Σ c_n |n>|n>` with `c_n ∝ r0^{2n} / n!`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCoherentState {
    r0: f64,
    coeffs: Vec<f64>,
}

impl PairCoherentState {
    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Largest retained Fock index.
    pub fn cutoff(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).collect::<NeumaierSum>().value()
    }
}

/// Builds the pair-coherent coefficients, truncated at the smallest index
/// whose squared tail is below `tail_tol`.
pub fn pair_coherent(r0: f64, tail_tol: f64) -> Result<PairCoherentState> {
    if !(r0 >= 0.0) || !r0.is_finite() {
        return Err(Error::InvalidInput(format!("r0 must be finite and >= 0, got {r0}")));
    }
    if !(tail_tol > 0.0 && tail_tol <= 1e-6) {
        return Err(Error::InvalidInput(format!("tail_tol must lie in (0, 1e-6], got {tail_tol}")));
    }
    let q = r0 * r0;
    let norm = bessel_i0(2.0 * q)?.sqrt();
    if r0 == 0.0 {
        return Ok(PairCoherentState { r0, coeffs: vec![1.0] });
    }
    // generate well past the peak until terms are negligible
    let mut coeffs = vec![1.0 / norm];
    let mut n = 0usize;
    loop {
        let next = coeffs[n] * q / (n + 1) as f64;
        n += 1;
        coeffs.push(next);
        if (n as f64) > q && next * next < 1e-40 * tail_tol {
            break;
        }
    }
    // tails[i] = Σ_{j>i} c_j^2, summed from the small end
    let mut tail = 0.0;
    let mut cut = coeffs.len() - 1;
    for i in (0..coeffs.len()).rev() {
        if tail >= tail_tol {
            break;
        }
        cut = i;
        tail += coeffs[i] * coeffs[i];
    }
    coeffs.truncate(cut + 1);
    Ok(PairCoherentState { r0, coeffs })
}

/// Per-output-mode photon-count truncation used when none is given.
pub fn default_outcome_trunc(alpha: f64) -> usize {
    let a = alpha.ceil() as usize;
    (alpha * alpha).ceil() as usize + 10 * a + 20
}

/// Analyzer angle, oscillator amplitude, noise and outcome truncation of one
/// detector station.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementConfig {
    pub theta: f64,
    pub alpha: f64,
    pub sigma: GaussianNoise,
    pub outcome_trunc: usize,
}

impl MeasurementConfig {
    pub fn new(theta: f64, alpha: f64, sigma: GaussianNoise) -> Result<Self> {
        Self::with_outcome_trunc(theta, alpha, sigma, default_outcome_trunc(alpha.max(0.0)))
    }

    pub fn with_outcome_trunc(
        theta: f64,
        alpha: f64,
        sigma: GaussianNoise,
        outcome_trunc: usize,
    ) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::InvalidInput(format!("theta must be finite, got {theta}")));
        }
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidInput(format!("alpha must be finite and >= 0, got {alpha}")));
        }
        let min = default_outcome_trunc(alpha);
        if outcome_trunc < min {
            return Err(Error::InvalidInput(format!(
                "outcome_trunc {outcome_trunc} below the minimum {min} for alpha = {alpha}"
            )));
        }
        Ok(Self { theta, alpha, sigma, outcome_trunc })
    }

    fn displacement(&self) -> f64 {
        self.alpha / std::f64::consts::SQRT_2
    }
}

/// Dense `(k+, k-)` grid of output amplitudes for one input Fock state.
#[derive(Debug, Clone)]
pub struct OutputAmplitudes {
    trunc: usize,
    data: Vec<Complex64>,
}

impl OutputAmplitudes {
    pub fn trunc(&self) -> usize {
        self.trunc
    }

    pub fn get(&self, k_plus: usize, k_minus: usize) -> Complex64 {
        self.data[k_plus * (self.trunc + 1) + k_minus]
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), Complex64)> + '_ {
        let w = self.trunc + 1;
        self.data.iter().enumerate().map(move |(i, &a)| ((i / w, i % w), a))
    }

    pub fn total_probability(&self) -> f64 {
        self.data.iter().map(|a| a.norm_sqr()).collect::<NeumaierSum>().value()
    }
}

/// Real table `<k| D(b) |j>` for `k <= trunc`, `j <= jmax`, `b >= 0` real.
struct DisplacementTable {
    jmax: usize,
    data: Vec<f64>,
}

impl DisplacementTable {
    fn new(b: f64, trunc: usize, jmax: usize) -> Result<Self> {
        let mut data = vec![0.0; (trunc + 1) * (jmax + 1)];
        let beta = Complex64::new(b, 0.0);
        for k in 0..=trunc {
            for j in 0..=jmax {
                data[k * (jmax + 1) + j] = displaced_overlap(k, j, beta)?.re;
            }
        }
        Ok(Self { jmax, data })
    }

    #[inline]
    fn row(&self, k: usize) -> &[f64] {
        &self.data[k * (self.jmax + 1)..(k + 1) * (self.jmax + 1)]
    }
}

/// `sqrt(C(n, j) / 2^n) (-1)^{n-j}`: the balanced split of `|n>` into
/// `|j, n-j>`.
fn split_weights(nmax: usize) -> Vec<Vec<f64>> {
    let mut rows = Vec::with_capacity(nmax + 1);
    for n in 0..=nmax {
        let mut row = Vec::with_capacity(n + 1);
        let mut ln_binom = 0.0;
        for j in 0..=n {
            if j > 0 {
                ln_binom += ((n - j + 1) as f64).ln() - (j as f64).ln();
            }
            let mag = (0.5 * (ln_binom - n as f64 * std::f64::consts::LN_2)).exp();
            row.push(if (n - j) % 2 == 0 { mag } else { -mag });
        }
        rows.push(row);
    }
    rows
}

/// Real amplitudes at `theta = 0` for every input `n <= nmax` at one
/// output pattern.
#[inline]
fn amplitudes_at(
    table: &DisplacementTable,
    split: &[Vec<f64>],
    k_plus: usize,
    k_minus: usize,
    out: &mut [f64],
) {
    let dp = table.row(k_plus);
    let dm = table.row(k_minus);
    for (n, (o, w)) in out.iter_mut().zip(split).enumerate() {
        let mut s = 0.0;
        for (j, wj) in w.iter().enumerate() {
            s += wj * dp[j] * dm[n - j];
        }
        *o = s;
    }
}

/// Output amplitudes `<k+, k-| U (|alpha> ⊗ |n>)`.
pub fn output_amplitudes(n: usize, config: &MeasurementConfig) -> Result<OutputAmplitudes> {
    let trunc = config.outcome_trunc;
    let table = DisplacementTable::new(config.displacement(), trunc, n)?;
    let split = split_weights(n);
    let phase = Complex64::from_polar(1.0, -(n as f64) * config.theta);
    let mut data = Vec::with_capacity((trunc + 1) * (trunc + 1));
    let mut buf = vec![0.0; n + 1];
    for kp in 0..=trunc {
        for km in 0..=trunc {
            amplitudes_at(&table, &split, kp, km, &mut buf);
            data.push(phase * buf[n]);
        }
    }
    let amps = OutputAmplitudes { trunc, data };
    let mass = amps.total_probability();
    if mass < 1.0 - MASS_LOSS_TOL {
        return Err(Error::Truncation(format!(
            "outcome_trunc {trunc} keeps only {mass} of the probability for n = {n}"
        )));
    }
    Ok(amps)
}

/// σ-independent part of the sign POVM at `theta = 0`.
///
/// For every count difference `d = k+ - k-` it stores the real symmetric
/// matrix `G_d[m][n] = Σ_{k+ - k- = d} A(k; m) A(k; n)`. Any noise level
/// then gives `E+ = Σ_d G_d · P(noise >= -d)`.
#[derive(Debug, Clone)]
pub struct DifferenceKernel {
    alpha: f64,
    outcome_trunc: usize,
    dim: usize,
    /// Indexed by `d + outcome_trunc`; each block is `dim * dim`, row-major.
    blocks: Vec<f64>,
}

impl DifferenceKernel {
    pub fn new(alpha: f64, outcome_trunc: usize, n_pc: usize) -> Result<Self> {
        // validate via the config constructor
        let cfg = MeasurementConfig::with_outcome_trunc(0.0, alpha, GaussianNoise::noiseless(), outcome_trunc)?;
        let trunc = cfg.outcome_trunc;
        let dim = n_pc + 1;
        let table = DisplacementTable::new(cfg.displacement(), trunc, n_pc)?;
        let split = split_weights(n_pc);

        let block_for = |d: i64| -> Vec<f64> {
            let mut acc = vec![NeumaierSum::default(); dim * dim];
            let mut amp = vec![0.0; dim];
            let (kp0, km0) = if d >= 0 { (d as usize, 0) } else { (0, (-d) as usize) };
            let steps = trunc + 1 - d.unsigned_abs() as usize;
            for s in 0..steps {
                amplitudes_at(&table, &split, kp0 + s, km0 + s, &mut amp);
                for m in 0..dim {
                    let am = amp[m];
                    if am == 0.0 {
                        continue;
                    }
                    for n in m..dim {
                        acc[m * dim + n].add(am * amp[n]);
                    }
                }
            }
            let mut out = vec![0.0; dim * dim];
            for m in 0..dim {
                for n in m..dim {
                    let v = acc[m * dim + n].value();
                    out[m * dim + n] = v;
                    out[n * dim + m] = v;
                }
            }
            out
        };

        let t = trunc as i64;
        #[cfg(feature = "parallel")]
        let per_d: Vec<Vec<f64>> = (-t..=t).into_par_iter().map(block_for).collect();
        #[cfg(not(feature = "parallel"))]
        let per_d: Vec<Vec<f64>> = (-t..=t).map(block_for).collect();

        let kernel = Self { alpha, outcome_trunc: trunc, dim, blocks: per_d.concat() };
        for n in 0..dim {
            let mass = kernel.completeness()[n * dim + n];
            if mass < 1.0 - MASS_LOSS_TOL {
                return Err(Error::Truncation(format!(
                    "outcome_trunc {trunc} keeps only {mass} of the probability for n = {n} at alpha = {alpha}"
                )));
            }
        }
        Ok(kernel)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn outcome_trunc(&self) -> usize {
        self.outcome_trunc
    }

    /// Number of retained Fock levels of the microscopic mode.
    pub fn dim(&self) -> usize {
        self.dim
    }

    fn block(&self, d: i64) -> &[f64] {
        let i = (d + self.outcome_trunc as i64) as usize;
        let sz = self.dim * self.dim;
        &self.blocks[i * sz..(i + 1) * sz]
    }

    /// `Σ_d G_d`, the Gram matrix of the truncated output columns.
    pub fn completeness(&self) -> Vec<f64> {
        self.weighted(|_| 1.0)
    }

    /// Probability distribution of the count difference for input `|n>`.
    pub fn difference_distribution(&self, n: usize) -> Vec<(i64, f64)> {
        let t = self.outcome_trunc as i64;
        (-t..=t).map(|d| (d, self.block(d)[n * self.dim + n])).collect()
    }

    fn weighted(&self, weight: impl Fn(i64) -> f64) -> Vec<f64> {
        let sz = self.dim * self.dim;
        let mut acc = vec![NeumaierSum::default(); sz];
        let t = self.outcome_trunc as i64;
        for d in -t..=t {
            let w = weight(d);
            if w == 0.0 {
                continue;
            }
            for (a, g) in acc.iter_mut().zip(self.block(d)) {
                a.add(w * g);
            }
        }
        acc.iter().map(|a| a.value()).collect()
    }

    /// Real `theta = 0` matrix of `E+` for the given noise.
    pub fn plus_matrix(&self, sigma: GaussianNoise) -> Vec<f64> {
        self.weighted(|d| noise_geq(-(d as f64), sigma))
    }

    /// Sign POVM at analyzer angle `theta`.
    pub fn povm(&self, theta: f64, sigma: GaussianNoise) -> Result<SignPovm> {
        let config = MeasurementConfig::with_outcome_trunc(theta, self.alpha, sigma, self.outcome_trunc)?;
        let real = self.plus_matrix(sigma);
        Ok(SignPovm::from_real(config, self.dim, &real))
    }
}

/// Binary "+" effect on the microscopic mode, in the Fock basis.
#[derive(Debug, Clone)]
pub struct SignPovm {
    config: MeasurementConfig,
    matrix: DMatrix<Complex64>,
}

impl SignPovm {
    /// Applies `[E(θ)]_{mn} = e^{i(m-n)θ} [E(0)]_{mn}`.
    fn from_real(config: MeasurementConfig, dim: usize, real: &[f64]) -> Self {
        let theta = config.theta;
        let matrix = DMatrix::from_fn(dim, dim, |m, n| {
            Complex64::from_polar(real[m * dim + n], (m as f64 - n as f64) * theta)
        });
        Self { config, matrix }
    }

    pub(crate) fn from_matrix(config: MeasurementConfig, matrix: DMatrix<Complex64>) -> Self {
        Self { config, matrix }
    }

    pub fn config(&self) -> &MeasurementConfig {
        &self.config
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn entry(&self, m: usize, n: usize) -> Complex64 {
        self.matrix[(m, n)]
    }

    /// Same effect at another analyzer angle.
    pub fn rotated(&self, theta: f64) -> SignPovm {
        let shift = theta - self.config.theta;
        let matrix = DMatrix::from_fn(self.dim(), self.dim(), |m, n| {
            self.matrix[(m, n)] * Complex64::from_polar(1.0, (m as f64 - n as f64) * shift)
        });
        SignPovm { config: MeasurementConfig { theta, ..self.config }, matrix }
    }

    /// Largest entrywise deviation from another POVM.
    pub fn max_abs_diff(&self, other: &SignPovm) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        Ok((&self.matrix - &other.matrix).iter().map(|z| z.norm()).fold(0.0, f64::max))
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let herm = (&self.matrix + self.matrix.adjoint()) * Complex64::new(0.5, 0.0);
        let mut ev: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Sign POVM for one station, with `N_pc = n_pc` retained Fock levels.
pub fn sign_povm(config: &MeasurementConfig, n_pc: usize) -> Result<SignPovm> {
    DifferenceKernel::new(config.alpha, config.outcome_trunc, n_pc)?.povm(config.theta, config.sigma)
}

/// Complementary "−" effect for the same configuration.
pub fn sign_povm_minus(config: &MeasurementConfig, n_pc: usize) -> Result<SignPovm> {
    let kernel = DifferenceKernel::new(config.alpha, config.outcome_trunc, n_pc)?;
    let real = kernel.weighted(|d| 1.0 - noise_geq(-(d as f64), config.sigma));
    Ok(SignPovm::from_real(*config, kernel.dim, &real))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn noiseless(alpha: f64, theta: f64) -> MeasurementConfig {
        MeasurementConfig::new(theta, alpha, GaussianNoise::noiseless()).unwrap()
    }

    #[test]
    fn pair_coherent_vacuum() {
        let s = pair_coherent(0.0, 1e-12).unwrap();
        assert_eq!(s.coeffs(), &[1.0]);
    }

    #[test]
    fn pair_coherent_ratio_and_norm() {
        let s = pair_coherent(1.1, 1e-12).unwrap();
        let c = s.coeffs();
        assert!((c[1] / c[0] - 1.21).abs() < 1e-12);
        for n in 0..c.len() - 1 {
            assert!((c[n + 1] / c[n] - 1.21 / (n + 1) as f64).abs() < 1e-12);
        }
        // oracle: the full untruncated series
        let i0 = bessel_i0(2.0 * 1.21).unwrap();
        let mut t = 1.0f64;
        let mut full = 0.0;
        for n in 0..200 {
            if n > 0 {
                t *= 1.21 / n as f64;
            }
            full += t * t / i0;
        }
        assert!((full - 1.0).abs() < 1e-13);
        let norm = s.norm_sqr();
        assert!(norm <= 1.0 + 1e-15 && norm >= 1.0 - 1e-12, "{norm}");
        assert!(s.cutoff() <= 25);
        // smallest such cutoff
        let shorter: f64 = c[..c.len() - 1].iter().map(|x| x * x).sum();
        assert!(1.0 - shorter >= 1e-12 * 0.999);
    }

    #[test]
    fn pair_coherent_rejects_bad_input() {
        assert!(pair_coherent(-1.0, 1e-12).is_err());
        assert!(pair_coherent(1.0, 1e-3).is_err());
        assert!(pair_coherent(1.0, 0.0).is_err());
    }

    #[test]
    fn config_truncation_floor() {
        assert_eq!(default_outcome_trunc(2.0), 4 + 20 + 20);
        assert!(MeasurementConfig::with_outcome_trunc(0.0, 2.0, GaussianNoise::noiseless(), 43).is_err());
        assert!(MeasurementConfig::new(0.0, -1.0, GaussianNoise::noiseless()).is_err());
    }

    #[test]
    fn amplitudes_vacuum_and_binomial() {
        let a = output_amplitudes(0, &noiseless(0.0, 0.0)).unwrap();
        assert_eq!(a.get(0, 0), Complex64::new(1.0, 0.0));
        assert!((a.total_probability() - 1.0).abs() < 1e-15);

        let a = output_amplitudes(2, &noiseless(0.0, 0.7)).unwrap();
        assert!((a.get(2, 0).norm_sqr() - 0.25).abs() < 1e-14);
        assert!((a.get(1, 1).norm_sqr() - 0.5).abs() < 1e-14);
        assert!((a.get(0, 2).norm_sqr() - 0.25).abs() < 1e-14);
    }

    #[test]
    fn amplitudes_coherent_split_is_poissonian() {
        let a = output_amplitudes(0, &noiseless(2.0, 0.0)).unwrap();
        let poisson = |k: usize| {
            let mean = 2.0f64;
            (-mean + k as f64 * mean.ln() - libm::lgamma(k as f64 + 1.0)).exp()
        };
        for kp in 0..15 {
            for km in 0..15 {
                let want = poisson(kp) * poisson(km);
                assert!((a.get(kp, km).norm_sqr() - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn amplitudes_flag_insufficient_truncation() {
        let cfg = noiseless(0.0, 0.0);
        assert!(output_amplitudes(40, &cfg).is_err());
    }

    #[test]
    fn povm_noiseless_vacuum_oscillator() {
        let e = sign_povm(&noiseless(0.0, 0.0), 4).unwrap();
        assert!((e.entry(0, 0).re - 1.0).abs() < 1e-14);
        assert!((e.entry(1, 1).re - 0.5).abs() < 1e-14);
        assert!(e.entry(0, 1).norm() < 1e-14);
        assert!((e.entry(2, 2).re - 0.75).abs() < 1e-14);
    }

    #[test]
    fn povm_completeness() {
        for &(alpha, sigma) in &[(0.0, 0.0), (1.5, 0.0), (3.0, 2.0), (6.0, 0.7)] {
            let cfg = MeasurementConfig::new(0.4, alpha, GaussianNoise::new(sigma).unwrap()).unwrap();
            let plus = sign_povm(&cfg, 10).unwrap();
            let minus = sign_povm_minus(&cfg, 10).unwrap();
            let sum = plus.matrix() + minus.matrix();
            let id = DMatrix::<Complex64>::identity(11, 11);
            let err = (&sum - &id).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(err < 1e-10, "alpha {alpha} sigma {sigma}: {err}");
        }
    }

    #[test]
    fn povm_structure() {
        for &(alpha, sigma) in &[(0.0, 0.0), (2.0, 0.0), (4.0, 3.0)] {
            let cfg = MeasurementConfig::new(PI / 5.0, alpha, GaussianNoise::new(sigma).unwrap()).unwrap();
            let e = sign_povm(&cfg, 11).unwrap();
            assert!(e.hermiticity_error() < 1e-10);
            let ev = e.eigenvalues();
            assert!(ev[0] >= -1e-8 && ev[ev.len() - 1] <= 1.0 + 1e-8, "{ev:?}");
            // phase covariance against a direct build at theta = 0
            let e0 = sign_povm(&MeasurementConfig { theta: 0.0, ..cfg }, 11).unwrap();
            for m in 0..12 {
                for n in 0..12 {
                    let want = e0.entry(m, n) * Complex64::from_polar(1.0, (m as f64 - n as f64) * cfg.theta);
                    assert!((e.entry(m, n) - want).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn povm_flattens_under_huge_noise() {
        let alpha = 3.0;
        let cfg = MeasurementConfig::new(0.3, alpha, GaussianNoise::new(1e4 * alpha).unwrap()).unwrap();
        let e = sign_povm(&cfg, 11).unwrap();
        for m in 0..12 {
            for n in 0..12 {
                let want = if m == n { 0.5 } else { 0.0 };
                assert!((e.entry(m, n) - Complex64::new(want, 0.0)).norm() <= 1e-3);
            }
        }
    }

    #[test]
    fn povm_converges_in_outcome_truncation() {
        let alpha = 2.0;
        let t = default_outcome_trunc(alpha);
        let a = DifferenceKernel::new(alpha, t, 11).unwrap().plus_matrix(GaussianNoise::noiseless());
        let b = DifferenceKernel::new(alpha, 2 * t, 11).unwrap().plus_matrix(GaussianNoise::noiseless());
        let diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff <= 1e-8, "{diff}");
    }

    #[test]
    fn reduced_distribution_is_theta_independent() {
        let s = pair_coherent(1.1, 1e-12).unwrap();
        let k = DifferenceKernel::new(2.5, default_outcome_trunc(2.5), s.cutoff()).unwrap();
        let base: f64 = {
            let e = k.povm(0.0, GaussianNoise::noiseless()).unwrap();
            s.coeffs().iter().enumerate().map(|(n, c)| c * c * e.entry(n, n).re).sum()
        };
        for &theta in &[0.3, 1.0, 2.5, -4.0] {
            let e = k.povm(theta, GaussianNoise::noiseless()).unwrap();
            let p: f64 = s.coeffs().iter().enumerate().map(|(n, c)| c * c * e.entry(n, n).re).sum();
            assert!((p - base).abs() < 1e-10);
        }
    }

    #[test]
    fn rotated_matches_direct_build() {
        let cfg = MeasurementConfig::new(0.0, 1.0, GaussianNoise::new(0.5).unwrap()).unwrap();
        let e = sign_povm(&cfg, 6).unwrap().rotated(1.3);
        let direct = sign_povm(&MeasurementConfig { theta: 1.3, ..cfg }, 6).unwrap();
        assert!(e.max_abs_diff(&direct).unwrap() < 1e-13);
    }
}
