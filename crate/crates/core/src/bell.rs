//! Joint and marginal "+" probabilities of the noisy sign measurements on the
//! pair-coherent state, and the Bell–Clauser–Horne ratio
//!
//! ```text
//! S = [P++(θ,φ) − P++(θ,φ′) + P++(θ′,φ) + P++(θ′,φ′)] / [P+A(θ′) + P+B(φ)]
//! ```
//!
//! Local hidden-variable models satisfy `S <= 1`. The marginals in the
//! denominator are smeared by the same detector noise as the joints.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use crate::error::{Error, Result};
use crate::fockspace::{
    default_outcome_trunc, pair_coherent, DifferenceKernel, PairCoherentState, SignPovm, DEFAULT_TAIL_TOL,
};
use crate::specfun::{GaussianNoise, NeumaierSum};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Largest imaginary part tolerated in an assembled probability.
pub const IMAG_RESIDUE_TOL: f64 = 1e-10;
/// Default bisection tolerance in sigma (counts).
pub const DEFAULT_SIGMA_TOL: f64 = 1e-3;

/// The four analyzer angles, in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellSettings {
    pub theta: f64,
    pub theta_prime: f64,
    pub phi: f64,
    pub phi_prime: f64,
}

impl BellSettings {
    /// `θ = 0, φ = −π/4, θ′ = π/2, φ′ = −3π/4`.
    pub const STANDARD: BellSettings = BellSettings {
        theta: 0.0,
        theta_prime: FRAC_PI_2,
        phi: -FRAC_PI_4,
        phi_prime: -3.0 * FRAC_PI_4,
    };

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("theta", self.theta),
            ("theta_prime", self.theta_prime),
            ("phi", self.phi),
            ("phi_prime", self.phi_prime),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("{name} must be finite, got {v}")));
            }
        }
        Ok(())
    }

    /// The four `(A angle, B angle)` pairs in numerator order.
    pub fn joint_pairs(&self) -> [(f64, f64); 4] {
        [
            (self.theta, self.phi),
            (self.theta, self.phi_prime),
            (self.theta_prime, self.phi),
            (self.theta_prime, self.phi_prime),
        ]
    }
}

impl Default for BellSettings {
    fn default() -> Self {
        Self::STANDARD
    }
}

/// Six probabilities and the ratio built from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellResult {
    /// Joints at `(θ,φ), (θ,φ′), (θ′,φ), (θ′,φ′)`.
    pub p_pp: [f64; 4],
    /// `P+A(θ′)`.
    pub p_a: f64,
    /// `P+B(φ)`.
    pub p_b: f64,
    pub s: f64,
}

impl BellResult {
    pub fn from_probabilities(p_pp: [f64; 4], p_a: f64, p_b: f64) -> Self {
        let s = bell_numerator(&p_pp) / (p_a + p_b);
        Self { p_pp, p_a, p_b, s }
    }

    pub fn numerator(&self) -> f64 {
        bell_numerator(&self.p_pp)
    }

    pub fn denominator(&self) -> f64 {
        self.p_a + self.p_b
    }

    pub fn violates(&self) -> bool {
        self.s > 1.0
    }
}

fn bell_numerator(p: &[f64; 4]) -> f64 {
    p[0] - p[1] + p[2] + p[3]
}

/// Truncation controls for the Fock-space route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub tail_tol: f64,
    /// Per-output-mode count truncation; `None` uses the default rule.
    pub outcome_trunc: Option<usize>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { tail_tol: DEFAULT_TAIL_TOL, outcome_trunc: None }
    }
}

fn check_dims(state: &PairCoherentState, povm: &SignPovm) -> Result<()> {
    let expected = state.coeffs().len();
    if povm.dim() != expected {
        return Err(Error::DimensionMismatch { expected, got: povm.dim() });
    }
    Ok(())
}

/// `Σ_{n,m} c_n c_m [E+A]_{nm} [E+B]_{nm}`.
pub fn joint_plus(state: &PairCoherentState, povm_a: &SignPovm, povm_b: &SignPovm) -> Result<f64> {
    check_dims(state, povm_a)?;
    check_dims(state, povm_b)?;
    let c = state.coeffs();
    let mut re = NeumaierSum::default();
    let mut im = NeumaierSum::default();
    for n in 0..c.len() {
        for m in 0..c.len() {
            let z: Complex64 = povm_a.entry(n, m) * povm_b.entry(n, m) * (c[n] * c[m]);
            re.add(z.re);
            im.add(z.im);
        }
    }
    if im.value().abs() > IMAG_RESIDUE_TOL {
        return Err(Error::Domain(format!("joint probability has imaginary part {}", im.value())));
    }
    Ok(re.value())
}

/// `Σ_n c_n^2 [E+]_{nn}`.
pub fn marginal_plus(state: &PairCoherentState, povm: &SignPovm) -> Result<f64> {
    check_dims(state, povm)?;
    Ok(state
        .coeffs()
        .iter()
        .enumerate()
        .map(|(n, c)| c * c * povm.entry(n, n).re)
        .collect::<NeumaierSum>()
        .value())
}

/// Fock-space Bell evaluator at fixed `r0` and `alpha = beta`; reusable
/// across noise levels and angles.
#[derive(Debug, Clone)]
pub struct FockBell {
    state: PairCoherentState,
    kernel: DifferenceKernel,
}

impl FockBell {
    pub fn new(r0: f64, alpha: f64, tol: &Tolerances) -> Result<Self> {
        let state = pair_coherent(r0, tol.tail_tol)?;
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidInput(format!("alpha must be finite and >= 0, got {alpha}")));
        }
        let trunc = tol.outcome_trunc.unwrap_or_else(|| default_outcome_trunc(alpha));
        let kernel = DifferenceKernel::new(alpha, trunc, state.cutoff())?;
        Ok(Self { state, kernel })
    }

    pub fn state(&self) -> &PairCoherentState {
        &self.state
    }

    pub fn alpha(&self) -> f64 {
        self.kernel.alpha()
    }

    pub fn outcome_trunc(&self) -> usize {
        self.kernel.outcome_trunc()
    }

    pub fn evaluate(&self, sigma: GaussianNoise, settings: &BellSettings) -> Result<BellResult> {
        settings.validate()?;
        let base = self.kernel.povm(0.0, sigma)?;
        let mut p_pp = [0.0; 4];
        for (p, (ta, tb)) in p_pp.iter_mut().zip(settings.joint_pairs()) {
            *p = joint_plus(&self.state, &base.rotated(ta), &base.rotated(tb))?;
        }
        let p_a = marginal_plus(&self.state, &base.rotated(settings.theta_prime))?;
        let p_b = marginal_plus(&self.state, &base.rotated(settings.phi))?;
        Ok(BellResult::from_probabilities(p_pp, p_a, p_b))
    }

    /// Bisection for the largest sigma (counts) that still gives `s > 1`.
    pub fn max_sigma(&self, settings: &BellSettings, bracket: (f64, f64), tol: f64) -> Result<f64> {
        let s_at = |sigma: f64| -> Result<f64> { Ok(self.evaluate(GaussianNoise::new(sigma)?, settings)?.s) };
        bisect_violation(s_at, bracket, tol)
    }
}

/// Largest `x` in the bracket with `s(x) > 1`, assuming `s` nonincreasing.
///
/// Monotonicity is asserted at every midpoint against the current ends.
pub(crate) fn bisect_violation(
    s_at: impl Fn(f64) -> Result<f64>,
    bracket: (f64, f64),
    tol: f64,
) -> Result<f64> {
    const MONO_SLACK: f64 = 1e-9;
    let (mut lo, mut hi) = bracket;
    if !(lo >= 0.0 && hi > lo && tol > 0.0) {
        return Err(Error::InvalidInput(format!("bad bracket ({lo}, {hi}) or tolerance {tol}")));
    }
    let mut s_lo = s_at(lo)?;
    let mut s_hi = s_at(hi)?;
    if s_lo <= 1.0 {
        return Err(Error::NoViolation(format!("s = {s_lo} <= 1 at the low end {lo}")));
    }
    if s_hi > 1.0 {
        return Err(Error::InvalidBracket(format!("s = {s_hi} > 1 at the high end {hi}")));
    }
    if s_hi > s_lo + MONO_SLACK {
        return Err(Error::NonMonotone(format!("s({hi}) = {s_hi} exceeds s({lo}) = {s_lo}")));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let s_mid = s_at(mid)?;
        if s_mid > s_lo + MONO_SLACK || s_mid < s_hi - MONO_SLACK {
            return Err(Error::NonMonotone(format!(
                "s({mid}) = {s_mid} outside [{s_hi}, {s_lo}]"
            )));
        }
        if s_mid > 1.0 {
            lo = mid;
            s_lo = s_mid;
        } else {
            hi = mid;
            s_hi = s_mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Bell ratio for the pair-coherent state with `alpha = beta`.
pub fn bell_ratio(
    r0: f64,
    alpha: f64,
    sigma: GaussianNoise,
    settings: &BellSettings,
    tol: &Tolerances,
) -> Result<BellResult> {
    FockBell::new(r0, alpha, tol)?.evaluate(sigma, settings)
}

fn map_points<T: Send>(alphas: &[f64], f: impl Fn(f64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    let eval = |&a: &f64| f(a).map_err(|e| Error::ScanPoint { alpha: a, source: Box::new(e) });
    #[cfg(feature = "parallel")]
    let out: Result<Vec<T>> = alphas.par_iter().map(eval).collect();
    #[cfg(not(feature = "parallel"))]
    let out: Result<Vec<T>> = alphas.iter().map(eval).collect();
    out
}

fn check_sorted(alphas: &[f64]) -> Result<()> {
    if alphas.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::InvalidInput("alphas must be sorted ascending".into()));
    }
    Ok(())
}

/// `(alpha, s)` for each oscillator amplitude, in input order.
pub fn scan_alpha(
    r0: f64,
    sigma: GaussianNoise,
    settings: &BellSettings,
    alphas: &[f64],
    tol: &Tolerances,
) -> Result<Vec<(f64, f64)>> {
    check_sorted(alphas)?;
    map_points(alphas, |a| Ok((a, bell_ratio(r0, a, sigma, settings, tol)?.s)))
}

/// Default bisection bracket in counts: `[0, alpha]`, i.e. one vacuum
/// quadrature unit of noise at the top.
pub fn default_sigma_bracket(alpha: f64) -> (f64, f64) {
    (0.0, alpha.max(1.0))
}

/// Largest sigma (counts) still violating `S <= 1`.
pub fn max_sigma(
    r0: f64,
    alpha: f64,
    settings: &BellSettings,
    bracket: (f64, f64),
    tol: f64,
    tolerances: &Tolerances,
) -> Result<f64> {
    FockBell::new(r0, alpha, tolerances)?.max_sigma(settings, bracket, tol)
}

/// `(alpha, sigma_max)` for each amplitude, in input order.
pub fn scan_sigma_max(
    r0: f64,
    settings: &BellSettings,
    alphas: &[f64],
    tol: f64,
    tolerances: &Tolerances,
) -> Result<Vec<(f64, f64)>> {
    check_sorted(alphas)?;
    map_points(alphas, |a| Ok((a, max_sigma(r0, a, settings, default_sigma_bracket(a), tol, tolerances)?)))
}
