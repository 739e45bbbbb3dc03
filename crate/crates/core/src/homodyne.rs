//! Large-amplitude limit: with a strong oscillator the count difference is
//! `α X_θ`, where `X_θ = a e^{-iθ} + a^† e^{iθ}` is the quadrature of the
//! microscopic mode (vacuum variance 1). Noise `σ` in counts corresponds to
//! `σ0 = σ / α` in quadrature units.
//!
//! The joint quadrature wavefunction of the pair-coherent modes is
//! `ψ(x, y) = Σ_n c_n e^{-in(θ+φ)} u_n(x) u_n(y)`. Since `|ψ|^2` is a finite
//! sum of products, the sign probabilities reduce to one-dimensional
//! integrals `I_nm(σ0) = ∫ u_n u_m P(noise >= -x) dx`:
//!
//! ```text
//! P++ = Σ_{n,m} c_n c_m cos((n-m)(θ+φ)) I_nm^2,    P+ = Σ_n c_n^2 I_nn.
//! ```

use serde::{Deserialize, Serialize};

use crate::bell::{bisect_violation, BellResult, BellSettings};
use crate::error::{Error, Result};
use crate::fockspace::{pair_coherent, PairCoherentState, DEFAULT_TAIL_TOL};
use crate::specfun::{composite_gauss_legendre, noise_geq, oscillator_eigenfunctions, GaussianNoise, NeumaierSum};

/// Gauss–Legendre points per panel.
const PANEL_ORDER: usize = 16;
/// Largest change tolerated when the node count doubles.
pub const RICHARDSON_TOL: f64 = 1e-6;

/// Integration range `[-half_width, half_width]` and node count per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    pub half_width: f64,
    pub nodes: usize,
}

impl Default for QuadratureGrid {
    fn default() -> Self {
        Self { half_width: 12.0, nodes: 801 }
    }
}

impl QuadratureGrid {
    pub fn doubled(&self) -> Self {
        Self { nodes: 2 * self.nodes, ..*self }
    }

    /// Composite rule with a breakpoint at 0 and, for `sigma0 > 0`, extra
    /// breakpoints at `±sigma0 · 2^k` to resolve the noise edge.
    pub fn rule(&self, sigma0: f64) -> (Vec<f64>, Vec<f64>) {
        let l = self.half_width;
        let mut panels = self.nodes.div_ceil(PANEL_ORDER).max(2);
        panels += panels % 2;
        let h = 2.0 * l / panels as f64;
        let mut breaks: Vec<f64> = (0..=panels).map(|i| -l + h * i as f64).collect();
        if sigma0 > 0.0 {
            let mut b = sigma0 / 8.0;
            while b < h {
                breaks.push(b);
                breaks.push(-b);
                b *= 2.0;
            }
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        composite_gauss_legendre(&breaks, PANEL_ORDER)
    }
}

/// Joint quadrature distribution for one angle sum `θ + φ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureModel {
    pub state: PairCoherentState,
    pub angle_sum: f64,
    pub grid: QuadratureGrid,
}

impl QuadratureModel {
    pub fn new(r0: f64, angle_sum: f64, grid: QuadratureGrid) -> Result<Self> {
        if !angle_sum.is_finite() {
            return Err(Error::InvalidInput(format!("angle sum must be finite, got {angle_sum}")));
        }
        if !(grid.half_width > 0.0) || grid.nodes < 2 {
            return Err(Error::InvalidInput("quadrature grid needs half_width > 0 and >= 2 nodes".into()));
        }
        Ok(Self { state: pair_coherent(r0, DEFAULT_TAIL_TOL)?, angle_sum, grid })
    }
}

/// `|ψ(x, y)|^2`.
pub fn joint_pdf(model: &QuadratureModel, x: f64, y: f64) -> f64 {
    let c = model.state.coeffs();
    let nmax = c.len() - 1;
    let ux = oscillator_eigenfunctions(nmax, x);
    let uy = oscillator_eigenfunctions(nmax, y);
    let (mut re, mut im) = (0.0, 0.0);
    for n in 0..=nmax {
        let a = c[n] * ux[n] * uy[n];
        let ph = -(n as f64) * model.angle_sum;
        re += a * ph.cos();
        im += a * ph.sin();
    }
    re * re + im * im
}

/// `Σ_n c_n^2 u_n(x)^2`, the single-mode quadrature density.
pub fn marginal_pdf(state: &PairCoherentState, x: f64) -> f64 {
    let c = state.coeffs();
    let u = oscillator_eigenfunctions(c.len() - 1, x);
    c.iter().zip(&u).map(|(c, u)| c * c * u * u).sum()
}

/// Matrix `I_nm = ∫ u_n(x) u_m(x) P(noise >= -x) dx`, row-major.
fn sign_overlaps(nmax: usize, sigma0: f64, grid: &QuadratureGrid) -> Vec<f64> {
    let dim = nmax + 1;
    let noise = GaussianNoise::new(sigma0).expect("validated by caller");
    let (xs, ws) = grid.rule(sigma0);
    let mut acc = vec![NeumaierSum::default(); dim * dim];
    for (&x, &w) in xs.iter().zip(&ws) {
        let g = noise_geq(-x, noise) * w;
        if g == 0.0 {
            continue;
        }
        let u = oscillator_eigenfunctions(nmax, x);
        for n in 0..dim {
            for m in n..dim {
                acc[n * dim + m].add(g * u[n] * u[m]);
            }
        }
    }
    let mut out = vec![0.0; dim * dim];
    for n in 0..dim {
        for m in n..dim {
            let v = acc[n * dim + m].value();
            out[n * dim + m] = v;
            out[m * dim + n] = v;
        }
    }
    out
}

fn check_sigma0(sigma0: f64) -> Result<()> {
    if !(sigma0 >= 0.0) || !sigma0.is_finite() {
        return Err(Error::InvalidInput(format!("sigma0 must be finite and >= 0, got {sigma0}")));
    }
    Ok(())
}

/// Sign probabilities of the homodyne limit for one state.
struct SignProbabilities {
    state: PairCoherentState,
    overlaps: Vec<f64>,
}

impl SignProbabilities {
    fn on_grid(state: &PairCoherentState, sigma0: f64, grid: &QuadratureGrid) -> Self {
        Self { state: state.clone(), overlaps: sign_overlaps(state.cutoff(), sigma0, grid) }
    }

    /// Evaluates on `grid` and on the doubled grid; fails when they differ
    /// by more than [`RICHARDSON_TOL`] and returns the finer one.
    fn checked(state: &PairCoherentState, sigma0: f64, grid: &QuadratureGrid) -> Result<Self> {
        check_sigma0(sigma0)?;
        let coarse = Self::on_grid(state, sigma0, grid);
        let fine = Self::on_grid(state, sigma0, &grid.doubled());
        let moved = coarse
            .overlaps
            .iter()
            .zip(&fine.overlaps)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if moved > RICHARDSON_TOL {
            return Err(Error::GridInsufficient(format!(
                "doubling {} nodes moved an overlap by {moved:e}",
                grid.nodes
            )));
        }
        Ok(fine)
    }

    fn plus_plus(&self, angle_sum: f64) -> f64 {
        let c = self.state.coeffs();
        let dim = c.len();
        let mut s = NeumaierSum::default();
        for n in 0..dim {
            for m in 0..dim {
                let i = self.overlaps[n * dim + m];
                s.add(c[n] * c[m] * ((n as f64 - m as f64) * angle_sum).cos() * i * i);
            }
        }
        s.value()
    }

    fn plus(&self) -> f64 {
        let c = self.state.coeffs();
        let dim = c.len();
        c.iter().enumerate().map(|(n, c)| c * c * self.overlaps[n * dim + n]).sum()
    }
}

/// `∬ |ψ|^2 P(noise >= -x) P(noise >= -y) dx dy` with noise `sigma0` in
/// quadrature units.
pub fn plus_plus_prob(model: &QuadratureModel, sigma0: f64) -> Result<f64> {
    Ok(SignProbabilities::checked(&model.state, sigma0, &model.grid)?.plus_plus(model.angle_sum))
}

/// Single-station "+" probability; independent of the analyzer angle.
pub fn plus_prob(model: &QuadratureModel, sigma0: f64) -> Result<f64> {
    Ok(SignProbabilities::checked(&model.state, sigma0, &model.grid)?.plus())
}

/// Bell ratio for quadrature sign measurements.
pub fn bell_ratio_homodyne(
    r0: f64,
    settings: &BellSettings,
    sigma0: f64,
    grid: &QuadratureGrid,
) -> Result<BellResult> {
    settings.validate()?;
    let model = QuadratureModel::new(r0, 0.0, *grid)?;
    let probs = SignProbabilities::checked(&model.state, sigma0, grid)?;
    let mut p_pp = [0.0; 4];
    for (p, (a, b)) in p_pp.iter_mut().zip(settings.joint_pairs()) {
        *p = probs.plus_plus(a + b);
    }
    let m = probs.plus();
    Ok(BellResult::from_probabilities(p_pp, m, m))
}

/// Largest quadrature noise `sigma0` with `s > 1`, by bisection on `[0, 1]`.
pub fn sigma0_cutoff(r0: f64, settings: &BellSettings, tol: f64, grid: &QuadratureGrid) -> Result<f64> {
    bisect_violation(|s0| Ok(bell_ratio_homodyne(r0, settings, s0, grid)?.s), (0.0, 1.0), tol)
}
