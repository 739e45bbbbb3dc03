//! Discrete local hidden-variable models for the noisy sign measurement.
//!
//! A model is a finite mixture over hidden states `λ` with weights `ρ(λ)`.
//! Each state fixes, per station and analyzer angle, a distribution over
//! integer photon-number differences. Noise enters exactly as for the
//! quantum prediction: `P(+ | i) = P(noise >= -i)`.
//!
//! [`NonlocalKernel`] adds the weakened locality of macroscopic realism: the
//! outcome at one station may be shifted by `m ∈ [-M, M]` with a
//! distribution that depends on both analyzer settings. For noise wide
//! compared with `M`, the resulting ratio stays within an explicit slack of
//! the local bound. The slack bound used here is our own construction:
//! a shift of at most `M` moves `P(noise >= -i)` by at most
//! `δ = M / (σ √(2π))`, so each single-station probability moves by `δ` and
//! each joint by `2δ`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::bell::{BellResult, BellSettings};
use crate::error::{Error, Result};
use crate::specfun::{noise_geq, GaussianNoise, NeumaierSum};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

const SUM_TOL: f64 = 1e-12;
const ANGLE_TOL: f64 = 1e-12;

/// Distribution over integer outcomes, stored sparsely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub outcomes: Vec<(i64, f64)>,
}

impl Response {
    pub fn point(outcome: i64) -> Self {
        Self { outcomes: vec![(outcome, 1.0)] }
    }

    fn validate(&self) -> Result<()> {
        let total: f64 = self.outcomes.iter().map(|o| o.1).sum();
        if self.outcomes.iter().any(|o| !(o.1 >= 0.0)) || (total - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidInput(format!("response distribution sums to {total}")));
        }
        Ok(())
    }

    /// `Σ_i p_i P(noise >= -i)`.
    pub fn plus(&self, sigma: GaussianNoise) -> f64 {
        self.outcomes.iter().map(|&(i, p)| p * noise_geq(-(i as f64), sigma)).sum()
    }
}

/// Station of a measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

/// Finite hidden-variable model with per-angle responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LhvModel {
    weights: Vec<f64>,
    angles_a: Vec<f64>,
    angles_b: Vec<f64>,
    /// `[λ][angle index]`
    response_a: Vec<Vec<Response>>,
    response_b: Vec<Vec<Response>>,
}

impl LhvModel {
    pub fn new(
        weights: Vec<f64>,
        angles_a: Vec<f64>,
        angles_b: Vec<f64>,
        response_a: Vec<Vec<Response>>,
        response_b: Vec<Vec<Response>>,
    ) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if weights.is_empty() || weights.iter().any(|w| !(*w >= 0.0)) || (total - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidInput(format!("hidden-state weights must be >= 0 and sum to 1, got {total}")));
        }
        for (responses, angles) in [(&response_a, &angles_a), (&response_b, &angles_b)] {
            if responses.len() != weights.len() {
                return Err(Error::DimensionMismatch { expected: weights.len(), got: responses.len() });
            }
            for per_angle in responses {
                if per_angle.len() != angles.len() {
                    return Err(Error::DimensionMismatch { expected: angles.len(), got: per_angle.len() });
                }
                per_angle.iter().try_for_each(Response::validate)?;
            }
        }
        Ok(Self { weights, angles_a, angles_b, response_a, response_b })
    }

    /// Single hidden state with every outcome fixed at `outcome`.
    pub fn deterministic(angles_a: Vec<f64>, angles_b: Vec<f64>, outcome: i64) -> Self {
        let ra = vec![vec![Response::point(outcome); angles_a.len()]];
        let rb = vec![vec![Response::point(outcome); angles_b.len()]];
        Self::new(vec![1.0], angles_a, angles_b, ra, rb).expect("valid by construction")
    }

    /// Single hidden state with outcomes `±1` equally likely everywhere.
    pub fn uniform_signs(angles_a: Vec<f64>, angles_b: Vec<f64>) -> Self {
        let coin = Response { outcomes: vec![(1, 0.5), (-1, 0.5)] };
        let ra = vec![vec![coin.clone(); angles_a.len()]];
        let rb = vec![vec![coin; angles_b.len()]];
        Self::new(vec![1.0], angles_a, angles_b, ra, rb).expect("valid by construction")
    }

    /// Angle sets `{θ, θ′}` and `{φ, φ′}` of the given settings.
    pub fn settings_angles(settings: &BellSettings) -> (Vec<f64>, Vec<f64>) {
        (vec![settings.theta, settings.theta_prime], vec![settings.phi, settings.phi_prime])
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn n_lambda(&self) -> usize {
        self.weights.len()
    }

    pub fn response(&self, side: Side, lambda: usize, angle_index: usize) -> &Response {
        match side {
            Side::A => &self.response_a[lambda][angle_index],
            Side::B => &self.response_b[lambda][angle_index],
        }
    }

    pub fn angle_index(&self, side: Side, angle: f64) -> Result<usize> {
        let angles = match side {
            Side::A => &self.angles_a,
            Side::B => &self.angles_b,
        };
        angles.iter().position(|a| (a - angle).abs() <= ANGLE_TOL).ok_or(Error::MissingAngle(angle))
    }

    /// Mixture `w · self + (1 - w) · other` over the union of hidden states.
    pub fn mix(&self, other: &LhvModel, w: f64) -> Result<LhvModel> {
        if self.angles_a != other.angles_a || self.angles_b != other.angles_b {
            return Err(Error::InvalidInput("mixed models must share angle sets".into()));
        }
        let weights = self
            .weights
            .iter()
            .map(|x| x * w)
            .chain(other.weights.iter().map(|x| x * (1.0 - w)))
            .collect();
        let ra = self.response_a.iter().chain(&other.response_a).cloned().collect();
        let rb = self.response_b.iter().chain(&other.response_b).cloned().collect();
        LhvModel::new(weights, self.angles_a.clone(), self.angles_b.clone(), ra, rb)
    }

    /// Plain-text table, one row per entry:
    ///
    /// ```text
    /// angle  <side> <index> <radians>
    /// weight <λ> <ρ(λ)>
    /// resp   <side> <λ> <angle index> <outcome> <probability>
    /// ```
    ///
    /// Fields are tab-separated; floats use shortest round-trip form.
    pub fn to_table(&self) -> String {
        let mut out = String::from("# lhv-model v1\n");
        for (side, angles) in [("A", &self.angles_a), ("B", &self.angles_b)] {
            for (i, a) in angles.iter().enumerate() {
                writeln!(out, "angle\t{side}\t{i}\t{a:?}").unwrap();
            }
        }
        for (l, w) in self.weights.iter().enumerate() {
            writeln!(out, "weight\t{l}\t{w:?}").unwrap();
        }
        for (side, table) in [("A", &self.response_a), ("B", &self.response_b)] {
            for (l, per_angle) in table.iter().enumerate() {
                for (ai, r) in per_angle.iter().enumerate() {
                    for (o, p) in &r.outcomes {
                        writeln!(out, "resp\t{side}\t{l}\t{ai}\t{o}\t{p:?}").unwrap();
                    }
                }
            }
        }
        out
    }

    pub fn from_table(text: &str) -> Result<LhvModel> {
        let mut angles: BTreeMap<(String, usize), f64> = BTreeMap::new();
        let mut weights: BTreeMap<usize, f64> = BTreeMap::new();
        let mut resp: BTreeMap<(String, usize, usize), Vec<(i64, f64)>> = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            let bad = || Error::Parse(format!("line {}: {line:?}", lineno + 1));
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
            let idx = |s: &str| s.parse::<usize>().map_err(|_| bad());
            match (f[0], f.len()) {
                ("angle", 4) => {
                    angles.insert((f[1].to_string(), idx(f[2])?), num(f[3])?);
                }
                ("weight", 3) => {
                    weights.insert(idx(f[1])?, num(f[2])?);
                }
                ("resp", 6) => {
                    let o = f[4].parse::<i64>().map_err(|_| bad())?;
                    resp.entry((f[1].to_string(), idx(f[2])?, idx(f[3])?)).or_default().push((o, num(f[5])?));
                }
                _ => return Err(bad()),
            }
        }
        let collect_angles = |side: &str| -> Vec<f64> {
            angles.iter().filter(|((s, _), _)| s == side).map(|(_, v)| *v).collect()
        };
        let (aa, ab) = (collect_angles("A"), collect_angles("B"));
        let n = weights.len();
        let table = |side: &str, count: usize| -> Vec<Vec<Response>> {
            (0..n)
                .map(|l| {
                    (0..count)
                        .map(|ai| Response {
                            outcomes: resp.get(&(side.to_string(), l, ai)).cloned().unwrap_or_default(),
                        })
                        .collect()
                })
                .collect()
        };
        let (ra, rb) = (table("A", aa.len()), table("B", ab.len()));
        LhvModel::new(weights.into_values().collect(), aa, ab, ra, rb)
    }
}

fn station_plus(model: &LhvModel, side: Side, angle: f64, sigma: GaussianNoise) -> Result<Vec<f64>> {
    let ai = model.angle_index(side, angle)?;
    Ok((0..model.n_lambda()).map(|l| model.response(side, l, ai).plus(sigma)).collect())
}

fn mixture(weights: &[f64], f: impl Fn(usize) -> f64) -> f64 {
    weights.iter().enumerate().map(|(l, w)| w * f(l)).collect::<NeumaierSum>().value()
}

/// Six probabilities and the ratio by direct summation over hidden states.
pub fn lhv_bell(model: &LhvModel, settings: &BellSettings, sigma: GaussianNoise) -> Result<BellResult> {
    let a = [
        station_plus(model, Side::A, settings.theta, sigma)?,
        station_plus(model, Side::A, settings.theta_prime, sigma)?,
    ];
    let b = [
        station_plus(model, Side::B, settings.phi, sigma)?,
        station_plus(model, Side::B, settings.phi_prime, sigma)?,
    ];
    let w = &model.weights;
    let joint = |ia: usize, ib: usize| mixture(w, |l| a[ia][l] * b[ib][l]);
    let p_pp = [joint(0, 0), joint(0, 1), joint(1, 0), joint(1, 1)];
    Ok(BellResult::from_probabilities(p_pp, mixture(w, |l| a[1][l]), mixture(w, |l| b[0][l])))
}

/// Seeded random model over `outcome_window = (lo, hi)` (inclusive).
///
/// Each response has one to three support points; roughly one in four is a
/// point mass.
pub fn random_lhv(
    seed: u64,
    n_lambda: usize,
    outcome_window: (i64, i64),
    angle_set: (Vec<f64>, Vec<f64>),
) -> Result<LhvModel> {
    if n_lambda == 0 {
        return Err(Error::InvalidInput("n_lambda must be >= 1".into()));
    }
    let (lo, hi) = outcome_window;
    if lo > hi {
        return Err(Error::InvalidInput(format!("empty outcome window ({lo}, {hi})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..n_lambda).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| w / total).collect();
    let response = |count: usize, rng: &mut ChaCha8Rng| -> Vec<Vec<Response>> {
        (0..n_lambda)
            .map(|_| {
                (0..count)
                    .map(|_| {
                        let k = if rng.gen_bool(0.25) { 1 } else { rng.gen_range(1..=3) };
                        let pts: Vec<i64> = (0..k).map(|_| rng.gen_range(lo..=hi)).collect();
                        let ps: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
                        let t: f64 = ps.iter().sum();
                        Response { outcomes: pts.into_iter().zip(ps.iter().map(|p| p / t)).collect() }
                    })
                    .collect()
            })
            .collect()
    };
    let (aa, ab) = angle_set;
    let ra = response(aa.len(), &mut rng);
    let rb = response(ab.len(), &mut rng);
    LhvModel::new(weights, aa, ab, ra, rb)
}

/// Key of one kernel distribution: station, hidden state, local and remote
/// angle indices, and the locally determined outcome `i′`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct KernelKey {
    pub side: Side,
    pub lambda: usize,
    pub local_angle: usize,
    pub remote_angle: usize,
    pub outcome: i64,
}

/// Bounded nonlocal perturbation: distributions over `m ∈ [-M, M]`.
///
/// Entries that are absent are the point mass at `m = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlocalKernel {
    m_max: u32,
    table: BTreeMap<KernelKey, Vec<f64>>,
}

impl NonlocalKernel {
    pub fn identity(m_max: u32) -> Self {
        Self { m_max, table: BTreeMap::new() }
    }

    pub fn m_max(&self) -> u32 {
        self.m_max
    }

    /// Sets one distribution, indexed by `m + M`.
    pub fn set(&mut self, key: KernelKey, dist: Vec<f64>) -> Result<()> {
        let width = 2 * self.m_max as usize + 1;
        let total: f64 = dist.iter().sum();
        if dist.len() != width {
            return Err(Error::DimensionMismatch { expected: width, got: dist.len() });
        }
        if dist.iter().any(|p| !(*p >= 0.0)) || (total - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidInput(format!("kernel distribution sums to {total}")));
        }
        self.table.insert(key, dist);
        Ok(())
    }

    /// Point mass at shift `m`.
    pub fn set_shift(&mut self, key: KernelKey, m: i64) -> Result<()> {
        let mm = self.m_max as i64;
        if m.abs() > mm {
            return Err(Error::InvalidInput(format!("shift {m} exceeds M = {mm}")));
        }
        let mut dist = vec![0.0; 2 * self.m_max as usize + 1];
        dist[(m + mm) as usize] = 1.0;
        self.set(key, dist)
    }

    /// Shifted "+" probability `Σ_m k_m P(noise >= -(i′ + m))`.
    fn shifted_plus(&self, key: &KernelKey, sigma: GaussianNoise) -> f64 {
        let i = key.outcome;
        match self.table.get(key) {
            None => noise_geq(-(i as f64), sigma),
            Some(dist) => {
                let mm = self.m_max as i64;
                dist.iter()
                    .enumerate()
                    .filter(|(_, p)| **p != 0.0)
                    .map(|(k, p)| p * noise_geq(-((i + k as i64 - mm) as f64), sigma))
                    .sum()
            }
        }
    }

    /// Rows `kernel <side> <λ> <local> <remote> <outcome> <m> <probability>`
    /// for every nonzero entry.
    pub fn to_table(&self) -> String {
        let mut out = format!("# nonlocal-kernel v1\nmmax\t{}\n", self.m_max);
        for (k, dist) in &self.table {
            for (j, p) in dist.iter().enumerate() {
                if *p != 0.0 {
                    let m = j as i64 - self.m_max as i64;
                    writeln!(
                        out,
                        "kernel\t{:?}\t{}\t{}\t{}\t{}\t{m}\t{p:?}",
                        k.side, k.lambda, k.local_angle, k.remote_angle, k.outcome
                    )
                    .unwrap();
                }
            }
        }
        out
    }
}

/// The four measurement contexts `(A angle index, B angle index)` of the
/// numerator, in order; the marginals are read off context 2, `(θ′, φ)`.
fn contexts(model: &LhvModel, settings: &BellSettings) -> Result<[(usize, usize); 4]> {
    let mut out = [(0, 0); 4];
    for (o, (a, b)) in out.iter_mut().zip(settings.joint_pairs()) {
        *o = (model.angle_index(Side::A, a)?, model.angle_index(Side::B, b)?);
    }
    Ok(out)
}

const MARGINAL_CONTEXT: usize = 2;

/// Per-λ, per-context station probabilities under a kernel.
struct Perturbed {
    /// `[λ][context]`
    a: Vec<[f64; 4]>,
    b: Vec<[f64; 4]>,
}

impl Perturbed {
    fn new(model: &LhvModel, kernel: &NonlocalKernel, ctx: &[(usize, usize); 4], sigma: GaussianNoise) -> Self {
        let station = |side: Side, l: usize, c: usize| -> f64 {
            let (local, remote) = match side {
                Side::A => ctx[c],
                Side::B => (ctx[c].1, ctx[c].0),
            };
            model
                .response(side, l, local)
                .outcomes
                .iter()
                .map(|&(outcome, p)| {
                    let key = KernelKey { side, lambda: l, local_angle: local, remote_angle: remote, outcome };
                    p * kernel.shifted_plus(&key, sigma)
                })
                .sum()
        };
        let n = model.n_lambda();
        let a = (0..n).map(|l| std::array::from_fn(|c| station(Side::A, l, c))).collect();
        let b = (0..n).map(|l| std::array::from_fn(|c| station(Side::B, l, c))).collect();
        Self { a, b }
    }

    fn cell(&mut self, side: Side, lambda: usize, context: usize) -> &mut f64 {
        match side {
            Side::A => &mut self.a[lambda][context],
            Side::B => &mut self.b[lambda][context],
        }
    }

    fn result(&self, weights: &[f64]) -> BellResult {
        let joint = |c: usize| mixture(weights, |l| self.a[l][c] * self.b[l][c]);
        let p_pp = [joint(0), joint(1), joint(2), joint(3)];
        let p_a = mixture(weights, |l| self.a[l][MARGINAL_CONTEXT]);
        let p_b = mixture(weights, |l| self.b[l][MARGINAL_CONTEXT]);
        BellResult::from_probabilities(p_pp, p_a, p_b)
    }
}

/// Largest change of a single-station "+" probability under a shift of at
/// most `M`: `M / (σ √(2π))`.
pub fn shift_delta(m_max: u32, sigma: GaussianNoise) -> f64 {
    m_max as f64 / (sigma.sigma() * (2.0 * std::f64::consts::PI).sqrt())
}

/// Upper bound on `N / D` given `|N - n| <= 8δ` and `|D - d| <= 2δ`.
fn ratio_upper_bound(local: &BellResult, delta: f64) -> f64 {
    let n_hi = local.numerator() + 8.0 * delta;
    let d_lo = (local.denominator() - 2.0 * delta).max(f64::MIN_POSITIVE);
    let d_hi = local.denominator() + 2.0 * delta;
    if n_hi >= 0.0 {
        n_hi / d_lo
    } else {
        n_hi / d_hi
    }
}

/// Ratio with the kernel convolution inserted, and the slack bound
/// `sup(N/D) - s_loc` implied by `δ`.
pub fn macroscopic_bell(
    model: &LhvModel,
    kernel: &NonlocalKernel,
    settings: &BellSettings,
    sigma: GaussianNoise,
) -> Result<(BellResult, f64)> {
    if sigma.sigma() == 0.0 {
        return Err(Error::InvalidInput(
            "the bounded-perturbation argument needs sigma > 0 (slowly varying noise)".into(),
        ));
    }
    let ctx = contexts(model, settings)?;
    let result = Perturbed::new(model, kernel, &ctx, sigma).result(&model.weights);
    let local = lhv_bell(model, settings, sigma)?;
    let delta = shift_delta(kernel.m_max(), sigma);
    let slack = ratio_upper_bound(&local, delta) - local.s;
    assert!(local.s <= 1.0 + 1e-12, "local model exceeds the bound: s = {}", local.s);
    assert!(
        result.s <= local.s + slack + 1e-12,
        "perturbed ratio {} above local {} + slack {slack}",
        result.s,
        local.s
    );
    Ok((result, slack))
}

/// Coordinate ascent on `s` over point-mass kernels.
///
/// Starts from the push that favours violation (toward `+` everywhere
/// except the subtracted context), then sweeps every
/// `(station, λ, context, outcome)` cell trying each shift.
pub fn adversarial_kernel(
    model: &LhvModel,
    settings: &BellSettings,
    sigma: GaussianNoise,
    m_max: u32,
    sweeps: usize,
) -> Result<NonlocalKernel> {
    let ctx = contexts(model, settings)?;
    {
        let mut seen = ctx.to_vec();
        seen.sort();
        seen.dedup();
        if seen.len() != 4 {
            return Err(Error::InvalidInput("adversarial search needs four distinct contexts".into()));
        }
    }
    let mm = m_max as i64;
    let n = model.n_lambda();

    // cells: (side, λ, context, outcome, probability)
    let mut cells = Vec::new();
    for l in 0..n {
        for c in 0..4 {
            for side in [Side::A, Side::B] {
                let local = if side == Side::A { ctx[c].0 } else { ctx[c].1 };
                for &(o, p) in &model.response(side, l, local).outcomes {
                    cells.push((side, l, c, o, p));
                }
            }
        }
    }
    let key_of = |side: Side, l: usize, c: usize, o: i64| {
        let (local, remote) = if side == Side::A { ctx[c] } else { (ctx[c].1, ctx[c].0) };
        KernelKey { side, lambda: l, local_angle: local, remote_angle: remote, outcome: o }
    };
    let mut shift: Vec<i64> = cells.iter().map(|&(_, _, c, _, _)| if c == 1 { -mm } else { mm }).collect();

    let plus_at = |o: i64, m: i64| noise_geq(-((o + m) as f64), sigma);
    let mut state = Perturbed { a: vec![[0.0; 4]; n], b: vec![[0.0; 4]; n] };
    for (&(side, l, c, o, p), &m) in cells.iter().zip(&shift) {
        *state.cell(side, l, c) += p * plus_at(o, m);
    }
    let mut best = state.result(&model.weights).s;
    for _ in 0..sweeps {
        let mut improved = false;
        for (ci, &(side, l, c, o, p)) in cells.iter().enumerate() {
            let current = shift[ci];
            let base = p * plus_at(o, current);
            for m in -mm..=mm {
                if m == current {
                    continue;
                }
                let delta = p * plus_at(o, m) - base;
                *state.cell(side, l, c) += delta;
                let s = state.result(&model.weights).s;
                if s > best + 1e-15 {
                    best = s;
                    shift[ci] = m;
                    improved = true;
                    break;
                }
                *state.cell(side, l, c) -= delta;
            }
        }
        if !improved {
            break;
        }
    }
    let mut kernel = NonlocalKernel::identity(m_max);
    for (&(side, l, c, o, _), &m) in cells.iter().zip(&shift) {
        kernel.set_shift(key_of(side, l, c, o), m)?;
    }
    Ok(kernel)
}

/// Summary of a seeded property suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub trials: usize,
    pub max_s: f64,
    pub violations: usize,
    /// Smallest `bound - s` over all trials; negative means the bound failed.
    pub min_margin: f64,
    pub worst_seed: u64,
}

fn par_map<T: Send>(seeds: Vec<u64>, f: impl Fn(u64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    #[cfg(feature = "parallel")]
    let out = seeds.into_par_iter().map(f).collect();
    #[cfg(not(feature = "parallel"))]
    let out = seeds.into_iter().map(f).collect();
    out
}

/// Local models: every trial must satisfy `s <= 1 + 1e-12`.
pub fn local_suite(trials: usize, seed: u64, settings: &BellSettings) -> Result<SuiteReport> {
    let angles = LhvModel::settings_angles(settings);
    let runs = par_map((0..trials as u64).map(|i| seed.wrapping_add(i)).collect(), |s| {
        let mut rng = ChaCha8Rng::seed_from_u64(s ^ 0x5eed);
        let n_lambda = rng.gen_range(1..=6);
        let window = rng.gen_range(1..=60);
        let sigma = GaussianNoise::new([0.0, 0.5, 3.0, 20.0][rng.gen_range(0..4)])?;
        let model = random_lhv(s, n_lambda, (-window, window), angles.clone())?;
        Ok((s, lhv_bell(&model, settings, sigma)?.s))
    })?;
    Ok(summarize(runs.into_iter().map(|(seed, s)| (seed, s, 1.0 + 1e-12))))
}

/// Macroscopic models with adversarial kernels at `sigma = ratio · M`; the
/// bound checked is `1 + 10 M / (σ √(2π))`.
pub fn macroscopic_suite(trials: usize, seed: u64, settings: &BellSettings, ratio: f64) -> Result<SuiteReport> {
    let angles = LhvModel::settings_angles(settings);
    let runs = par_map((0..trials as u64).map(|i| seed.wrapping_add(i)).collect(), |s| {
        let mut rng = ChaCha8Rng::seed_from_u64(s ^ 0xadd);
        let m_max: u32 = rng.gen_range(1..=5);
        let sigma_val = ratio * m_max as f64;
        let sigma = GaussianNoise::new(sigma_val)?;
        // outcomes within a few noise widths, so shifts matter
        let span = (rng.gen_range(0.05..3.0) * sigma_val).ceil().max(m_max as f64) as i64;
        let model = random_lhv(s, rng.gen_range(1..=4), (-span, span), angles.clone())?;
        let kernel = adversarial_kernel(&model, settings, sigma, m_max, 4)?;
        let (r, _) = macroscopic_bell(&model, &kernel, settings, sigma)?;
        Ok((s, r.s, 1.0 + 10.0 * shift_delta(m_max, sigma)))
    })?;
    Ok(summarize(runs.into_iter()))
}

fn summarize(runs: impl Iterator<Item = (u64, f64, f64)>) -> SuiteReport {
    let mut report = SuiteReport { trials: 0, max_s: f64::NEG_INFINITY, violations: 0, min_margin: f64::INFINITY, worst_seed: 0 };
    for (seed, s, bound) in runs {
        report.trials += 1;
        if s > report.max_s {
            report.max_s = s;
            report.worst_seed = seed;
        }
        if s > 1.0 {
            report.violations += 1;
        }
        report.min_margin = report.min_margin.min(bound - s);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn standard_angles() -> (Vec<f64>, Vec<f64>) {
        LhvModel::settings_angles(&BellSettings::STANDARD)
    }

    #[test]
    fn deterministic_saturates_exactly() {
        let (a, b) = standard_angles();
        let m = LhvModel::deterministic(a, b, 1);
        let r = lhv_bell(&m, &BellSettings::STANDARD, GaussianNoise::noiseless()).unwrap();
        assert_eq!(r.s, 1.0);
    }

    #[test]
    fn uniform_signs_give_half() {
        let (a, b) = standard_angles();
        let m = LhvModel::uniform_signs(a, b);
        let r = lhv_bell(&m, &BellSettings::STANDARD, GaussianNoise::noiseless()).unwrap();
        assert!(r.p_pp.iter().all(|p| (p - 0.25).abs() < 1e-15));
        assert!((r.s - 0.5).abs() < 1e-15);
    }

    #[test]
    fn missing_angle() {
        let m = LhvModel::deterministic(vec![0.0], vec![1.0], 0);
        let err = lhv_bell(&m, &BellSettings::STANDARD, GaussianNoise::noiseless());
        assert!(matches!(err, Err(Error::MissingAngle(_))));
    }

    #[test]
    fn invalid_models_rejected() {
        let bad = Response { outcomes: vec![(0, 0.6)] };
        assert!(LhvModel::new(vec![1.0], vec![0.0], vec![0.0], vec![vec![bad]], vec![vec![Response::point(0)]]).is_err());
        assert!(LhvModel::new(vec![0.5], vec![0.0], vec![0.0], vec![vec![Response::point(0)]], vec![vec![Response::point(0)]]).is_err());
        assert!(random_lhv(1, 0, (0, 1), standard_angles()).is_err());
    }

    #[test]
    fn random_models_are_reproducible() {
        let a = random_lhv(42, 5, (-10, 10), standard_angles()).unwrap();
        let b = random_lhv(42, 5, (-10, 10), standard_angles()).unwrap();
        assert_eq!(a.to_table(), b.to_table());
        assert_ne!(a.to_table(), random_lhv(43, 5, (-10, 10), standard_angles()).unwrap().to_table());
        let back = LhvModel::from_table(&a.to_table()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn single_state_point_masses_are_deterministic() {
        let m = random_lhv(9, 1, (3, 3), standard_angles()).unwrap();
        for side in [Side::A, Side::B] {
            for ai in 0..2 {
                assert!(m.response(side, 0, ai).outcomes.iter().all(|o| o.0 == 3));
            }
        }
        let r = lhv_bell(&m, &BellSettings::STANDARD, GaussianNoise::noiseless()).unwrap();
        assert!((r.s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn parse_errors() {
        assert!(LhvModel::from_table("weight\t0\tx\n").is_err());
        assert!(LhvModel::from_table("bogus\n").is_err());
    }

    #[test]
    fn probabilities_affine_in_mixture_weight() {
        let m1 = random_lhv(1, 3, (-5, 5), standard_angles()).unwrap();
        let m2 = random_lhv(2, 2, (-5, 5), standard_angles()).unwrap();
        let sigma = GaussianNoise::new(2.0).unwrap();
        let r1 = lhv_bell(&m1, &BellSettings::STANDARD, sigma).unwrap();
        let r2 = lhv_bell(&m2, &BellSettings::STANDARD, sigma).unwrap();
        for &w in &[0.0, 0.3, 0.8, 1.0] {
            let r = lhv_bell(&m1.mix(&m2, w).unwrap(), &BellSettings::STANDARD, sigma).unwrap();
            for k in 0..4 {
                assert!((r.p_pp[k] - (w * r1.p_pp[k] + (1.0 - w) * r2.p_pp[k])).abs() < 1e-12);
            }
            assert!((r.p_a - (w * r1.p_a + (1.0 - w) * r2.p_a)).abs() < 1e-12);
            assert!((r.p_b - (w * r1.p_b + (1.0 - w) * r2.p_b)).abs() < 1e-12);
        }
    }

    #[test]
    fn marginals_tend_to_half() {
        let window = 20;
        let m = random_lhv(5, 4, (-window, window), standard_angles()).unwrap();
        let r = lhv_bell(&m, &BellSettings::STANDARD, GaussianNoise::new(1e6 * window as f64).unwrap()).unwrap();
        assert!((r.p_a - 0.5).abs() < 1e-6 && (r.p_b - 0.5).abs() < 1e-6);
    }

    #[test]
    fn empty_perturbation_matches_local() {
        let m = random_lhv(11, 3, (-8, 8), standard_angles()).unwrap();
        let sigma = GaussianNoise::new(4.0).unwrap();
        let (r, slack) = macroscopic_bell(&m, &NonlocalKernel::identity(0), &BellSettings::STANDARD, sigma).unwrap();
        let local = lhv_bell(&m, &BellSettings::STANDARD, sigma).unwrap();
        assert!((r.s - local.s).abs() < 1e-14);
        assert!(slack.abs() < 1e-14);
    }

    #[test]
    fn zero_noise_rejected() {
        let m = random_lhv(11, 3, (-8, 8), standard_angles()).unwrap();
        assert!(macroscopic_bell(&m, &NonlocalKernel::identity(2), &BellSettings::STANDARD, GaussianNoise::noiseless()).is_err());
    }

    #[test]
    fn kernel_validation() {
        let mut k = NonlocalKernel::identity(2);
        let key = KernelKey { side: Side::A, lambda: 0, local_angle: 0, remote_angle: 1, outcome: 0 };
        assert!(k.set(key, vec![0.2; 4]).is_err());
        assert!(k.set(key, vec![0.3; 5]).is_err());
        assert!(k.set_shift(key, 3).is_err());
        k.set_shift(key, -2).unwrap();
        assert!(k.to_table().contains("kernel\tA\t0\t0\t1\t0\t-2\t1.0"));
    }

    #[test]
    fn adversary_at_macroscopic_noise_stays_near_bound() {
        let m = LhvModel::deterministic(standard_angles().0, standard_angles().1, 0);
        let sigma = GaussianNoise::new(1000.0).unwrap();
        let k = adversarial_kernel(&m, &BellSettings::STANDARD, sigma, 5, 6).unwrap();
        let (r, slack) = macroscopic_bell(&m, &k, &BellSettings::STANDARD, sigma).unwrap();
        assert!(r.s <= 1.0 + 0.01);
        assert!(slack >= 0.0);
    }

    #[test]
    fn adversary_at_microscopic_noise_violates() {
        let m = LhvModel::deterministic(standard_angles().0, standard_angles().1, 0);
        let sigma = GaussianNoise::new(5.0).unwrap();
        let k = adversarial_kernel(&m, &BellSettings::STANDARD, sigma, 5, 6).unwrap();
        let (r, _) = macroscopic_bell(&m, &k, &BellSettings::STANDARD, sigma).unwrap();
        assert!(r.s > 1.0, "s = {}", r.s);
    }
}
