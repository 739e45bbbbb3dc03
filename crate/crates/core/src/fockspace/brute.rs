//! Dense two-mode oracle for the sign POVM.
//!
//! The optical network is built gate by gate. Each gate's Fock-space
//! unitary is the exponential of its quadratic generator on the space of
//! two-mode states with total photon number `<= dim`, which the passive
//! gates leave invariant.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use super::{MeasurementConfig, PairCoherentState, SignPovm};
use crate::error::{Error, Result};
use crate::linalg::expm;
use crate::specfun::{noise_geq, NeumaierSum};

/// Largest per-mode truncation the oracle accepts.
pub const MAX_DIM: usize = 40;
/// Largest oscillator amplitude the oracle accepts.
pub const MAX_ALPHA: f64 = 3.0;

/// Which optical network realizes the difference measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Network {
    /// Phase shift `theta` on `a-`, then a balanced splitter:
    /// `c'± = (a+ ± a- e^{-iθ}) / √2`.
    DirectSplitter,
    /// Premixing `a'- = (a- - a+)/√2`, `a'+ = i(a- + a+)/√2`, then the
    /// polarizer rotation `c+ = a'+ cos(θ/2) + a'- sin(θ/2)`,
    /// `c- = a'+ sin(θ/2) - a'- cos(θ/2)`.
    Premixed,
}

/// Single-mode gate on two modes.
#[derive(Debug, Clone, Copy)]
enum Gate {
    /// `a_j -> e^{-i phi} a_j`.
    Phase { mode: usize, phi: f64 },
    /// Mode matrix `[[cos t, -sin t], [sin t, cos t]]`.
    Rotation { t: f64 },
}

impl Gate {
    fn mode_matrix(&self) -> [[Complex64; 2]; 2] {
        let z = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        match *self {
            Gate::Phase { mode, phi } => {
                let mut m = [[one, z], [z, one]];
                m[mode][mode] = Complex64::from_polar(1.0, -phi);
                m
            }
            Gate::Rotation { t } => {
                let (s, c) = t.sin_cos();
                [[c.into(), (-s).into()], [s.into(), c.into()]]
            }
        }
    }
}

fn gates(network: Network, theta: f64) -> Vec<Gate> {
    // listed in the order they act
    match network {
        Network::DirectSplitter => vec![
            Gate::Phase { mode: 1, phi: theta },
            Gate::Rotation { t: -FRAC_PI_4 },
            Gate::Phase { mode: 1, phi: PI },
        ],
        Network::Premixed => vec![
            Gate::Rotation { t: -FRAC_PI_4 },
            Gate::Phase { mode: 0, phi: -FRAC_PI_2 },
            Gate::Rotation { t: -0.5 * theta },
            Gate::Phase { mode: 1, phi: PI },
        ],
    }
}

/// Two-mode Fock basis `|k0, k1>` with `k0 + k1 <= dim`.
struct TwoModeBasis {
    states: Vec<(usize, usize)>,
    dim: usize,
}

impl TwoModeBasis {
    fn new(dim: usize) -> Self {
        let mut states = Vec::new();
        for total in 0..=dim {
            for k0 in (0..=total).rev() {
                states.push((k0, total - k0));
            }
        }
        Self { states, dim }
    }

    fn index(&self, k0: usize, k1: usize) -> usize {
        let total = k0 + k1;
        total * (total + 1) / 2 + (total - k0)
    }

    fn len(&self) -> usize {
        self.states.len()
    }
}

/// Fock unitary of one gate, one block per total photon number.
fn gate_unitary(basis: &TwoModeBasis, gate: Gate) -> Vec<DMatrix<Complex64>> {
    (0..=basis.dim)
        .map(|total| {
            let start = total * (total + 1) / 2;
            let size = total + 1;
            // generator Σ_ik K_ik a_i^† a_k restricted to this block
            let mut g = DMatrix::<Complex64>::zeros(size, size);
            for (col, &(k0, k1)) in basis.states[start..start + size].iter().enumerate() {
                match gate {
                    Gate::Phase { mode, phi } => {
                        let occ = if mode == 0 { k0 } else { k1 } as f64;
                        g[(col, col)] = Complex64::new(0.0, -phi * occ);
                    }
                    Gate::Rotation { t } => {
                        // t (a1^† a0 - a0^† a1)
                        if k0 > 0 {
                            let row = basis.index(k0 - 1, k1 + 1) - start;
                            g[(row, col)] += Complex64::new(t * ((k0 * (k1 + 1)) as f64).sqrt(), 0.0);
                        }
                        if k1 > 0 {
                            let row = basis.index(k0 + 1, k1 - 1) - start;
                            g[(row, col)] -= Complex64::new(t * (((k0 + 1) * k1) as f64).sqrt(), 0.0);
                        }
                    }
                }
            }
            expm(&g)
        })
        .collect()
}

fn network_unitary(basis: &TwoModeBasis, network: Network, theta: f64) -> Vec<DMatrix<Complex64>> {
    let mut u: Vec<DMatrix<Complex64>> = (0..=basis.dim).map(|t| DMatrix::identity(t + 1, t + 1)).collect();
    for g in gates(network, theta) {
        for (ub, gb) in u.iter_mut().zip(gate_unitary(basis, g)) {
            *ub = gb * &*ub;
        }
    }
    u
}

fn apply_blocks(u: &[DMatrix<Complex64>], v: &DVector<Complex64>) -> DVector<Complex64> {
    let mut out = DVector::<Complex64>::zeros(v.len());
    for (total, ub) in u.iter().enumerate() {
        let start = total * (total + 1) / 2;
        let size = total + 1;
        let block = ub * v.rows(start, size);
        out.rows_mut(start, size).copy_from(&block);
    }
    out
}

/// Mode matrix `V` of a network, with output modes `c = V a` and modes
/// ordered `(a+, a-)`.
pub fn network_mode_matrix(network: Network, theta: f64) -> [[Complex64; 2]; 2] {
    let mut v = [[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)], [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]];
    for g in gates(network, theta) {
        let m = g.mode_matrix();
        let mut next = [[Complex64::new(0.0, 0.0); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                next[i][j] = m[i][0] * v[0][j] + m[i][1] * v[1][j];
            }
        }
        v = next;
    }
    v
}

/// Output states of the network for every input `|alpha>_{a+} ⊗ |n>_{a-}`,
/// `n <= n_pc`.
fn output_states(
    config: &MeasurementConfig,
    n_pc: usize,
    dim: usize,
    network: Network,
) -> Result<(TwoModeBasis, Vec<DVector<Complex64>>)> {
    if dim > MAX_DIM {
        return Err(Error::InvalidInput(format!("brute-force dim {dim} exceeds {MAX_DIM}")));
    }
    if config.alpha > MAX_ALPHA {
        return Err(Error::InvalidInput(format!(
            "brute-force oracle needs alpha <= {MAX_ALPHA}, got {}",
            config.alpha
        )));
    }
    if n_pc > dim {
        return Err(Error::Truncation(format!("dim {dim} below the Fock cutoff {n_pc}")));
    }
    let basis = TwoModeBasis::new(dim);
    let u = network_unitary(&basis, network, config.theta);
    let alpha = config.alpha;
    let coherent = |k: usize| -> f64 {
        if alpha == 0.0 {
            if k == 0 { 1.0 } else { 0.0 }
        } else {
            (-0.5 * alpha * alpha + k as f64 * alpha.ln() - 0.5 * libm::lgamma(k as f64 + 1.0)).exp()
        }
    };
    let mut outs = Vec::with_capacity(n_pc + 1);
    for n in 0..=n_pc {
        let mut input = DVector::<Complex64>::zeros(basis.len());
        let mut kept = 0.0;
        for k in 0..=(dim - n) {
            let c = coherent(k);
            kept += c * c;
            input[basis.index(k, n)] = c.into();
        }
        if kept < 1.0 - 1e-12 {
            return Err(Error::Truncation(format!(
                "dim {dim} keeps only {kept} of the coherent state for n = {n}"
            )));
        }
        outs.push(apply_blocks(&u, &input));
    }
    Ok((basis, outs))
}

fn difference_weights(basis: &TwoModeBasis, config: &MeasurementConfig) -> Vec<f64> {
    basis
        .states
        .iter()
        .map(|&(k0, k1)| noise_geq(-(k0 as f64 - k1 as f64), config.sigma))
        .collect()
}

/// Sign POVM from a dense simulation of the network.
pub fn brute_force_povm_with(
    config: &MeasurementConfig,
    n_pc: usize,
    dim: usize,
    network: Network,
) -> Result<SignPovm> {
    let (basis, outs) = output_states(config, n_pc, dim, network)?;
    let w = difference_weights(&basis, config);
    let size = n_pc + 1;
    let matrix = DMatrix::from_fn(size, size, |m, n| {
        let mut re = NeumaierSum::default();
        let mut im = NeumaierSum::default();
        for ((a, b), wi) in outs[m].iter().zip(outs[n].iter()).zip(&w) {
            let z = a.conj() * b * *wi;
            re.add(z.re);
            im.add(z.im);
        }
        Complex64::new(re.value(), im.value())
    });
    Ok(SignPovm::from_matrix(*config, matrix))
}

/// Sign POVM through the direct splitter network.
pub fn brute_force_povm(config: &MeasurementConfig, n_pc: usize, dim: usize) -> Result<SignPovm> {
    brute_force_povm_with(config, n_pc, dim, Network::DirectSplitter)
}

/// `P++` from the joint four-mode output amplitudes
/// `Σ_n c_n ψ^A_n(k_A) ψ^B_n(k_B)`, without forming either POVM.
pub fn brute_force_joint_plus(
    state: &PairCoherentState,
    config_a: &MeasurementConfig,
    config_b: &MeasurementConfig,
    dim: usize,
    network: Network,
) -> Result<f64> {
    let n_pc = state.cutoff();
    let (basis, outs_a) = output_states(config_a, n_pc, dim, network)?;
    let (_, outs_b) = output_states(config_b, n_pc, dim, network)?;
    let wa = difference_weights(&basis, config_a);
    let wb = difference_weights(&basis, config_b);
    let c = state.coeffs();
    let mut total = NeumaierSum::default();
    let mut amp_a = vec![Complex64::new(0.0, 0.0); n_pc + 1];
    for ia in 0..basis.len() {
        if wa[ia] == 0.0 {
            continue;
        }
        for (n, a) in amp_a.iter_mut().enumerate() {
            *a = outs_a[n][ia] * c[n];
        }
        if amp_a.iter().all(|a| a.norm_sqr() < 1e-300) {
            continue;
        }
        for ib in 0..basis.len() {
            if wb[ib] == 0.0 {
                continue;
            }
            let amp: Complex64 = amp_a.iter().zip(&outs_b).map(|(a, ob)| a * ob[ib]).sum();
            total.add(amp.norm_sqr() * wa[ia] * wb[ib]);
        }
    }
    Ok(total.value())
}
