//! Dense statevector simulator with an optional two-qubit depolarizing
//! noise model.
//!
//! Conventions, fixed once here and relied on everywhere else:
//!
//! * Qubit 0 is the **most significant** bit of a basis index. For a
//!   3-qubit register, basis index 4 = `0b100` is the state `|100>` with
//!   qubit 0 in `|1>`.
//! * Rotations carry the full angle, not the half angle:
//!   `RZ(theta) = exp(i theta Z) = diag(e^{i theta}, e^{-i theta})`,
//!   `RX(theta) = exp(i theta X) = [[cos, i sin], [i sin, cos]]`,
//!   `RXX(theta) = exp(i theta X(x)X) = cos * I + i sin * X(x)X`.
//! * Noise is a two-qubit depolarizing channel applied after every
//!   two-qubit gate, acting on that gate's targets:
//!   `D_p(rho) = (1 - p) rho + (p / 15) sum_{P != I(x)I} P rho P`.
//!
//! Noisy circuits are simulated with Monte Carlo Pauli trajectories (with
//! probability `p` one of the 15 non-identity two-qubit Paulis is applied,
//! chosen uniformly). [`density_oracle_probabilities`] evolves the density
//! matrix exactly for small registers so trajectory averages can be checked
//! against the channel they are supposed to sample.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Hard cap on register width; 2^24 amplitudes is the largest statevector
/// this crate will allocate.
pub const MAX_QUBITS: usize = 24;

/// Hard cap for the exact density-matrix oracle (4^6 matrix entries).
pub const MAX_DENSITY_QUBITS: usize = 6;

/// One gate from the fixed set the simulator understands.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gate {
    H { target: usize },
    Cnot { control: usize, target: usize },
    Rz { target: usize, angle: f64 },
    Rx { target: usize, angle: f64 },
    Rxx { targets: (usize, usize), angle: f64 },
}

impl Gate {
    /// True for CNOT and RXX; these are the gates followed by noise.
    pub fn is_two_qubit(&self) -> bool {
        matches!(self, Gate::Cnot { .. } | Gate::Rxx { .. })
    }

    /// Qubits the gate acts on (second entry only for two-qubit gates).
    pub fn qubits(&self) -> (usize, Option<usize>) {
        match *self {
            Gate::H { target } | Gate::Rz { target, .. } | Gate::Rx { target, .. } => {
                (target, None)
            }
            Gate::Cnot { control, target } => (control, Some(target)),
            Gate::Rxx { targets, .. } => (targets.0, Some(targets.1)),
        }
    }

    /// Gate whose matrix is the entrywise complex conjugate of `self`.
    /// H and CNOT are real; the rotations conjugate by flipping the angle.
    fn conjugated(self) -> Gate {
        match self {
            Gate::Rz { target, angle } => Gate::Rz {
                target,
                angle: -angle,
            },
            Gate::Rx { target, angle } => Gate::Rx {
                target,
                angle: -angle,
            },
            Gate::Rxx { targets, angle } => Gate::Rxx {
                targets,
                angle: -angle,
            },
            real => real,
        }
    }

    fn validate(&self, num_qubits: usize) -> Result<()> {
        let (a, b) = self.qubits();
        if a >= num_qubits {
            return Err(Error::GateOutOfRange {
                qubit: a,
                num_qubits,
            });
        }
        if let Some(b) = b {
            if b >= num_qubits {
                return Err(Error::GateOutOfRange {
                    qubit: b,
                    num_qubits,
                });
            }
            if a == b {
                return Err(Error::DuplicateGateTargets(a));
            }
        }
        Ok(())
    }
}

/// An ordered gate list on a fixed number of qubits.
#[derive(Clone, Debug)]
pub struct Circuit {
    num_qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(num_qubits: usize) -> Result<Self> {
        check_qubit_count(num_qubits, MAX_QUBITS)?;
        Ok(Circuit {
            num_qubits,
            gates: Vec::new(),
        })
    }

    /// Appends a gate, rejecting out-of-range or duplicate targets.
    pub fn push(&mut self, gate: Gate) -> Result<()> {
        gate.validate(self.num_qubits)?;
        self.gates.push(gate);
        Ok(())
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn two_qubit_gate_count(&self) -> usize {
        self.gates.iter().filter(|g| g.is_two_qubit()).count()
    }
}

/// A pure state as 2^n complex amplitudes.
#[derive(Clone, Debug)]
pub struct QuantumState {
    num_qubits: usize,
    amps: Vec<Complex64>,
}

impl QuantumState {
    /// The all-zero computational basis state |0...0>.
    pub fn zero(num_qubits: usize) -> Result<Self> {
        check_qubit_count(num_qubits, MAX_QUBITS)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << num_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(QuantumState { num_qubits, amps })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    /// Born-rule probabilities |amp|^2 for every basis index.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }
}

fn check_qubit_count(num_qubits: usize, max: usize) -> Result<()> {
    if num_qubits == 0 || num_qubits > max {
        return Err(Error::QubitCountOutOfRange {
            requested: num_qubits,
            max,
        });
    }
    Ok(())
}

/// Bit position (shift) of `qubit` inside a basis index, under the
/// qubit-0-is-MSB convention.
#[inline]
fn bit_shift(num_qubits: usize, qubit: usize) -> usize {
    num_qubits - 1 - qubit
}

/// Applies `gate` to raw amplitudes in place. `amps.len()` must be
/// `1 << num_qubits`; targets must already be validated.
fn apply_gate(amps: &mut [Complex64], num_qubits: usize, gate: Gate) {
    match gate {
        Gate::H { target } => {
            let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
            for_each_pair(amps, num_qubits, target, |a0, a1| {
                let (x, y) = (*a0, *a1);
                *a0 = (x + y) * inv_sqrt2;
                *a1 = (x - y) * inv_sqrt2;
            });
        }
        Gate::Rz { target, angle } => {
            let phase_0 = Complex64::from_polar(1.0, angle);
            let phase_1 = Complex64::from_polar(1.0, -angle);
            for_each_pair(amps, num_qubits, target, |a0, a1| {
                *a0 *= phase_0;
                *a1 *= phase_1;
            });
        }
        Gate::Rx { target, angle } => {
            let c = angle.cos();
            let is = Complex64::new(0.0, angle.sin());
            for_each_pair(amps, num_qubits, target, |a0, a1| {
                let (x, y) = (*a0, *a1);
                *a0 = c * x + is * y;
                *a1 = is * x + c * y;
            });
        }
        Gate::Cnot { control, target } => {
            let cmask = 1usize << bit_shift(num_qubits, control);
            let tmask = 1usize << bit_shift(num_qubits, target);
            for i in 0..amps.len() {
                // Visit each swapped pair once via its target-bit-0 member.
                if i & cmask != 0 && i & tmask == 0 {
                    amps.swap(i, i | tmask);
                }
            }
        }
        Gate::Rxx { targets, angle } => {
            let m0 = 1usize << bit_shift(num_qubits, targets.0);
            let m1 = 1usize << bit_shift(num_qubits, targets.1);
            let c = angle.cos();
            let is = Complex64::new(0.0, angle.sin());
            // X(x)X couples i with i ^ m0 ^ m1 (both bits flipped); visit
            // each coupled pair once from the side where targets.0's bit is 0.
            let flip = m0 | m1;
            for i in 0..amps.len() {
                if i & m0 == 0 {
                    let j = i ^ flip;
                    let (x, y) = (amps[i], amps[j]);
                    amps[i] = c * x + is * y;
                    amps[j] = is * x + c * y;
                }
            }
        }
    }
}

/// Calls `f` on every (bit=0, bit=1) amplitude pair for `qubit`.
#[inline]
fn for_each_pair<F>(amps: &mut [Complex64], num_qubits: usize, qubit: usize, mut f: F)
where
    F: FnMut(&mut Complex64, &mut Complex64),
{
    let step = 1usize << bit_shift(num_qubits, qubit);
    let mut base = 0;
    while base < amps.len() {
        for offset in base..base + step {
            let (lo, hi) = amps.split_at_mut(offset + step);
            f(&mut lo[offset], &mut hi[0]);
        }
        base += 2 * step;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Pauli {
    I,
    X,
    Y,
    Z,
}

const PAULIS: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

/// Applies a single-qubit Pauli. `conjugate` applies the entrywise complex
/// conjugate instead (only Y differs: conj(Y) = -Y).
fn apply_pauli(amps: &mut [Complex64], num_qubits: usize, qubit: usize, p: Pauli, conjugate: bool) {
    match p {
        Pauli::I => {}
        Pauli::X => for_each_pair(amps, num_qubits, qubit, |a0, a1| {
            std::mem::swap(a0, a1);
        }),
        Pauli::Y => {
            let i = Complex64::new(0.0, if conjugate { -1.0 } else { 1.0 });
            for_each_pair(amps, num_qubits, qubit, |a0, a1| {
                let (x, y) = (*a0, *a1);
                *a0 = -i * y;
                *a1 = i * x;
            });
        }
        Pauli::Z => for_each_pair(amps, num_qubits, qubit, |_, a1| {
            *a1 = -*a1;
        }),
    }
}

/// Runs `circuit` on `state` and returns the resulting state.
pub fn apply_circuit(state: &QuantumState, circuit: &Circuit) -> Result<QuantumState> {
    if state.num_qubits != circuit.num_qubits {
        return Err(Error::QubitCountMismatch {
            state_qubits: state.num_qubits,
            circuit_qubits: circuit.num_qubits,
        });
    }
    let mut out = state.clone();
    for &gate in &circuit.gates {
        apply_gate(&mut out.amps, out.num_qubits, gate);
    }
    Ok(out)
}

/// Draws `shots` basis indices from the Born distribution of `state`.
///
/// Sampling is sequential from a ChaCha stream, so a fixed seed gives a
/// fixed multiset of outcomes.
pub fn sample_shots(state: &QuantumState, shots: usize, seed: u64) -> Result<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_shots_with_rng(state, shots, &mut rng)
}

/// As [`sample_shots`] but drawing from a caller-owned RNG stream.
pub fn sample_shots_with_rng<R: Rng>(
    state: &QuantumState,
    shots: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if shots == 0 {
        return Err(Error::ZeroShots);
    }
    let cdf = cumulative_distribution(&state.probabilities());
    Ok((0..shots).map(|_| draw_index(&cdf, rng)).collect())
}

fn cumulative_distribution(probs: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = probs
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect();
    // Guard the binary search against the total landing a few ulps below 1.
    if let Some(last) = cdf.last_mut() {
        *last = f64::max(*last, 1.0);
    }
    cdf
}

fn draw_index<R: Rng>(cdf: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    // First index whose cumulative probability exceeds u.
    match cdf.binary_search_by(|c| c.partial_cmp(&u).unwrap()) {
        Ok(mut i) => {
            // Landed exactly on a boundary; step past zero-width bins.
            while i + 1 < cdf.len() && cdf[i + 1] <= u {
                i += 1;
            }
            (i + 1).min(cdf.len() - 1)
        }
        Err(i) => i.min(cdf.len() - 1),
    }
}

/// Two-qubit depolarizing noise of strength `p`, applied after every
/// two-qubit gate on that gate's target pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DepolarizingNoise {
    p: f64,
}

impl DepolarizingNoise {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) || !p.is_finite() {
            return Err(Error::InvalidNoiseProbability(p));
        }
        Ok(DepolarizingNoise { p })
    }

    /// The noiseless channel; trajectories reduce to plain circuit runs.
    pub fn off() -> Self {
        DepolarizingNoise { p: 0.0 }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn is_off(&self) -> bool {
        self.p == 0.0
    }
}

/// The 15 non-identity two-qubit Pauli pairs, in a fixed order.
fn two_qubit_pauli(index: usize) -> (Pauli, Pauli) {
    debug_assert!(index < 15);
    let k = index + 1; // skip (I, I)
    (PAULIS[k / 4], PAULIS[k % 4])
}

/// Runs one Monte Carlo Pauli trajectory of `circuit` under `noise`.
pub fn apply_noisy_circuit(
    circuit: &Circuit,
    noise: DepolarizingNoise,
    seed: u64,
) -> Result<QuantumState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    apply_noisy_circuit_with_rng(circuit, noise, &mut rng)
}

/// As [`apply_noisy_circuit`] with a caller-owned RNG stream.
pub fn apply_noisy_circuit_with_rng<R: Rng>(
    circuit: &Circuit,
    noise: DepolarizingNoise,
    rng: &mut R,
) -> Result<QuantumState> {
    let mut state = QuantumState::zero(circuit.num_qubits)?;
    for &gate in &circuit.gates {
        apply_gate(&mut state.amps, state.num_qubits, gate);
        if gate.is_two_qubit() && !noise.is_off() && rng.gen::<f64>() < noise.p {
            let (a, b) = gate.qubits();
            let b = b.expect("two-qubit gate has a second target");
            let (pa, pb) = two_qubit_pauli(rng.gen_range(0..15));
            apply_pauli(&mut state.amps, state.num_qubits, a, pa, false);
            apply_pauli(&mut state.amps, state.num_qubits, b, pb, false);
        }
    }
    Ok(state)
}

/// Exact outcome probabilities of `circuit` under `noise`, computed by
/// density-matrix evolution. Capped at [`MAX_DENSITY_QUBITS`] qubits; this
/// is the oracle trajectory averages are validated against.
pub fn density_oracle_probabilities(
    circuit: &Circuit,
    noise: DepolarizingNoise,
) -> Result<Vec<f64>> {
    let n = circuit.num_qubits;
    check_qubit_count(n, MAX_DENSITY_QUBITS)?;
    let dim = 1usize << n;

    // rho starts as |0...0><0...0|, stored row-major.
    let mut rho = vec![Complex64::new(0.0, 0.0); dim * dim];
    rho[0] = Complex64::new(1.0, 0.0);

    for &gate in &circuit.gates {
        unitary_conjugate(&mut rho, n, gate);
        if gate.is_two_qubit() && !noise.is_off() {
            let (a, b) = gate.qubits();
            depolarize(&mut rho, n, a, b.expect("two-qubit gate"), noise.p);
        }
    }

    Ok((0..dim).map(|i| rho[i * dim + i].re).collect())
}

/// rho -> U rho U^dagger.
///
/// Left multiplication applies the gate to every column; right
/// multiplication by U^dagger applies the conjugated gate to every row
/// (rows are contiguous, columns go through a scratch buffer).
fn unitary_conjugate(rho: &mut [Complex64], n: usize, gate: Gate) {
    let dim = 1usize << n;
    let mut col = vec![Complex64::new(0.0, 0.0); dim];
    for c in 0..dim {
        for r in 0..dim {
            col[r] = rho[r * dim + c];
        }
        apply_gate(&mut col, n, gate);
        for r in 0..dim {
            rho[r * dim + c] = col[r];
        }
    }
    let conj = gate.conjugated();
    for r in 0..dim {
        apply_gate(&mut rho[r * dim..(r + 1) * dim], n, conj);
    }
}

/// rho -> (1 - p) rho + (p / 15) sum over the 15 non-identity Pauli pairs
/// P of P rho P, acting on qubits (a, b).
fn depolarize(rho: &mut [Complex64], n: usize, a: usize, b: usize, p: f64) {
    let dim = 1usize << n;
    let mut sum = vec![Complex64::new(0.0, 0.0); dim * dim];
    let mut col = vec![Complex64::new(0.0, 0.0); dim];
    for k in 0..15 {
        let (pa, pb) = two_qubit_pauli(k);
        let mut term = rho.to_vec();
        // Left: P rho (columns), right: rho P^dagger = conj(P) on rows.
        for c in 0..dim {
            for r in 0..dim {
                col[r] = term[r * dim + c];
            }
            apply_pauli(&mut col, n, a, pa, false);
            apply_pauli(&mut col, n, b, pb, false);
            for r in 0..dim {
                term[r * dim + c] = col[r];
            }
        }
        for r in 0..dim {
            let row = &mut term[r * dim..(r + 1) * dim];
            apply_pauli(row, n, a, pa, true);
            apply_pauli(row, n, b, pb, true);
        }
        for (s, t) in sum.iter_mut().zip(&term) {
            *s += t;
        }
    }
    let keep = 1.0 - p;
    let mix = p / 15.0;
    for (r, s) in rho.iter_mut().zip(&sum) {
        *r = keep * *r + mix * s;
    }
}
