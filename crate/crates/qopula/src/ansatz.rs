//! The *qopula* ansatz: a circuit family over `d` registers of `n` qubits
//! whose per-register marginals are exactly uniform for every parameter
//! setting, so training can only shape the dependence structure — the
//! copula — of the d-variate output.
//!
//! Structure:
//!
//! 1. **Entangler.** For every bit position `j`, an H on register 0's qubit
//!    `j` followed by CNOTs fanning that qubit out to the same position of
//!    every other register. For `d = 2` this prepares `n` Bell pairs, i.e.
//!    `2^{-n/2} sum_i |i>|i>`; for `d > 2`, `n` GHZ states.
//! 2. **Local layers.** Each register independently receives `layers`
//!    repetitions of: RZ on every qubit, RX on every qubit, RZ on every
//!    qubit, then RXX on every qubit pair `(i, j)` with `i < j` in
//!    lexicographic order. Local unitaries leave the (maximally mixed)
//!    reduced state of each register untouched, which is what guarantees
//!    the uniform marginals.
//!
//! Parameters are packed register-major, then layer-major, each layer block
//! ordered `[rz; n][rx; n][rz; n][rxx; n(n-1)/2]`.
//!
//! A measured register outcome `k` (qubit 0 of the register = most
//! significant bit) maps to the unit interval as the bin center
//! `(k + 0.5) / 2^n`; [`sample_copula_points`] optionally appends
//! `pad_bits` uniformly random less-significant bits first so that samples
//! live on a finer `2^{n + pad_bits}` grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::statevec::{
    apply_circuit, apply_noisy_circuit_with_rng, sample_shots_with_rng, Circuit, DepolarizingNoise,
    Gate, QuantumState, MAX_QUBITS,
};
use crate::{Error, Result};

/// Largest value of `qubits_per_var + pad_bits`; keeps the implied
/// `2^{n + pad}` grid exactly representable in an f64.
pub const MAX_VALUE_BITS: usize = 52;

/// Shape of a qopula circuit: `num_vars` (d) registers of `qubits_per_var`
/// (n) qubits, `layers` (L) local layers, and `pad_bits` extra random bits
/// appended when decoding samples to the unit interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QopulaSpec {
    num_vars: usize,
    qubits_per_var: usize,
    layers: usize,
    pad_bits: usize,
}

impl QopulaSpec {
    pub fn new(
        num_vars: usize,
        qubits_per_var: usize,
        layers: usize,
        pad_bits: usize,
    ) -> Result<Self> {
        if num_vars < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 variables, got {num_vars}"
            )));
        }
        if qubits_per_var == 0 || layers == 0 {
            return Err(Error::InvalidConfig(
                "qubits_per_var and layers must be at least 1".into(),
            ));
        }
        let total = num_vars
            .checked_mul(qubits_per_var)
            .ok_or_else(|| Error::InvalidConfig("register size overflow".into()))?;
        if total > MAX_QUBITS {
            return Err(Error::QubitCountOutOfRange {
                requested: total,
                max: MAX_QUBITS,
            });
        }
        if qubits_per_var + pad_bits > MAX_VALUE_BITS {
            return Err(Error::InvalidConfig(format!(
                "qubits_per_var + pad_bits = {} exceeds {MAX_VALUE_BITS}",
                qubits_per_var + pad_bits
            )));
        }
        Ok(QopulaSpec {
            num_vars,
            qubits_per_var,
            layers,
            pad_bits,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn qubits_per_var(&self) -> usize {
        self.qubits_per_var
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn pad_bits(&self) -> usize {
        self.pad_bits
    }

    pub fn total_qubits(&self) -> usize {
        self.num_vars * self.qubits_per_var
    }

    /// First global qubit of `register`.
    pub fn register_base(&self, register: usize) -> usize {
        register * self.qubits_per_var
    }
}

/// Trainable angles in one layer acting on one register:
/// two RZ rounds, one RX round, and one RXX per qubit pair.
pub fn layer_param_count(qubits_per_var: usize) -> usize {
    3 * qubits_per_var + qubits_per_var * (qubits_per_var - 1) / 2
}

/// Total number of trainable angles: `d * L * (3n + n(n-1)/2)`.
pub fn param_count(spec: &QopulaSpec) -> usize {
    spec.num_vars * spec.layers * layer_param_count(spec.qubits_per_var)
}

/// Offset of the parameter block for (`register`, `layer`).
pub fn layer_base(spec: &QopulaSpec, register: usize, layer: usize) -> usize {
    debug_assert!(register < spec.num_vars && layer < spec.layers);
    (register * spec.layers + layer) * layer_param_count(spec.qubits_per_var)
}

/// Position of the RXX angle for the qubit pair `(i, j)`, `i < j`, inside a
/// layer block (relative to the block base, after the `3n` rotation angles).
pub fn rxx_index_in_layer(qubits_per_var: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < qubits_per_var);
    let n = qubits_per_var;
    3 * n + i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// The Bell/GHZ fan-out entangler on `num_vars` registers of
/// `qubits_per_var` qubits, with no trainable parameters.
pub fn entangler_circuit(num_vars: usize, qubits_per_var: usize) -> Result<Circuit> {
    let spec = QopulaSpec::new(num_vars, qubits_per_var, 1, 0)?;
    let mut circuit = Circuit::new(spec.total_qubits())?;
    push_entangler(&mut circuit, &spec)?;
    Ok(circuit)
}

fn push_entangler(circuit: &mut Circuit, spec: &QopulaSpec) -> Result<()> {
    for j in 0..spec.qubits_per_var {
        circuit.push(Gate::H { target: j })?;
        for r in 1..spec.num_vars {
            circuit.push(Gate::Cnot {
                control: j,
                target: spec.register_base(r) + j,
            })?;
        }
    }
    Ok(())
}

/// Builds the full qopula circuit for `theta` (length must equal
/// [`param_count`]).
pub fn assemble(spec: &QopulaSpec, theta: &[f64]) -> Result<Circuit> {
    let expected = param_count(spec);
    if theta.len() != expected {
        return Err(Error::DimensionMismatch(format!(
            "theta has {} entries, ansatz needs {expected}",
            theta.len()
        )));
    }
    let n = spec.qubits_per_var;
    let mut circuit = Circuit::new(spec.total_qubits())?;
    push_entangler(&mut circuit, spec)?;
    for r in 0..spec.num_vars {
        let base_qubit = spec.register_base(r);
        for l in 0..spec.layers {
            let block = &theta[layer_base(spec, r, l)..];
            for i in 0..n {
                circuit.push(Gate::Rz {
                    target: base_qubit + i,
                    angle: block[i],
                })?;
            }
            for i in 0..n {
                circuit.push(Gate::Rx {
                    target: base_qubit + i,
                    angle: block[n + i],
                })?;
            }
            for i in 0..n {
                circuit.push(Gate::Rz {
                    target: base_qubit + i,
                    angle: block[2 * n + i],
                })?;
            }
            for i in 0..n {
                for j in (i + 1)..n {
                    circuit.push(Gate::Rxx {
                        targets: (base_qubit + i, base_qubit + j),
                        angle: block[rxx_index_in_layer(n, i, j)],
                    })?;
                }
            }
        }
    }
    Ok(circuit)
}

/// Decodes a most-significant-bit-first bit list to the center of its cell
/// in the unit interval: `(k + 0.5) / 2^len`.
///
/// Panics if `bits` is empty or longer than [`MAX_VALUE_BITS`]; entries
/// must be 0 or 1.
pub fn bits_to_unit(bits: &[u8]) -> f64 {
    assert!(
        !bits.is_empty() && bits.len() <= MAX_VALUE_BITS,
        "bits_to_unit expects 1..={MAX_VALUE_BITS} bits, got {}",
        bits.len()
    );
    let mut k: u64 = 0;
    for &b in bits {
        debug_assert!(b <= 1, "bit values must be 0 or 1");
        k = (k << 1) | u64::from(b);
    }
    index_to_unit(k, bits.len())
}

/// [`bits_to_unit`] for an already-packed index on a `2^num_bits` grid.
pub fn index_to_unit(k: u64, num_bits: usize) -> f64 {
    debug_assert!(num_bits >= 1 && num_bits <= MAX_VALUE_BITS);
    debug_assert!(k < (1u64 << num_bits));
    (k as f64 + 0.5) / (1u64 << num_bits) as f64
}

/// Exact Born distribution of the assembled circuit over all
/// `2^(d * n)` basis outcomes.
pub fn exact_distribution(spec: &QopulaSpec, theta: &[f64]) -> Result<Vec<f64>> {
    let circuit = assemble(spec, theta)?;
    let state = apply_circuit(&QuantumState::zero(circuit.num_qubits())?, &circuit)?;
    Ok(state.probabilities())
}

/// Marginal distribution of one register, summing `probs` (a distribution
/// over all `2^(d * n)` outcomes) over every other register.
pub fn register_marginal(spec: &QopulaSpec, probs: &[f64], register: usize) -> Result<Vec<f64>> {
    let total = spec.total_qubits();
    if probs.len() != 1 << total {
        return Err(Error::DimensionMismatch(format!(
            "distribution has {} entries, expected {}",
            probs.len(),
            1usize << total
        )));
    }
    if register >= spec.num_vars {
        return Err(Error::InvalidConfig(format!(
            "register {register} out of range for {} variables",
            spec.num_vars
        )));
    }
    let n = spec.qubits_per_var;
    let mut marginal = vec![0.0; 1 << n];
    for (k, p) in probs.iter().enumerate() {
        marginal[register_outcome(spec, k, register)] += p;
    }
    Ok(marginal)
}

/// Extracts register `register`'s `n`-bit outcome from a global basis
/// index. Registers occupy contiguous bit blocks, register 0 highest.
#[inline]
pub fn register_outcome(spec: &QopulaSpec, basis_index: usize, register: usize) -> usize {
    let n = spec.qubits_per_var;
    let shift = spec.total_qubits() - (register + 1) * n;
    (basis_index >> shift) & ((1 << n) - 1)
}

/// Draws `shots` points in `(0, 1)^d` from the qopula circuit.
///
/// Noiseless runs prepare the statevector once and sample repeatedly. With
/// noise on, every shot runs its own Pauli trajectory, which is what the
/// depolarizing channel means operationally. Each register outcome gets
/// `pad_bits` fresh uniform bits appended (register-major within a shot)
/// before bin-center decoding. Everything is driven by one ChaCha stream,
/// so a fixed seed fixes the output exactly.
pub fn sample_copula_points(
    spec: &QopulaSpec,
    theta: &[f64],
    shots: usize,
    noise: DepolarizingNoise,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_copula_points_with_rng(spec, theta, shots, noise, &mut rng)
}

/// As [`sample_copula_points`] with a caller-owned RNG stream.
pub fn sample_copula_points_with_rng<R: Rng>(
    spec: &QopulaSpec,
    theta: &[f64],
    shots: usize,
    noise: DepolarizingNoise,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    let flat = sample_units_flat(spec, theta, shots, noise, rng)?;
    Ok(flat
        .chunks_exact(spec.num_vars)
        .map(|row| row.to_vec())
        .collect())
}

/// Two-variable convenience wrapper used by the training loops.
pub fn sample_copula_points_2d<R: Rng>(
    spec: &QopulaSpec,
    theta: &[f64],
    shots: usize,
    noise: DepolarizingNoise,
    rng: &mut R,
) -> Result<Vec<[f64; 2]>> {
    if spec.num_vars != 2 {
        return Err(Error::InvalidConfig(format!(
            "2d sampling requires exactly 2 variables, spec has {}",
            spec.num_vars
        )));
    }
    let flat = sample_units_flat(spec, theta, shots, noise, rng)?;
    Ok(flat.chunks_exact(2).map(|c| [c[0], c[1]]).collect())
}

/// Raw measured register outcomes (no padding, no decoding), one
/// `Vec<usize>` of register indices per shot, flattened row-major.
pub fn sample_register_outcomes<R: Rng>(
    spec: &QopulaSpec,
    theta: &[f64],
    shots: usize,
    noise: DepolarizingNoise,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if shots == 0 {
        return Err(Error::ZeroShots);
    }
    let circuit = assemble(spec, theta)?;
    let mut out = Vec::with_capacity(shots * spec.num_vars);
    if noise.is_off() {
        let state = apply_circuit(&QuantumState::zero(circuit.num_qubits())?, &circuit)?;
        for k in sample_shots_with_rng(&state, shots, rng)? {
            for r in 0..spec.num_vars {
                out.push(register_outcome(spec, k, r));
            }
        }
    } else {
        for _ in 0..shots {
            let state = apply_noisy_circuit_with_rng(&circuit, noise, rng)?;
            let k = sample_shots_with_rng(&state, 1, rng)?[0];
            for r in 0..spec.num_vars {
                out.push(register_outcome(spec, k, r));
            }
        }
    }
    Ok(out)
}

fn sample_units_flat<R: Rng>(
    spec: &QopulaSpec,
    theta: &[f64],
    shots: usize,
    noise: DepolarizingNoise,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let outcomes = sample_register_outcomes(spec, theta, shots, noise, rng)?;
    let n = spec.qubits_per_var;
    let pad = spec.pad_bits;
    let pad_cells = 1u64 << pad;
    Ok(outcomes
        .into_iter()
        .map(|k| {
            let padded = if pad == 0 {
                k as u64
            } else {
                ((k as u64) << pad) | rng.gen_range(0..pad_cells)
            };
            index_to_unit(padded, n + pad)
        })
        .collect())
}

/// Serialized model state for a trained qopula circuit.
///
/// The JSON layout `{"d", "n", "layers", "pad_bits", "theta"}` is part of
/// the tool's external interface; parsing validates consistency before any
/// circuit is built.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Checkpoint {
    pub d: usize,
    pub n: usize,
    pub layers: usize,
    pub pad_bits: usize,
    pub theta: Vec<f64>,
}

impl Checkpoint {
    pub fn new(spec: &QopulaSpec, theta: Vec<f64>) -> Self {
        Checkpoint {
            d: spec.num_vars,
            n: spec.qubits_per_var,
            layers: spec.layers,
            pad_bits: spec.pad_bits,
            theta,
        }
    }

    /// Parses and fully validates a checkpoint; never panics on malformed
    /// input.
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_slice(bytes)?;
        ckpt.spec()?; // range checks
        let expected = param_count(&ckpt.spec()?);
        if ckpt.theta.len() != expected {
            return Err(Error::BadCheckpoint(format!(
                "theta has {} entries, shape needs {expected}",
                ckpt.theta.len()
            )));
        }
        if ckpt.theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::BadCheckpoint("theta contains non-finite angles".into()));
        }
        Ok(ckpt)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serialization cannot fail")
    }

    pub fn spec(&self) -> Result<QopulaSpec> {
        QopulaSpec::new(self.d, self.n, self.layers, self.pad_bits)
            .map_err(|e| Error::BadCheckpoint(e.to_string()))
    }
}

/// Seeds a bigger ansatz from a trained smaller one: angles of gates that
/// exist in both (same register, layer, qubit positions) are copied, gates
/// only present in the bigger ansatz start at zero. Requires matching
/// `num_vars` and `layers` and `small.n <= big.n`.
pub fn transfer_init(
    small: &QopulaSpec,
    small_theta: &[f64],
    big: &QopulaSpec,
) -> Result<Vec<f64>> {
    if small_theta.len() != param_count(small) {
        return Err(Error::DimensionMismatch(format!(
            "theta has {} entries, small ansatz needs {}",
            small_theta.len(),
            param_count(small)
        )));
    }
    if small.num_vars != big.num_vars
        || small.layers != big.layers
        || small.qubits_per_var > big.qubits_per_var
    {
        return Err(Error::InvalidConfig(
            "transfer requires equal num_vars and layers and non-decreasing qubits_per_var".into(),
        ));
    }
    let (ns, nb) = (small.qubits_per_var, big.qubits_per_var);
    let mut theta = vec![0.0; param_count(big)];
    for r in 0..big.num_vars {
        for l in 0..big.layers {
            let sb = layer_base(small, r, l);
            let bb = layer_base(big, r, l);
            for i in 0..ns {
                theta[bb + i] = small_theta[sb + i];
                theta[bb + nb + i] = small_theta[sb + ns + i];
                theta[bb + 2 * nb + i] = small_theta[sb + 2 * ns + i];
            }
            for i in 0..ns {
                for j in (i + 1)..ns {
                    theta[bb + rxx_index_in_layer(nb, i, j)] =
                        small_theta[sb + rxx_index_in_layer(ns, i, j)];
                }
            }
        }
    }
    Ok(theta)
}
