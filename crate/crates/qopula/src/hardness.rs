//! Constructive check that the qopula circuit family contains IQP output
//! distributions as conditionals.
//!
//! An IQP circuit is `H^{⊗n} · exp(iD) · H^{⊗n}` with a diagonal phase
//! `D = Σ_{k<l} J_kl Z_k Z_l + Σ_k M_k Z_k`. Because `H Z H = X`, the same
//! unitary equals `exp(i Σ J_kl X_k X_l + i Σ M_k X_k)`, which is exactly
//! one qopula layer with the RZ angles set to zero — the RX block carries
//! `M` and the RXX block carries the upper triangle of `J`, angle for
//! angle under this crate's rotation conventions. Conditioning the
//! two-register circuit on register B measuring all zeros then reproduces
//! `|⟨z_A| U_A |0…0⟩|²`.
//!
//! [`verify_iqp_reduction`] computes both sides through independent routes
//! (a direct Fourier sum over the diagonal phases vs. the full
//! 2n-qubit statevector) and reports the largest probability difference.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ansatz::{layer_base, param_count, rxx_index_in_layer, QopulaSpec};
use crate::{Error, Result};

/// Direct phase summation is O(4^n); keep instances small enough that a
/// check stays interactive.
pub const MAX_IQP_QUBITS: usize = 10;

/// Reduction instances also build a 2n-qubit statevector.
pub const MAX_REDUCTION_QUBITS: usize = 8;

/// Coupling and field angles of one IQP circuit.
#[derive(Clone, Debug, PartialEq)]
pub struct IqpInstance {
    couplings: Vec<Vec<f64>>,
    fields: Vec<f64>,
}

impl IqpInstance {
    /// Builds an instance from a symmetric zero-diagonal coupling matrix
    /// and a field vector of matching length.
    pub fn new(couplings: Vec<Vec<f64>>, fields: Vec<f64>) -> Result<Self> {
        let n = fields.len();
        if n == 0 || n > MAX_IQP_QUBITS {
            return Err(Error::QubitCountOutOfRange {
                requested: n,
                max: MAX_IQP_QUBITS,
            });
        }
        if couplings.len() != n || couplings.iter().any(|row| row.len() != n) {
            return Err(Error::DimensionMismatch(format!(
                "coupling matrix must be {n}x{n} to match {n} fields"
            )));
        }
        if couplings.iter().flatten().chain(&fields).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "IqpInstance" });
        }
        for k in 0..n {
            if couplings[k][k] != 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "coupling diagonal entry ({k},{k}) must be zero"
                )));
            }
            for l in 0..k {
                if couplings[k][l] != couplings[l][k] {
                    return Err(Error::InvalidConfig(format!(
                        "coupling matrix must be symmetric; entries ({k},{l}) and ({l},{k}) differ"
                    )));
                }
            }
        }
        Ok(IqpInstance { couplings, fields })
    }

    /// Draws all angles uniformly from [-pi, pi].
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        let mut couplings = vec![vec![0.0; n.max(1)]; n.max(1)];
        for i in 0..n {
            for j in (i + 1)..n {
                let angle = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
                couplings[i][j] = angle;
                couplings[j][i] = angle;
            }
        }
        let fields = (0..n)
            .map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
            .collect();
        IqpInstance::new(couplings, fields)
    }

    pub fn n(&self) -> usize {
        self.fields.len()
    }

    pub fn coupling(&self, k: usize, l: usize) -> f64 {
        self.couplings[k][l]
    }

    pub fn field(&self, k: usize) -> f64 {
        self.fields[k]
    }

    /// Diagonal phase d(z) with qubit k's bit at position n-1-k, matching
    /// the statevector basis ordering.
    fn phase(&self, z: usize) -> f64 {
        let n = self.n();
        let sign = |k: usize| -> f64 {
            if z >> (n - 1 - k) & 1 == 1 {
                -1.0
            } else {
                1.0
            }
        };
        let mut d = 0.0;
        for k in 0..n {
            for l in (k + 1)..n {
                d += self.couplings[k][l] * sign(k) * sign(l);
            }
            d += self.fields[k] * sign(k);
        }
        d
    }
}

/// One line of the reduce-check CLI output.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct ReductionCheck {
    pub n: usize,
    pub max_diff: f64,
}

/// Output distribution |⟨z| H^{⊗n} exp(iD) H^{⊗n} |0^n⟩|² computed as a
/// Fourier sum over the 2^n diagonal phases — no circuit simulation, so
/// it is an independent oracle for the statevector route.
pub fn iqp_distribution(instance: &IqpInstance) -> Vec<f64> {
    let n = instance.n();
    let dim = 1usize << n;
    let phases: Vec<Complex64> = (0..dim)
        .map(|z| Complex64::from_polar(1.0, instance.phase(z)))
        .collect();
    let norm = 1.0 / dim as f64;
    (0..dim)
        .map(|out| {
            let mut amp = Complex64::new(0.0, 0.0);
            for (z, w) in phases.iter().enumerate() {
                if (out & z).count_ones() % 2 == 0 {
                    amp += w;
                } else {
                    amp -= w;
                }
            }
            (amp * norm).norm_sqr()
        })
        .collect()
}

/// Distribution of register A given register B measured all zeros, taken
/// from the full two-register statevector. Requires exactly two registers
/// and all register-B parameters zero, so the conditional equals
/// |⟨z_A| U_A |0…0⟩|².
pub fn qopula_conditional(spec: &QopulaSpec, theta: &[f64]) -> Result<Vec<f64>> {
    if spec.num_vars() != 2 {
        return Err(Error::InvalidConfig(format!(
            "the conditional construction uses exactly 2 registers, got {}",
            spec.num_vars()
        )));
    }
    let b_base = layer_base(spec, 1, 0);
    if theta.len() != param_count(spec) {
        return Err(Error::DimensionMismatch(format!(
            "expected {} parameters, got {}",
            param_count(spec),
            theta.len()
        )));
    }
    if theta[b_base..].iter().any(|a| *a != 0.0) {
        return Err(Error::InvalidConfig(
            "register-B parameters must all be zero for the conditional identity".into(),
        ));
    }
    let probs = crate::ansatz::exact_distribution(spec, theta)?;
    let n = spec.qubits_per_var();
    // Register B occupies the least significant n bits, so the
    // conditioning event z_B = 0 picks every 2^n-th amplitude.
    let joint: Vec<f64> = (0..1usize << n).map(|z_a| probs[z_a << n]).collect();
    let event: f64 = joint.iter().sum();
    if event <= 0.0 {
        return Err(Error::DegenerateData(
            "conditioning event z_B = 0 has zero probability".into(),
        ));
    }
    Ok(joint.into_iter().map(|p| p / event).collect())
}

/// Single-layer qopula parameters implementing a given IQP instance in
/// register A: RZ angles zero, RX block = fields, RXX block = upper
/// triangle of the couplings, register B untouched.
pub fn reduction_theta(instance: &IqpInstance) -> Result<(QopulaSpec, Vec<f64>)> {
    let n = instance.n();
    let spec = QopulaSpec::new(2, n, 1, 0)?;
    let mut theta = vec![0.0; param_count(&spec)];
    let base = layer_base(&spec, 0, 0);
    for k in 0..n {
        theta[base + n + k] = instance.field(k);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            theta[base + rxx_index_in_layer(n, i, j)] = instance.coupling(i, j);
        }
    }
    Ok((spec, theta))
}

/// Largest absolute probability difference between the IQP distribution
/// and the conditional distribution of the reduced qopula circuit.
pub fn verify_iqp_reduction(instance: &IqpInstance) -> Result<f64> {
    if instance.n() > MAX_REDUCTION_QUBITS {
        return Err(Error::QubitCountOutOfRange {
            requested: instance.n(),
            max: MAX_REDUCTION_QUBITS,
        });
    }
    let reference = iqp_distribution(instance);
    let (spec, theta) = reduction_theta(instance)?;
    let conditional = qopula_conditional(&spec, &theta)?;
    Ok(reference
        .iter()
        .zip(&conditional)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}
