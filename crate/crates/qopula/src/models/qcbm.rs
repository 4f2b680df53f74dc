//! QCBM training: minimize a clipped KL divergence between the measured
//! circuit distribution and a binned copula-space target, one SPSA update
//! per iteration.

use rand::Rng;

use crate::ansatz::{assemble, param_count, sample_register_outcomes, QopulaSpec};
use crate::copula::GridDistribution;
use crate::eval::{kl_report, KlDirection};
use crate::optim::{spsa_chain, SpsaConfig};
use crate::statevec::DepolarizingNoise;
use crate::{Error, Result};

use super::{stream_rng, TrainingRecord, STREAM_SHOTS, STREAM_SPSA};

/// Everything one QCBM run needs. The SPSA seed doubles as the master
/// seed for all randomness in the run.
#[derive(Clone, Debug)]
pub struct QcbmConfig {
    pub spec: QopulaSpec,
    pub spsa: SpsaConfig,
    /// Measurement shots drawn per cost evaluation.
    pub shots: usize,
    /// Binned training distribution over the 2^n x 2^n copula grid.
    pub target: GridDistribution,
    /// Floor applied to the KL denominator.
    pub clip: f64,
    pub direction: KlDirection,
    /// Starting angles; empty means all zeros. Seeding from a smaller
    /// trained system goes through `ansatz::transfer_init`.
    pub initial_theta: Vec<f64>,
    pub noise: DepolarizingNoise,
}

impl QcbmConfig {
    /// Defaults for simulator training: SPSA gains a = c = 0.5 with 200
    /// iterations, 2048 shots, clip 1e-6, and the KL form the training
    /// loop actually optimizes (model-weighted).
    pub fn new(spec: QopulaSpec, target: GridDistribution) -> Self {
        QcbmConfig {
            spec,
            spsa: SpsaConfig {
                a: 0.5,
                c: 0.5,
                gamma: 0.101,
                iterations: 200,
                seed: 0,
            },
            shots: 2048,
            target,
            clip: 1e-6,
            direction: KlDirection::Reverse,
            initial_theta: Vec::new(),
            noise: DepolarizingNoise::off(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spsa.validate()?;
        if self.spec.num_vars() != 2 {
            return Err(Error::InvalidConfig(format!(
                "QCBM training uses a 2D grid target, spec has {} variables",
                self.spec.num_vars()
            )));
        }
        let grid = 1usize << self.spec.qubits_per_var();
        if self.target.bins() != grid {
            return Err(Error::DimensionMismatch(format!(
                "target has {} bins per dimension, circuit registers resolve {grid}",
                self.target.bins()
            )));
        }
        if self.shots == 0 {
            return Err(Error::ZeroShots);
        }
        if !(self.clip > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "clip must be positive, got {}",
                self.clip
            )));
        }
        if !self.initial_theta.is_empty() {
            if self.initial_theta.len() != param_count(&self.spec) {
                return Err(Error::DimensionMismatch(format!(
                    "initial theta has {} entries, ansatz takes {}",
                    self.initial_theta.len(),
                    param_count(&self.spec)
                )));
            }
            if self.initial_theta.iter().any(|t| !t.is_finite()) {
                return Err(Error::NonFinite {
                    context: "QcbmConfig initial_theta",
                });
            }
        }
        Ok(())
    }
}

/// Result of a QCBM run: the angles at the minimum observed cost, that
/// cost, where it occurred, and the full per-iteration log.
#[derive(Clone, Debug)]
pub struct QcbmRun {
    pub theta: Vec<f64>,
    pub best_cost: f64,
    pub best_iteration: usize,
    pub log: Vec<TrainingRecord>,
}

/// KL divergence the QCBM optimizes: `Σ q log(q / max(p, clip))` with the
/// measured distribution `q` weighting the terms.
pub fn qcbm_cost(q: &GridDistribution, p: &GridDistribution, clip: f64) -> Result<f64> {
    qcbm_cost_directed(q, p, KlDirection::Reverse, clip)
}

/// The same cost with selectable direction; `Forward` weights terms by
/// the target instead.
pub fn qcbm_cost_directed(
    q: &GridDistribution,
    p: &GridDistribution,
    direction: KlDirection,
    clip: f64,
) -> Result<f64> {
    if q.bins() != p.bins() {
        return Err(Error::DimensionMismatch(format!(
            "grids have {} and {} bins per dimension",
            q.bins(),
            p.bins()
        )));
    }
    kl_report(q.probs(), p.probs(), direction, clip)
}

/// Runs the circuit for `shots` measurements and bins the register pairs
/// into a grid distribution — the `q` of the QCBM cost.
pub fn measured_grid<R: Rng>(
    spec: &QopulaSpec,
    theta: &[f64],
    shots: usize,
    noise: DepolarizingNoise,
    rng: &mut R,
) -> Result<GridDistribution> {
    let bins = 1usize << spec.qubits_per_var();
    let outcomes = sample_register_outcomes(spec, theta, shots, noise, rng)?;
    let mut counts = vec![0.0; bins * bins];
    for pair in outcomes.chunks_exact(2) {
        counts[pair[0] * bins + pair[1]] += 1.0;
    }
    let total = shots as f64;
    for c in &mut counts {
        *c /= total;
    }
    GridDistribution::from_probs(bins, counts)
}

/// QCBM training loop: per iteration, measure `shots` outcomes at the
/// current angles, log the KL against the target, then take one SPSA step
/// (two further measured evaluations at the perturbed angles). Returns
/// the angles of the minimum logged cost, not the final iterate.
pub fn train_qcbm(config: &QcbmConfig) -> Result<QcbmRun> {
    train_qcbm_with(config, |_| {})
}

/// [`train_qcbm`] with an observer invoked after every logged iteration,
/// so long runs can stream progress (e.g. append to a log file) instead
/// of going dark until the end.
pub fn train_qcbm_with<F>(config: &QcbmConfig, mut observe: F) -> Result<QcbmRun>
where
    F: FnMut(&TrainingRecord),
{
    config.validate()?;
    let dim = param_count(&config.spec);
    let mut theta = if config.initial_theta.is_empty() {
        vec![0.0; dim]
    } else {
        config.initial_theta.clone()
    };
    // Surface circuit-construction errors before the loop; afterwards the
    // in-loop evaluations cannot fail (dimensions are fixed).
    assemble(&config.spec, &theta)?;

    let mut shot_rng = stream_rng(config.spsa.seed, STREAM_SHOTS);
    let mut spsa_rng = stream_rng(config.spsa.seed, STREAM_SPSA);
    let step = SpsaConfig {
        iterations: 1,
        ..config.spsa
    };

    let mut log = Vec::with_capacity(config.spsa.iterations);
    let mut best_cost = f64::INFINITY;
    let mut best_iteration = 0;
    let mut best_theta = theta.clone();

    for k in 1..=config.spsa.iterations {
        let q = measured_grid(&config.spec, &theta, config.shots, config.noise, &mut shot_rng)?;
        let kl = qcbm_cost_directed(&q, &config.target, config.direction, config.clip)?;
        let mut record = TrainingRecord::kl(k, kl);
        if kl < best_cost {
            best_cost = kl;
            best_iteration = k;
            best_theta = theta.clone();
            record.theta_snapshot = Some(theta.clone());
        }
        observe(&record);
        log.push(record);

        let mut cost = |t: &[f64]| -> f64 {
            let q = measured_grid(&config.spec, t, config.shots, config.noise, &mut shot_rng)
                .expect("sampling validated before the loop");
            qcbm_cost_directed(&q, &config.target, config.direction, config.clip)
                .expect("grids validated before the loop")
        };
        spsa_chain(&mut cost, &mut theta, &step, k, &mut spsa_rng, None);
    }

    Ok(QcbmRun {
        theta: best_theta,
        best_cost,
        best_iteration,
        log,
    })
}
