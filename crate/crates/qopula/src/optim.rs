//! Optimizers: SPSA for the quantum generators (two cost evaluations per
//! step, no parameter-shift circuits) and Adam for the discriminator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// SPSA gain schedule and budget: `a_k = a / k`, `c_k = c / k^gamma`,
/// with `k` counting from 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpsaConfig {
    pub a: f64,
    pub c: f64,
    pub gamma: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl SpsaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.c > 0.0 && self.gamma > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "SPSA gains must be positive (a = {}, c = {}, gamma = {})",
                self.a, self.c, self.gamma
            )));
        }
        Ok(())
    }
}

impl Default for SpsaConfig {
    /// The generator-update settings: a = 0.008, c = 0.01, gamma = 0.101,
    /// five iterations per update.
    fn default() -> Self {
        SpsaConfig {
            a: 0.008,
            c: 0.01,
            gamma: 0.101,
            iterations: 5,
            seed: 0,
        }
    }
}

/// Draws a simultaneous-perturbation direction with i.i.d. ±1 entries.
pub fn rademacher_delta<R: Rng>(dim: usize, rng: &mut R) -> Vec<f64> {
    (0..dim)
        .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
        .collect()
}

/// One-shot SPSA gradient estimate:
/// `g_i = [C(theta + c_k delta) - C(theta - c_k delta)] / (2 c_k delta_i)`.
///
/// Exactly two cost evaluations, regardless of dimension.
pub fn spsa_gradient_estimate<F>(cost: &mut F, theta: &[f64], c_k: f64, delta: &[f64]) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    debug_assert!(c_k > 0.0);
    debug_assert_eq!(theta.len(), delta.len());
    debug_assert!(delta.iter().all(|d| *d == 1.0 || *d == -1.0));
    let plus: Vec<f64> = theta
        .iter()
        .zip(delta)
        .map(|(t, d)| t + c_k * d)
        .collect();
    let minus: Vec<f64> = theta
        .iter()
        .zip(delta)
        .map(|(t, d)| t - c_k * d)
        .collect();
    let diff = cost(&plus) - cost(&minus);
    delta
        .iter()
        .map(|d| diff / (2.0 * c_k * d))
        .collect()
}

/// Result of an SPSA run: the final parameters and one cost value per
/// iteration (the mean of the two perturbed evaluations, so tracing adds
/// no extra cost calls).
#[derive(Clone, Debug)]
pub struct SpsaRun {
    pub theta: Vec<f64>,
    pub cost_trace: Vec<f64>,
}

/// Minimizes `cost` from `theta0` with the schedule in `config`.
/// Perturbation directions are resampled each iteration from the seed.
pub fn spsa_minimize<F>(mut cost: F, theta0: Vec<f64>, config: &SpsaConfig) -> Result<SpsaRun>
where
    F: FnMut(&[f64]) -> f64,
{
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut theta = theta0;
    let mut trace = Vec::with_capacity(config.iterations);
    spsa_chain(&mut cost, &mut theta, config, 1, &mut rng, Some(&mut trace));
    Ok(SpsaRun {
        theta,
        cost_trace: trace,
    })
}

/// Core SPSA loop shared with the training drivers: runs
/// `config.iterations` updates in place, with the schedule index starting
/// at `first_k`, drawing perturbations from `rng`.
pub(crate) fn spsa_chain<F, R>(
    cost: &mut F,
    theta: &mut Vec<f64>,
    config: &SpsaConfig,
    first_k: usize,
    rng: &mut R,
    mut trace: Option<&mut Vec<f64>>,
) where
    F: FnMut(&[f64]) -> f64,
    R: Rng,
{
    for k in first_k..first_k + config.iterations {
        let a_k = config.a / k as f64;
        let c_k = config.c / (k as f64).powf(config.gamma);
        let delta = rademacher_delta(theta.len(), rng);
        let plus: Vec<f64> = theta
            .iter()
            .zip(&delta)
            .map(|(t, d)| t + c_k * d)
            .collect();
        let minus: Vec<f64> = theta
            .iter()
            .zip(&delta)
            .map(|(t, d)| t - c_k * d)
            .collect();
        let c_plus = cost(&plus);
        let c_minus = cost(&minus);
        let scale = (c_plus - c_minus) / (2.0 * c_k);
        for (t, d) in theta.iter_mut().zip(&delta) {
            // delta_i = ±1, so dividing by it is multiplying.
            *t -= a_k * scale * d;
        }
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(0.5 * (c_plus + c_minus));
        }
    }
}

/// Adam hyperparameters. The learning rate is always set explicitly by
/// callers; moments and epsilon default to the standard values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        AdamConfig {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if !ok {
            return Err(Error::InvalidConfig(format!(
                "bad Adam config: lr = {}, beta1 = {}, beta2 = {}, epsilon = {}",
                self.learning_rate, self.beta1, self.beta2, self.epsilon
            )));
        }
        Ok(())
    }
}

/// Adam state: first/second moment estimates plus the step counter used
/// for bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(dim: usize, config: AdamConfig) -> Result<Self> {
        config.validate()?;
        Ok(Adam {
            config,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// Applies one bias-corrected Adam update to `params` in place.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::DimensionMismatch(format!(
                "Adam state has {} parameters, got params = {}, grads = {}",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.t += 1;
        let b1 = self.config.beta1;
        let b2 = self.config.beta2;
        let bias1 = 1.0 - b1.powi(self.t as i32);
        let bias2 = 1.0 - b2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * grads[i];
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * grads[i] * grads[i];
            let m_hat = self.m[i] / bias1;
            let v_hat = self.v[i] / bias2;
            params[i] -= self.config.learning_rate * m_hat / (v_hat.sqrt() + self.config.epsilon);
        }
        Ok(())
    }
}
