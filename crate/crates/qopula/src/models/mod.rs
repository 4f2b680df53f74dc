//! Training drivers for the generative models: the QCBM (trained against
//! a binned copula target with a KL cost), the QGAN (quantum generator
//! against a classical discriminator), the fully classical GAN baseline,
//! and the parametric Gaussian-copula baseline.
//!
//! Every driver draws all of its randomness from one master seed, split
//! into fixed ChaCha streams per purpose (initialization, circuit shots,
//! SPSA perturbations, minibatch resampling), so a seed pins the entire
//! run down to the logged bytes.

mod gan;
mod gaussian;
mod qcbm;

pub use gan::{
    train_classical_gan, train_classical_gan_with, train_qgan, train_qgan_with, CganConfig,
    CganRun, QganConfig, QganRun,
};
pub use gaussian::{
    fit_gaussian_copula, normal_cdf, normal_quantile, sample_gaussian_copula, GaussianCopulaModel,
};
pub use qcbm::{
    measured_grid, qcbm_cost, qcbm_cost_directed, train_qcbm, train_qcbm_with, QcbmConfig, QcbmRun,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Floor for the arguments of the logarithms in the adversarial losses.
/// A saturated sigmoid can emit exactly 0 or 1 in f64; the clip keeps the
/// losses finite without affecting gradients away from saturation.
pub const LOG_CLIP: f64 = 1e-12;

// Stream indices carving independent ChaCha substreams out of one master
// seed. Keeping them fixed makes runs reproducible byte for byte; they are
// public so downstream tools can replay individual streams (e.g. redraw
// the evaluation samples of a finished run).
pub const STREAM_INIT: u64 = 1;
pub const STREAM_SPSA: u64 = 2;
pub const STREAM_SHOTS: u64 = 3;
pub const STREAM_REAL: u64 = 4;
pub const STREAM_NOISE: u64 = 5;

/// The ChaCha substream `stream` of the master `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One line of a training log. QCBM runs fill `kl`; the GAN drivers fill
/// `loss_g` and `loss_d`. Parameter snapshots stay in memory only — the
/// serialized form is exactly the JSON-lines external format.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TrainingRecord {
    pub iter: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kl: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_d: Option<f64>,
    #[serde(skip)]
    pub theta_snapshot: Option<Vec<f64>>,
}

impl TrainingRecord {
    pub fn kl(iter: usize, kl: f64) -> Self {
        TrainingRecord {
            iter,
            kl: Some(kl),
            loss_g: None,
            loss_d: None,
            theta_snapshot: None,
        }
    }

    pub fn gan(iter: usize, loss_g: f64, loss_d: f64) -> Self {
        TrainingRecord {
            iter,
            kl: None,
            loss_g: Some(loss_g),
            loss_d: Some(loss_d),
            theta_snapshot: None,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("training records always serialize")
    }
}

/// Renders a log as JSON lines (one record per line, trailing newline).
pub fn render_log(log: &[TrainingRecord]) -> String {
    let mut out = String::new();
    for record in log {
        out.push_str(&record.to_json_line());
        out.push('\n');
    }
    out
}

/// Checks the log invariant: iteration numbers strictly increasing.
pub fn validate_log(log: &[TrainingRecord]) -> Result<()> {
    for w in log.windows(2) {
        if w[1].iter <= w[0].iter {
            return Err(Error::InvalidConfig(format!(
                "log iterations must increase strictly, got {} then {}",
                w[0].iter, w[1].iter
            )));
        }
    }
    Ok(())
}

fn check_scores(context: &'static str, scores: &[f64]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::NotEnoughData {
            context,
            min: 1,
            got: 0,
        });
    }
    for &s in scores {
        if !s.is_finite() {
            return Err(Error::NonFinite { context });
        }
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::OutOfDomain {
                context,
                value: s,
                expected: "a discriminator score in [0, 1]",
            });
        }
    }
    Ok(())
}

/// Discriminator loss `-(1/2m) Σ [log D(x) + log(1 - D(G(z)))]` over a
/// real and a fake batch of equal size, with clipped logarithms.
pub fn discriminator_loss(d_real: &[f64], d_fake: &[f64]) -> Result<f64> {
    check_scores("discriminator_loss", d_real)?;
    check_scores("discriminator_loss", d_fake)?;
    if d_real.len() != d_fake.len() {
        return Err(Error::DimensionMismatch(format!(
            "real and fake batches differ: {} vs {}",
            d_real.len(),
            d_fake.len()
        )));
    }
    let m = d_real.len() as f64;
    let total: f64 = d_real
        .iter()
        .zip(d_fake)
        .map(|(r, f)| r.max(LOG_CLIP).ln() + (1.0 - f).max(LOG_CLIP).ln())
        .sum();
    Ok(-total / (2.0 * m))
}

/// Generator loss `-(1/m) Σ log D(G(z))` with clipped logarithms.
pub fn generator_loss(d_fake: &[f64]) -> Result<f64> {
    check_scores("generator_loss", d_fake)?;
    let m = d_fake.len() as f64;
    Ok(-d_fake.iter().map(|f| f.max(LOG_CLIP).ln()).sum::<f64>() / m)
}

/// Draws `count` rows from `points` with replacement.
pub fn bootstrap_sample<R: Rng>(points: &[[f64; 2]], count: usize, rng: &mut R) -> Vec<[f64; 2]> {
    (0..count)
        .map(|_| points[rng.gen_range(0..points.len())])
        .collect()
}
