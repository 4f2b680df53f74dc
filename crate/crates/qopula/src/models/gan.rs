//! Adversarial training drivers. The QGAN pairs the qopula circuit with a
//! small classical discriminator (Adam for the discriminator, an inner
//! SPSA loop for the circuit angles). The classical baseline trains the
//! 24-parameter generator network against the same discriminator with
//! Adam on both sides.

use rand::Rng;

use crate::ansatz::{assemble, param_count, sample_copula_points_2d, QopulaSpec};
use crate::nnet::{
    classical_generator_arch, discriminator_arch, ForwardCache, LayerSpec, Matrix, Mlp, Mode,
};
use crate::optim::{spsa_chain, Adam, AdamConfig, SpsaConfig};
use crate::statevec::DepolarizingNoise;
use crate::{Error, Result};

use super::{
    bootstrap_sample, discriminator_loss, generator_loss, stream_rng, TrainingRecord, LOG_CLIP,
    STREAM_INIT, STREAM_NOISE, STREAM_REAL, STREAM_SHOTS, STREAM_SPSA,
};

/// QGAN setup. `inner` holds the SPSA gains for the generator update
/// (its `iterations` field is the per-iteration step count n_iter, and
/// its schedule restarts at k = 1 every outer iteration; its seed is
/// unused — `seed` here is the master).
#[derive(Clone, Debug)]
pub struct QganConfig {
    pub spec: QopulaSpec,
    pub disc_arch: Vec<LayerSpec>,
    /// Batch size m: generator shots and real minibatch rows.
    pub batch: usize,
    pub iterations: usize,
    pub inner: SpsaConfig,
    pub disc_lr: f64,
    pub seed: u64,
    pub noise: DepolarizingNoise,
}

impl QganConfig {
    /// Simulation defaults: a = 0.008, c = 0.01, n_iter = 5, gamma =
    /// 0.101, discriminator learning rate 0.0015, batch 2048, 1000
    /// iterations.
    pub fn new(spec: QopulaSpec) -> Self {
        QganConfig {
            spec,
            disc_arch: discriminator_arch(),
            batch: 2048,
            iterations: 1000,
            inner: SpsaConfig::default(),
            disc_lr: 0.0015,
            seed: 0,
            noise: DepolarizingNoise::off(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.spec.num_vars() != 2 {
            return Err(Error::InvalidConfig(format!(
                "the discriminator takes 2D points, spec has {} variables",
                self.spec.num_vars()
            )));
        }
        if self.batch == 0 {
            return Err(Error::InvalidConfig("batch size must be at least 1".into()));
        }
        self.inner.validate()?;
        if !(self.disc_lr > 0.0 && self.disc_lr.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "discriminator learning rate must be positive, got {}",
                self.disc_lr
            )));
        }
        Ok(())
    }
}

/// Trained QGAN state.
#[derive(Clone, Debug)]
pub struct QganRun {
    pub theta: Vec<f64>,
    pub discriminator: Mlp,
    pub log: Vec<TrainingRecord>,
}

/// Classical GAN setup (Adam on both networks, shared learning rate).
#[derive(Clone, Debug)]
pub struct CganConfig {
    pub gen_arch: Vec<LayerSpec>,
    pub disc_arch: Vec<LayerSpec>,
    pub batch: usize,
    pub iterations: usize,
    pub lr: f64,
    pub seed: u64,
}

impl CganConfig {
    /// Baseline defaults: the 24-parameter generator on 6-dimensional
    /// uniform noise, learning rate 0.0001, 20000 iterations.
    pub fn new() -> Self {
        CganConfig {
            gen_arch: classical_generator_arch(),
            disc_arch: discriminator_arch(),
            batch: 2048,
            iterations: 20_000,
            lr: 1e-4,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 {
            return Err(Error::InvalidConfig("batch size must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        Ok(())
    }
}

impl Default for CganConfig {
    fn default() -> Self {
        CganConfig::new()
    }
}

/// Trained classical-GAN state.
#[derive(Clone, Debug)]
pub struct CganRun {
    pub generator: Mlp,
    pub discriminator: Mlp,
    pub log: Vec<TrainingRecord>,
}

fn check_real_points(points: &[[f64; 2]]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::NotEnoughData {
            context: "gan training data",
            min: 1,
            got: 0,
        });
    }
    for p in points {
        for &u in p {
            if !(u > 0.0 && u < 1.0) {
                return Err(Error::OutOfDomain {
                    context: "gan training data",
                    value: u,
                    expected: "copula-space coordinates strictly inside (0, 1)",
                });
            }
        }
    }
    Ok(())
}

/// Discriminator scores for a batch of 2D points, with the cache needed
/// for backprop.
fn scores(disc: &Mlp, points: &[[f64; 2]]) -> Result<(Vec<f64>, ForwardCache)> {
    let (out, cache) = disc.forward(&Matrix::from_points(points), Mode::Train)?;
    Ok(((0..out.rows).map(|r| out.at(r, 0)).collect(), cache))
}

/// Loss gradient with respect to the discriminator outputs for the real
/// half of the batch: d/dD[-(1/2m) log D] = -1/(2m D).
fn upstream_real(d_real: &[f64]) -> Matrix {
    let m = d_real.len() as f64;
    let mut up = Matrix::zeros(d_real.len(), 1);
    for (r, &d) in d_real.iter().enumerate() {
        *up.at_mut(r, 0) = -1.0 / (2.0 * m * d.max(LOG_CLIP));
    }
    up
}

/// The fake half: d/dD[-(1/2m) log(1 - D)] = +1/(2m (1 - D)).
fn upstream_fake(d_fake: &[f64]) -> Matrix {
    let m = d_fake.len() as f64;
    let mut up = Matrix::zeros(d_fake.len(), 1);
    for (r, &d) in d_fake.iter().enumerate() {
        *up.at_mut(r, 0) = 1.0 / (2.0 * m * (1.0 - d).max(LOG_CLIP));
    }
    up
}

/// Generator-loss gradient at the discriminator output:
/// d/dD[-(1/m) log D] = -1/(m D).
fn upstream_generator(d_fake: &[f64]) -> Matrix {
    let m = d_fake.len() as f64;
    let mut up = Matrix::zeros(d_fake.len(), 1);
    for (r, &d) in d_fake.iter().enumerate() {
        *up.at_mut(r, 0) = -1.0 / (m * d.max(LOG_CLIP));
    }
    up
}

/// One Adam update of the discriminator on a real and a fake batch;
/// returns the discriminator loss before the update.
fn update_discriminator(
    disc: &mut Mlp,
    adam: &mut Adam,
    real: &[[f64; 2]],
    fake: &[[f64; 2]],
) -> Result<f64> {
    let (d_real, cache_real) = scores(disc, real)?;
    let (d_fake, cache_fake) = scores(disc, fake)?;
    let loss_d = discriminator_loss(&d_real, &d_fake)?;
    let grad_real = disc.backward(&cache_real, &upstream_real(&d_real))?;
    let grad_fake = disc.backward(&cache_fake, &upstream_fake(&d_fake))?;
    let grads: Vec<f64> = grad_real
        .flat
        .iter()
        .zip(&grad_fake.flat)
        .map(|(a, b)| a + b)
        .collect();
    let mut params = disc.params_flat();
    adam.step(&mut params, &grads)?;
    disc.set_params_flat(&params)?;
    Ok(loss_d)
}

/// QGAN training loop. Per iteration: m generator shots and a bootstrap
/// real minibatch, one Adam discriminator update, then an inner SPSA run
/// on the circuit angles with the generator loss as cost (fresh shots per
/// evaluation). The logged generator loss is the first batch rescored
/// against the updated discriminator.
pub fn train_qgan(config: &QganConfig, real_points: &[[f64; 2]]) -> Result<QganRun> {
    train_qgan_with(config, real_points, |_| {})
}

/// [`train_qgan`] with an observer invoked after every logged iteration,
/// so long runs can stream progress (e.g. append to a log file).
pub fn train_qgan_with<F>(
    config: &QganConfig,
    real_points: &[[f64; 2]],
    mut observe: F,
) -> Result<QganRun>
where
    F: FnMut(&TrainingRecord),
{
    config.validate()?;
    check_real_points(real_points)?;

    let mut init_rng = stream_rng(config.seed, STREAM_INIT);
    let dim = param_count(&config.spec);
    let mut theta: Vec<f64> = (0..dim)
        .map(|_| init_rng.gen_range(0.0..2.0 * std::f64::consts::PI))
        .collect();
    assemble(&config.spec, &theta)?;
    let mut disc = Mlp::init(&config.disc_arch, init_rng.gen())?;
    if disc.input_dim() != 2 || disc.output_dim() != 1 {
        return Err(Error::InvalidConfig(format!(
            "discriminator must map 2 -> 1, got {} -> {}",
            disc.input_dim(),
            disc.output_dim()
        )));
    }
    let mut adam = Adam::new(disc.param_count(), AdamConfig::with_learning_rate(config.disc_lr))?;

    let mut shot_rng = stream_rng(config.seed, STREAM_SHOTS);
    let mut spsa_rng = stream_rng(config.seed, STREAM_SPSA);
    let mut real_rng = stream_rng(config.seed, STREAM_REAL);

    let mut log = Vec::with_capacity(config.iterations);
    for i in 1..=config.iterations {
        let fake =
            sample_copula_points_2d(&config.spec, &theta, config.batch, config.noise, &mut shot_rng)?;
        let real = bootstrap_sample(real_points, config.batch, &mut real_rng);
        let loss_d = update_discriminator(&mut disc, &mut adam, &real, &fake)?;

        let (d_fake_after, _) = scores(&disc, &fake)?;
        let loss_g = generator_loss(&d_fake_after)?;
        let record = TrainingRecord::gan(i, loss_g, loss_d);
        observe(&record);
        log.push(record);

        let mut cost = |t: &[f64]| -> f64 {
            let samples =
                sample_copula_points_2d(&config.spec, t, config.batch, config.noise, &mut shot_rng)
                    .expect("sampling validated before the loop");
            let (d, _) = scores(&disc, &samples).expect("scoring validated before the loop");
            generator_loss(&d).expect("scores are sigmoid outputs")
        };
        spsa_chain(&mut cost, &mut theta, &config.inner, 1, &mut spsa_rng, None);
    }

    Ok(QganRun {
        theta,
        discriminator: disc,
        log,
    })
}

/// Classical-GAN training loop (the all-Adam analogue of the QGAN loop).
/// The generator consumes uniform latent noise in [0,1]^k where k is its
/// input width.
pub fn train_classical_gan(config: &CganConfig, real_points: &[[f64; 2]]) -> Result<CganRun> {
    train_classical_gan_with(config, real_points, |_| {})
}

/// [`train_classical_gan`] with a per-iteration observer.
pub fn train_classical_gan_with<F>(
    config: &CganConfig,
    real_points: &[[f64; 2]],
    mut observe: F,
) -> Result<CganRun>
where
    F: FnMut(&TrainingRecord),
{
    config.validate()?;
    check_real_points(real_points)?;

    let mut init_rng = stream_rng(config.seed, STREAM_INIT);
    let mut gen = Mlp::init(&config.gen_arch, init_rng.gen())?;
    let mut disc = Mlp::init(&config.disc_arch, init_rng.gen())?;
    if gen.output_dim() != 2 || disc.input_dim() != 2 || disc.output_dim() != 1 {
        return Err(Error::InvalidConfig(format!(
            "generator must map into the discriminator's 2D input (got {} -> {} and {} -> {})",
            gen.input_dim(),
            gen.output_dim(),
            disc.input_dim(),
            disc.output_dim()
        )));
    }
    let mut adam_g = Adam::new(gen.param_count(), AdamConfig::with_learning_rate(config.lr))?;
    let mut adam_d = Adam::new(disc.param_count(), AdamConfig::with_learning_rate(config.lr))?;

    let mut noise_rng = stream_rng(config.seed, STREAM_NOISE);
    let mut real_rng = stream_rng(config.seed, STREAM_REAL);
    let noise_dim = gen.input_dim();

    let mut log = Vec::with_capacity(config.iterations);
    for i in 1..=config.iterations {
        let mut noise = Matrix::zeros(config.batch, noise_dim);
        for v in noise.data.iter_mut() {
            *v = noise_rng.gen::<f64>();
        }
        let (fake_out, gen_cache) = gen.forward(&noise, Mode::Train)?;
        gen.update_running_stats(&gen_cache);
        let fake: Vec<[f64; 2]> = (0..fake_out.rows)
            .map(|r| [fake_out.at(r, 0), fake_out.at(r, 1)])
            .collect();
        let real = bootstrap_sample(real_points, config.batch, &mut real_rng);
        let loss_d = update_discriminator(&mut disc, &mut adam_d, &real, &fake)?;

        // Generator step against the updated discriminator: chain the
        // discriminator's input gradient into the generator backprop.
        let (d_fake, disc_cache) = scores(&disc, &fake)?;
        let loss_g = generator_loss(&d_fake)?;
        let through_disc = disc.backward(&disc_cache, &upstream_generator(&d_fake))?;
        let gen_grads = gen.backward(&gen_cache, &through_disc.input)?;
        let mut params = gen.params_flat();
        adam_g.step(&mut params, &gen_grads.flat)?;
        gen.set_params_flat(&params)?;

        let record = TrainingRecord::gan(i, loss_g, loss_d);
        observe(&record);
        log.push(record);
    }

    Ok(CganRun {
        generator: gen,
        discriminator: disc,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::{exact_distribution, register_marginal};
    use crate::models::render_log;
    use approx::assert_abs_diff_eq;

    fn toy_real_points(count: usize, seed: u64) -> Vec<[f64; 2]> {
        // Correlated points strictly inside the unit square.
        let mut rng = stream_rng(seed, 9);
        (0..count)
            .map(|_| {
                let u: f64 = rng.gen_range(0.05..0.95);
                let v = (u + rng.gen_range(-0.04..0.04)).clamp(0.05, 0.95);
                [u, v]
            })
            .collect()
    }

    fn desk_qgan_config() -> QganConfig {
        let spec = QopulaSpec::new(2, 1, 1, 2).unwrap();
        let mut config = QganConfig::new(spec);
        config.batch = 64;
        config.iterations = 4;
        config.seed = 5;
        config
    }

    #[test]
    fn qgan_logs_both_losses_each_iteration() {
        let run = train_qgan(&desk_qgan_config(), &toy_real_points(200, 1)).unwrap();
        assert_eq!(run.log.len(), 4);
        for (i, rec) in run.log.iter().enumerate() {
            assert_eq!(rec.iter, i + 1);
            assert!(rec.loss_g.unwrap().is_finite());
            assert!(rec.loss_d.unwrap().is_finite());
            assert!(rec.kl.is_none());
        }
    }

    #[test]
    fn qgan_is_deterministic_per_seed() {
        let config = desk_qgan_config();
        let data = toy_real_points(200, 1);
        let a = train_qgan(&config, &data).unwrap();
        let b = train_qgan(&config, &data).unwrap();
        assert_eq!(render_log(&a.log), render_log(&b.log));
        assert_eq!(a.theta, b.theta);
        assert_eq!(a.discriminator, b.discriminator);
    }

    #[test]
    fn qgan_marginals_stay_uniform_through_training() {
        // The structural guarantee of the ansatz: whatever the adversarial
        // dynamics did to the angles, register marginals stay exactly
        // uniform.
        let config = desk_qgan_config();
        let run = train_qgan(&config, &toy_real_points(200, 2)).unwrap();
        let probs = exact_distribution(&config.spec, &run.theta).unwrap();
        for register in 0..2 {
            let marginal = register_marginal(&config.spec, &probs, register).unwrap();
            for p in marginal {
                assert_abs_diff_eq!(p, 0.5, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn qgan_discriminator_actually_learns() {
        // Real data pinned to one corner, an untrained generator spread
        // over the square: after a few updates the discriminator must
        // separate real from fake better than chance.
        let spec = QopulaSpec::new(2, 1, 1, 4).unwrap();
        let mut config = QganConfig::new(spec);
        config.batch = 128;
        config.iterations = 30;
        config.disc_lr = 0.01;
        config.seed = 3;
        let mut rng = stream_rng(40, 2);
        let real: Vec<[f64; 2]> = (0..400)
            .map(|_| [rng.gen_range(0.01..0.20), rng.gen_range(0.01..0.20)])
            .collect();
        let run = train_qgan(&config, &real).unwrap();
        let (d_real, _) = scores(&run.discriminator, &real).unwrap();
        let far: Vec<[f64; 2]> = (0..400)
            .map(|_| [rng.gen_range(0.80..0.99), rng.gen_range(0.80..0.99)])
            .collect();
        let (d_far, _) = scores(&run.discriminator, &far).unwrap();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(
            mean(&d_real) > mean(&d_far) + 0.2,
            "discriminator failed to separate: real {} vs far {}",
            mean(&d_real),
            mean(&d_far)
        );
    }

    #[test]
    fn qgan_rejects_data_outside_the_open_square() {
        let config = desk_qgan_config();
        assert!(train_qgan(&config, &[]).is_err());
        assert!(train_qgan(&config, &[[0.0, 0.5]]).is_err());
        assert!(train_qgan(&config, &[[0.5, 1.0]]).is_err());
    }

    #[test]
    fn cgan_zero_iterations_returns_initialized_nets() {
        let mut config = CganConfig::new();
        config.iterations = 0;
        config.seed = 8;
        let run = train_classical_gan(&config, &toy_real_points(50, 3)).unwrap();
        assert!(run.log.is_empty());
        assert_eq!(run.generator.param_count(), 24);
        assert_eq!(run.discriminator.param_count(), 129);
    }

    #[test]
    fn untrained_generator_outputs_live_in_the_open_square() {
        let mut config = CganConfig::new();
        config.iterations = 0;
        let run = train_classical_gan(&config, &toy_real_points(50, 3)).unwrap();
        let mut rng = stream_rng(12, STREAM_NOISE);
        let mut noise = Matrix::zeros(64, run.generator.input_dim());
        for v in noise.data.iter_mut() {
            *v = rng.gen::<f64>();
        }
        let (out, _) = run.generator.forward(&noise, Mode::Eval).unwrap();
        for r in 0..out.rows {
            for c in 0..2 {
                let u = out.at(r, c);
                assert!(u > 0.0 && u < 1.0, "output {u} escaped (0,1)");
            }
        }
    }

    #[test]
    fn cgan_training_step_runs_and_is_deterministic() {
        let mut config = CganConfig::new();
        config.batch = 32;
        config.iterations = 5;
        config.seed = 21;
        let data = toy_real_points(100, 4);
        let a = train_classical_gan(&config, &data).unwrap();
        let b = train_classical_gan(&config, &data).unwrap();
        assert_eq!(render_log(&a.log), render_log(&b.log));
        assert_eq!(a.generator, b.generator);
        for rec in &a.log {
            assert!(rec.loss_g.unwrap().is_finite());
            assert!(rec.loss_d.unwrap().is_finite());
        }
    }

    #[test]
    fn discriminator_update_descends_on_fixed_batches() {
        // Frozen, well-separated real and fake batches: repeated Adam
        // steps must drive the discriminator loss well below log 2.
        let mut rng = stream_rng(41, 2);
        let real: Vec<[f64; 2]> = (0..64)
            .map(|_| [rng.gen_range(0.01..0.15), rng.gen_range(0.01..0.15)])
            .collect();
        let fake: Vec<[f64; 2]> = (0..64)
            .map(|_| [rng.gen_range(0.75..0.99), rng.gen_range(0.75..0.99)])
            .collect();
        let mut disc = Mlp::init(&discriminator_arch(), 17).unwrap();
        let mut adam = Adam::new(disc.param_count(), AdamConfig::with_learning_rate(0.01)).unwrap();
        let first = update_discriminator(&mut disc, &mut adam, &real, &fake).unwrap();
        let mut last = first;
        for _ in 0..200 {
            last = update_discriminator(&mut disc, &mut adam, &real, &fake).unwrap();
        }
        assert!(
            last < 0.2 && last < first,
            "loss went {first} -> {last} over 200 steps"
        );
    }

    #[test]
    fn cgan_generator_moves_toward_the_data() {
        // Real data pinned near one corner: after a few hundred
        // adversarial rounds the generated cloud must sit closer to that
        // corner than the untrained one did.
        let mut config = CganConfig::new();
        config.batch = 64;
        config.iterations = 400;
        config.lr = 2e-3;
        config.seed = 6;
        let mut rng = stream_rng(42, 2);
        let real: Vec<[f64; 2]> = (0..300)
            .map(|_| [rng.gen_range(0.02..0.18), rng.gen_range(0.02..0.18)])
            .collect();
        let centroid = [0.10, 0.10];

        let mean_distance = |gen: &Mlp| -> f64 {
            let mut noise_rng = stream_rng(99, STREAM_NOISE);
            let mut noise = Matrix::zeros(256, gen.input_dim());
            for v in noise.data.iter_mut() {
                *v = noise_rng.gen::<f64>();
            }
            let (out, _) = gen.forward(&noise, Mode::Eval).unwrap();
            (0..out.rows)
                .map(|r| {
                    ((out.at(r, 0) - centroid[0]).powi(2) + (out.at(r, 1) - centroid[1]).powi(2))
                        .sqrt()
                })
                .sum::<f64>()
                / 256.0
        };

        let mut untrained = config.clone();
        untrained.iterations = 0;
        let before = mean_distance(&train_classical_gan(&untrained, &real).unwrap().generator);
        let after = mean_distance(&train_classical_gan(&config, &real).unwrap().generator);
        assert!(
            after < before - 0.05,
            "generated cloud moved {before} -> {after}"
        );
    }
}
