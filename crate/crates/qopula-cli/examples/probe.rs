//! Scratch harness: QGAN inner-SPSA schedule variants.

use qopula::ansatz::{param_count, sample_copula_points_2d, QopulaSpec};
use qopula::eval::{ks2d_statistic, ks2d_test};
use qopula::models::{
    bootstrap_sample, discriminator_loss, generator_loss, stream_rng, LOG_CLIP, STREAM_INIT,
    STREAM_REAL, STREAM_SHOTS, STREAM_SPSA,
};
use qopula::nnet::{discriminator_arch, ForwardCache, Matrix, Mlp, Mode};
use qopula::optim::{rademacher_delta, Adam, AdamConfig};
use qopula::statevec::DepolarizingNoise;
use qopula_cli::run::{load_training_data, STREAM_EVAL};
use rand::{Rng, SeedableRng};

#[derive(Clone, Copy, Debug)]
enum KMode {
    Restart,
    Global,
    Outer,
    /// Restart schedule, but the two cost evaluations of each SPSA step
    /// share one sampling stream (common random numbers).
    Crn,
    /// Constant gains within the 5-step mini-run (a_k = a, c_k = c).
    Flat,
    /// Flat + common random numbers.
    FlatCrn,
}

fn scores(disc: &Mlp, points: &[[f64; 2]]) -> (Vec<f64>, ForwardCache) {
    let (out, cache) = disc.forward(&Matrix::from_points(points), Mode::Train).unwrap();
    ((0..out.rows).map(|r| out.at(r, 0)).collect(), cache)
}

fn upstream(vals: &[f64], f: impl Fn(f64) -> f64) -> Matrix {
    let mut up = Matrix::zeros(vals.len(), 1);
    for (r, &d) in vals.iter().enumerate() {
        *up.at_mut(r, 0) = f(d);
    }
    up
}

#[allow(clippy::too_many_arguments)]
fn run_variant(mode: KMode, seed: u64, u: &[[f64; 2]], iterations: usize, stride: usize) {
    let spec = QopulaSpec::new(2, 3, 1, 20).unwrap();
    let dim = param_count(&spec);
    let (a, c, gamma, n_inner, batch) = (0.008, 0.01, 0.101, 5usize, 2048);
    let off = DepolarizingNoise::off();

    let mut init_rng = stream_rng(seed, STREAM_INIT);
    let mut theta: Vec<f64> = (0..dim)
        .map(|_| init_rng.gen_range(0.0..2.0 * std::f64::consts::PI))
        .collect();
    let mut disc = Mlp::init(&discriminator_arch(), init_rng.gen()).unwrap();
    let mut adam = Adam::new(disc.param_count(), AdamConfig::with_learning_rate(0.0015)).unwrap();

    let mut shot_rng = stream_rng(seed, STREAM_SHOTS);
    let mut spsa_rng = stream_rng(seed, STREAM_SPSA);
    let mut real_rng = stream_rng(seed, STREAM_REAL);

    let iters = iterations;
    for i in 1..=iters {
        let fake = sample_copula_points_2d(&spec, &theta, batch, off, &mut shot_rng).unwrap();
        let real = bootstrap_sample(u, batch, &mut real_rng);

        let (d_real, cache_real) = scores(&disc, &real);
        let (d_fake, cache_fake) = scores(&disc, &fake);
        let _loss_d = discriminator_loss(&d_real, &d_fake).unwrap();
        let m = batch as f64;
        let g_real = disc
            .backward(&cache_real, &upstream(&d_real, |d| -1.0 / (2.0 * m * d.max(LOG_CLIP))))
            .unwrap();
        let g_fake = disc
            .backward(&cache_fake, &upstream(&d_fake, |d| 1.0 / (2.0 * m * (1.0 - d).max(LOG_CLIP))))
            .unwrap();
        let grads: Vec<f64> = g_real.flat.iter().zip(&g_fake.flat).map(|(x, y)| x + y).collect();
        let mut params = disc.params_flat();
        adam.step(&mut params, &grads).unwrap();
        disc.set_params_flat(&params).unwrap();

        for j in 0..n_inner {
            let k = match mode {
                KMode::Restart | KMode::Crn => j + 1,
                KMode::Flat | KMode::FlatCrn => 1,
                KMode::Global => (i - 1) * n_inner + j + 1,
                KMode::Outer => i,
            } as f64;
            let a_k = a / k;
            let c_k = c / k.powf(gamma);
            let delta = rademacher_delta(dim, &mut spsa_rng);
            let plus: Vec<f64> = theta.iter().zip(&delta).map(|(t, d)| t + c_k * d).collect();
            let minus: Vec<f64> = theta.iter().zip(&delta).map(|(t, d)| t - c_k * d).collect();
            let scale = match mode {
                KMode::Crn | KMode::FlatCrn => {
                    let sub: u64 = shot_rng.gen();
                    let mut eval = |t: &[f64]| {
                        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(sub);
                        let s = sample_copula_points_2d(&spec, t, batch, off, &mut r).unwrap();
                        let (d, _) = scores(&disc, &s);
                        generator_loss(&d).unwrap()
                    };
                    (eval(&plus) - eval(&minus)) / (2.0 * c_k)
                }
                _ => {
                    let mut eval = |t: &[f64]| {
                        let s = sample_copula_points_2d(&spec, t, batch, off, &mut shot_rng).unwrap();
                        let (d, _) = scores(&disc, &s);
                        generator_loss(&d).unwrap()
                    };
                    (eval(&plus) - eval(&minus)) / (2.0 * c_k)
                }
            };
            for (t, d) in theta.iter_mut().zip(&delta) {
                *t -= a_k * scale * d;
            }
        }

        if stride > 0 && i % stride == 0 && i != iterations {
            let mut eval_rng = stream_rng(seed, STREAM_EVAL);
            let draws = sample_copula_points_2d(&spec, &theta, batch, off, &mut eval_rng).unwrap();
            let boot = bootstrap_sample(u, u.len(), &mut eval_rng);
            let d = ks2d_statistic(&draws, &boot).unwrap();
            println!("{mode:?} seed {seed} iter {i:4} D {d:.4}");
        }
    }

    let mut eval_rng = stream_rng(seed, STREAM_EVAL);
    let draws = sample_copula_points_2d(&spec, &theta, batch, off, &mut eval_rng).unwrap();
    let boot = bootstrap_sample(u, u.len(), &mut eval_rng);
    let ks = ks2d_test(&draws, &boot, 1000, eval_rng.gen()).unwrap();
    println!(
        "{mode:?} seed {seed} FINAL D {:.4} p {:.4}",
        ks.statistic, ks.p_value
    );
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mode = match args[1].as_str() {
        "restart" => KMode::Restart,
        "global" => KMode::Global,
        "outer" => KMode::Outer,
        "crn" => KMode::Crn,
        "flat" => KMode::Flat,
        "flatcrn" => KMode::FlatCrn,
        other => panic!("unknown mode {other}"),
    };
    let seed_lo: u64 = args[2].parse().unwrap();
    let seed_hi: u64 = args[3].parse().unwrap();
    let iterations: usize = args[4].parse().unwrap();
    let stride: usize = args.get(5).map_or(0, |s| s.parse().unwrap());
    let data = load_training_data("/tmp/qrun/returns.csv".as_ref()).unwrap();
    for seed in seed_lo..=seed_hi {
        run_variant(mode, seed, &data.u, iterations, stride);
    }
}
