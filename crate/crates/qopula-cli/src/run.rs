//! Command implementations: option resolution (flags over config file
//! over defaults), the four-step pipeline (transform, fit, sample,
//! back-transform) with its evaluation report, and checkpoint handling
//! for every model family.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use qopula::ansatz::{param_count, sample_copula_points_2d, transfer_init, Checkpoint, QopulaSpec};
use qopula::copula::{bin_2d, inverse_pit, pit_transform, EmpiricalCdf};
use qopula::eval::{ks2d_test, EvalReport};
use qopula::hardness::{verify_iqp_reduction, IqpInstance, ReductionCheck, MAX_REDUCTION_QUBITS};
use qopula::models::{
    bootstrap_sample, fit_gaussian_copula, sample_gaussian_copula, stream_rng,
    train_classical_gan_with, train_qcbm, train_qcbm_with, train_qgan_with, CganConfig,
    GaussianCopulaModel,
    QcbmConfig, QganConfig, TrainingRecord, STREAM_INIT,
};
use qopula::nnet::{Matrix, Mlp, Mode};
use qopula::optim::SpsaConfig;
use qopula::statevec::DepolarizingNoise;

use crate::csvio::{self, SampleSpace};

/// ChaCha substream for evaluation-time draws (model samples, the
/// bootstrap of the training set, the permutation-test seed). Streams 1-5
/// belong to the training loops; keeping evaluation on its own stream
/// means it never replays randomness the trainer consumed.
pub const STREAM_EVAL: u64 = 6;

pub const RETURNS_FILE: &str = "returns.csv";
pub const LOG_FILE: &str = "train_log.jsonl";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const DISCRIMINATOR_FILE: &str = "discriminator.json";
pub const SAMPLES_FILE: &str = "samples.csv";
pub const COPULA_SAMPLES_FILE: &str = "copula_samples.csv";
pub const REPORT_FILE: &str = "report.json";
pub const REDUCTION_FILE: &str = "reduction_checks.jsonl";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Model {
    Qcbm,
    Qgan,
    Cgan,
    Gaussian,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Qcbm => "qcbm",
            Model::Qgan => "qgan",
            Model::Cgan => "cgan",
            Model::Gaussian => "gaussian",
        }
    }
}

/// Values given explicitly on the command line (`None` = flag absent).
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub qubits: Option<usize>,
    pub layers: Option<usize>,
    pub pad_bits: Option<usize>,
    pub shots: Option<usize>,
    pub iterations: Option<usize>,
    pub a: Option<f64>,
    pub c: Option<f64>,
    pub gamma: Option<f64>,
    pub n_inner: Option<usize>,
    pub lr_disc: Option<f64>,
    pub lr: Option<f64>,
    pub batch: Option<usize>,
    pub noise_p: Option<f64>,
    pub seed: Option<u64>,
    pub permutations: Option<usize>,
    pub eval_samples: Option<usize>,
}

/// Optional JSON config file with the same keys as the flags. Values act
/// as a defaults pool: a flag beats the file, the file beats built-in
/// defaults. Keys that do not apply to the chosen model are ignored, so
/// one file can serve several commands.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub qubits: Option<usize>,
    pub layers: Option<usize>,
    pub pad_bits: Option<usize>,
    pub shots: Option<usize>,
    pub iterations: Option<usize>,
    pub a: Option<f64>,
    pub c: Option<f64>,
    pub gamma: Option<f64>,
    pub n_inner: Option<usize>,
    pub lr_disc: Option<f64>,
    pub lr: Option<f64>,
    pub batch: Option<usize>,
    pub noise_p: Option<f64>,
    pub seed: Option<u64>,
    pub permutations: Option<usize>,
    pub eval_samples: Option<usize>,
}

pub fn load_config_file(path: &Path) -> Result<ConfigFile> {
    let bytes = fs::read(path).with_context(|| format!("cannot read config {}", path.display()))?;
    serde_json::from_slice(&bytes).with_context(|| format!("bad config file {}", path.display()))
}

/// Fully resolved training/evaluation options.
#[derive(Clone, Debug)]
pub struct TrainOpts {
    pub qubits: usize,
    pub layers: usize,
    pub pad_bits: usize,
    pub shots: usize,
    pub iterations: usize,
    pub a: f64,
    pub c: f64,
    pub gamma: f64,
    pub n_inner: usize,
    pub lr_disc: f64,
    pub lr: f64,
    pub batch: usize,
    pub noise_p: f64,
    pub seed: u64,
    pub permutations: usize,
    pub eval_samples: usize,
}

/// Merges flags, config file, and model defaults; rejects flags that do
/// not apply to the chosen model and enforces that a seed was given.
pub fn resolve(model: Model, flags: &Overrides, file: &ConfigFile) -> Result<TrainOpts> {
    let stray = inapplicable_flags(model, flags);
    ensure!(
        stray.is_empty(),
        "{} does not apply to train-{}",
        stray.join(", "),
        model.name()
    );
    let seed = flags
        .seed
        .or(file.seed)
        .context("a --seed is required (flag or config file)")?;

    // Built-in defaults are the published simulator settings per model.
    let (iterations_d, a_d, c_d, eval_d) = match model {
        Model::Qcbm => (200, 0.5, 0.5, 2000),
        Model::Qgan => (1000, 0.008, 0.01, 2048),
        Model::Cgan => (20_000, 0.008, 0.01, 2048),
        Model::Gaussian => (0, 0.008, 0.01, 2048),
    };
    let opts = TrainOpts {
        qubits: flags.qubits.or(file.qubits).unwrap_or(6),
        layers: flags.layers.or(file.layers).unwrap_or(1),
        // 20 pad bits take the default 3-qubit registers to 23 bits per
        // variable, the published refinement depth.
        pad_bits: flags.pad_bits.or(file.pad_bits).unwrap_or(20),
        shots: flags.shots.or(file.shots).unwrap_or(2048),
        iterations: flags.iterations.or(file.iterations).unwrap_or(iterations_d),
        a: flags.a.or(file.a).unwrap_or(a_d),
        c: flags.c.or(file.c).unwrap_or(c_d),
        gamma: flags.gamma.or(file.gamma).unwrap_or(0.101),
        n_inner: flags.n_inner.or(file.n_inner).unwrap_or(5),
        lr_disc: flags.lr_disc.or(file.lr_disc).unwrap_or(0.0015),
        lr: flags.lr.or(file.lr).unwrap_or(1e-4),
        batch: flags.batch.or(file.batch).unwrap_or(2048),
        noise_p: flags.noise_p.or(file.noise_p).unwrap_or(0.0),
        seed,
        permutations: flags.permutations.or(file.permutations).unwrap_or(1000),
        eval_samples: flags.eval_samples.or(file.eval_samples).unwrap_or(eval_d),
    };

    ensure!(
        opts.qubits >= 2 && opts.qubits % 2 == 0,
        "--qubits is the total count over both registers and must be even and >= 2, got {}",
        opts.qubits
    );
    ensure!(opts.layers >= 1, "--layers must be at least 1");
    ensure!(opts.shots >= 1, "--shots must be at least 1");
    if model != Model::Gaussian {
        ensure!(opts.iterations >= 1, "--iterations must be at least 1");
    }
    ensure!(opts.batch >= 1, "--batch must be at least 1");
    ensure!(
        opts.permutations >= 100,
        "--permutations must be at least 100 for a usable p-value"
    );
    ensure!(opts.eval_samples >= 1, "--eval-samples must be at least 1");
    ensure!(
        (0.0..=1.0).contains(&opts.noise_p),
        "--noise-p must lie in [0, 1]"
    );
    Ok(opts)
}

fn inapplicable_flags(model: Model, flags: &Overrides) -> Vec<&'static str> {
    use Model::*;
    let mut bad = Vec::new();
    let mut check = |name, set: bool, applies: bool| {
        if set && !applies {
            bad.push(name);
        }
    };
    let circuit = matches!(model, Qcbm | Qgan);
    check("--qubits", flags.qubits.is_some(), circuit);
    check("--layers", flags.layers.is_some(), circuit);
    check("--pad-bits", flags.pad_bits.is_some(), circuit);
    check("--shots", flags.shots.is_some(), model == Qcbm);
    check(
        "--iterations",
        flags.iterations.is_some(),
        model != Gaussian,
    );
    check("--a", flags.a.is_some(), circuit);
    check("--c", flags.c.is_some(), circuit);
    check("--gamma", flags.gamma.is_some(), circuit);
    check("--n-inner", flags.n_inner.is_some(), model == Qgan);
    check("--lr-disc", flags.lr_disc.is_some(), model == Qgan);
    check("--lr", flags.lr.is_some(), model == Cgan);
    check("--batch", flags.batch.is_some(), matches!(model, Qgan | Cgan));
    check("--noise-p", flags.noise_p.is_some(), circuit);
    bad
}

/// A returns dataset together with its copula-space image and the
/// empirical marginals needed to map samples back.
#[derive(Clone, Debug)]
pub struct CopulaData {
    pub returns: Vec<[f64; 2]>,
    pub u: Vec<[f64; 2]>,
    pub cdfs: [EmpiricalCdf; 2],
}

pub fn build_copula_data(returns: Vec<[f64; 2]>) -> Result<CopulaData> {
    let r1: Vec<f64> = returns.iter().map(|r| r[0]).collect();
    let r2: Vec<f64> = returns.iter().map(|r| r[1]).collect();
    let u1 = pit_transform(&r1)?;
    let u2 = pit_transform(&r2)?;
    let u = u1.into_iter().zip(u2).map(|(a, b)| [a, b]).collect();
    let cdfs = [EmpiricalCdf::from_sample(&r1)?, EmpiricalCdf::from_sample(&r2)?];
    Ok(CopulaData { returns, u, cdfs })
}

pub fn load_training_data(path: &Path) -> Result<CopulaData> {
    let bytes =
        fs::read(path).with_context(|| format!("cannot read returns {}", path.display()))?;
    build_copula_data(csvio::parse_returns(&bytes)?)
}

/// Maps copula-space points back to data space through the clamped
/// empirical quantiles. Coordinates are nudged strictly inside (0, 1)
/// first: saturated generators can emit exactly 0 or 1, which simply pin
/// to the extreme order statistics.
pub fn back_transform(u_points: &[[f64; 2]], cdfs: &[EmpiricalCdf; 2]) -> Result<Vec<[f64; 2]>> {
    u_points
        .iter()
        .map(|p| {
            let x1 = inverse_pit(p[0].clamp(1e-12, 1.0 - 1e-12), &cdfs[0])?;
            let x2 = inverse_pit(p[1].clamp(1e-12, 1.0 - 1e-12), &cdfs[1])?;
            Ok([x1, x2])
        })
        .collect::<qopula::Result<Vec<_>>>()
        .map_err(Into::into)
}

/// Any checkpoint the tool can load back: a qopula circuit (QCBM and
/// QGAN), a fitted Gaussian copula, or the classical GAN's networks.
#[derive(Clone, Debug)]
pub enum AnyCheckpoint {
    Qopula(Checkpoint),
    Gaussian(GaussianCopulaModel),
    Cgan { generator: Mlp, discriminator: Mlp },
}

#[derive(Serialize, Deserialize)]
struct GaussianCheckpoint {
    model: String,
    rho: f64,
}

#[derive(Serialize, Deserialize)]
struct CganCheckpoint {
    model: String,
    generator: serde_json::Value,
    discriminator: serde_json::Value,
}

pub fn checkpoint_json(ckpt: &AnyCheckpoint) -> String {
    match ckpt {
        AnyCheckpoint::Qopula(c) => c.to_json(),
        AnyCheckpoint::Gaussian(m) => serde_json::to_string(&GaussianCheckpoint {
            model: "gaussian".into(),
            rho: m.rho(),
        })
        .expect("gaussian checkpoints always serialize"),
        AnyCheckpoint::Cgan {
            generator,
            discriminator,
        } => serde_json::to_string(&CganCheckpoint {
            model: "cgan".into(),
            generator: serde_json::from_str(&generator.to_json())
                .expect("network JSON is valid"),
            discriminator: serde_json::from_str(&discriminator.to_json())
                .expect("network JSON is valid"),
        })
        .expect("cgan checkpoints always serialize"),
    }
}

/// Parses any of the three checkpoint shapes, with full validation of
/// the embedded model before it is used.
pub fn parse_any_checkpoint(bytes: &[u8]) -> Result<AnyCheckpoint> {
    let value: serde_json::Value =
        serde_json::from_slice(bytes).context("checkpoint is not valid JSON")?;
    let obj = value
        .as_object()
        .context("checkpoint must be a JSON object")?;
    if obj.contains_key("theta") {
        return Ok(AnyCheckpoint::Qopula(Checkpoint::parse(bytes)?));
    }
    match obj.get("model").and_then(|m| m.as_str()) {
        Some("gaussian") => {
            let rho = obj
                .get("rho")
                .and_then(|r| r.as_f64())
                .context("gaussian checkpoint needs a numeric 'rho'")?;
            Ok(AnyCheckpoint::Gaussian(GaussianCopulaModel::new(rho)?))
        }
        Some("cgan") => {
            let net = |key: &str| -> Result<Mlp> {
                let sub = obj
                    .get(key)
                    .with_context(|| format!("cgan checkpoint needs a '{key}' network"))?;
                Ok(Mlp::parse(serde_json::to_vec(sub)?.as_slice())?)
            };
            let generator = net("generator")?;
            let discriminator = net("discriminator")?;
            ensure!(
                generator.output_dim() == 2,
                "cgan generator must emit 2 coordinates, emits {}",
                generator.output_dim()
            );
            Ok(AnyCheckpoint::Cgan {
                generator,
                discriminator,
            })
        }
        _ => bail!("unrecognized checkpoint: expected a circuit ('theta'), 'gaussian', or 'cgan'"),
    }
}

/// Draws `count` copula-space samples from a checkpoint, consuming the
/// given RNG stream. Depolarizing noise only makes sense for circuits.
pub fn sample_checkpoint_with_rng(
    ckpt: &AnyCheckpoint,
    count: usize,
    noise: DepolarizingNoise,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<[f64; 2]>> {
    ensure!(count >= 1, "sample count must be at least 1");
    match ckpt {
        AnyCheckpoint::Qopula(c) => {
            let spec = c.spec()?;
            ensure!(
                spec.num_vars() == 2,
                "sampling requires a 2-variable circuit, checkpoint has {}",
                spec.num_vars()
            );
            Ok(sample_copula_points_2d(&spec, &c.theta, count, noise, rng)?)
        }
        AnyCheckpoint::Gaussian(model) => {
            ensure!(
                noise.is_off(),
                "depolarizing noise applies only to circuit checkpoints"
            );
            Ok(sample_gaussian_copula(model, count, rng.gen()))
        }
        AnyCheckpoint::Cgan { generator, .. } => {
            ensure!(
                noise.is_off(),
                "depolarizing noise applies only to circuit checkpoints"
            );
            let mut z = Matrix::zeros(count, generator.input_dim());
            for v in z.data.iter_mut() {
                *v = rng.gen::<f64>();
            }
            let (out, _) = generator.forward(&z, Mode::Eval)?;
            Ok((0..out.rows).map(|r| [out.at(r, 0), out.at(r, 1)]).collect())
        }
    }
}

/// Ingest: price CSV in, returns CSV out. Returns the path written.
pub fn run_ingest(prices: &Path, out_dir: &Path) -> Result<PathBuf> {
    let bytes =
        fs::read(prices).with_context(|| format!("cannot read prices {}", prices.display()))?;
    let table = csvio::parse_prices(&bytes)?;
    let returns = csvio::table_returns(&table)?;
    fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))?;
    let path = out_dir.join(RETURNS_FILE);
    fs::write(&path, csvio::write_returns_csv(&returns))
        .with_context(|| format!("cannot write {}", path.display()))?;
    eprintln!(
        "ingested {} rows of {}/{} into {} returns",
        table.prices.len(),
        table.symbols[0],
        table.symbols[1],
        returns.len()
    );
    Ok(path)
}

/// The full train-sample-evaluate pipeline for one model. Writes the
/// training log (incrementally), checkpoint, both sample CSVs, and the
/// evaluation report into `out_dir`, and returns the report.
pub fn run_pipeline(
    model: Model,
    returns_path: &Path,
    opts: &TrainOpts,
    out_dir: &Path,
) -> Result<EvalReport> {
    let data = load_training_data(returns_path)?;
    fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))?;
    let noise = DepolarizingNoise::new(opts.noise_p)?;

    let ckpt = match model {
        Model::Qcbm => train_qcbm_cmd(opts, &data, noise, out_dir)?,
        Model::Qgan => train_qgan_cmd(opts, &data, noise, out_dir)?,
        Model::Cgan => train_cgan_cmd(opts, &data, out_dir)?,
        Model::Gaussian => AnyCheckpoint::Gaussian(fit_gaussian_copula(&data.u)?),
    };
    write_file(&out_dir.join(CHECKPOINT_FILE), &checkpoint_json(&ckpt))?;

    // Evaluation: fresh stream for the model draws, then the bootstrap of
    // the training set, then the permutation-test seed.
    let mut eval_rng = stream_rng(opts.seed, STREAM_EVAL);
    let u_samples = sample_checkpoint_with_rng(&ckpt, opts.eval_samples, noise, &mut eval_rng)?;
    let boot = bootstrap_sample(&data.u, data.u.len(), &mut eval_rng);
    let ks = ks2d_test(&u_samples, &boot, opts.permutations, eval_rng.gen())?;
    let report = EvalReport {
        model: model.name().into(),
        d_ks: ks.statistic,
        p_value: ks.p_value,
        n_a: u_samples.len(),
        n_b: boot.len(),
        permutations: ks.permutations,
    };

    let x_samples = back_transform(&u_samples, &data.cdfs)?;
    write_file(
        &out_dir.join(COPULA_SAMPLES_FILE),
        &csvio::write_samples_csv(SampleSpace::Copula, &u_samples),
    )?;
    write_file(
        &out_dir.join(SAMPLES_FILE),
        &csvio::write_samples_csv(SampleSpace::Data, &x_samples),
    )?;
    write_file(
        &out_dir.join(REPORT_FILE),
        &format!("{}\n", serde_json::to_string(&report)?),
    )?;
    Ok(report)
}

/// QCBM training walks a ladder of system sizes (2, 4, ..., --qubits):
/// each size starts from the previous optimum (transfer learning), only
/// the smallest starts from random angles. The training log covers the
/// final size; warm-up progress goes to stderr.
fn train_qcbm_cmd(
    opts: &TrainOpts,
    data: &CopulaData,
    noise: DepolarizingNoise,
    out_dir: &Path,
) -> Result<AnyCheckpoint> {
    let final_n = opts.qubits / 2;
    let mut prev: Option<(QopulaSpec, Vec<f64>)> = None;
    for n in 1..=final_n {
        let spec = QopulaSpec::new(2, n, opts.layers, 0)?;
        let target = bin_2d(&data.u, 1 << n)?;
        let mut config = QcbmConfig::new(spec.clone(), target);
        config.spsa = SpsaConfig {
            a: opts.a,
            c: opts.c,
            gamma: opts.gamma,
            iterations: opts.iterations,
            seed: mix_seed(opts.seed, n as u64),
        };
        config.shots = opts.shots;
        config.noise = noise;
        config.initial_theta = match &prev {
            None => random_theta(&spec, opts.seed),
            Some((small, small_theta)) => transfer_init(small, small_theta, &spec)?,
        };
        let run = if n == final_n {
            let mut log = log_writer(out_dir, "qcbm")?;
            train_qcbm_with(&config, |rec| log.record(rec))?
        } else {
            train_qcbm(&config)?
        };
        eprintln!(
            "qcbm: {} qubits best cost {:.6} at iteration {}",
            2 * n,
            run.best_cost,
            run.best_iteration
        );
        prev = Some((spec, run.theta));
    }
    let (_, theta) = prev.expect("qubits >= 2 so at least one size trained");
    // The stored spec carries the pad bits so `sample` refines the grid.
    Ok(AnyCheckpoint::Qopula(Checkpoint::new(
        &circuit_spec(opts)?,
        theta,
    )))
}

/// splitmix64 of (`seed`, `salt`): decorrelates the SPSA/shot streams of
/// the ladder's stages without coupling neighbouring master seeds.
fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn train_qgan_cmd(
    opts: &TrainOpts,
    data: &CopulaData,
    noise: DepolarizingNoise,
    out_dir: &Path,
) -> Result<AnyCheckpoint> {
    let spec = circuit_spec(opts)?;
    let mut config = QganConfig::new(spec.clone());
    config.batch = opts.batch;
    config.iterations = opts.iterations;
    config.inner = SpsaConfig {
        a: opts.a,
        c: opts.c,
        gamma: opts.gamma,
        iterations: opts.n_inner,
        seed: opts.seed,
    };
    config.disc_lr = opts.lr_disc;
    config.seed = opts.seed;
    config.noise = noise;

    let mut log = log_writer(out_dir, "qgan")?;
    let run = train_qgan_with(&config, &data.u, |rec| log.record(rec))?;
    write_file(
        &out_dir.join(DISCRIMINATOR_FILE),
        &run.discriminator.to_json(),
    )?;
    Ok(AnyCheckpoint::Qopula(Checkpoint::new(&spec, run.theta)))
}

fn train_cgan_cmd(opts: &TrainOpts, data: &CopulaData, out_dir: &Path) -> Result<AnyCheckpoint> {
    let mut config = CganConfig::new();
    config.batch = opts.batch;
    config.iterations = opts.iterations;
    config.lr = opts.lr;
    config.seed = opts.seed;

    let mut log = log_writer(out_dir, "cgan")?;
    let run = train_classical_gan_with(&config, &data.u, |rec| log.record(rec))?;
    Ok(AnyCheckpoint::Cgan {
        generator: run.generator,
        discriminator: run.discriminator,
    })
}

fn circuit_spec(opts: &TrainOpts) -> Result<QopulaSpec> {
    // --qubits counts both registers, matching how system sizes are quoted.
    Ok(QopulaSpec::new(2, opts.qubits / 2, opts.layers, opts.pad_bits)?)
}

fn random_theta(spec: &QopulaSpec, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, STREAM_INIT);
    (0..param_count(spec))
        .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
        .collect()
}

/// Streams training records to `train_log.jsonl` as they arrive and
/// echoes occasional progress to stderr.
struct LogWriter {
    file: fs::File,
    label: &'static str,
    total: usize,
}

fn log_writer(out_dir: &Path, label: &'static str) -> Result<LogWriter> {
    let path = out_dir.join(LOG_FILE);
    let file =
        fs::File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(LogWriter {
        file,
        label,
        total: 0,
    })
}

impl LogWriter {
    fn record(&mut self, rec: &TrainingRecord) {
        self.file
            .write_all(format!("{}\n", rec.to_json_line()).as_bytes())
            .expect("training log write failed");
        self.total += 1;
        if rec.iter == 1 || rec.iter % 100 == 0 {
            match rec.kl {
                Some(kl) => eprintln!("{}: iter {} kl {:.6}", self.label, rec.iter, kl),
                None => eprintln!(
                    "{}: iter {} loss_g {:.6} loss_d {:.6}",
                    self.label,
                    rec.iter,
                    rec.loss_g.unwrap_or(f64::NAN),
                    rec.loss_d.unwrap_or(f64::NAN)
                ),
            }
        }
    }
}

/// Sample command: draw from a checkpoint. Always writes the copula-space
/// CSV; with a returns file for the marginals it also writes data-space
/// samples.
pub fn run_sample(
    checkpoint: &Path,
    shots: usize,
    seed: u64,
    noise_p: f64,
    returns: Option<&Path>,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let bytes = fs::read(checkpoint)
        .with_context(|| format!("cannot read checkpoint {}", checkpoint.display()))?;
    let ckpt = parse_any_checkpoint(&bytes)?;
    let noise = DepolarizingNoise::new(noise_p)?;
    let mut rng = stream_rng(seed, STREAM_EVAL);
    let u = sample_checkpoint_with_rng(&ckpt, shots, noise, &mut rng)?;

    fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))?;
    let mut written = Vec::new();
    let u_path = out_dir.join(COPULA_SAMPLES_FILE);
    write_file(&u_path, &csvio::write_samples_csv(SampleSpace::Copula, &u))?;
    written.push(u_path);
    if let Some(returns_path) = returns {
        let data = load_training_data(returns_path)?;
        let x = back_transform(&u, &data.cdfs)?;
        let x_path = out_dir.join(SAMPLES_FILE);
        write_file(&x_path, &csvio::write_samples_csv(SampleSpace::Data, &x))?;
        written.push(x_path);
    }
    Ok(written)
}

/// Evaluate command: 2D KS permutation test between two sample CSVs
/// living in the same space.
pub fn run_evaluate(
    samples_a: &Path,
    samples_b: &Path,
    permutations: usize,
    seed: u64,
    out_dir: Option<&Path>,
) -> Result<EvalReport> {
    let read = |path: &Path| -> Result<(SampleSpace, Vec<[f64; 2]>)> {
        let bytes =
            fs::read(path).with_context(|| format!("cannot read samples {}", path.display()))?;
        csvio::parse_samples(&bytes)
    };
    let (space_a, a) = read(samples_a)?;
    let (space_b, b) = read(samples_b)?;
    ensure!(
        space_a == space_b,
        "cannot compare samples across spaces ({} is {:?}, {} is {:?})",
        samples_a.display(),
        space_a,
        samples_b.display(),
        space_b
    );
    let ks = ks2d_test(&a, &b, permutations, seed)?;
    let report = EvalReport {
        model: format!("{} vs {}", stem(samples_a), stem(samples_b)),
        d_ks: ks.statistic,
        p_value: ks.p_value,
        n_a: a.len(),
        n_b: b.len(),
        permutations: ks.permutations,
    };
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        write_file(
            &dir.join(REPORT_FILE),
            &format!("{}\n", serde_json::to_string(&report)?),
        )?;
    }
    Ok(report)
}

/// Reduce-check command: verify the IQP embedding on random instances.
pub fn run_reduce_check(
    qubits: usize,
    instances: usize,
    seed: u64,
    out_dir: Option<&Path>,
) -> Result<Vec<ReductionCheck>> {
    ensure!(
        (1..=MAX_REDUCTION_QUBITS).contains(&qubits),
        "--qubits must lie in 1..={MAX_REDUCTION_QUBITS} (the reduction simulates 2x that)"
    );
    ensure!(instances >= 1, "--instances must be at least 1");
    let mut rng = stream_rng(seed, STREAM_INIT);
    let mut checks = Vec::with_capacity(instances);
    for _ in 0..instances {
        let instance = IqpInstance::random(qubits, &mut rng)?;
        let max_diff = verify_iqp_reduction(&instance)?;
        checks.push(ReductionCheck {
            n: qubits,
            max_diff,
        });
    }
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        let mut text = String::new();
        for check in &checks {
            text.push_str(&serde_json::to_string(check)?);
            text.push('\n');
        }
        write_file(&dir.join(REDUCTION_FILE), &text)?;
    }
    Ok(checks)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}
