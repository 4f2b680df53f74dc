use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use qopula_cli::run::{self, ConfigFile, Model, Overrides};

#[derive(Parser)]
#[command(
    name = "qopula",
    version,
    about = "Copula modeling of joint return distributions with quantum-circuit generative models \
             on a local statevector simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a two-asset price CSV (date,<a>,<b>) into a returns CSV.
    Ingest {
        /// Price CSV with header date,<a>,<b> and ISO-8601 dates.
        #[arg(long)]
        prices: PathBuf,
        /// Directory for returns.csv.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Train a quantum circuit Born machine on a returns dataset.
    TrainQcbm(TrainArgs),
    /// Train the quantum GAN (circuit generator, classical discriminator).
    TrainQgan(TrainArgs),
    /// Train the fully classical GAN baseline.
    TrainCgan(TrainArgs),
    /// Fit the parametric Gaussian-copula baseline.
    FitGaussian(TrainArgs),
    /// Draw samples from a saved checkpoint.
    Sample {
        /// Checkpoint JSON written by a train/fit command.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Number of samples to draw.
        #[arg(long, default_value_t = 2048)]
        shots: usize,
        /// Master seed for the draw.
        #[arg(long)]
        seed: u64,
        /// Two-qubit depolarizing probability (circuit checkpoints only).
        #[arg(long, default_value_t = 0.0)]
        noise_p: f64,
        /// Returns CSV providing the marginals; adds data-space samples.
        #[arg(long)]
        returns: Option<PathBuf>,
        /// Directory for the sample CSVs.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Two-sample 2D Kolmogorov-Smirnov permutation test between two
    /// sample CSVs.
    Evaluate {
        #[arg(long)]
        samples_a: PathBuf,
        #[arg(long)]
        samples_b: PathBuf,
        /// Label permutations for the p-value (at least 100).
        #[arg(long, default_value_t = 1000)]
        permutations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write report.json here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Verify the IQP-embedding construction on random instances,
    /// printing {"n", "max_diff"} per instance.
    ReduceCheck {
        /// IQP system size n (the verification simulates 2n qubits).
        #[arg(long, default_value_t = 3)]
        qubits: usize,
        /// Number of random instances to check.
        #[arg(long, default_value_t = 10)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write reduction_checks.jsonl here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

/// Shared options of the train/fit commands. Flags override config-file
/// values, which override the built-in defaults (the published simulator
/// settings). Flags that do not apply to the chosen model are rejected.
#[derive(Args)]
struct TrainArgs {
    /// Returns CSV (r1,r2) to train on.
    #[arg(long)]
    returns: PathBuf,
    /// Optional JSON config file with the same keys as the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Total qubit count over both registers (even).
    #[arg(long)]
    qubits: Option<usize>,
    /// Ansatz layers per register.
    #[arg(long)]
    layers: Option<usize>,
    /// Uniform bits appended to each measured register.
    #[arg(long)]
    pad_bits: Option<usize>,
    /// Measurement shots per QCBM cost evaluation.
    #[arg(long)]
    shots: Option<usize>,
    /// Training iterations.
    #[arg(long)]
    iterations: Option<usize>,
    /// SPSA step-size numerator.
    #[arg(long)]
    a: Option<f64>,
    /// SPSA perturbation-size numerator.
    #[arg(long)]
    c: Option<f64>,
    /// SPSA perturbation decay exponent.
    #[arg(long)]
    gamma: Option<f64>,
    /// Inner SPSA generator steps per QGAN iteration.
    #[arg(long)]
    n_inner: Option<usize>,
    /// Discriminator Adam learning rate (QGAN).
    #[arg(long)]
    lr_disc: Option<f64>,
    /// Shared Adam learning rate (classical GAN).
    #[arg(long)]
    lr: Option<f64>,
    /// Minibatch size.
    #[arg(long)]
    batch: Option<usize>,
    /// Two-qubit depolarizing probability after each two-qubit gate.
    #[arg(long)]
    noise_p: Option<f64>,
    /// Master seed (required here or in the config file).
    #[arg(long)]
    seed: Option<u64>,
    /// Label permutations for the evaluation p-value.
    #[arg(long)]
    permutations: Option<usize>,
    /// Samples drawn for the evaluation report.
    #[arg(long)]
    eval_samples: Option<usize>,
    /// Directory for log, checkpoint, samples, and report.
    #[arg(long)]
    out_dir: PathBuf,
}

impl TrainArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            qubits: self.qubits,
            layers: self.layers,
            pad_bits: self.pad_bits,
            shots: self.shots,
            iterations: self.iterations,
            a: self.a,
            c: self.c,
            gamma: self.gamma,
            n_inner: self.n_inner,
            lr_disc: self.lr_disc,
            lr: self.lr,
            batch: self.batch,
            noise_p: self.noise_p,
            seed: self.seed,
            permutations: self.permutations,
            eval_samples: self.eval_samples,
        }
    }
}

fn train(model: Model, args: &TrainArgs) -> Result<()> {
    let file = match &args.config {
        Some(path) => run::load_config_file(path)?,
        None => ConfigFile::default(),
    };
    let opts = run::resolve(model, &args.overrides(), &file)?;
    let report = run::run_pipeline(model, &args.returns, &opts, &args.out_dir)?;
    println!("{}", serde_json::to_string(&report)?);
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Ingest { prices, out_dir } => {
            let path = run::run_ingest(&prices, &out_dir)?;
            println!("{}", path.display());
        }
        Command::TrainQcbm(args) => train(Model::Qcbm, &args)?,
        Command::TrainQgan(args) => train(Model::Qgan, &args)?,
        Command::TrainCgan(args) => train(Model::Cgan, &args)?,
        Command::FitGaussian(args) => train(Model::Gaussian, &args)?,
        Command::Sample {
            checkpoint,
            shots,
            seed,
            noise_p,
            returns,
            out_dir,
        } => {
            let written =
                run::run_sample(&checkpoint, shots, seed, noise_p, returns.as_deref(), &out_dir)?;
            for path in written {
                println!("{}", path.display());
            }
        }
        Command::Evaluate {
            samples_a,
            samples_b,
            permutations,
            seed,
            out_dir,
        } => {
            let report =
                run::run_evaluate(&samples_a, &samples_b, permutations, seed, out_dir.as_deref())?;
            println!("{}", serde_json::to_string(&report)?);
        }
        Command::ReduceCheck {
            qubits,
            instances,
            seed,
            out_dir,
        } => {
            let checks = run::run_reduce_check(qubits, instances, seed, out_dir.as_deref())?;
            for check in checks {
                println!("{}", serde_json::to_string(&check)?);
            }
        }
    }
    Ok(())
}
