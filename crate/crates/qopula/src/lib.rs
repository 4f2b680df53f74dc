//! Quantum generative modelling of two-asset return dependence structures
//! (copulas) on a local statevector simulator.
//!
//! The crate is organised around a single circuit family, the *qopula*
//! ansatz ([`ansatz`]): a Bell/GHZ-style entangler that guarantees exactly
//! uniform per-variable marginals, followed by trainable single- and
//! two-qubit rotations that shape the dependence structure only. On top of
//! that sit two trainable models (a quantum circuit Born machine and a
//! quantum GAN, [`models`]), two classical baselines (a from-scratch GAN and
//! a Gaussian copula), evaluation utilities built around a two-dimensional
//! two-sample Kolmogorov-Smirnov test ([`eval`]), and a constructive check
//! that the ansatz embeds IQP circuit sampling ([`hardness`]).

pub mod ansatz;
pub mod copula;
pub mod eval;
pub mod hardness;
pub mod models;
pub mod nnet;
pub mod optim;
pub mod statevec;

use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit count {requested} outside supported range 1..={max}")]
    QubitCountOutOfRange { requested: usize, max: usize },

    #[error("gate acts on qubit {qubit} but the register has {num_qubits} qubits")]
    GateOutOfRange { qubit: usize, num_qubits: usize },

    #[error("two-qubit gate targets must be distinct (got qubit {0} twice)")]
    DuplicateGateTargets(usize),

    #[error("state has {state_qubits} qubits but circuit expects {circuit_qubits}")]
    QubitCountMismatch {
        state_qubits: usize,
        circuit_qubits: usize,
    },

    #[error("noise probability {0} outside [0, 1]")]
    InvalidNoiseProbability(f64),

    #[error("shot count must be at least 1")]
    ZeroShots,

    #[error("{context}: need at least {min} values, got {got}")]
    NotEnoughData {
        context: &'static str,
        min: usize,
        got: usize,
    },

    #[error("{context}: value {value} outside {expected}")]
    OutOfDomain {
        context: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("{context}: non-finite value encountered")]
    NonFinite { context: &'static str },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("price series at index {0} contains a non-positive price")]
    NonPositivePrice(usize),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("checkpoint is inconsistent: {0}")]
    BadCheckpoint(String),

    #[error("checkpoint is not valid JSON: {0}")]
    CheckpointSyntax(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
