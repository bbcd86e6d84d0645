//! Randomized Kaczmarz solver for *approximate* solutions of
//! consistent linear systems `Ax = b`.
//!
//! Each step samples one equation with probability proportional to its
//! squared row norm and orthogonally projects the iterate onto that
//! equation's hyperplane. The residual `||Ax_k - b||` falls at a rate
//! governed only by the matrix norms, not by its conditioning, which
//! makes the method effective on systems whose exact solution is out
//! of numerical reach.
//!
//! The crate provides:
//!
//! - dense matrix storage with Hilbert and Gaussian generators, and
//!   Matrix Market I/O ([`matrix`], [`market`]);
//! - spectral estimators plus an exact small-matrix decomposition used
//!   to cross-check them ([`spectral`]);
//! - the seeded, reproducible iteration engine ([`engine`]);
//! - closed-form iteration bounds and exact/Monte Carlo checks of the
//!   method's expectation identities ([`analysis`], [`verify`]);
//! - a config-driven ensemble experiment harness with CSV/JSON
//!   emission ([`harness`]).

pub mod analysis;
pub mod engine;
pub mod error;
pub mod harness;
pub mod market;
pub mod matrix;
pub mod sampling;
pub mod spectral;
pub mod stats;
pub mod system;
pub mod verify;

pub use analysis::{
    lemma1_exact_check, residual_sqrt_k_profile, singular_direction_expectation_check,
    strohmer_vershynin_rate_check, theorem1_bound, theorem2_diagnostic, BoundRegime, BoundReport,
    CheckMethod, IdentityCheckResult, LogDecayDiagnostic,
};
pub use engine::{
    iterate, kaczmarz_step, project_onto_row, run, run_with_stride, IterateState, RunHistory,
    StepRecord, StopReason, StoppingRule,
};
pub use error::{Error, Result};
pub use harness::{
    hilbert_demo_config, run_experiment, EnsembleSummary, ExperimentConfig, ExperimentOutcome,
    MatrixSource, VectorSpec,
};
pub use market::{read_matrix_market, write_matrix_market};
pub use matrix::DenseMatrix;
pub use sampling::{derive_trial_seed, SamplingDistribution};
pub use spectral::{
    numerical_rank, operator_norm, sigma_min_estimate, svd_small, SpectralSummary,
};
pub use system::LinearSystem;
