//! Simulation models and Monte-Carlo experiments for `specfreq`.

pub mod dgp;
pub mod experiment;

pub use dgp::{simulate, true_spectrum, DgpSpec, Model, DEFAULT_BURN_IN};
pub use experiment::{
    block_hypotheses, centered_statistic, run_fdr_experiment, run_power_experiment,
    run_size_experiment, write_results_csv, BlockHypothesis, ExperimentKind, ExperimentResult,
    FdrExperiment, GlobalExperiment, PairSelection,
};
