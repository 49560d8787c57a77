//! Inference on the spectral density matrix of high-dimensional stationary
//! time series.
//!
//! The pipeline runs from a [`TimePanel`] through the lag-window estimate
//! [`estimate_spectrum`] to the bootstrap-calibrated [`global_test`] and the
//! multiple-testing procedure [`fdr_procedure`].

pub mod autocov;
pub mod bootstrap;
pub mod error;
pub mod fdr;
pub mod freq;
pub mod global;
pub mod index;
pub mod kernel;
pub mod longrun;
pub mod panel;
pub mod rng;
pub mod spectral;

pub use autocov::{autocov, AutocovSet};
pub use bootstrap::{
    draw_multipliers, factor_theta, run_bootstrap, xi_draw, BootstrapDraws, BootstrapPlan,
    DrawRoute, MultiplierConfig, ToeplitzFactor,
};
pub use error::{Error, Result};
pub use fdr::{
    fdp_hat, fdr_procedure, marginal_pvalues, select_threshold, FdrReport, HypothesisResult,
    HypothesisSpec, Threshold,
};
pub use freq::FrequencySet;
pub use global::{critical_value, global_test, test_statistic, ArgMax, GlobalTestReport, TestConfig};
pub use index::{IndexSet, Pair};
pub use kernel::{flat_top_weight, qs_weight, FlatTopKernel};
pub use longrun::{andrews_bandwidth, build_lag_panel, estimate_longrun, LagPanel, LongRunCov};
pub use panel::{difference, load_csv, parse_csv, Differencing, TimePanel};
pub use spectral::{
    coherence, default_bandwidth, estimate_spectrum, freq_projection, Bandwidth, FreqProjection,
    SpectralEstimate, SpectralEstimator,
};

/// Formats a float with 17 significant digits, enough to round-trip.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}
