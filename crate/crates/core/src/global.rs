//! The max-type global test of zero cross-spectra.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::autocov::AutocovSet;
use crate::bootstrap::{projections, BootstrapDraws, BootstrapPlan, DrawRoute, MultiplierConfig};
use crate::error::{Error, Result};
use crate::freq::FrequencySet;
use crate::index::{IndexSet, Pair};
use crate::kernel::FlatTopKernel;
use crate::longrun::{andrews_bandwidth, build_from_centered};
use crate::panel::TimePanel;
use crate::spectral::{default_bandwidth, Bandwidth, SpectralEstimate, SpectralEstimator};

/// Tuning shared by the global test and the multiple-testing procedure.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TestConfig {
    /// Overrides the default `l_n` rule.
    pub bandwidth: Option<Bandwidth>,
    pub kernel: FlatTopKernel,
    /// Overrides the automatic `b_n`.
    pub b_n: Option<f64>,
    pub multiplier: MultiplierConfig,
}


impl TestConfig {
    pub fn bandwidth_for(&self, r: usize) -> Bandwidth {
        self.bandwidth.unwrap_or_else(|| default_bandwidth(r))
    }
}

/// Where the statistic attains its maximum. Indices are zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArgMax {
    /// Position of the pair in the index set.
    pub pair: usize,
    pub i: usize,
    pub j: usize,
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlobalTestReport {
    pub statistic: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub reject: bool,
    /// Number of bootstrap draws `B`.
    pub replicates: usize,
    pub arg_max: ArgMax,
    pub l_n: usize,
    pub c: f64,
    pub b_n: f64,
    pub seed: u64,
    pub n: usize,
    pub p: usize,
    pub pairs: usize,
    pub frequencies: usize,
    pub route: DrawRoute,
    pub factor_fallback: bool,
}

/// `T_n = (n / l_n) max_ω max_{(i,j)} |f̂_{i,j}(ω)|²`, ties resolved to the
/// lowest pair position and then the lowest frequency.
pub fn test_statistic(
    est: &SpectralEstimate,
    pairs: &[Pair],
    freqs: &[f64],
    n: usize,
    l_n: usize,
) -> Result<(f64, ArgMax)> {
    if pairs.is_empty() {
        return Err(Error::InvalidIndexSet("no pairs".into()));
    }
    if freqs.is_empty() {
        return Err(Error::InvalidFrequency("empty frequency set".into()));
    }
    let ks = freqs
        .iter()
        .map(|&w| {
            est.freq_index(w)
                .ok_or_else(|| Error::InvalidFrequency(format!("{w} was not evaluated")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<(f64, ArgMax)> = None;
    for (pos, &(i, j)) in pairs.iter().enumerate() {
        for (&k, &omega) in ks.iter().zip(freqs) {
            let f = est.get(i, j, k).ok_or_else(|| {
                Error::InvalidIndexSet(format!("pair ({}, {}) not estimated", i + 1, j + 1))
            })?;
            let v = f.norm_sqr();
            if best.as_ref().is_none_or(|(b, _)| v > *b) {
                best = Some((v, ArgMax { pair: pos, i, j, omega }));
            }
        }
    }
    let (v, arg) = best.expect("non-empty loops");
    Ok((n as f64 / l_n as f64 * v, arg))
}

/// Number of draws `⌊B α⌋` above the critical value, with a small allowance
/// for decimal `α` that are not exact in binary.
pub fn critical_rank(replicates: usize, alpha: f64) -> usize {
    (replicates as f64 * alpha + 1e-9).floor() as usize
}

/// The `⌊B α⌋`-th largest draw.
pub fn critical_value(draws: &BootstrapDraws, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let k = critical_rank(draws.len(), alpha);
    if k < 1 {
        return Err(Error::InvalidParameter(format!(
            "B alpha = {} is below 1",
            draws.len() as f64 * alpha
        )));
    }
    let mut xi = draws.xi().to_vec();
    xi.sort_by(|a, b| b.total_cmp(a));
    Ok(xi[k - 1])
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// Lag panel, bandwidths and multiplier factorization for one index set.
pub(crate) struct Prepared {
    pub bw: Bandwidth,
    pub plan: BootstrapPlan,
}

pub(crate) fn prepare(
    centered: &DMatrix<f64>,
    acov: &AutocovSet,
    pairs: &IndexSet,
    bw: Bandwidth,
    cfg: &TestConfig,
) -> Result<Prepared> {
    let lp = build_from_centered(centered, acov, pairs, bw)?;
    let b_n = match cfg.b_n {
        Some(b) => b,
        None => andrews_bandwidth(&lp)?,
    };
    let plan = BootstrapPlan::new(lp, b_n, &cfg.multiplier)?;
    Ok(Prepared { bw, plan })
}

/// Statistic and bootstrap draws for one `(I, J)` given a prepared plan.
pub(crate) fn run_hypothesis(
    acov: &AutocovSet,
    prepared: &Prepared,
    pairs: &IndexSet,
    grid: &[f64],
    cfg: &TestConfig,
    stream: u64,
) -> Result<(f64, ArgMax, BootstrapDraws)> {
    let estimator = SpectralEstimator::new(acov, prepared.bw, &cfg.kernel)?;
    let est = estimator.evaluate(grid, Some(pairs));
    let (t, arg) = test_statistic(&est, pairs.pairs(), grid, acov.n(), prepared.bw.l())?;
    let mcfg = MultiplierConfig {
        stream,
        ..cfg.multiplier.clone()
    };
    let draws = prepared
        .plan
        .draws(&projections(prepared.bw, &cfg.kernel, grid), &mcfg)?;
    Ok((t, arg, draws))
}

pub(crate) fn check_pairs(panel: &TimePanel, pairs: &IndexSet) -> Result<()> {
    if pairs.p() != panel.p() {
        return Err(Error::DimensionMismatch(format!(
            "index set built for p = {}, panel has p = {}",
            pairs.p(),
            panel.p()
        )));
    }
    Ok(())
}

/// Tests `H₀: f_{i,j}(ω) = 0` for all `(i, j)` in `pairs` and `ω` in `freqs`.
pub fn global_test(
    panel: &TimePanel,
    pairs: &IndexSet,
    freqs: &FrequencySet,
    alpha: f64,
    cfg: &TestConfig,
) -> Result<GlobalTestReport> {
    check_alpha(alpha)?;
    check_pairs(panel, pairs)?;
    cfg.multiplier.validate()?;
    if critical_rank(cfg.multiplier.replicates, alpha) < 1 {
        return Err(Error::InvalidParameter(format!(
            "B alpha = {} is below 1",
            cfg.multiplier.replicates as f64 * alpha
        )));
    }
    let bw = cfg.bandwidth_for(pairs.len());
    bw.check(panel.n())?;
    let grid = freqs.grid(panel.n());
    let centered = panel.centered();
    let acov = AutocovSet::from_centered(&centered, bw.l())?;
    let prepared = prepare(&centered, &acov, pairs, bw, cfg)?;
    let (statistic, arg_max, draws) =
        run_hypothesis(&acov, &prepared, pairs, &grid, cfg, cfg.multiplier.stream)?;
    let critical_value = critical_value(&draws, alpha)?;
    Ok(GlobalTestReport {
        statistic,
        critical_value,
        p_value: draws.p_value(statistic),
        alpha,
        reject: statistic > critical_value,
        replicates: draws.len(),
        arg_max,
        l_n: bw.l(),
        c: cfg.kernel.c(),
        b_n: prepared.plan.bandwidth(),
        seed: cfg.multiplier.seed,
        n: panel.n(),
        p: panel.p(),
        pairs: pairs.len(),
        frequencies: grid.len(),
        route: draws.route(),
        factor_fallback: draws.used_fallback(),
    })
}
