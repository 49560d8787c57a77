//! Simultaneous tests of many `(I, J)` hypotheses with false discovery rate
//! control.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::autocov::AutocovSet;
use crate::error::{Error, Result};
use crate::freq::FrequencySet;
use crate::global::{check_alpha, check_pairs, prepare, run_hypothesis, ArgMax, TestConfig};
use crate::index::IndexSet;
use crate::panel::TimePanel;

/// One null hypothesis `H_{0,q}: f_{i,j}(ω) = 0` over `I^(q) x J^(q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisSpec {
    /// Identifier `q`; also keys the hypothesis' multiplier stream.
    pub id: u64,
    pub pairs: IndexSet,
    pub freqs: FrequencySet,
}

/// Statistic and bootstrap p-value of one hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Marginal {
    pub id: u64,
    pub statistic: f64,
    pub p_value: f64,
    pub l_n: usize,
    pub b_n: f64,
    pub arg_max: ArgMax,
}

/// Runs the global-test pipeline separately for every hypothesis.
///
/// Hypotheses sharing an index set and bandwidth share one lag panel and
/// multiplier factorization; each still draws from its own stream.
pub fn marginal_pvalues(
    panel: &TimePanel,
    hyps: &[HypothesisSpec],
    cfg: &TestConfig,
) -> Result<Vec<Marginal>> {
    if hyps.is_empty() {
        return Err(Error::InvalidParameter("no hypotheses".into()));
    }
    cfg.multiplier.validate()?;
    let mut ids = HashSet::with_capacity(hyps.len());
    for h in hyps {
        if !ids.insert(h.id) {
            return Err(Error::InvalidParameter(format!("duplicate hypothesis id {}", h.id)));
        }
    }
    let wrap = |id: u64| move |e: Error| Error::Hypothesis { id, source: Box::new(e) };

    let mut groups: Vec<(&IndexSet, usize, Vec<usize>)> = Vec::new();
    let mut lookup: HashMap<(&IndexSet, usize), usize> = HashMap::new();
    for (k, h) in hyps.iter().enumerate() {
        check_pairs(panel, &h.pairs).map_err(wrap(h.id))?;
        let bw = cfg.bandwidth_for(h.pairs.len());
        bw.check(panel.n()).map_err(wrap(h.id))?;
        let g = *lookup.entry((&h.pairs, bw.l())).or_insert_with(|| {
            groups.push((&h.pairs, bw.l(), Vec::new()));
            groups.len() - 1
        });
        groups[g].2.push(k);
    }

    let max_lag = groups.iter().map(|g| g.1).max().unwrap_or(1);
    let centered = panel.centered();
    let acov = AutocovSet::from_centered(&centered, max_lag)?;

    let results: Vec<Vec<(usize, Result<Marginal>)>> = groups
        .par_iter()
        .map(|(pairs, l, members)| {
            let bw = crate::spectral::Bandwidth::new(*l).expect("l_n >= 1");
            let prepared = match prepare(&centered, &acov, pairs, bw, cfg) {
                Ok(p) => p,
                Err(e) => {
                    let first = members[0];
                    return vec![(first, Err(wrap(hyps[first].id)(e)))];
                }
            };
            members
                .par_iter()
                .map(|&k| {
                    let h = &hyps[k];
                    let grid = h.freqs.grid(panel.n());
                    let out = run_hypothesis(&acov, &prepared, pairs, &grid, cfg, h.id).map(
                        |(statistic, arg_max, draws)| Marginal {
                            id: h.id,
                            statistic,
                            p_value: draws.p_value(statistic),
                            l_n: bw.l(),
                            b_n: prepared.plan.bandwidth(),
                            arg_max,
                        },
                    );
                    (k, out.map_err(wrap(h.id)))
                })
                .collect()
        })
        .collect();

    let mut slots: Vec<Option<Result<Marginal>>> = (0..hyps.len()).map(|_| None).collect();
    for (k, r) in results.into_iter().flatten() {
        slots[k] = Some(r);
    }
    let mut out = Vec::with_capacity(hyps.len());
    for slot in slots {
        // a failed group reports at its first member, ahead of the empty slots
        out.push(slot.expect("slot filled or preceded by an error")?);
    }
    Ok(out)
}

/// Upper normal tail `1 - Φ(t)`.
fn normal_tail(t: f64) -> f64 {
    0.5 * libm::erfc(t / std::f64::consts::SQRT_2)
}

/// `FDP̂(t) = Q (1 - Φ(t)) / max(1, #{q : V_q >= t})`.
pub fn fdp_hat(t: f64, q: usize, v: &[f64]) -> f64 {
    let r = v.iter().filter(|&&x| x >= t).count().max(1);
    q as f64 * normal_tail(t) / r as f64
}

/// `(2 ln Q - 2 ln ln Q)^{1/2}`.
pub fn threshold_cap(q: usize) -> f64 {
    let lq = (q as f64).ln();
    (2.0 * lq - 2.0 * lq.ln()).sqrt()
}

/// The selected threshold and whether the `(2 ln Q)^{1/2}` fallback was
/// used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Threshold {
    pub t_hat: f64,
    pub fallback: bool,
}

/// Smallest `t` in `(0, t_max]` with `FDP̂(t) <= α`, searched over the
/// values of `v` in that range and `t_max` itself.
pub fn select_threshold(v: &[f64], q: usize, alpha: f64) -> Result<Threshold> {
    if q < 2 {
        return Err(Error::InvalidParameter(format!(
            "the threshold needs at least 2 hypotheses, got {q}"
        )));
    }
    check_alpha(alpha)?;
    let t_max = threshold_cap(q);
    let mut candidates: Vec<f64> = v.iter().copied().filter(|&x| x > 0.0 && x <= t_max).collect();
    candidates.push(t_max);
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    for t in candidates {
        if fdp_hat(t, q, v) <= alpha {
            return Ok(Threshold {
                t_hat: t,
                fallback: false,
            });
        }
    }
    Ok(Threshold {
        t_hat: (2.0 * (q as f64).ln()).sqrt(),
        fallback: true,
    })
}

/// One row of an [`FdrReport`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisResult {
    pub id: u64,
    pub statistic: f64,
    pub p_value: f64,
    /// `Φ^{-1}(1 - pv)` with `pv` clamped to `[1/(B+1), B/(B+1)]`.
    pub v: f64,
    pub rejected: bool,
    pub l_n: usize,
    pub b_n: f64,
    pub arg_max: ArgMax,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FdrReport {
    pub hypotheses: Vec<HypothesisResult>,
    pub t_hat: f64,
    pub fallback_used: bool,
    pub alpha: f64,
    pub replicates: usize,
    pub seed: u64,
}

impl FdrReport {
    pub fn rejected_ids(&self) -> Vec<u64> {
        self.hypotheses
            .iter()
            .filter(|h| h.rejected)
            .map(|h| h.id)
            .collect()
    }

    pub fn v_values(&self) -> Vec<f64> {
        self.hypotheses.iter().map(|h| h.v).collect()
    }
}

/// Normal-quantile transform of a bootstrap p-value.
pub fn normal_score(p_value: f64, replicates: usize) -> f64 {
    let b = replicates as f64;
    let pv = p_value.clamp(1.0 / (b + 1.0), b / (b + 1.0));
    Normal::standard().inverse_cdf(1.0 - pv)
}

/// Rejects every hypothesis with `V_q >= t̂`.
pub fn fdr_procedure(
    panel: &TimePanel,
    hyps: &[HypothesisSpec],
    alpha: f64,
    cfg: &TestConfig,
) -> Result<FdrReport> {
    check_alpha(alpha)?;
    if hyps.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "the procedure needs at least 2 hypotheses, got {}",
            hyps.len()
        )));
    }
    let b = cfg.multiplier.replicates;
    let marginals = marginal_pvalues(panel, hyps, cfg)?;
    let v: Vec<f64> = marginals.iter().map(|m| normal_score(m.p_value, b)).collect();
    let threshold = select_threshold(&v, hyps.len(), alpha)?;
    let hypotheses = marginals
        .into_iter()
        .zip(&v)
        .map(|(m, &v)| HypothesisResult {
            id: m.id,
            statistic: m.statistic,
            p_value: m.p_value,
            v,
            rejected: v >= threshold.t_hat,
            l_n: m.l_n,
            b_n: m.b_n,
            arg_max: m.arg_max,
        })
        .collect();
    Ok(FdrReport {
        hypotheses,
        t_hat: threshold.t_hat,
        fallback_used: threshold.fallback,
        alpha,
        replicates: b,
        seed: cfg.multiplier.seed,
    })
}
