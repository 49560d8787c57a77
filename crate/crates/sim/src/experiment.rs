//! Size, power and FDR experiments over independent replications.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use specfreq::rng::{derive_seed, substream, DOMAIN_DATA, DOMAIN_REPLICATION};
use specfreq::{
    estimate_spectrum, fdr_procedure, format_f64, global_test, Bandwidth, Error, FlatTopKernel,
    FrequencySet, HypothesisSpec, IndexSet, Pair, Result, TestConfig, TimePanel,
};

use crate::dgp::{simulate, true_spectrum, DgpSpec};

/// Entries of the true spectrum at or below this modulus count as zero.
pub const NULL_TOLERANCE: f64 = 1e-12;

/// Which series pairs a global test covers.
#[derive(Debug, Clone, PartialEq)]
pub enum PairSelection {
    OffDiagonal,
    Diagonal,
    Explicit(Vec<Pair>),
}

impl PairSelection {
    pub fn index_set(&self, p: usize) -> Result<IndexSet> {
        match self {
            PairSelection::OffDiagonal => IndexSet::off_diagonal(p),
            PairSelection::Diagonal => IndexSet::diagonal(p),
            PairSelection::Explicit(pairs) => IndexSet::new(pairs.clone(), p),
        }
    }
}

/// A global-test experiment: `reps` panels drawn from `dgp`, each tested once.
#[derive(Debug, Clone)]
pub struct GlobalExperiment {
    pub dgp: DgpSpec,
    pub pairs: PairSelection,
    pub freqs: FrequencySet,
    pub alpha: f64,
    pub test: TestConfig,
    pub reps: usize,
    pub seed: u64,
}

/// The block-design multiple-testing experiment.
///
/// Series are split into `blocks` contiguous groups. Each diagonal block
/// contributes its within-block pairs, each lower off-diagonal block its
/// cross pairs, and every block is tested at each frequency separately.
#[derive(Debug, Clone)]
pub struct FdrExperiment {
    pub dgp: DgpSpec,
    pub blocks: usize,
    pub freqs: Vec<f64>,
    pub alpha: f64,
    pub test: TestConfig,
    pub reps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Size,
    Power,
    Fdr,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentKind::Size => "size",
            ExperimentKind::Power => "power",
            ExperimentKind::Fdr => "fdr",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub experiment: ExperimentKind,
    pub model: String,
    pub n: usize,
    pub p: usize,
    pub param: f64,
    /// Number of frequencies tested.
    pub k: usize,
    pub c: f64,
    pub replications: usize,
    /// Rejection rate of the global test.
    pub rate: Option<f64>,
    /// Mean false discovery proportion.
    pub fdr: Option<f64>,
    /// Mean fraction of non-null hypotheses with `V > t̂`.
    pub power: Option<f64>,
    /// Global-test p-values, one per replication.
    #[serde(skip)]
    pub p_values: Vec<f64>,
}

/// One hypothesis of the block design with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockHypothesis {
    pub spec: HypothesisSpec,
    pub null: bool,
}

fn check_reps(reps: usize) -> Result<()> {
    if reps == 0 {
        return Err(Error::InvalidParameter("reps must be at least 1".into()));
    }
    Ok(())
}

/// Largest true cross-spectrum modulus over `pairs` and `grid`.
fn true_max(dgp: &DgpSpec, pairs: &[Pair], grid: &[f64]) -> Result<f64> {
    let mut m: f64 = 0.0;
    for &w in grid {
        let f = true_spectrum(dgp, w)?;
        for &(i, j) in pairs {
            m = m.max(f[(i, j)].norm());
        }
    }
    Ok(m)
}

fn replicate_panel(dgp: &DgpSpec, seed: u64, r: usize) -> Result<TimePanel> {
    simulate(dgp, &mut substream(seed, DOMAIN_DATA, 0, r as u64))
}

fn replicate_config(test: &TestConfig, seed: u64, r: usize) -> TestConfig {
    let mut cfg = test.clone();
    cfg.multiplier.seed = derive_seed(seed, DOMAIN_REPLICATION, r as u64);
    cfg
}

fn run_global(exp: &GlobalExperiment, kind: ExperimentKind) -> Result<ExperimentResult> {
    check_reps(exp.reps)?;
    exp.dgp.validate()?;
    let pairs = exp.pairs.index_set(exp.dgp.p)?;
    let grid = exp.freqs.grid(exp.dgp.n);
    let truth = true_max(&exp.dgp, pairs.pairs(), &grid)?;
    match kind {
        ExperimentKind::Size if truth > NULL_TOLERANCE => {
            return Err(Error::InvalidParameter(format!(
                "size experiment needs a null model, true |f| reaches {truth:e}"
            )))
        }
        ExperimentKind::Power if truth <= NULL_TOLERANCE => {
            return Err(Error::InvalidParameter(
                "power experiment needs a non-zero true cross-spectrum".into(),
            ))
        }
        _ => {}
    }
    let reports = (0..exp.reps)
        .into_par_iter()
        .map(|r| {
            let panel = replicate_panel(&exp.dgp, exp.seed, r)?;
            let cfg = replicate_config(&exp.test, exp.seed, r);
            global_test(&panel, &pairs, &exp.freqs, exp.alpha, &cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let rejections = reports.iter().filter(|r| r.reject).count();
    Ok(ExperimentResult {
        experiment: kind,
        model: exp.dgp.model.to_string(),
        n: exp.dgp.n,
        p: exp.dgp.p,
        param: exp.dgp.a,
        k: grid.len(),
        c: exp.test.kernel.c(),
        replications: exp.reps,
        rate: Some(rejections as f64 / exp.reps as f64),
        fdr: None,
        power: None,
        p_values: reports.iter().map(|r| r.p_value).collect(),
    })
}

/// Rejection rate of the global test when every tested cross-spectrum is zero.
pub fn run_size_experiment(exp: &GlobalExperiment) -> Result<ExperimentResult> {
    run_global(exp, ExperimentKind::Size)
}

/// Rejection rate of the global test under an alternative.
pub fn run_power_experiment(exp: &GlobalExperiment) -> Result<ExperimentResult> {
    run_global(exp, ExperimentKind::Power)
}

fn split_blocks(p: usize, blocks: usize) -> Result<Vec<Vec<usize>>> {
    if blocks == 0 || p < 2 * blocks {
        return Err(Error::InvalidParameter(format!(
            "cannot split {p} series into {blocks} blocks of at least 2"
        )));
    }
    let base = p / blocks;
    let extra = p % blocks;
    let mut out = Vec::with_capacity(blocks);
    let mut start = 0;
    for b in 0..blocks {
        let size = base + usize::from(b < extra);
        out.push((start..start + size).collect());
        start += size;
    }
    Ok(out)
}

/// Hypotheses of the block design, ids `0..Q` ordered by block then
/// frequency.
pub fn block_hypotheses(dgp: &DgpSpec, blocks: usize, freqs: &[f64]) -> Result<Vec<BlockHypothesis>> {
    let groups = split_blocks(dgp.p, blocks)?;
    let mut sets = Vec::new();
    for hi in 0..blocks {
        for lo in 0..=hi {
            let set = if hi == lo {
                IndexSet::within(&groups[hi], dgp.p)?
            } else {
                IndexSet::cross(&groups[hi], &groups[lo], dgp.p)?
            };
            sets.push(set);
        }
    }
    let mut out = Vec::with_capacity(sets.len() * freqs.len());
    for set in sets {
        for &w in freqs {
            let null = true_max(dgp, set.pairs(), &[w])? <= NULL_TOLERANCE;
            out.push(BlockHypothesis {
                spec: HypothesisSpec {
                    id: out.len() as u64,
                    pairs: set.clone(),
                    freqs: FrequencySet::single(w)?,
                },
                null,
            });
        }
    }
    Ok(out)
}

/// Empirical FDR and power of the multiple-testing procedure on the block
/// design.
pub fn run_fdr_experiment(exp: &FdrExperiment) -> Result<ExperimentResult> {
    check_reps(exp.reps)?;
    exp.dgp.validate()?;
    let hyps = block_hypotheses(&exp.dgp, exp.blocks, &exp.freqs)?;
    let q = hyps.len();
    let q0 = hyps.iter().filter(|h| h.null).count();
    let specs: Vec<HypothesisSpec> = hyps.iter().map(|h| h.spec.clone()).collect();
    let per_rep = (0..exp.reps)
        .into_par_iter()
        .map(|r| {
            let panel = replicate_panel(&exp.dgp, exp.seed, r)?;
            let cfg = replicate_config(&exp.test, exp.seed, r);
            let report = fdr_procedure(&panel, &specs, exp.alpha, &cfg)?;
            let mut rejected = 0usize;
            let mut false_rej = 0usize;
            let mut detected = 0usize;
            for (h, res) in hyps.iter().zip(&report.hypotheses) {
                if res.rejected {
                    rejected += 1;
                    false_rej += usize::from(h.null);
                }
                if !h.null && res.v > report.t_hat {
                    detected += 1;
                }
            }
            let fdp = false_rej as f64 / rejected.max(1) as f64;
            let power = if q > q0 {
                detected as f64 / (q - q0) as f64
            } else {
                0.0
            };
            Ok((fdp, power))
        })
        .collect::<Result<Vec<_>>>()?;
    let reps = exp.reps as f64;
    Ok(ExperimentResult {
        experiment: ExperimentKind::Fdr,
        model: exp.dgp.model.to_string(),
        n: exp.dgp.n,
        p: exp.dgp.p,
        param: exp.dgp.a,
        k: exp.freqs.len(),
        c: exp.test.kernel.c(),
        replications: exp.reps,
        rate: None,
        fdr: Some(per_rep.iter().map(|x| x.0).sum::<f64>() / reps),
        power: (q > q0).then(|| per_rep.iter().map(|x| x.1).sum::<f64>() / reps),
        p_values: Vec::new(),
    })
}

/// `(n / l_n) max_ω max_{(i,j)} |f̂_{i,j}(ω) - f_{i,j}(ω)|²` against the true
/// spectrum of `dgp`.
pub fn centered_statistic(
    panel: &TimePanel,
    dgp: &DgpSpec,
    pairs: &IndexSet,
    freqs: &[f64],
    bw: Bandwidth,
    kernel: &FlatTopKernel,
) -> Result<f64> {
    if panel.p() != dgp.p {
        return Err(Error::DimensionMismatch(format!(
            "panel has {} series, model has {}",
            panel.p(),
            dgp.p
        )));
    }
    let est = estimate_spectrum(panel, bw, kernel, freqs, Some(pairs))?;
    let mut best: f64 = 0.0;
    for (k, &w) in freqs.iter().enumerate() {
        let f = true_spectrum(dgp, w)?;
        for &(i, j) in pairs.pairs() {
            let fhat = est.get(i, j, k).expect("pair estimated");
            best = best.max((fhat - f[(i, j)]).norm_sqr());
        }
    }
    Ok(panel.n() as f64 / bw.l() as f64 * best)
}

fn opt(x: Option<f64>) -> String {
    x.map(format_f64).unwrap_or_default()
}

/// Writes results as CSV with columns
/// `experiment,model,n,p,param,K,c,replications,rate,fdr,power`.
pub fn write_results_csv<W: Write>(results: &[ExperimentResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "experiment",
        "model",
        "n",
        "p",
        "param",
        "K",
        "c",
        "replications",
        "rate",
        "fdr",
        "power",
    ])?;
    for r in results {
        w.write_record([
            r.experiment.to_string(),
            r.model.clone(),
            r.n.to_string(),
            r.p.to_string(),
            format_f64(r.param),
            r.k.to_string(),
            format_f64(r.c),
            r.replications.to_string(),
            opt(r.rate),
            opt(r.fdr),
            opt(r.power),
        ])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::Model;
    use specfreq::{MultiplierConfig, test_statistic};

    fn small(model: Model, a: f64, reps: usize, seed: u64) -> GlobalExperiment {
        GlobalExperiment {
            dgp: DgpSpec::new(model, 80, 4, a).unwrap(),
            pairs: PairSelection::OffDiagonal,
            freqs: FrequencySet::quarterly(),
            alpha: 0.05,
            test: TestConfig {
                multiplier: MultiplierConfig {
                    replicates: 100,
                    ..Default::default()
                },
                ..Default::default()
            },
            reps,
            seed,
        }
    }

    #[test]
    fn zero_reps_rejected() {
        assert!(run_size_experiment(&small(Model::M1, 0.2, 0, 1)).is_err());
    }

    #[test]
    fn truth_is_checked() {
        assert!(run_size_experiment(&small(Model::M4, 0.05, 2, 1)).is_err());
        assert!(run_power_experiment(&small(Model::M1, 0.2, 2, 1)).is_err());
    }

    #[test]
    fn experiments_are_reproducible() {
        let exp = small(Model::M2, 0.4, 6, 3);
        let a = run_size_experiment(&exp).unwrap();
        let b = run_size_experiment(&exp).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.p_values.len(), 6);
        assert!(a.p_values.iter().all(|&v| v > 0.0 && v <= 1.0));
        let rate = a.rate.unwrap();
        assert!((0.0..=1.0).contains(&rate));
    }

    #[test]
    fn block_design_counts() {
        let dgp = DgpSpec::new(Model::M4, 600, 50, 0.04).unwrap();
        let freqs = [-std::f64::consts::PI, 0.0, 1.0, 2.0];
        let hyps = block_hypotheses(&dgp, 10, &freqs).unwrap();
        assert_eq!(hyps.len(), 220);
        assert_eq!(hyps.iter().filter(|h| h.null).count(), 36 * 4);
        assert!(hyps.iter().enumerate().all(|(k, h)| h.spec.id == k as u64));
        let sizes: Vec<usize> = hyps.iter().step_by(4).map(|h| h.spec.pairs.len()).collect();
        assert_eq!(sizes[0], 10);
        assert_eq!(sizes[1], 25);
        let m6 = DgpSpec::new(Model::M6, 600, 50, 0.3).unwrap();
        let hyps = block_hypotheses(&m6, 10, &freqs).unwrap();
        assert_eq!(hyps.iter().filter(|h| h.null).count(), 36 * 4);
    }

    #[test]
    fn centered_statistic_matches_under_null() {
        let dgp = DgpSpec::new(Model::M3, 120, 4, 0.6).unwrap();
        let panel = simulate(&dgp, &mut substream(9, DOMAIN_DATA, 0, 0)).unwrap();
        let pairs = IndexSet::off_diagonal(4).unwrap();
        let grid = FrequencySet::quarterly().grid(120);
        let bw = Bandwidth::new(2).unwrap();
        let kernel = FlatTopKernel::default();
        let centered = centered_statistic(&panel, &dgp, &pairs, &grid, bw, &kernel).unwrap();
        let est = estimate_spectrum(&panel, bw, &kernel, &grid, Some(&pairs)).unwrap();
        let (t, _) = test_statistic(&est, pairs.pairs(), &grid, 120, 2).unwrap();
        assert_eq!(centered, t);

        let diag = IndexSet::diagonal(4).unwrap();
        let c = centered_statistic(&panel, &dgp, &diag, &grid, bw, &kernel).unwrap();
        assert!(c.is_finite());
    }

    #[test]
    fn csv_layout() {
        let r = run_size_experiment(&small(Model::M1, 0.2, 2, 5)).unwrap();
        let mut buf = Vec::new();
        write_results_csv(&[r], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "experiment,model,n,p,param,K,c,replications,rate,fdr,power"
        );
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[0], "size");
        assert_eq!(row[1], "M1");
        assert_eq!(row[5], "4");
        assert_eq!(row[9], "");
    }
}
