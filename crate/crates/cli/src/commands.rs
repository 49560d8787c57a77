use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use log::{info, warn};
use serde::Serialize;

use specfreq::{
    estimate_spectrum, fdr::normal_score, fdr_procedure, format_f64, global_test, FdrReport,
    FlatTopKernel, FrequencySet, GlobalTestReport, HypothesisResult, HypothesisSpec, IndexSet,
    TestConfig, TimePanel,
};
use specfreq_sim::{
    run_fdr_experiment, run_power_experiment, run_size_experiment, write_results_csv, DgpSpec,
    FdrExperiment, GlobalExperiment, Model, PairSelection,
};

use crate::args::{
    batches, parse_freqs, parse_pairs, EstimateArgs, ExperimentArg, FdrArgs, FdrMode,
    SimulateArgs, TestArgs, UsageError,
};

pub const SCHEMA: &str = "specfreq/1";

fn sink(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> anyhow::Result<()> {
    let mut out = sink(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

pub fn estimate(args: &EstimateArgs) -> anyhow::Result<()> {
    let freqs = parse_freqs(&args.freqs)?;
    let panel = args.input.load()?;
    let pairs = args
        .pairs
        .as_deref()
        .map(|s| parse_pairs(s, &panel, "_"))
        .transpose()?;
    let r = pairs.as_ref().map_or(panel.p() * panel.p(), IndexSet::len);
    let bw = match args.lag {
        Some(l) => specfreq::Bandwidth::new(l)?,
        None => specfreq::default_bandwidth(r),
    };
    let kernel = FlatTopKernel::new(args.c)?;
    let grid = freqs.grid(panel.n());
    let est = estimate_spectrum(&panel, bw, &kernel, &grid, pairs.as_ref())?;
    let mut out = sink(args.output.as_deref())?;
    est.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct TestOutput<'a> {
    schema: &'static str,
    command: &'static str,
    #[serde(flatten)]
    report: &'a GlobalTestReport,
    arg_max_labels: [&'a str; 2],
}

pub fn test(args: &TestArgs) -> anyhow::Result<()> {
    let freqs = args.tuning.freq_set()?;
    let cfg = args.tuning.config()?;
    let panel = args.input.load()?;
    let pairs = parse_pairs(&args.pairs, &panel, &args.batch_sep)?;
    info!("testing {} pairs of {} series, n = {}", pairs.len(), panel.p(), panel.n());
    let report = global_test(&panel, &pairs, &freqs, args.tuning.alpha, &cfg)?;
    let labels = panel.labels();
    write_json(
        &TestOutput {
            schema: SCHEMA,
            command: "test",
            report: &report,
            arg_max_labels: [&labels[report.arg_max.i], &labels[report.arg_max.j]],
        },
        args.output.as_deref(),
    )
}

struct Hypothesis {
    name: String,
    spec: HypothesisSpec,
    /// Batch indices `(row, col)` in batches mode.
    cell: Option<(usize, usize)>,
}

fn build_hypotheses(
    panel: &TimePanel,
    mode: FdrMode,
    sep: &str,
    freqs: &FrequencySet,
) -> anyhow::Result<(Vec<Hypothesis>, Vec<String>)> {
    let p = panel.p();
    let labels = panel.labels();
    let mut out: Vec<Hypothesis> = Vec::new();
    let mut push = |name: String, pairs: IndexSet, cell| {
        let id = out.len() as u64;
        out.push(Hypothesis {
            name,
            spec: HypothesisSpec {
                id,
                pairs,
                freqs: freqs.clone(),
            },
            cell,
        });
    };
    let mut names = Vec::new();
    match mode {
        FdrMode::Pairs => {
            for &(i, j) in IndexSet::off_diagonal(p)?.pairs() {
                push(format!("{}~{}", labels[i], labels[j]), IndexSet::new(vec![(i, j)], p)?, None);
            }
        }
        FdrMode::Diagonal => {
            for (i, label) in labels.iter().enumerate() {
                push(label.clone(), IndexSet::new(vec![(i, i)], p)?, None);
            }
        }
        FdrMode::Batches => {
            let groups = batches(panel, sep);
            for (a, (name_a, ga)) in groups.iter().enumerate() {
                for (b, (name_b, gb)) in groups.iter().enumerate().take(a + 1) {
                    if a == b {
                        if ga.len() < 2 {
                            warn!("batch {name_a:?} has one series; no within-batch hypothesis");
                            continue;
                        }
                        push(name_a.clone(), IndexSet::within(ga, p)?, Some((a, b)));
                    } else {
                        push(format!("{name_a}~{name_b}"), IndexSet::cross(ga, gb, p)?, Some((a, b)));
                    }
                }
            }
            names = groups.into_iter().map(|g| g.0).collect();
        }
    }
    Ok((out, names))
}

/// A single hypothesis is the global test itself.
fn single_report(panel: &TimePanel, hyp: &HypothesisSpec, alpha: f64, cfg: &TestConfig) -> anyhow::Result<FdrReport> {
    let mut cfg = cfg.clone();
    cfg.multiplier.stream = hyp.id;
    let r = global_test(panel, &hyp.pairs, &hyp.freqs, alpha, &cfg)?;
    Ok(FdrReport {
        hypotheses: vec![HypothesisResult {
            id: hyp.id,
            statistic: r.statistic,
            p_value: r.p_value,
            v: normal_score(r.p_value, r.replicates),
            rejected: r.reject,
            l_n: r.l_n,
            b_n: r.b_n,
            arg_max: r.arg_max,
        }],
        t_hat: f64::NAN,
        fallback_used: false,
        alpha,
        replicates: r.replicates,
        seed: cfg.multiplier.seed,
    })
}

#[derive(Serialize)]
struct FdrOutput<'a> {
    schema: &'static str,
    command: &'static str,
    q: usize,
    #[serde(flatten)]
    report: &'a FdrReport,
    names: Vec<&'a str>,
}

pub fn fdr(args: &FdrArgs) -> anyhow::Result<()> {
    let freqs = args.tuning.freq_set()?;
    let cfg = args.tuning.config()?;
    if args.matrix.is_some() && args.mode != FdrMode::Batches {
        return Err(UsageError("--matrix needs --mode batches".into()).into());
    }
    let panel = args.input.load()?;
    let (hyps, batch_names) = build_hypotheses(&panel, args.mode, &args.batch_sep, &freqs)?;
    if hyps.is_empty() {
        return Err(UsageError("no hypotheses to test".into()).into());
    }
    info!("running {} hypotheses", hyps.len());
    let specs: Vec<HypothesisSpec> = hyps.iter().map(|h| h.spec.clone()).collect();
    let report = if specs.len() == 1 {
        single_report(&panel, &specs[0], args.tuning.alpha, &cfg)?
    } else {
        fdr_procedure(&panel, &specs, args.tuning.alpha, &cfg)?
    };

    let mut out = csv::Writer::from_writer(sink(args.output.as_deref())?);
    out.write_record([
        "id", "hypothesis", "statistic", "p_value", "v", "t_hat", "rejected", "l_n", "b_n",
    ])?;
    for (h, r) in hyps.iter().zip(&report.hypotheses) {
        out.write_record([
            r.id.to_string(),
            h.name.clone(),
            format_f64(r.statistic),
            format_f64(r.p_value),
            format_f64(r.v),
            if report.t_hat.is_nan() { String::new() } else { format_f64(report.t_hat) },
            r.rejected.to_string(),
            r.l_n.to_string(),
            format_f64(r.b_n),
        ])?;
    }
    out.flush()?;

    if let Some(path) = &args.report {
        write_json(
            &FdrOutput {
                schema: SCHEMA,
                command: "fdr",
                q: hyps.len(),
                report: &report,
                names: hyps.iter().map(|h| h.name.as_str()).collect(),
            },
            Some(path),
        )?;
    }
    if let Some(path) = &args.matrix {
        let m = batch_names.len();
        let mut pv = vec![vec![None; m]; m];
        let mut star = vec![vec![false; m]; m];
        for (h, r) in hyps.iter().zip(&report.hypotheses) {
            if let Some((a, b)) = h.cell {
                pv[a][b] = Some(r.p_value);
                pv[b][a] = Some(r.p_value);
                star[a][b] = r.rejected;
                star[b][a] = r.rejected;
            }
        }
        let mut w = csv::Writer::from_writer(sink(Some(path))?);
        let mut header = vec!["batch".to_string()];
        header.extend(batch_names.iter().cloned());
        header.extend(batch_names.iter().map(|b| format!("star:{b}")));
        w.write_record(&header)?;
        for a in 0..m {
            let mut row = vec![batch_names[a].clone()];
            row.extend(pv[a].iter().map(|v| v.map(format_f64).unwrap_or_default()));
            row.extend(star[a].iter().map(|&s| if s { "*".to_string() } else { String::new() }));
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    Ok(())
}

pub fn simulate(args: &SimulateArgs) -> anyhow::Result<()> {
    let model: Model = args.model.parse()?;
    let a = args.param.unwrap_or(model.paper_parameters()[0]);
    let dgp = DgpSpec::new(model, args.n, args.p, a)?.with_burn_in(args.burn_in);
    if !dgp.is_paper_setting() {
        warn!("parameter {a} is not one of the tabulated values for {model}; custom setting");
    }
    let freqs = args.tuning.freq_set()?;
    let test = args.tuning.config()?;
    let result = match args.experiment {
        ExperimentArg::Size | ExperimentArg::Power => {
            let pairs = match args.pairs.trim().to_ascii_lowercase().as_str() {
                "offdiag" | "off-diagonal" => PairSelection::OffDiagonal,
                "diagonal" | "diag" => PairSelection::Diagonal,
                other => {
                    return Err(UsageError(format!(
                        "simulate --pairs must be offdiag or diagonal, got {other:?}"
                    ))
                    .into())
                }
            };
            let exp = GlobalExperiment {
                dgp,
                pairs,
                freqs,
                alpha: args.tuning.alpha,
                test,
                reps: args.reps,
                seed: args.tuning.seed,
            };
            if args.experiment == ExperimentArg::Size {
                run_size_experiment(&exp)?
            } else {
                run_power_experiment(&exp)?
            }
        }
        ExperimentArg::Fdr => {
            let FrequencySet::Discrete(freqs) = freqs else {
                return Err(UsageError("the FDR design needs a discrete frequency set".into()).into());
            };
            run_fdr_experiment(&FdrExperiment {
                dgp,
                blocks: args.blocks,
                freqs,
                alpha: args.tuning.alpha,
                test,
                reps: args.reps,
                seed: args.tuning.seed,
            })?
        }
    };
    let mut out = sink(args.output.as_deref())?;
    write_results_csv(&[result], &mut out)?;
    out.flush()?;
    Ok(())
}
