use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use specfreq::{
    Bandwidth, DrawRoute, Differencing, FlatTopKernel, FrequencySet, IndexSet, MultiplierConfig,
    Pair, TestConfig, TimePanel,
};

/// A malformed flag value. Exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage<T>(msg: impl Into<String>) -> anyhow::Result<T> {
    Err(UsageError(msg.into()).into())
}

#[derive(Debug, Parser)]
#[command(name = "specfreq", version, about = "Inference on high-dimensional spectral density matrices")]
pub struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate cross-spectra and write them as CSV.
    Estimate(EstimateArgs),
    /// Run the global test and write a JSON report.
    Test(TestArgs),
    /// Run the FDR procedure over many hypotheses.
    Fdr(FdrArgs),
    /// Run a Monte-Carlo experiment and write a CSV row.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// CSV with one column per series.
    #[arg(long, short)]
    pub input: PathBuf,

    /// The first row holds values, not labels.
    #[arg(long)]
    pub no_header: bool,

    /// `regular`, `seasonal:<period>` or `none`.
    #[arg(long, default_value = "none")]
    pub diff: String,
}

impl InputArgs {
    pub fn load(&self) -> anyhow::Result<TimePanel> {
        let panel = specfreq::load_csv(&self.input, !self.no_header)?;
        Ok(match parse_differencing(&self.diff)? {
            Some(kind) => specfreq::difference(&panel, kind)?,
            None => panel,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RouteArg {
    Auto,
    Time,
    Covariance,
}

impl From<RouteArg> for DrawRoute {
    fn from(r: RouteArg) -> Self {
        match r {
            RouteArg::Auto => DrawRoute::Auto,
            RouteArg::Time => DrawRoute::Time,
            RouteArg::Covariance => DrawRoute::Covariance,
        }
    }
}

#[derive(Debug, Args)]
pub struct TuningArgs {
    /// Frequencies: comma-separated multiples of pi (`0,0.5pi,-pi`),
    /// `quarterly`, `monthly`, or `interval:<lo>:<hi>[:<points>]`.
    #[arg(long, default_value = "quarterly")]
    pub freqs: String,

    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,

    /// Bootstrap replicates B.
    #[arg(long, short = 'B', default_value_t = 1000)]
    pub replicates: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Spectral bandwidth l_n (default: max(round(0.1 ln r), 1)).
    #[arg(long)]
    pub lag: Option<usize>,

    /// Flat-top kernel constant.
    #[arg(long, default_value_t = specfreq::kernel::DEFAULT_FLAT_TOP_C)]
    pub c: f64,

    /// Long-run covariance bandwidth b_n (default: Andrews rule).
    #[arg(long)]
    pub bn: Option<f64>,

    #[arg(long, value_enum, default_value = "auto")]
    pub route: RouteArg,
}

impl TuningArgs {
    pub fn freq_set(&self) -> anyhow::Result<FrequencySet> {
        parse_freqs(&self.freqs)
    }

    pub fn config(&self) -> anyhow::Result<TestConfig> {
        let bandwidth = self.lag.map(Bandwidth::new).transpose()?;
        Ok(TestConfig {
            bandwidth,
            kernel: FlatTopKernel::new(self.c)?,
            b_n: self.bn,
            multiplier: MultiplierConfig {
                replicates: self.replicates,
                seed: self.seed,
                route: self.route.into(),
                ..Default::default()
            },
        })
    }
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub input: InputArgs,

    /// Frequencies, as for `test`.
    #[arg(long, default_value = "quarterly")]
    pub freqs: String,

    /// Pairs to estimate (default: every entry).
    #[arg(long)]
    pub pairs: Option<String>,

    #[arg(long)]
    pub lag: Option<usize>,

    #[arg(long, default_value_t = specfreq::kernel::DEFAULT_FLAT_TOP_C)]
    pub c: f64,

    /// Output CSV (default: stdout).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub input: InputArgs,

    #[command(flatten)]
    pub tuning: TuningArgs,

    /// `offdiag`, `diagonal`, `i:j,k:m` (1-based), `batch:<A>` or
    /// `batch:<A>:<B>`.
    #[arg(long, default_value = "offdiag")]
    pub pairs: String,

    /// Separator between batch prefix and series name in labels.
    #[arg(long, default_value = "_")]
    pub batch_sep: String,

    /// Output JSON (default: stdout).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FdrMode {
    /// One hypothesis per off-diagonal pair.
    Pairs,
    /// One hypothesis per auto-spectrum.
    Diagonal,
    /// One hypothesis per pair of label batches.
    Batches,
}

#[derive(Debug, Args)]
pub struct FdrArgs {
    #[command(flatten)]
    pub input: InputArgs,

    #[command(flatten)]
    pub tuning: TuningArgs,

    #[arg(long, value_enum, default_value = "pairs")]
    pub mode: FdrMode,

    #[arg(long, default_value = "_")]
    pub batch_sep: String,

    /// Per-hypothesis CSV (default: stdout).
    #[arg(long, short)]
    pub output: Option<PathBuf>,

    /// Full JSON report.
    #[arg(long)]
    pub report: Option<PathBuf>,

    /// Square p-value matrix CSV, batches mode only.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExperimentArg {
    Size,
    Power,
    Fdr,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub experiment: ExperimentArg,

    /// `m1` to `m6`.
    #[arg(long)]
    pub model: String,

    #[arg(long, short = 'n', default_value_t = 300)]
    pub n: usize,

    #[arg(long, short = 'p', default_value_t = 50)]
    pub p: usize,

    /// Model parameter a (default: the model's first tabulated value).
    #[arg(long)]
    pub param: Option<f64>,

    #[arg(long, default_value_t = specfreq_sim::DEFAULT_BURN_IN)]
    pub burn_in: usize,

    #[arg(long, default_value_t = 1000)]
    pub reps: usize,

    /// Pairs for size and power runs: `offdiag` or `diagonal`.
    #[arg(long, default_value = "offdiag")]
    pub pairs: String,

    /// Number of blocks in the FDR design.
    #[arg(long, default_value_t = 10)]
    pub blocks: usize,

    #[command(flatten)]
    pub tuning: TuningArgs,

    /// Output CSV (default: stdout).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

pub fn parse_differencing(s: &str) -> anyhow::Result<Option<Differencing>> {
    let t = s.trim().to_ascii_lowercase();
    if t == "none" {
        return Ok(None);
    }
    if t == "regular" {
        return Ok(Some(Differencing::Regular));
    }
    if let Some(period) = t.strip_prefix("seasonal:") {
        return match period.parse() {
            Ok(period) => Ok(Some(Differencing::Seasonal { period })),
            Err(_) => usage(format!("bad seasonal period {period:?}")),
        };
    }
    usage(format!("bad differencing {s:?}; use none, regular or seasonal:<period>"))
}

/// `0`, `<x>pi` or `-pi`, in radians.
pub fn parse_freq_token(tok: &str) -> anyhow::Result<f64> {
    let t = tok.trim().to_ascii_lowercase();
    if let Some(coef) = t.strip_suffix("pi") {
        let x = match coef {
            "" | "+" => 1.0,
            "-" => -1.0,
            c => match c.parse::<f64>() {
                Ok(x) => x,
                Err(_) => return usage(format!("bad frequency {tok:?}")),
            },
        };
        return Ok(x * PI);
    }
    match t.parse::<f64>() {
        Ok(0.0) => Ok(0.0),
        Ok(_) => usage(format!(
            "frequency {tok:?} must be written as a multiple of pi, e.g. 0.5pi"
        )),
        Err(_) => usage(format!("bad frequency {tok:?}")),
    }
}

pub fn parse_freqs(s: &str) -> anyhow::Result<FrequencySet> {
    let t = s.trim().to_ascii_lowercase();
    match t.as_str() {
        "quarterly" => return Ok(FrequencySet::quarterly()),
        "monthly" => return Ok(FrequencySet::monthly()),
        _ => {}
    }
    if let Some(rest) = t.strip_prefix("interval:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if !(2..=3).contains(&parts.len()) {
            return usage(format!("bad interval {s:?}; use interval:<lo>:<hi>[:<points>]"));
        }
        let lo = parse_freq_token(parts[0])?;
        let hi = parse_freq_token(parts[1])?;
        let points = match parts.get(2) {
            Some(g) => match g.parse() {
                Ok(g) => Some(g),
                Err(_) => return usage(format!("bad grid size {g:?}")),
            },
            None => None,
        };
        return Ok(FrequencySet::interval(lo, hi, points)?);
    }
    let freqs = t
        .split(',')
        .map(parse_freq_token)
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok(FrequencySet::discrete(freqs)?)
}

/// Groups series by the label part before `sep`, in order of first
/// appearance.
pub fn batches(panel: &TimePanel, sep: &str) -> Vec<(String, Vec<usize>)> {
    let mut order: Vec<String> = Vec::new();
    let mut members: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (j, label) in panel.labels().iter().enumerate() {
        let key = match label.split_once(sep) {
            Some((prefix, _)) if !sep.is_empty() => prefix.to_string(),
            _ => label.clone(),
        };
        if !members.contains_key(&key) {
            order.push(key.clone());
        }
        members.entry(key).or_default().push(j);
    }
    order
        .into_iter()
        .map(|k| {
            let m = members.remove(&k).unwrap_or_default();
            (k, m)
        })
        .collect()
}

fn find_batch<'a>(all: &'a [(String, Vec<usize>)], name: &str) -> anyhow::Result<&'a [usize]> {
    match all.iter().find(|(k, _)| k == name) {
        Some((_, m)) => Ok(m),
        None => usage(format!("no batch named {name:?}")),
    }
}

pub fn parse_pairs(s: &str, panel: &TimePanel, sep: &str) -> anyhow::Result<IndexSet> {
    let p = panel.p();
    let t = s.trim();
    match t.to_ascii_lowercase().as_str() {
        "offdiag" | "off-diagonal" => return Ok(IndexSet::off_diagonal(p)?),
        "diagonal" | "diag" => return Ok(IndexSet::diagonal(p)?),
        _ => {}
    }
    if let Some(rest) = t.strip_prefix("batch:") {
        let all = batches(panel, sep);
        return match rest.split_once(':') {
            None => Ok(IndexSet::within(find_batch(&all, rest)?, p)?),
            Some((a, b)) => Ok(IndexSet::cross(find_batch(&all, a)?, find_batch(&all, b)?, p)?),
        };
    }
    let mut pairs: Vec<Pair> = Vec::new();
    for tok in t.split(',') {
        let Some((i, j)) = tok.trim().split_once(':') else {
            return usage(format!("bad pair {tok:?}; use i:j with 1-based indices"));
        };
        let (Ok(i), Ok(j)) = (i.trim().parse::<usize>(), j.trim().parse::<usize>()) else {
            return usage(format!("bad pair {tok:?}"));
        };
        if i == 0 || j == 0 {
            return usage(format!("pair {tok:?}: indices are 1-based"));
        }
        pairs.push((i - 1, j - 1));
    }
    Ok(IndexSet::new(pairs, p)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frequency_tokens() {
        assert_eq!(parse_freq_token("0").unwrap(), 0.0);
        assert_eq!(parse_freq_token("0.5pi").unwrap(), 0.5 * PI);
        assert_eq!(parse_freq_token("-pi").unwrap(), -PI);
        assert!(parse_freq_token("1.2").is_err());
        assert!(parse_freq_token("xpi").is_err());
        assert_eq!(parse_freqs("quarterly").unwrap(), FrequencySet::quarterly());
        assert_eq!(
            parse_freqs("0.5pi,0").unwrap(),
            FrequencySet::Discrete(vec![0.0, 0.5 * PI])
        );
        assert_eq!(
            parse_freqs("interval:0:pi:8").unwrap(),
            FrequencySet::Interval { lo: 0.0, hi: PI, points: Some(8) }
        );
        assert!(parse_freqs("pi").is_err());
        assert!(parse_freqs("interval:0").is_err());
    }

    #[test]
    fn pair_specs() {
        let panel = TimePanel::from_columns(
            &[vec![1.0, 2.0, 0.0], vec![0.5, 1.0, 3.0], vec![2.0, 1.0, 1.0]],
            Some(vec!["a_x".into(), "b_y".into(), "a_z".into()]),
        )
        .unwrap();
        assert_eq!(parse_pairs("2:1,3:1", &panel, "_").unwrap().pairs(), &[(1, 0), (2, 0)]);
        assert_eq!(parse_pairs("batch:a", &panel, "_").unwrap().pairs(), &[(2, 0)]);
        assert_eq!(parse_pairs("batch:b:a", &panel, "_").unwrap().pairs(), &[(1, 0), (1, 2)]);
        assert!(parse_pairs("batch:c", &panel, "_").is_err());
        assert!(parse_pairs("0:1", &panel, "_").is_err());
        assert_eq!(parse_pairs("diagonal", &panel, "_").unwrap().len(), 3);
        let b = batches(&panel, "_");
        assert_eq!(b, vec![("a".to_string(), vec![0, 2]), ("b".to_string(), vec![1])]);
    }

    #[test]
    fn differencing_specs() {
        assert_eq!(parse_differencing("none").unwrap(), None);
        assert_eq!(
            parse_differencing("seasonal:4").unwrap(),
            Some(Differencing::Seasonal { period: 4 })
        );
        assert!(parse_differencing("yearly").is_err());
    }
}
