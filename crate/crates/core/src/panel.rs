//! Observation panels: ingestion, validation and preprocessing.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Smallest admissible sample size.
pub const MIN_OBSERVATIONS: usize = 3;

/// An `n x p` panel of real observations: rows are time points, columns are
/// series.
#[derive(Debug, Clone, PartialEq)]
pub struct TimePanel {
    values: DMatrix<f64>,
    labels: Vec<String>,
}

impl TimePanel {
    /// Builds a panel from a matrix, generating labels `s1..sp` when none are
    /// given.
    pub fn new(values: DMatrix<f64>, labels: Option<Vec<String>>) -> Result<Self> {
        Self::build(values, labels, MIN_OBSERVATIONS)
    }

    fn build(values: DMatrix<f64>, labels: Option<Vec<String>>, min_n: usize) -> Result<Self> {
        let (n, p) = values.shape();
        if n == 0 || p == 0 {
            return Err(Error::EmptyInput);
        }
        if n < min_n {
            return Err(Error::InsufficientLength {
                needed: min_n - 1,
                got: n,
            });
        }
        for col in 0..p {
            for row in 0..n {
                if !values[(row, col)].is_finite() {
                    return Err(Error::NonFiniteValue { row, col });
                }
            }
        }
        let labels = match labels {
            Some(labels) if labels.len() != p => {
                return Err(Error::DimensionMismatch(format!(
                    "{} labels for {} series",
                    labels.len(),
                    p
                )))
            }
            Some(labels) => labels,
            None => (1..=p).map(|i| format!("s{i}")).collect(),
        };
        Ok(Self { values, labels })
    }

    /// Builds a panel from per-series columns.
    pub fn from_columns(columns: &[Vec<f64>], labels: Option<Vec<String>>) -> Result<Self> {
        let p = columns.len();
        if p == 0 {
            return Err(Error::EmptyInput);
        }
        let n = columns[0].len();
        if let Some(bad) = columns.iter().position(|c| c.len() != n) {
            return Err(Error::DimensionMismatch(format!(
                "series {} has {} observations, expected {}",
                bad + 1,
                columns[bad].len(),
                n
            )));
        }
        let values = DMatrix::from_fn(n, p, |t, j| columns[j][t]);
        Self::new(values, labels)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.column(j).iter().copied().collect()
    }

    /// Column means `x̄`.
    pub fn mean(&self) -> DVector<f64> {
        let n = self.n() as f64;
        DVector::from_iterator(
            self.p(),
            self.values.column_iter().map(|c| c.iter().sum::<f64>() / n),
        )
    }

    /// The panel with each column's sample mean removed.
    pub fn centered(&self) -> DMatrix<f64> {
        let mean = self.mean();
        let mut out = self.values.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            let m = mean[j];
            col.iter_mut().for_each(|v| *v -= m);
        }
        out
    }

    /// Multiplies every observation by `s`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(&self.values * s, Some(self.labels.clone()))
    }

    /// Keeps only the listed series, in the given order.
    pub fn select(&self, series: &[usize]) -> Result<Self> {
        if let Some(&bad) = series.iter().find(|&&j| j >= self.p()) {
            return Err(Error::InvalidIndexSet(format!(
                "series {} out of range 1..={}",
                bad + 1,
                self.p()
            )));
        }
        let values = DMatrix::from_fn(self.n(), series.len(), |t, k| self.values[(t, series[k])]);
        let labels = series.iter().map(|&j| self.labels[j].clone()).collect();
        Self::new(values, Some(labels))
    }
}

/// Differencing applied before analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Differencing {
    /// `y_t = x_{t+1} - x_t`.
    Regular,
    /// `y_t = x_{t+period} - x_t`, with `period >= 2`.
    Seasonal { period: usize },
}

impl Differencing {
    pub fn lag(&self) -> usize {
        match *self {
            Differencing::Regular => 1,
            Differencing::Seasonal { period } => period,
        }
    }
}

/// Applies regular or seasonal differencing; the result has `n - lag` rows,
/// which may be fewer than [`MIN_OBSERVATIONS`].
pub fn difference(panel: &TimePanel, kind: Differencing) -> Result<TimePanel> {
    if let Differencing::Seasonal { period } = kind {
        if period < 2 {
            return Err(Error::InvalidParameter(format!(
                "seasonal period must be at least 2, got {period}"
            )));
        }
    }
    let lag = kind.lag();
    let n = panel.n();
    if n <= lag {
        return Err(Error::InsufficientLength { needed: lag, got: n });
    }
    let x = panel.values();
    let values = DMatrix::from_fn(n - lag, panel.p(), |t, j| x[(t + lag, j)] - x[(t, j)]);
    TimePanel::build(values, Some(panel.labels().to_vec()), 1)
}

/// Reads a comma-separated panel: one column per series, one row per time
/// point, optional header row with series labels.
pub fn load_csv(path: impl AsRef<Path>, has_header: bool) -> Result<TimePanel> {
    let path = path.as_ref();
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
    parse_csv(&text, has_header)
}

/// Parses the body of a panel CSV held in memory.
pub fn parse_csv(text: &str, has_header: bool) -> Result<TimePanel> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut labels: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;

    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let line = idx + 1;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::RaggedRow {
                    line,
                    found: record.len(),
                    expected: w,
                })
            }
            Some(_) => {}
        }
        if has_header && labels.is_none() {
            labels = Some(record.iter().map(str::to_string).collect());
            continue;
        }
        let row_index = rows.len();
        let mut row = Vec::with_capacity(record.len());
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::NonNumeric {
                line,
                col: col + 1,
                token: field.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFiniteValue { row: row_index, col });
            }
            row.push(v);
        }
        rows.push(row);
    }

    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    let p = rows[0].len();
    let values = DMatrix::from_fn(rows.len(), p, |t, j| rows[t][j]);
    TimePanel::new(values, labels)
}
