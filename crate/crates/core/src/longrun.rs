//! Lag-product panels and their Quadratic-Spectral long-run covariance.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;

use crate::autocov::AutocovSet;
use crate::error::{Error, Result};
use crate::index::IndexSet;
use crate::kernel::qs_weight;
use crate::panel::TimePanel;
use crate::spectral::Bandwidth;

/// Floor on the automatic bandwidth.
pub const MIN_BANDWIDTH: f64 = 1.0;

/// Bound applied to AR(1) coefficients inside the bandwidth rule.
pub const RHO_CLIP: f64 = 0.97;

/// The `ñ x r(2 l_n + 1)` matrix whose row `t` is `ĉ_t`.
///
/// Block `ℓ` of a row occupies columns `ℓ(2 l_n + 1)..(ℓ + 1)(2 l_n + 1)`, in
/// the order of the pairs in the index set.
#[derive(Debug, Clone)]
pub struct LagPanel {
    rows: DMatrix<f64>,
    width: usize,
    n: usize,
}

impl LagPanel {
    /// Wraps a precomputed matrix with blocks of `width` columns. `n` is the
    /// sample size of the panel the rows came from.
    pub fn from_matrix(rows: DMatrix<f64>, width: usize, n: usize) -> Result<Self> {
        if width == 0 || !rows.ncols().is_multiple_of(width) || rows.ncols() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "{} columns do not split into blocks of {width}",
                rows.ncols()
            )));
        }
        if rows.nrows() == 0 {
            return Err(Error::EmptyInput);
        }
        Ok(Self { rows, width, n })
    }

    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    /// `ñ`.
    pub fn n_tilde(&self) -> usize {
        self.rows.nrows()
    }

    /// `d = r (2 l_n + 1)`.
    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    /// Block width `2 l_n + 1`.
    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of pairs `r`.
    pub fn blocks(&self) -> usize {
        self.dim() / self.width
    }

    /// Sample size of the originating panel.
    pub fn n(&self) -> usize {
        self.n
    }
}

/// Builds `ĉ_{ℓ,t}[m] = (2 pi)^{-1} {x̊_{i,t+m} x̊_{j,t+l_n} - γ̂_{ij}(m - l_n)}`
/// for `m = 0..=2 l_n`, with `(i, j)` the `ℓ`-th pair.
pub fn build_lag_panel(panel: &TimePanel, pairs: &IndexSet, bw: Bandwidth) -> Result<LagPanel> {
    bw.check(panel.n())?;
    if pairs.p() != panel.p() {
        return Err(Error::DimensionMismatch(format!(
            "index set built for p = {}, panel has p = {}",
            pairs.p(),
            panel.p()
        )));
    }
    let x = panel.centered();
    let acov = AutocovSet::from_centered(&x, bw.l())?;
    build_from_centered(&x, &acov, pairs, bw)
}

pub(crate) fn build_from_centered(
    x: &DMatrix<f64>,
    acov: &AutocovSet,
    pairs: &IndexSet,
    bw: Bandwidth,
) -> Result<LagPanel> {
    let l = bw.l();
    let w = bw.width();
    let n = x.nrows();
    let nt = bw.n_tilde(n);
    let inv = 1.0 / (2.0 * PI);
    let mut rows = DMatrix::zeros(nt, pairs.len() * w);
    for (ell, &(i, j)) in pairs.pairs().iter().enumerate() {
        let xi = x.column(i);
        let xj = x.column(j);
        for m in 0..w {
            let g = acov.gamma(i, j, m as isize - l as isize);
            let mut col = rows.column_mut(ell * w + m);
            for t in 0..nt {
                col[t] = inv * (xi[t + m] * xj[t + l] - g);
            }
        }
    }
    LagPanel::from_matrix(rows, w, n)
}

/// `b_n = max(1.3221 (â ñ)^{1/5}, 1)` from per-column AR(1) fits.
pub fn andrews_bandwidth(lp: &LagPanel) -> Result<f64> {
    let nt = lp.n_tilde();
    if nt < 3 {
        return Err(Error::InsufficientLength {
            needed: 2,
            got: nt,
        });
    }
    let fits: Vec<(f64, f64)> = lp
        .rows()
        .column_iter()
        .filter_map(|c| ar1_fit(c.as_slice()))
        .collect();
    Ok(andrews_from_fits(&fits, nt))
}

/// Least-squares AR(1) fit without intercept; `None` for a column whose
/// lagged values are all zero.
fn ar1_fit(c: &[f64]) -> Option<(f64, f64)> {
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for t in 1..c.len() {
        sxy += c[t] * c[t - 1];
        sxx += c[t - 1] * c[t - 1];
    }
    if sxx == 0.0 {
        return None;
    }
    let rho = sxy / sxx;
    let rss: f64 = (1..c.len()).map(|t| (c[t] - rho * c[t - 1]).powi(2)).sum();
    Some((rho, rss / (c.len() - 1) as f64))
}

/// The bandwidth rule applied to `(ρ̂, σ̂²)` pairs.
pub fn andrews_from_fits(fits: &[(f64, f64)], n_tilde: usize) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for &(rho, s2) in fits {
        let rho = rho.clamp(-RHO_CLIP, RHO_CLIP);
        let s4 = s2 * s2;
        let q = 1.0 - rho;
        num += 4.0 * rho * rho * s4 / q.powi(8);
        den += s4 / q.powi(4);
    }
    let a = if den > 0.0 { num / den } else { 0.0 };
    (1.3221 * (a * n_tilde as f64).powf(0.2)).max(MIN_BANDWIDTH)
}

/// `Θ` with entries `K_QS((t - s) / b_n)`.
pub fn theta_matrix(n_tilde: usize, b_n: f64) -> DMatrix<f64> {
    let row: Vec<f64> = (0..n_tilde).map(|k| qs_weight(k as f64 / b_n)).collect();
    DMatrix::from_fn(n_tilde, n_tilde, |t, s| row[t.abs_diff(s)])
}

/// The estimate `Ξ̂` and the bandwidth it was computed with.
#[derive(Debug, Clone)]
pub struct LongRunCov {
    matrix: DMatrix<f64>,
    b_n: f64,
}

impl LongRunCov {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn bandwidth(&self) -> f64 {
        self.b_n
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    /// Writes `row,col,value` (1-based) for every entry.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["row", "col", "value"])?;
        for j in 0..self.matrix.ncols() {
            for i in 0..self.matrix.nrows() {
                w.write_record([
                    (i + 1).to_string(),
                    (j + 1).to_string(),
                    crate::format_f64(self.matrix[(i, j)]),
                ])?;
            }
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// `Ξ̂ = Σ_q K_QS(q / b_n) Π̂(q)` over every lag `|q| < ñ`, evaluated as
/// `ñ^{-1} Cᵀ Θ C`.
pub fn estimate_longrun(lp: &LagPanel, b_n: f64) -> Result<LongRunCov> {
    if !(b_n > 0.0 && b_n.is_finite()) {
        return Err(Error::InvalidBandwidth(format!(
            "b_n must be positive, got {b_n}"
        )));
    }
    let c = lp.rows();
    let nt = lp.n_tilde();
    let theta_c = theta_matrix(nt, b_n) * c;
    let mut xi = DMatrix::zeros(lp.dim(), lp.dim());
    xi.gemm_tr(1.0 / nt as f64, c, &theta_c, 0.0);
    symmetrize(&mut xi);
    Ok(LongRunCov { matrix: xi, b_n })
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let d = m.nrows();
    for j in 0..d {
        for i in j + 1..d {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}
