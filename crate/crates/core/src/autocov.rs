//! Sample autocovariance matrices.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::panel::TimePanel;

/// Sample autocovariances `Γ̂(k)` for `k = -L..=L`, divisor `n` at every lag.
///
/// Only non-negative lags are stored; `Γ̂(-k)` is read as the transpose of
/// `Γ̂(k)`, which is what the negative-lag sum evaluates to term by term.
#[derive(Debug, Clone)]
pub struct AutocovSet {
    max_lag: usize,
    n: usize,
    positive: Vec<DMatrix<f64>>,
}

impl AutocovSet {
    /// Computes `Γ̂(k)` from an already centered `n x p` panel.
    pub fn from_centered(centered: &DMatrix<f64>, max_lag: usize) -> Result<Self> {
        let n = centered.nrows();
        let p = centered.ncols();
        if max_lag >= n {
            return Err(Error::InvalidParameter(format!(
                "max lag {max_lag} must be below n = {n}"
            )));
        }
        let inv_n = 1.0 / n as f64;
        let positive = (0..=max_lag)
            .map(|k| {
                let lead = centered.rows(k, n - k);
                let base = centered.rows(0, n - k);
                let mut g = DMatrix::zeros(p, p);
                // Γ̂(k)_{ij} = n^{-1} Σ_t x̊_{i,t+k} x̊_{j,t}
                g.gemm_tr(inv_n, &lead, &base, 0.0);
                g
            })
            .collect();
        Ok(Self {
            max_lag,
            n,
            positive,
        })
    }

    pub fn max_lag(&self) -> usize {
        self.max_lag
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.positive[0].nrows()
    }

    /// `γ̂_{i,j}(k)` for `|k| <= L`.
    #[inline]
    pub fn gamma(&self, i: usize, j: usize, k: isize) -> f64 {
        if k >= 0 {
            self.positive[k as usize][(i, j)]
        } else {
            self.positive[k.unsigned_abs()][(j, i)]
        }
    }

    /// The full matrix `Γ̂(k)`.
    pub fn matrix(&self, k: isize) -> DMatrix<f64> {
        if k >= 0 {
            self.positive[k as usize].clone()
        } else {
            self.positive[k.unsigned_abs()].transpose()
        }
    }

    pub fn lags(&self) -> std::ops::RangeInclusive<isize> {
        -(self.max_lag as isize)..=self.max_lag as isize
    }
}

/// `Γ̂(k)` for `k = -L..=L` of a panel.
pub fn autocov(panel: &TimePanel, max_lag: usize) -> Result<AutocovSet> {
    if max_lag >= panel.n() {
        return Err(Error::InvalidParameter(format!(
            "max lag {max_lag} must be below n = {}",
            panel.n()
        )));
    }
    AutocovSet::from_centered(&panel.centered(), max_lag)
}
