//! Frequency sets over which spectra are tested.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Default cap on interval grid size.
pub const MAX_DEFAULT_GRID: usize = 512;

/// A set of frequencies in radians.
///
/// Discrete sets hold `K` distinct frequencies in `[-pi, pi)`. Intervals
/// `[lo, hi]` are evaluated on a uniform grid that includes both endpoints,
/// except that `hi = pi` gives the half-open grid over `[lo, pi)`.
#[derive(Debug, Clone, PartialEq)]
pub enum FrequencySet {
    Discrete(Vec<f64>),
    Interval {
        lo: f64,
        hi: f64,
        /// Grid size; `None` means `min(n, 512)`.
        points: Option<usize>,
    },
}

fn check_in_range(w: f64) -> Result<()> {
    if !w.is_finite() || !(-PI..PI).contains(&w) {
        return Err(Error::InvalidFrequency(format!("{w} is outside [-pi, pi)")));
    }
    Ok(())
}

impl FrequencySet {
    /// Sorts `freqs`, rejecting duplicates and values outside `[-pi, pi)`.
    pub fn discrete(mut freqs: Vec<f64>) -> Result<Self> {
        if freqs.is_empty() {
            return Err(Error::InvalidFrequency("empty frequency set".into()));
        }
        for &w in &freqs {
            check_in_range(w)?;
        }
        freqs.sort_by(f64::total_cmp);
        if freqs.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidFrequency("duplicate frequency".into()));
        }
        Ok(FrequencySet::Discrete(freqs))
    }

    /// A single frequency.
    pub fn single(omega: f64) -> Result<Self> {
        Self::discrete(vec![omega])
    }

    pub fn interval(lo: f64, hi: f64, points: Option<usize>) -> Result<Self> {
        check_in_range(lo)?;
        if !hi.is_finite() || hi > PI || hi <= lo {
            return Err(Error::InvalidFrequency(format!(
                "interval upper bound {hi} must lie in ({lo}, pi]"
            )));
        }
        if let Some(g) = points {
            if g < 2 {
                return Err(Error::InvalidFrequency(format!(
                    "interval grid needs at least 2 points, got {g}"
                )));
            }
        }
        Ok(FrequencySet::Interval { lo, hi, points })
    }

    /// Quarterly seasonal frequencies `{-pi, -pi/2, 0, pi/2}`.
    pub fn quarterly() -> Self {
        FrequencySet::Discrete(vec![-PI, -0.5 * PI, 0.0, 0.5 * PI])
    }

    /// Monthly seasonal frequencies `{-pi, -5pi/6, ..., 5pi/6}`.
    pub fn monthly() -> Self {
        FrequencySet::Discrete(
            (0..12)
                .map(|k| (k as f64 - 6.0) / 6.0 * PI)
                .collect(),
        )
    }

    /// The frequencies actually evaluated for a sample of size `n`.
    pub fn grid(&self, n: usize) -> Vec<f64> {
        match *self {
            FrequencySet::Discrete(ref f) => f.clone(),
            FrequencySet::Interval { lo, hi, points } => {
                let g = points.unwrap_or_else(|| n.clamp(2, MAX_DEFAULT_GRID));
                if hi == PI {
                    let step = (PI - lo) / g as f64;
                    (0..g).map(|k| lo + k as f64 * step).collect()
                } else {
                    let step = (hi - lo) / (g - 1) as f64;
                    (0..g)
                        .map(|k| if k == g - 1 { hi } else { lo + k as f64 * step })
                        .collect()
                }
            }
        }
    }

    /// `M_J`: the number of frequencies for a discrete set, `n` for an
    /// interval.
    pub fn m_j(&self, n: usize) -> usize {
        match self {
            FrequencySet::Discrete(f) => f.len(),
            FrequencySet::Interval { .. } => n,
        }
    }

    pub fn is_interval(&self) -> bool {
        matches!(self, FrequencySet::Interval { .. })
    }
}
