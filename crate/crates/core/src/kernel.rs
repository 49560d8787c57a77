//! Lag-window and HAC kernels.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Default flat-top plateau width.
pub const DEFAULT_FLAT_TOP_C: f64 = 0.5;

/// The flat-top lag window: `1` on `[-c, c]`, linear down to `0` at `|u| = 1`,
/// zero beyond.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatTopKernel {
    c: f64,
}

impl FlatTopKernel {
    pub fn new(c: f64) -> Result<Self> {
        if !(c > 0.0 && c <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "flat-top constant c must lie in (0, 1], got {c}"
            )));
        }
        Ok(Self { c })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn weight(&self, u: f64) -> f64 {
        let a = u.abs();
        if a <= self.c {
            1.0
        } else if a <= 1.0 {
            (a - 1.0) / (self.c - 1.0)
        } else {
            0.0
        }
    }

    /// `W(k / l)` for `k = -l..=l`.
    pub fn lag_weights(&self, l: usize) -> Vec<f64> {
        let lf = l as f64;
        (-(l as isize)..=l as isize)
            .map(|k| self.weight(k as f64 / lf))
            .collect()
    }
}

impl Default for FlatTopKernel {
    fn default() -> Self {
        Self {
            c: DEFAULT_FLAT_TOP_C,
        }
    }
}

pub fn flat_top_weight(kernel: &FlatTopKernel, u: f64) -> f64 {
    kernel.weight(u)
}

/// Below this `|u|` the Quadratic-Spectral kernel is evaluated from its
/// Taylor series.
const QS_SERIES_CUTOFF: f64 = 1e-4;

/// The Quadratic-Spectral kernel
/// `K(u) = 25/(12 pi^2 u^2) { sin(6 pi u/5)/(6 pi u/5) - cos(6 pi u/5) }`.
pub fn qs_weight(u: f64) -> f64 {
    let x = 6.0 * PI * u / 5.0;
    if u.abs() < QS_SERIES_CUTOFF {
        let x2 = x * x;
        return 1.0 - x2 / 10.0 + x2 * x2 / 280.0;
    }
    25.0 / (12.0 * PI * PI * u * u) * (x.sin() / x - x.cos())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_top_branches() {
        let w = FlatTopKernel::new(0.5).unwrap();
        assert_eq!(w.weight(0.3), 1.0);
        assert_eq!(w.weight(0.75), 0.5);
        assert_eq!(w.weight(1.2), 0.0);
        assert_eq!(w.weight(-0.75), 0.5);
        assert_eq!(w.weight(1.0), 0.0);
        assert_eq!(w.weight(0.5), 1.0);
        let box_kernel = FlatTopKernel::new(1.0).unwrap();
        assert_eq!(box_kernel.weight(1.0), 1.0);
        assert_eq!(box_kernel.weight(1.0001), 0.0);
        assert!(FlatTopKernel::new(0.0).is_err());
        assert!(FlatTopKernel::new(1.5).is_err());
    }

    #[test]
    fn lag_weights_even() {
        let w = FlatTopKernel::new(0.5).unwrap().lag_weights(4);
        assert_eq!(w, vec![0.0, 0.5, 1.0, 1.0, 1.0, 1.0, 1.0, 0.5, 0.0]);
    }

    #[test]
    fn qs_values() {
        assert_eq!(qs_weight(0.0), 1.0);
        // closed form evaluated directly at u = 0.5
        assert!((qs_weight(0.5) - 0.686_930_730_064_059_5).abs() < 1e-12);
        for &u in &[0.01, 0.3, 1.7, 12.0] {
            assert_eq!(qs_weight(u), qs_weight(-u));
        }
    }

    #[test]
    fn qs_series_branch_is_continuous() {
        let below = qs_weight(QS_SERIES_CUTOFF * 0.999_999);
        let above = qs_weight(QS_SERIES_CUTOFF * 1.000_001);
        assert!((below - above).abs() < 1e-8);
        assert!((qs_weight(1e-9) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn qs_tail_decays_quadratically() {
        for &u in &[10.0, 100.0, 1000.0] {
            assert!(qs_weight(u).abs() * u * u <= 25.0 / (12.0 * PI * PI) * 1.01);
        }
    }
}
