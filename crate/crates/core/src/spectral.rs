//! Lag-window estimation of the cross-spectral density matrix.

use std::f64::consts::PI;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::autocov::AutocovSet;
use crate::error::{Error, Result};
use crate::index::IndexSet;
use crate::kernel::FlatTopKernel;
use crate::panel::TimePanel;

/// Lag-window bandwidth `l_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bandwidth {
    l: usize,
}

impl Bandwidth {
    pub fn new(l: usize) -> Result<Self> {
        if l == 0 {
            return Err(Error::InvalidBandwidth("l_n must be at least 1".into()));
        }
        Ok(Self { l })
    }

    pub fn l(&self) -> usize {
        self.l
    }

    /// Number of lags in a window, `2 l_n + 1`.
    pub fn width(&self) -> usize {
        2 * self.l + 1
    }

    /// `ñ = n - 2 l_n`.
    pub fn n_tilde(&self, n: usize) -> usize {
        n.saturating_sub(2 * self.l)
    }

    /// Requires `ñ = n - 2 l_n >= 2`.
    pub fn check(&self, n: usize) -> Result<()> {
        if n < 2 * self.l + 2 {
            return Err(Error::InvalidBandwidth(format!(
                "l_n = {} needs n >= {}, got n = {n}",
                self.l,
                2 * self.l + 2
            )));
        }
        Ok(())
    }
}

/// `l_n = max(round(0.1 ln r), 1)` with ties rounded to even.
pub fn default_bandwidth(r: usize) -> Bandwidth {
    let r = r.max(1) as f64;
    let l = (0.1 * r.ln()).round_ties_even().max(1.0) as usize;
    Bandwidth { l }
}

/// Estimated spectral density matrices at a list of frequencies.
#[derive(Debug, Clone)]
pub struct SpectralEstimate {
    frequencies: Vec<f64>,
    matrices: Vec<DMatrix<Complex64>>,
    /// Entries that were evaluated; `None` when every entry was.
    computed: Option<DMatrix<bool>>,
    l: usize,
    n: usize,
}

impl SpectralEstimate {
    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn matrices(&self) -> &[DMatrix<Complex64>] {
        &self.matrices
    }

    pub fn p(&self) -> usize {
        self.matrices[0].nrows()
    }

    /// Bandwidth `l_n` used for the estimate.
    pub fn l(&self) -> usize {
        self.l
    }

    /// Sample size of the underlying panel.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_computed(&self, i: usize, j: usize) -> bool {
        self.computed.as_ref().is_none_or(|m| m[(i, j)])
    }

    /// Position of `omega` among the evaluated frequencies.
    pub fn freq_index(&self, omega: f64) -> Option<usize> {
        self.frequencies
            .iter()
            .position(|&w| (w - omega).abs() <= 1e-12)
    }

    /// `f̂_{i,j}` at the `k`-th evaluated frequency, if it was computed.
    pub fn get(&self, i: usize, j: usize, k: usize) -> Option<Complex64> {
        if i >= self.p() || j >= self.p() || k >= self.frequencies.len() {
            return None;
        }
        self.is_computed(i, j).then(|| self.matrices[k][(i, j)])
    }

    /// Writes `omega,i,j,re,im` rows (1-based indices) for every computed
    /// entry.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["omega", "i", "j", "re", "im"])?;
        for (k, &omega) in self.frequencies.iter().enumerate() {
            let m = &self.matrices[k];
            for i in 0..self.p() {
                for j in 0..self.p() {
                    if !self.is_computed(i, j) {
                        continue;
                    }
                    let v = m[(i, j)];
                    w.write_record([
                        crate::format_f64(omega),
                        (i + 1).to_string(),
                        (j + 1).to_string(),
                        crate::format_f64(v.re),
                        crate::format_f64(v.im),
                    ])?;
                }
            }
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// One row of a spectrum CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumRecord {
    pub omega: f64,
    pub i: usize,
    pub j: usize,
    pub value: Complex64,
}

/// Reads rows written by [`SpectralEstimate::write_csv`].
pub fn read_spectrum_csv<R: Read>(input: R) -> Result<Vec<SpectrumRecord>> {
    let mut reader = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        let field = |c: usize| -> Result<&str> {
            rec.get(c).ok_or(Error::RaggedRow {
                line: line + 2,
                found: rec.len(),
                expected: 5,
            })
        };
        let num = |c: usize| -> Result<f64> {
            let s = field(c)?;
            s.parse().map_err(|_| Error::NonNumeric {
                line: line + 2,
                col: c + 1,
                token: s.to_string(),
            })
        };
        let idx = |c: usize| -> Result<usize> {
            let s = field(c)?;
            s.parse::<usize>()
                .ok()
                .and_then(|v| v.checked_sub(1))
                .ok_or_else(|| Error::NonNumeric {
                    line: line + 2,
                    col: c + 1,
                    token: s.to_string(),
                })
        };
        out.push(SpectrumRecord {
            omega: num(0)?,
            i: idx(1)?,
            j: idx(2)?,
            value: Complex64::new(num(3)?, num(4)?),
        });
    }
    Ok(out)
}

/// Per-frequency trigonometric table shared by every pair.
struct TrigTable {
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl TrigTable {
    fn new(omega: f64, l: usize) -> Self {
        let (sin, cos) = (0..=l).map(|k| (k as f64 * omega).sin_cos()).unzip();
        Self { cos, sin }
    }
}

/// Evaluates `f̂_{i,j}(omega)` from a set of autocovariances.
pub struct SpectralEstimator<'a> {
    acov: &'a AutocovSet,
    bw: Bandwidth,
    weights: Vec<f64>,
}

impl<'a> SpectralEstimator<'a> {
    pub fn new(acov: &'a AutocovSet, bw: Bandwidth, kernel: &FlatTopKernel) -> Result<Self> {
        bw.check(acov.n())?;
        if acov.max_lag() < bw.l() {
            return Err(Error::InvalidBandwidth(format!(
                "autocovariances only reach lag {}, l_n = {}",
                acov.max_lag(),
                bw.l()
            )));
        }
        let lf = bw.l() as f64;
        let weights = (0..=bw.l()).map(|k| kernel.weight(k as f64 / lf)).collect();
        Ok(Self { acov, bw, weights })
    }

    fn entry(&self, trig: &TrigTable, i: usize, j: usize) -> Complex64 {
        let a = self.acov;
        let mut re = self.weights[0] * a.gamma(i, j, 0);
        let mut im = 0.0;
        for k in 1..=self.bw.l() {
            let w = self.weights[k];
            if w == 0.0 {
                continue;
            }
            let fwd = a.gamma(i, j, k as isize);
            let back = a.gamma(j, i, k as isize);
            re += w * trig.cos[k] * (fwd + back);
            im -= w * trig.sin[k] * (fwd - back);
        }
        Complex64::new(re / (2.0 * PI), im / (2.0 * PI))
    }

    /// `f̂_{i,j}(omega)` for a single entry.
    pub fn value(&self, i: usize, j: usize, omega: f64) -> Complex64 {
        self.entry(&TrigTable::new(omega, self.bw.l()), i, j)
    }

    /// Evaluates requested pairs (all when `pairs` is `None`) together with
    /// their mirrors and the diagonal.
    pub fn evaluate(&self, freqs: &[f64], pairs: Option<&IndexSet>) -> SpectralEstimate {
        let p = self.acov.p();
        let computed = pairs.map(|set| {
            let mut mask = DMatrix::from_element(p, p, false);
            for i in 0..p {
                mask[(i, i)] = true;
            }
            for &(i, j) in set.pairs() {
                mask[(i, j)] = true;
                mask[(j, i)] = true;
            }
            mask
        });
        let matrices = freqs
            .iter()
            .map(|&omega| {
                let trig = TrigTable::new(omega, self.bw.l());
                let mut m = DMatrix::from_element(p, p, Complex64::new(0.0, 0.0));
                for j in 0..p {
                    for i in 0..p {
                        if computed.as_ref().is_none_or(|c| c[(i, j)]) {
                            m[(i, j)] = self.entry(&trig, i, j);
                        }
                    }
                }
                m
            })
            .collect();
        SpectralEstimate {
            frequencies: freqs.to_vec(),
            matrices,
            computed,
            l: self.bw.l(),
            n: self.acov.n(),
        }
    }
}

/// `F̂(omega) = (2 pi)^{-1} Σ_{|k| <= l_n} W(k / l_n) Γ̂(k) e^{-i k omega}` at each
/// frequency in `freqs`.
pub fn estimate_spectrum(
    panel: &TimePanel,
    bw: Bandwidth,
    kernel: &FlatTopKernel,
    freqs: &[f64],
    pairs: Option<&IndexSet>,
) -> Result<SpectralEstimate> {
    bw.check(panel.n())?;
    if let Some(set) = pairs {
        if set.p() != panel.p() {
            return Err(Error::DimensionMismatch(format!(
                "index set built for p = {}, panel has p = {}",
                set.p(),
                panel.p()
            )));
        }
    }
    let acov = AutocovSet::from_centered(&panel.centered(), bw.l())?;
    Ok(SpectralEstimator::new(&acov, bw, kernel)?.evaluate(freqs, pairs))
}

/// Auto-spectra at or below this value make coherence undefined.
pub const COHERENCE_TOLERANCE: f64 = 1e-12;

/// Plug-in coherence `f̂_{i,j} / (f̂_{i,i} f̂_{j,j})^{1/2}` at an evaluated
/// frequency.
pub fn coherence(est: &SpectralEstimate, i: usize, j: usize, omega: f64) -> Result<Complex64> {
    let k = est.freq_index(omega).ok_or_else(|| {
        Error::InvalidFrequency(format!("{omega} was not evaluated in this estimate"))
    })?;
    let missing = || Error::InvalidIndexSet(format!("pair ({}, {}) not estimated", i + 1, j + 1));
    let fij = est.get(i, j, k).ok_or_else(missing)?;
    let fii = est.get(i, i, k).ok_or_else(missing)?.re;
    let fjj = est.get(j, j, k).ok_or_else(missing)?.re;
    for (series, value) in [(i, fii), (j, fjj)] {
        if value <= COHERENCE_TOLERANCE {
            return Err(Error::NonPositiveAutoSpectrum {
                series,
                omega,
                value,
            });
        }
    }
    if i == j {
        return Ok(Complex64::new(1.0, 0.0));
    }
    Ok(fij / (fii * fjj).sqrt())
}

/// The `2 x (2 l_n + 1)` projection `A(omega)` mapping a lag block onto the
/// real and imaginary parts of the cross-spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct FreqProjection {
    omega: f64,
    cos_row: Vec<f64>,
    sin_row: Vec<f64>,
}

impl FreqProjection {
    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// `l_n^{-1/2} W(k/l_n) cos(k omega)` for `k = -l_n..=l_n`.
    pub fn cos_row(&self) -> &[f64] {
        &self.cos_row
    }

    /// `-l_n^{-1/2} W(k/l_n) sin(k omega)` for `k = -l_n..=l_n`.
    pub fn sin_row(&self) -> &[f64] {
        &self.sin_row
    }

    pub fn width(&self) -> usize {
        self.cos_row.len()
    }

    /// `A(omega) v` for a block `v` of length `2 l_n + 1`.
    #[inline]
    pub fn apply(&self, block: &[f64]) -> (f64, f64) {
        let mut a = 0.0;
        let mut b = 0.0;
        for ((&c, &s), &v) in self.cos_row.iter().zip(&self.sin_row).zip(block) {
            a += c * v;
            b += s * v;
        }
        (a, b)
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let w = self.width();
        DMatrix::from_fn(2, w, |r, c| if r == 0 { self.cos_row[c] } else { self.sin_row[c] })
    }
}

pub fn freq_projection(bw: Bandwidth, kernel: &FlatTopKernel, omega: f64) -> FreqProjection {
    let l = bw.l() as isize;
    let scale = 1.0 / (bw.l() as f64).sqrt();
    let weights = kernel.lag_weights(bw.l());
    let (cos_row, sin_row) = (-l..=l)
        .zip(weights)
        .map(|(k, w)| {
            let (s, c) = (k as f64 * omega).sin_cos();
            (scale * w * c, -scale * w * s)
        })
        .unzip();
    FreqProjection {
        omega,
        cos_row,
        sin_row,
    }
}
