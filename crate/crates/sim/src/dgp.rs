//! The six simulation models and their true spectral densities.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use specfreq::{Error, Result, TimePanel};

/// Default number of discarded initial steps for recursive models.
pub const DEFAULT_BURN_IN: usize = 200;

/// Diagonal of `Ψ` in Models 4 to 6.
pub const PSI_DIAGONAL: f64 = 0.4;

/// Series terms below this max-norm end the Model 5 expansion.
const SERIES_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Model {
    /// `x_t ~ N(0, a² I)`.
    M1,
    /// `x_t = a x_{t-1} + ε_t`, `ε_t ~ N(0, (1 - a²) I)`.
    M2,
    /// `x_t = ε_t - a ε_{t-1}`.
    M3,
    /// `x_t = Ψ ε_t`.
    M4,
    /// `x_t = Ψ x_{t-1} + ε_t`, `ε_t ~ N(0, 0.84 I)`.
    M5,
    /// `x_t = ε_t - Ψ ε_{t-1}`.
    M6,
}

impl Model {
    /// Parameter values used in the published tables.
    pub fn paper_parameters(&self) -> &'static [f64] {
        match self {
            Model::M1 | Model::M2 | Model::M3 => &[0.2, 0.4, 0.6],
            Model::M4 => &[0.03, 0.04, 0.05],
            Model::M5 => &[0.15, 0.2, 0.25],
            Model::M6 => &[0.25, 0.3, 0.35],
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self {
            Model::M1 => 1,
            Model::M2 => 2,
            Model::M3 => 3,
            Model::M4 => 4,
            Model::M5 => 5,
            Model::M6 => 6,
        };
        write!(f, "M{k}")
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        let digit = t.strip_prefix("model").or_else(|| t.strip_prefix('m')).unwrap_or(&t);
        match digit.trim() {
            "1" => Ok(Model::M1),
            "2" => Ok(Model::M2),
            "3" => Ok(Model::M3),
            "4" => Ok(Model::M4),
            "5" => Ok(Model::M5),
            "6" => Ok(Model::M6),
            _ => Err(Error::InvalidParameter(format!("unknown model {s:?}"))),
        }
    }
}

/// A model with its sample size, dimension and parameter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DgpSpec {
    pub model: Model,
    pub n: usize,
    pub p: usize,
    pub a: f64,
    pub burn_in: usize,
}

impl DgpSpec {
    pub fn new(model: Model, n: usize, p: usize, a: f64) -> Result<Self> {
        let spec = Self {
            model,
            n,
            p,
            a,
            burn_in: DEFAULT_BURN_IN,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    /// Whether `a` is one of the values in the published tables.
    pub fn is_paper_setting(&self) -> bool {
        self.model
            .paper_parameters()
            .iter()
            .any(|&v| (v - self.a).abs() < 1e-12)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < specfreq::panel::MIN_OBSERVATIONS || self.p == 0 {
            return Err(Error::InvalidParameter(format!(
                "need n >= 3 and p >= 1, got n = {}, p = {}",
                self.n, self.p
            )));
        }
        if !self.a.is_finite() {
            return Err(Error::InvalidParameter(format!("parameter {} is not finite", self.a)));
        }
        match self.model {
            Model::M2 if self.a.abs() >= 1.0 => Err(Error::NonStationary(format!(
                "VAR(1) coefficient {} must satisfy |a| < 1",
                self.a
            ))),
            Model::M5 => {
                let rho = psi_spectral_radius(self.p, self.a);
                if rho >= 1.0 {
                    Err(Error::NonStationary(format!(
                        "spectral radius of Psi is {rho}, must be below 1"
                    )))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// The tridiagonal `Ψ` with `0.4` on the diagonal and `a` beside it.
    pub fn psi(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.p, self.p, |i, j| {
            if i == j {
                PSI_DIAGONAL
            } else if i.abs_diff(j) == 1 {
                self.a
            } else {
                0.0
            }
        })
    }
}

/// Eigenvalues of a symmetric tridiagonal Toeplitz matrix are
/// `0.4 + 2a cos(k pi / (p + 1))`.
fn psi_spectral_radius(p: usize, a: f64) -> f64 {
    (1..=p)
        .map(|k| (PSI_DIAGONAL + 2.0 * a * (k as f64 * PI / (p + 1) as f64).cos()).abs())
        .fold(0.0, f64::max)
}

/// `y = Ψ x` for the tridiagonal `Ψ`.
fn psi_apply(a: f64, x: &[f64], y: &mut [f64]) {
    let p = x.len();
    for k in 0..p {
        let mut v = PSI_DIAGONAL * x[k];
        if k > 0 {
            v += a * x[k - 1];
        }
        if k + 1 < p {
            v += a * x[k + 1];
        }
        y[k] = v;
    }
}

/// Draws an `n x p` panel from the model.
pub fn simulate<R: Rng>(spec: &DgpSpec, rng: &mut R) -> Result<TimePanel> {
    spec.validate()?;
    let (n, p, a) = (spec.n, spec.p, spec.a);
    let lead = match spec.model {
        Model::M2 | Model::M5 => spec.burn_in,
        Model::M3 | Model::M6 => 1,
        _ => 0,
    };
    let total = n + lead;
    let mut eps = vec![0.0; total * p];
    for v in eps.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
    let row = |t: usize| &eps[t * p..(t + 1) * p];
    let mut out = DMatrix::zeros(n, p);
    let mut buf = vec![0.0; p];
    match spec.model {
        Model::M1 => {
            for t in 0..n {
                for k in 0..p {
                    out[(t, k)] = a * row(t)[k];
                }
            }
        }
        Model::M4 => {
            for t in 0..n {
                psi_apply(a, row(t), &mut buf);
                for k in 0..p {
                    out[(t, k)] = buf[k];
                }
            }
        }
        Model::M3 => {
            for t in 0..n {
                for k in 0..p {
                    out[(t, k)] = row(t + 1)[k] - a * row(t)[k];
                }
            }
        }
        Model::M6 => {
            for t in 0..n {
                psi_apply(a, row(t), &mut buf);
                for k in 0..p {
                    out[(t, k)] = row(t + 1)[k] - buf[k];
                }
            }
        }
        Model::M2 | Model::M5 => {
            let scale = if spec.model == Model::M2 {
                (1.0 - a * a).sqrt()
            } else {
                (1.0 - PSI_DIAGONAL * PSI_DIAGONAL).sqrt()
            };
            let mut x = vec![0.0; p];
            for t in 0..total {
                if spec.model == Model::M2 {
                    x.iter_mut().for_each(|v| *v *= a);
                } else {
                    psi_apply(a, &x, &mut buf);
                    x.copy_from_slice(&buf);
                }
                for (v, e) in x.iter_mut().zip(row(t)) {
                    *v += scale * e;
                }
                if t >= lead {
                    for k in 0..p {
                        out[(t - lead, k)] = x[k];
                    }
                }
            }
        }
    }
    TimePanel::new(out, None)
}

fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

/// The true spectral density matrix `F(ω)`.
pub fn true_spectrum(spec: &DgpSpec, omega: f64) -> Result<DMatrix<Complex64>> {
    spec.validate()?;
    let p = spec.p;
    let a = spec.a;
    let id = DMatrix::<f64>::identity(p, p);
    let inv = 1.0 / (2.0 * PI);
    let real = match spec.model {
        Model::M1 => &id * (a * a * inv),
        Model::M2 => &id * ((1.0 - a * a) * inv / (1.0 - 2.0 * a * omega.cos() + a * a)),
        Model::M3 => &id * ((1.0 + a * a - 2.0 * a * omega.cos()) * inv),
        Model::M4 => {
            let psi = spec.psi();
            &psi * &psi * inv
        }
        Model::M6 => {
            let psi = spec.psi();
            (&id + &psi * &psi - &psi * (2.0 * omega.cos())) * inv
        }
        Model::M5 => {
            let psi = spec.psi();
            let psi2 = &psi * &psi;
            let mut geometric = id.clone();
            let mut term = id.clone();
            loop {
                term = &term * &psi2;
                if term.amax() < SERIES_TOLERANCE {
                    break;
                }
                geometric += &term;
            }
            let mut two_sided = id.clone();
            let mut power = id.clone();
            let mut k = 1.0;
            loop {
                power = &power * &psi;
                if power.amax() < SERIES_TOLERANCE {
                    break;
                }
                two_sided += &power * (2.0 * (k * omega).cos());
                k += 1.0;
            }
            geometric * two_sided * ((1.0 - PSI_DIAGONAL * PSI_DIAGONAL) * inv)
        }
    };
    Ok(to_complex(&real))
}
