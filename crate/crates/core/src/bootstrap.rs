//! Gaussian multiplier bootstrap for the sup-max statistic.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{qs_weight, FlatTopKernel};
use crate::longrun::{estimate_longrun, theta_matrix, LagPanel};
use crate::rng::{substream, DOMAIN_MULTIPLIER};
use crate::spectral::{freq_projection, Bandwidth, FreqProjection};

/// Largest diagonal jitter tried before the eigenvalue fallback.
pub const MAX_JITTER: f64 = 1e-6;

/// Draws generated together in one matrix product.
const CHUNK: usize = 64;

/// How bootstrap sums `S = ñ^{-1/2} Σ ε_t ĉ_t` are generated.
///
/// `Time` draws `ε ~ N(0, Θ)` and forms the sum; `Covariance` draws
/// `S ~ N(0, Ξ̂)` directly from a factor of `Ξ̂`. The two have the same law
/// given the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DrawRoute {
    /// Pick the cheaper route from the problem dimensions.
    Auto,
    Time,
    Covariance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierConfig {
    /// Number of bootstrap replicates `B`.
    pub replicates: usize,
    pub seed: u64,
    /// Substream identifier; distinct hypotheses use distinct streams.
    pub stream: u64,
    /// Initial diagonal regularization of `Θ`.
    pub jitter: f64,
    pub route: DrawRoute,
    /// Forces every multiplier to zero. Diagnostic use only.
    pub zero_multipliers: bool,
}

impl Default for MultiplierConfig {
    fn default() -> Self {
        Self {
            replicates: 1000,
            seed: 0,
            stream: 0,
            jitter: 1e-10,
            route: DrawRoute::Auto,
            zero_multipliers: false,
        }
    }
}

impl MultiplierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidParameter("B must be at least 1".into()));
        }
        if !(self.jitter >= 0.0 && self.jitter <= MAX_JITTER) {
            return Err(Error::InvalidParameter(format!(
                "jitter must lie in [0, {MAX_JITTER}], got {}",
                self.jitter
            )));
        }
        Ok(())
    }
}

/// A square root `L` of a covariance matrix with `L Lᵀ ≈ M + jitter I`.
#[derive(Debug, Clone)]
struct SquareRoot {
    factor: DMatrix<f64>,
    jitter: f64,
    fallback: bool,
}

/// Cholesky of `m + j I` for `j = start, 10 start, ...` up to `max`, then
/// the clipped eigen square root.
fn psd_sqrt(m: &DMatrix<f64>, start: f64, max: f64) -> SquareRoot {
    let d = m.nrows();
    let mut jitter = start;
    loop {
        let mut shifted = m.clone();
        for i in 0..d {
            shifted[(i, i)] += jitter;
        }
        if let Some(chol) = shifted.cholesky() {
            return SquareRoot {
                factor: chol.unpack(),
                jitter,
                fallback: false,
            };
        }
        if jitter >= max {
            break;
        }
        jitter = if jitter > 0.0 { (jitter * 10.0).min(max) } else { max * 1e-6 };
    }
    log::warn!("Cholesky failed up to jitter {max:e}; using clipped eigendecomposition");
    let eig = m.clone().symmetric_eigen();
    let mut v = eig.eigenvectors;
    for (k, mut col) in v.column_iter_mut().enumerate() {
        col *= eig.eigenvalues[k].max(0.0).sqrt();
    }
    SquareRoot {
        factor: v,
        jitter: 0.0,
        fallback: true,
    }
}

/// Factor of the multiplier covariance `Θ`, `Θ_{ts} = K_QS((t - s) / b_n)`.
#[derive(Debug, Clone)]
pub struct ToeplitzFactor {
    first_row: Vec<f64>,
    root: SquareRoot,
}

impl ToeplitzFactor {
    /// `ñ`.
    pub fn dim(&self) -> usize {
        self.first_row.len()
    }

    /// `K_QS(k / b_n)` for `k = 0..ñ`.
    pub fn first_row(&self) -> &[f64] {
        &self.first_row
    }

    /// Lower-triangular Cholesky factor, or an eigen square root when
    /// [`used_fallback`](Self::used_fallback) is set.
    pub fn chol(&self) -> &DMatrix<f64> {
        &self.root.factor
    }

    /// Jitter actually added to the diagonal.
    pub fn jitter(&self) -> f64 {
        self.root.jitter
    }

    pub fn used_fallback(&self) -> bool {
        self.root.fallback
    }

    /// `L Lᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.chol() * self.chol().transpose()
    }
}

pub fn factor_theta(n_tilde: usize, b_n: f64, jitter: f64) -> Result<ToeplitzFactor> {
    if n_tilde == 0 {
        return Err(Error::InvalidParameter("ñ must be at least 1".into()));
    }
    if !(b_n > 0.0 && b_n.is_finite()) {
        return Err(Error::InvalidBandwidth(format!("b_n must be positive, got {b_n}")));
    }
    let first_row = (0..n_tilde).map(|k| qs_weight(k as f64 / b_n)).collect();
    let root = psd_sqrt(&theta_matrix(n_tilde, b_n), jitter, MAX_JITTER.max(jitter));
    Ok(ToeplitzFactor { first_row, root })
}

fn fill_normals<R: Rng>(rng: &mut R, out: &mut [f64]) {
    for v in out {
        *v = rng.sample(StandardNormal);
    }
}

/// `ε = L z` with `z` i.i.d. standard normal.
pub fn draw_multipliers<R: Rng>(factor: &ToeplitzFactor, rng: &mut R) -> DVector<f64> {
    let mut z = DVector::zeros(factor.dim());
    fill_normals(rng, z.as_mut_slice());
    factor.chol() * z
}

/// `max_ω max_ℓ (a² + b²)` with `(a, b) = A(ω) S_ℓ`.
pub fn xi_from_sum(s: &[f64], width: usize, projections: &[FreqProjection]) -> f64 {
    let mut best = 0.0f64;
    for proj in projections {
        for block in s.chunks_exact(width) {
            let (a, b) = proj.apply(block);
            best = best.max(a * a + b * b);
        }
    }
    best
}

fn check_projections(lp: &LagPanel, projections: &[FreqProjection]) -> Result<()> {
    if projections.is_empty() {
        return Err(Error::InvalidFrequency("empty frequency grid".into()));
    }
    if let Some(p) = projections.iter().find(|p| p.width() != lp.width()) {
        return Err(Error::DimensionMismatch(format!(
            "projection has {} lags, lag panel blocks have {}",
            p.width(),
            lp.width()
        )));
    }
    Ok(())
}

/// One bootstrap statistic from an explicit multiplier vector.
pub fn xi_draw(lp: &LagPanel, projections: &[FreqProjection], eps: &[f64]) -> Result<f64> {
    check_projections(lp, projections)?;
    if eps.len() != lp.n_tilde() {
        return Err(Error::DimensionMismatch(format!(
            "{} multipliers for {} lag-panel rows",
            eps.len(),
            lp.n_tilde()
        )));
    }
    let eps = DVector::from_column_slice(eps);
    let s = lp.rows().tr_mul(&eps) / (lp.n_tilde() as f64).sqrt();
    Ok(xi_from_sum(s.as_slice(), lp.width(), projections))
}

/// The `B` bootstrap statistics in draw order.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapDraws {
    xi: Vec<f64>,
    seed: u64,
    stream: u64,
    route: DrawRoute,
    fallback: bool,
}

impl BootstrapDraws {
    pub fn new(xi: Vec<f64>) -> Self {
        Self {
            xi,
            seed: 0,
            stream: 0,
            route: DrawRoute::Auto,
            fallback: false,
        }
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Substream position of each draw: draw `b` uses stream index `b`.
    pub fn per_draw_seed_offsets(&self) -> Vec<u64> {
        (0..self.xi.len() as u64).collect()
    }

    /// The route that generated the draws.
    pub fn route(&self) -> DrawRoute {
        self.route
    }

    /// Whether a factorization fell back to the eigenvalue square root.
    pub fn used_fallback(&self) -> bool {
        self.fallback
    }

    /// `(1 + #{b : ξ_b >= t}) / (B + 1)`.
    pub fn p_value(&self, t: f64) -> f64 {
        let exceed = self.xi.iter().filter(|&&x| x >= t).count();
        (1 + exceed) as f64 / (self.xi.len() + 1) as f64
    }
}

#[derive(Debug, Clone)]
enum Sampler {
    Time(ToeplitzFactor),
    Covariance(SquareRoot),
}

/// Estimated flop counts of the two routes.
fn route_costs(n_tilde: usize, d: usize, replicates: usize) -> (f64, f64) {
    let (n, d, b) = (n_tilde as f64, d as f64, replicates as f64);
    let normal = 20.0;
    let time = n * n * n / 3.0 + b * (n * n + n * d + normal * n);
    let cov = n * n * d + n * d * d + d * d * d / 3.0 + b * (d * d + normal * d);
    (time, cov)
}

/// The route [`DrawRoute::Auto`] resolves to.
pub fn resolve_route(route: DrawRoute, n_tilde: usize, d: usize, replicates: usize) -> DrawRoute {
    match route {
        DrawRoute::Auto => {
            let (time, cov) = route_costs(n_tilde, d, replicates);
            if cov < time {
                DrawRoute::Covariance
            } else {
                DrawRoute::Time
            }
        }
        other => other,
    }
}

/// A lag panel with its multiplier factorization, ready to produce draws
/// for any frequency grid.
#[derive(Debug, Clone)]
pub struct BootstrapPlan {
    lp: LagPanel,
    b_n: f64,
    sampler: Sampler,
}

impl BootstrapPlan {
    pub fn new(lp: LagPanel, b_n: f64, cfg: &MultiplierConfig) -> Result<Self> {
        cfg.validate()?;
        let route = resolve_route(cfg.route, lp.n_tilde(), lp.dim(), cfg.replicates);
        let sampler = match route {
            DrawRoute::Covariance => {
                let xi = estimate_longrun(&lp, b_n)?.into_matrix();
                let scale = xi.diagonal().amax();
                Sampler::Covariance(if scale == 0.0 {
                    SquareRoot {
                        factor: DMatrix::zeros(lp.dim(), lp.dim()),
                        jitter: 0.0,
                        fallback: false,
                    }
                } else {
                    psd_sqrt(&xi, cfg.jitter * scale, MAX_JITTER.max(cfg.jitter) * scale)
                })
            }
            _ => Sampler::Time(factor_theta(lp.n_tilde(), b_n, cfg.jitter)?),
        };
        Ok(Self { lp, b_n, sampler })
    }

    pub fn lag_panel(&self) -> &LagPanel {
        &self.lp
    }

    pub fn bandwidth(&self) -> f64 {
        self.b_n
    }

    pub fn route(&self) -> DrawRoute {
        match self.sampler {
            Sampler::Time(_) => DrawRoute::Time,
            Sampler::Covariance(_) => DrawRoute::Covariance,
        }
    }

    pub fn used_fallback(&self) -> bool {
        match &self.sampler {
            Sampler::Time(f) => f.used_fallback(),
            Sampler::Covariance(r) => r.fallback,
        }
    }

    /// Bootstrap sums `S` for draws `start..end`, one column per draw.
    fn sums_chunk(&self, seed: u64, stream: u64, start: usize, end: usize) -> DMatrix<f64> {
        let m = end - start;
        let (factor, rows) = match &self.sampler {
            Sampler::Time(f) => (f.chol(), self.lp.n_tilde()),
            Sampler::Covariance(r) => (&r.factor, self.lp.dim()),
        };
        let mut z = DMatrix::zeros(rows, m);
        for (k, mut col) in z.column_iter_mut().enumerate() {
            let mut rng = substream(seed, DOMAIN_MULTIPLIER, stream, (start + k) as u64);
            fill_normals(&mut rng, col.as_mut_slice());
        }
        let draws = factor * z;
        match self.sampler {
            Sampler::Time(_) => {
                let scale = 1.0 / (self.lp.n_tilde() as f64).sqrt();
                let mut s = DMatrix::zeros(self.lp.dim(), m);
                s.gemm_tr(scale, self.lp.rows(), &draws, 0.0);
                s
            }
            Sampler::Covariance(_) => draws,
        }
    }

    /// `d x B` matrix of bootstrap sums, one column per draw.
    pub fn sample_sums(&self, seed: u64, stream: u64, replicates: usize) -> DMatrix<f64> {
        let chunks: Vec<DMatrix<f64>> = (0..replicates.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| self.sums_chunk(seed, stream, c * CHUNK, ((c + 1) * CHUNK).min(replicates)))
            .collect();
        let mut out = DMatrix::zeros(self.lp.dim(), replicates);
        for (c, chunk) in chunks.iter().enumerate() {
            out.columns_mut(c * CHUNK, chunk.ncols()).copy_from(chunk);
        }
        out
    }

    /// `B` values of `ξ_J` over the grid behind `projections`.
    pub fn draws(&self, projections: &[FreqProjection], cfg: &MultiplierConfig) -> Result<BootstrapDraws> {
        cfg.validate()?;
        check_projections(&self.lp, projections)?;
        let b = cfg.replicates;
        let xi = if cfg.zero_multipliers {
            vec![0.0; b]
        } else {
            let width = self.lp.width();
            let chunks: Vec<Vec<f64>> = (0..b.div_ceil(CHUNK))
                .into_par_iter()
                .map(|c| {
                    let s = self.sums_chunk(cfg.seed, cfg.stream, c * CHUNK, ((c + 1) * CHUNK).min(b));
                    s.column_iter()
                        .map(|col| xi_from_sum(col.as_slice(), width, projections))
                        .collect()
                })
                .collect();
            chunks.concat()
        };
        Ok(BootstrapDraws {
            xi,
            seed: cfg.seed,
            stream: cfg.stream,
            route: self.route(),
            fallback: self.used_fallback(),
        })
    }
}

/// Projections `A(ω)` for every frequency of a grid.
pub fn projections(bw: Bandwidth, kernel: &FlatTopKernel, grid: &[f64]) -> Vec<FreqProjection> {
    grid.iter().map(|&w| freq_projection(bw, kernel, w)).collect()
}

/// Draws `B` independent copies of `ξ_J` for the frequencies `grid`.
pub fn run_bootstrap(
    lp: &LagPanel,
    grid: &[f64],
    bw: Bandwidth,
    kernel: &FlatTopKernel,
    b_n: f64,
    cfg: &MultiplierConfig,
) -> Result<BootstrapDraws> {
    let plan = BootstrapPlan::new(lp.clone(), b_n, cfg)?;
    plan.draws(&projections(bw, kernel, grid), cfg)
}
