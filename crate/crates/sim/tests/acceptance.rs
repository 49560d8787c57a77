//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! `ACCEPTANCE_ONLY=1,4` restricts the run to the listed criteria.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use specfreq::bootstrap::projections;
use specfreq::rng::{substream, DOMAIN_DATA};
use specfreq::{
    autocov, build_lag_panel, estimate_longrun, estimate_spectrum, fdp_hat, fdr_procedure,
    global_test, select_threshold, xi_draw, Bandwidth, BootstrapPlan, DrawRoute, FlatTopKernel,
    FrequencySet, HypothesisSpec, IndexSet, MultiplierConfig, TestConfig, TimePanel,
};
use specfreq_sim::{
    run_fdr_experiment, run_power_experiment, run_size_experiment, simulate, DgpSpec,
    FdrExperiment, GlobalExperiment, Model, PairSelection,
};

const ALPHA: f64 = 0.05;

const SIZE_LOW: f64 = 0.005;
const SIZE_HIGH: f64 = 0.08;
const POWER_MIN: f64 = 0.95;
const FDR_MAX: f64 = 0.06;
const FDR_POWER_MIN: f64 = 0.85;
const ORACLE_TOL: f64 = 1e-10;
const FIDELITY_SE: f64 = 5.0;
const FIDELITY_SHARE: f64 = 0.99;
const KS_MIN_P: f64 = 0.005;
const INVARIANT_TOL: f64 = 1e-12;

struct Outcome {
    pass: bool,
    detail: String,
}

fn test_config(replicates: usize) -> TestConfig {
    TestConfig {
        multiplier: MultiplierConfig {
            replicates,
            ..Default::default()
        },
        ..Default::default()
    }
}

fn criterion_1() -> Outcome {
    let exp = GlobalExperiment {
        dgp: DgpSpec::new(Model::M1, 300, 50, 0.2).unwrap(),
        pairs: PairSelection::OffDiagonal,
        freqs: FrequencySet::quarterly(),
        alpha: ALPHA,
        test: test_config(500),
        reps: 200,
        seed: 20_240_101,
    };
    let rate = run_size_experiment(&exp).unwrap().rate.unwrap();
    Outcome {
        pass: (SIZE_LOW..=SIZE_HIGH).contains(&rate),
        detail: format!("size {:.2}% in [{:.1}%, {:.1}%]", 100.0 * rate, 100.0 * SIZE_LOW, 100.0 * SIZE_HIGH),
    }
}

fn criterion_2() -> Outcome {
    let exp = GlobalExperiment {
        dgp: DgpSpec::new(Model::M4, 300, 50, 0.05).unwrap(),
        pairs: PairSelection::OffDiagonal,
        freqs: FrequencySet::quarterly(),
        alpha: ALPHA,
        test: test_config(1000),
        reps: 100,
        seed: 20_240_102,
    };
    let rate = run_power_experiment(&exp).unwrap().rate.unwrap();
    Outcome {
        pass: rate >= POWER_MIN,
        detail: format!("power {:.1}% >= {:.0}%", 100.0 * rate, 100.0 * POWER_MIN),
    }
}

fn criterion_3() -> Outcome {
    let FrequencySet::Discrete(freqs) = FrequencySet::quarterly() else {
        unreachable!()
    };
    let exp = FdrExperiment {
        dgp: DgpSpec::new(Model::M4, 600, 50, 0.04).unwrap(),
        blocks: 10,
        freqs,
        alpha: ALPHA,
        test: test_config(1000),
        reps: 200,
        seed: 20_240_103,
    };
    let res = run_fdr_experiment(&exp).unwrap();
    let (fdr, power) = (res.fdr.unwrap(), res.power.unwrap());
    Outcome {
        pass: fdr <= FDR_MAX && power >= FDR_POWER_MIN,
        detail: format!(
            "FDR {:.2}% <= {:.0}%, power {:.1}% >= {:.0}%",
            100.0 * fdr,
            100.0 * FDR_MAX,
            100.0 * power,
            100.0 * FDR_POWER_MIN
        ),
    }
}

fn random_panel(rng: &mut ChaCha8Rng, n: usize, p: usize) -> TimePanel {
    // AR(1) columns give non-trivial autocovariances
    let rho: f64 = rng.random_range(-0.6..0.6);
    let mut m = DMatrix::zeros(n, p);
    for j in 0..p {
        let mut prev = 0.0;
        for t in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            prev = rho * prev + z;
            m[(t, j)] = prev + 0.3 * j as f64;
        }
    }
    TimePanel::new(m, None).unwrap()
}

fn naive_flat_top(c: f64, u: f64) -> f64 {
    let u = u.abs();
    if u <= c {
        1.0
    } else if u <= 1.0 {
        (1.0 - u) / (1.0 - c)
    } else {
        0.0
    }
}

fn naive_qs(x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    let a = 6.0 * PI * x / 5.0;
    25.0 / (12.0 * PI * PI * x * x) * (a.sin() / a - a.cos())
}

fn naive_centered(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    for j in 0..x.ncols() {
        let mean = x.column(j).iter().sum::<f64>() / x.nrows() as f64;
        for t in 0..x.nrows() {
            out[(t, j)] -= mean;
        }
    }
    out
}

fn naive_gamma(xc: &DMatrix<f64>, i: usize, j: usize, k: isize) -> f64 {
    let n = xc.nrows() as isize;
    let mut g = 0.0;
    for t in 0..n {
        let s = t + k;
        if (0..n).contains(&s) {
            g += xc[(s as usize, i)] * xc[(t as usize, j)];
        }
    }
    g / n as f64
}

fn naive_spectrum(xc: &DMatrix<f64>, l: usize, c: f64, i: usize, j: usize, omega: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for k in -(l as isize)..=l as isize {
        let w = naive_flat_top(c, k as f64 / l as f64);
        acc += Complex64::from_polar(1.0, -(k as f64) * omega) * (w * naive_gamma(xc, i, j, k));
    }
    acc / (2.0 * PI)
}

fn naive_lag_panel(xc: &DMatrix<f64>, pairs: &[(usize, usize)], l: usize) -> DMatrix<f64> {
    let n = xc.nrows();
    let nt = n - 2 * l;
    let w = 2 * l + 1;
    DMatrix::from_fn(nt, pairs.len() * w, |t, col| {
        let (i, j) = pairs[col / w];
        let m = col % w;
        (xc[(t + m, i)] * xc[(t + l, j)] - naive_gamma(xc, i, j, m as isize - l as isize)) / (2.0 * PI)
    })
}

fn naive_longrun(c: &DMatrix<f64>, b: f64) -> DMatrix<f64> {
    let (nt, d) = c.shape();
    let mut out = DMatrix::zeros(d, d);
    for t in 0..nt {
        for s in 0..nt {
            let k = naive_qs((t as f64 - s as f64) / b);
            for a in 0..d {
                for bb in 0..d {
                    out[(a, bb)] += k * c[(t, a)] * c[(s, bb)];
                }
            }
        }
    }
    out / nt as f64
}

fn naive_xi(c: &DMatrix<f64>, r: usize, l: usize, kc: f64, grid: &[f64], eps: &[f64]) -> f64 {
    let (nt, d) = c.shape();
    let w = 2 * l + 1;
    let mut s = DVector::zeros(d);
    for t in 0..nt {
        s += c.row(t).transpose() * eps[t];
    }
    s /= (nt as f64).sqrt();
    let mut best = 0.0f64;
    for &omega in grid {
        let mut a = DMatrix::zeros(2, w);
        for m in 0..w {
            let k = m as f64 - l as f64;
            let wk = naive_flat_top(kc, k / l as f64) / (l as f64).sqrt();
            a[(0, m)] = wk * (k * omega).cos();
            a[(1, m)] = -wk * (k * omega).sin();
        }
        let eta = DMatrix::<f64>::identity(r, r).kronecker(&a) * &s;
        for ell in 0..r {
            best = best.max(eta[2 * ell].powi(2) + eta[2 * ell + 1].powi(2));
        }
    }
    best
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let (mut spec_err, mut lr_err, mut xi_err) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..20 {
        let n = rng.random_range(24..=64);
        let p = rng.random_range(2..=4);
        let l = rng.random_range(1..=3);
        let c = [0.5, 0.25, 1.0][rng.random_range(0..3)];
        let panel = random_panel(&mut rng, n, p);
        let kernel = FlatTopKernel::new(c).unwrap();
        let bw = Bandwidth::new(l).unwrap();
        let grid: Vec<f64> = (0..5).map(|_| rng.random_range(-PI..PI)).collect();
        let xc = naive_centered(panel.values());

        let est = estimate_spectrum(&panel, bw, &kernel, &grid, None).unwrap();
        for (k, &omega) in grid.iter().enumerate() {
            for i in 0..p {
                for j in 0..p {
                    let got = est.get(i, j, k).unwrap();
                    spec_err = spec_err.max((got - naive_spectrum(&xc, l, c, i, j, omega)).norm());
                }
            }
        }

        let pairs = IndexSet::off_diagonal(p).unwrap();
        let lp = build_lag_panel(&panel, &pairs, bw).unwrap();
        let c_naive = naive_lag_panel(&xc, pairs.pairs(), l);
        let b_n = rng.random_range(1.0..6.0);
        let lr = estimate_longrun(&lp, b_n).unwrap();
        lr_err = lr_err.max((lr.matrix() - naive_longrun(&c_naive, b_n)).amax());

        let eps: Vec<f64> = (0..lp.n_tilde()).map(|_| rng.sample(StandardNormal)).collect();
        let projs = projections(bw, &kernel, &grid);
        let got = xi_draw(&lp, &projs, &eps).unwrap();
        xi_err = xi_err.max((got - naive_xi(&c_naive, pairs.len(), l, c, &grid, &eps)).abs());
    }
    let worst = spec_err.max(lr_err).max(xi_err);
    Outcome {
        pass: worst <= ORACLE_TOL,
        detail: format!("max abs error: spectrum {spec_err:.1e}, long-run {lr_err:.1e}, xi {xi_err:.1e}"),
    }
}

fn criterion_5() -> Outcome {
    let dgp = DgpSpec::new(Model::M2, 150, 5, 0.4).unwrap();
    let panel = simulate(&dgp, &mut substream(55, DOMAIN_DATA, 0, 0)).unwrap();
    let pairs = IndexSet::off_diagonal(5).unwrap();
    let lp = build_lag_panel(&panel, &pairs, Bandwidth::new(1).unwrap()).unwrap();
    let b_n = specfreq::andrews_bandwidth(&lp).unwrap();
    let xi = estimate_longrun(&lp, b_n).unwrap().into_matrix();
    let cfg = MultiplierConfig {
        route: DrawRoute::Time,
        ..Default::default()
    };
    let plan = BootstrapPlan::new(lp, b_n, &cfg).unwrap();
    let draws = 10_000;
    let s = plan.sample_sums(5, 0, draws);
    let emp = &s * s.transpose() / draws as f64;
    let d = xi.nrows();
    let mut ok = 0;
    for a in 0..d {
        for b in 0..d {
            let se = ((xi[(a, a)] * xi[(b, b)] + xi[(a, b)].powi(2)) / draws as f64).sqrt();
            if (emp[(a, b)] - xi[(a, b)]).abs() <= FIDELITY_SE * se {
                ok += 1;
            }
        }
    }
    let share = ok as f64 / (d * d) as f64;
    Outcome {
        pass: share >= FIDELITY_SHARE,
        detail: format!("{ok}/{} entries within {FIDELITY_SE} SE ({:.2}% >= {:.0}%)", d * d, 100.0 * share, 100.0 * FIDELITY_SHARE),
    }
}

/// Asymptotic Kolmogorov tail with Stephens' small-sample correction.
fn ks_uniform_p_value(sample: &[f64]) -> (f64, f64) {
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let d = x
        .iter()
        .enumerate()
        .map(|(k, &v)| ((k as f64 + 1.0) / n - v).max(v - k as f64 / n))
        .fold(0.0, f64::max);
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        p += 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
    }
    (d, p.clamp(0.0, 1.0))
}

fn criterion_6() -> Outcome {
    let exp = GlobalExperiment {
        dgp: DgpSpec::new(Model::M2, 300, 10, 0.4).unwrap(),
        pairs: PairSelection::OffDiagonal,
        freqs: FrequencySet::quarterly(),
        alpha: ALPHA,
        test: test_config(500),
        reps: 300,
        seed: 20_240_106,
    };
    let res = run_size_experiment(&exp).unwrap();
    let (d, p) = ks_uniform_p_value(&res.p_values);
    Outcome {
        pass: p > KS_MIN_P,
        detail: format!("KS D = {d:.4}, p = {p:.4} > {KS_MIN_P}"),
    }
}

fn rel_err(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut failures = Vec::new();
    let kernel = FlatTopKernel::default();
    for case in 0..10 {
        let n = rng.random_range(40..=90);
        let p = rng.random_range(2..=5);
        let l = rng.random_range(1..=3);
        let bw = Bandwidth::new(l).unwrap();
        let panel = random_panel(&mut rng, n, p);
        let grid: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mirrored: Vec<f64> = grid.iter().map(|w| -w).collect();

        let acov = autocov(&panel, l).unwrap();
        for k in 1..=l as isize {
            if acov.matrix(-k) != acov.matrix(k).transpose() {
                failures.push(format!("case {case}: gamma(-k) != gamma(k)^T"));
            }
        }

        let est = estimate_spectrum(&panel, bw, &kernel, &grid, None).unwrap();
        let neg = estimate_spectrum(&panel, bw, &kernel, &mirrored, None).unwrap();
        let scaled = estimate_spectrum(&panel.scaled(2.5).unwrap(), bw, &kernel, &grid, None).unwrap();
        for k in 0..grid.len() {
            let kneg = neg.freq_index(-grid[k]).unwrap();
            for i in 0..p {
                for j in 0..p {
                    let f = est.get(i, j, k).unwrap();
                    if (f - est.get(j, i, k).unwrap().conj()).norm() > INVARIANT_TOL {
                        failures.push(format!("case {case}: Hermitian"));
                    }
                    if (neg.get(i, j, kneg).unwrap() - f.conj()).norm() > INVARIANT_TOL {
                        failures.push(format!("case {case}: conjugate symmetry"));
                    }
                    if f.norm() > 1e-14 && rel_err(scaled.get(i, j, k).unwrap(), f * 6.25) > INVARIANT_TOL {
                        failures.push(format!("case {case}: s^2 scaling"));
                    }
                }
            }
        }

        let pairs = IndexSet::off_diagonal(p).unwrap();
        let lp = build_lag_panel(&panel, &pairs, bw).unwrap();
        let lp_s = build_lag_panel(&panel.scaled(2.5).unwrap(), &pairs, bw).unwrap();
        let xi = estimate_longrun(&lp, 2.0).unwrap().into_matrix();
        let xi_s = estimate_longrun(&lp_s, 2.0).unwrap().into_matrix();
        if (&xi_s - &xi * 2.5f64.powi(4)).amax() > 1e-10 * xi_s.amax() {
            failures.push(format!("case {case}: s^4 scaling of the long-run covariance"));
        }

        let cfg = TestConfig {
            multiplier: MultiplierConfig {
                replicates: 200,
                seed: case,
                ..Default::default()
            },
            ..Default::default()
        };
        let freqs = FrequencySet::quarterly();
        let a = global_test(&panel, &pairs, &freqs, ALPHA, &cfg).unwrap();
        let b = global_test(&panel, &pairs, &freqs, ALPHA, &cfg).unwrap();
        let s = global_test(&panel.scaled(2.0).unwrap(), &pairs, &freqs, ALPHA, &cfg).unwrap();
        if a != b {
            failures.push(format!("case {case}: determinism"));
        }
        if (a.reject, a.p_value) != (s.reject, s.p_value) {
            failures.push(format!("case {case}: scale invariance of the decision"));
        }

        let hyps: Vec<HypothesisSpec> = pairs
            .pairs()
            .iter()
            .enumerate()
            .map(|(q, &pair)| HypothesisSpec {
                id: q as u64,
                pairs: IndexSet::new(vec![pair], p).unwrap(),
                freqs: freqs.clone(),
            })
            .collect();
        if hyps.len() >= 2 {
            let rep = fdr_procedure(&panel, &hyps, 0.1, &cfg).unwrap();
            let v = rep.v_values();
            for h in &rep.hypotheses {
                if h.rejected != (h.v >= rep.t_hat) {
                    failures.push(format!("case {case}: rejection set identity"));
                }
            }
            if !rep.fallback_used && fdp_hat(rep.t_hat, hyps.len(), &v) > 0.1 {
                failures.push(format!("case {case}: FDP-hat(t-hat) above alpha"));
            }
            let wider = select_threshold(&v, hyps.len(), 0.2).unwrap();
            if wider.t_hat > rep.t_hat {
                failures.push(format!("case {case}: threshold monotonicity"));
            }
        }
    }
    failures.dedup();
    Outcome {
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            "10 random fixtures, all invariants hold".into()
        } else {
            failures.join("; ")
        },
    }
}

fn main() -> ExitCode {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let criteria: [(usize, &str, fn() -> Outcome); 7] = [
        (1, "empirical size, Model 1", criterion_1),
        (2, "empirical power, Model 4", criterion_2),
        (3, "FDR control, Model 4 blocks", criterion_3),
        (4, "oracle equivalence", criterion_4),
        (5, "bootstrap covariance fidelity", criterion_5),
        (6, "null p-value uniformity", criterion_6),
        (7, "invariant suite", criterion_7),
    ];
    let mut all = true;
    for (k, name, run) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&k)) {
            continue;
        }
        let start = Instant::now();
        let out = run();
        all &= out.pass;
        println!(
            "criterion {k} [{}] {name}: {} ({:.1}s)",
            if out.pass { "PASS" } else { "FAIL" },
            out.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
