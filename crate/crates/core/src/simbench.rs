//! Simulation designs, exact target densities, MISE and the Monte Carlo
//! harness for the two mixture cases.

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use statrs::function::erf::erfc;

use crate::adaptive::{select, PenaltyParams, DEFAULT_KAPPA_SIGMA};
use crate::error::{Error, Result};
use crate::estimator::{DensityEstimate, Estimator, EstimatorConfig, GridSpec};
use crate::io::Sample;
use crate::kde::{box_grid, c_x_estimate, fit_kde, Bandwidth};
use crate::quadrature::{gauss_legendre, trapezoid};
use crate::svd::{QNorm, SvdCache, WeightKind};

/// Orders kept per singular system so designs with different n can share a cache.
pub const SHARED_ORDERS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Case {
    TruncatedMixture,
    UntruncatedMixture,
}

impl Case {
    pub fn from_number(k: u32) -> Result<Self> {
        match k {
            1 => Ok(Case::TruncatedMixture),
            2 => Ok(Case::UntruncatedMixture),
            _ => Err(Error::Config(format!("case must be 1 or 2, got {k}"))),
        }
    }

    pub fn number(&self) -> u32 {
        match self {
            Case::TruncatedMixture => 1,
            Case::UntruncatedMixture => 2,
        }
    }

    /// Weight used for this case in the reference study.
    pub fn weight(&self) -> WeightKind {
        match self {
            Case::TruncatedMixture => WeightKind::Indicator { r: 7.5 },
            Case::UntruncatedMixture => WeightKind::Cosh { r: 7.5 },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DgpSpec {
    pub case: Case,
    pub mix: [f64; 2],
    pub means: [[f64; 2]; 2],
    pub cov: [[f64; 2]; 2],
    /// Truncation box [lo, hi]² of each component (case 1).
    pub truncation: Option<(f64, f64)>,
    pub x_var: f64,
    pub x0: f64,
}

impl DgpSpec {
    pub fn new(case: Case) -> Self {
        DgpSpec {
            case,
            mix: [0.5, 0.5],
            means: [[-2.0, 3.0], [3.0, 0.0]],
            cov: [[2.0, 1.0], [1.0, 2.0]],
            truncation: match case {
                Case::TruncatedMixture => Some((-6.0, 6.0)),
                Case::UntruncatedMixture => None,
            },
            x_var: 2.5,
            x0: 1.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [[a, b], [c, d]] = self.cov;
        if (b - c).abs() > 0.0 || !(a > 0.0) || !(a * d - b * c > 0.0) {
            return Err(Error::InvalidArgument(
                "covariance must be symmetric positive definite".into(),
            ));
        }
        if (self.mix[0] + self.mix[1] - 1.0).abs() > 1e-12 || self.mix.iter().any(|w| *w < 0.0) {
            return Err(Error::InvalidArgument(
                "mixture weights must sum to 1".into(),
            ));
        }
        Ok(())
    }

    fn chol(&self) -> [f64; 3] {
        let [[a, b], [_, d]] = self.cov;
        let l11 = a.sqrt();
        let l21 = b / l11;
        let l22 = (d - l21 * l21).sqrt();
        [l11, l21, l22]
    }
}

fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Deterministic draw of `n` observations from replication stream `stream`.
pub fn sample_dgp(spec: &DgpSpec, n: usize, seed: u64, stream: u64) -> Result<Sample> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be ≥ 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let [l11, l21, l22] = spec.chol();
    let sx = spec.x_var.sqrt();
    let mut y = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n);
    let mut tries = 0usize;
    let mut accepted = 0usize;
    for _ in 0..n {
        let comp = if rng.random::<f64>() < spec.mix[0] {
            0
        } else {
            1
        };
        let mu = spec.means[comp];
        let (alpha, beta) = loop {
            tries += 1;
            let z1: f64 = StandardNormal.sample(&mut rng);
            let z2: f64 = StandardNormal.sample(&mut rng);
            let a = mu[0] + l11 * z1;
            let b = mu[1] + l21 * z1 + l22 * z2;
            let inside = spec
                .truncation
                .is_none_or(|(lo, hi)| a >= lo && a <= hi && b >= lo && b <= hi);
            if inside {
                accepted += 1;
                break (a, b);
            }
            if tries > 10_000 && (accepted as f64) < 1e-4 * tries as f64 {
                return Err(Error::Numerical(
                    "rejection acceptance rate below 1e-4".into(),
                ));
            }
        };
        let xi = loop {
            let v: f64 = StandardNormal.sample(&mut rng);
            let v = sx * v;
            if v.abs() <= spec.x0 {
                break v;
            }
        };
        y.push(alpha + beta * xi);
        x.push(xi);
    }
    Sample::new(y, x, 1)
}

/// Adaptive Gauss–Legendre (10 vs 20 nodes, bisect until agreement).
pub fn adaptive_quad(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    let (x10, w10) = gauss_legendre(10);
    let (x20, w20) = gauss_legendre(20);
    let rule = |x: &[f64], w: &[f64], a: f64, b: f64| {
        let m = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        x.iter().zip(w).map(|(t, v)| v * f(m + r * t)).sum::<f64>() * r
    };
    let mut stack = vec![(lo, hi, 0usize)];
    let mut total = 0.0;
    while let Some((a, b, depth)) = stack.pop() {
        let coarse = rule(&x10, &w10, a, b);
        let fine = rule(&x20, &w20, a, b);
        if (coarse - fine).abs() <= tol * (b - a) / (hi - lo) || depth > 40 {
            total += fine;
        } else {
            let m = 0.5 * (a + b);
            stack.push((m, b, depth + 1));
            stack.push((a, m, depth + 1));
        }
    }
    total
}

/// Mass of N(μ, Σ) inside [lo, hi]² via the conditional law of the slope.
pub fn box_mass(mu: [f64; 2], cov: [[f64; 2]; 2], lo: f64, hi: f64) -> f64 {
    let sa = cov[0][0].sqrt();
    let slope = cov[0][1] / cov[0][0];
    let cs = (cov[1][1] - cov[0][1] * cov[0][1] / cov[0][0]).sqrt();
    let f = |a: f64| {
        let z = (a - mu[0]) / sa;
        let dens = (-0.5 * z * z).exp() / (sa * (2.0 * std::f64::consts::PI).sqrt());
        let m = mu[1] + slope * (a - mu[0]);
        dens * (norm_cdf((hi - m) / cs) - norm_cdf((lo - m) / cs))
    };
    adaptive_quad(&f, lo, hi, 1e-13)
}

fn bivariate_normal(a: f64, b: f64, mu: [f64; 2], cov: [[f64; 2]; 2]) -> f64 {
    let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
    let da = a - mu[0];
    let db = b - mu[1];
    let q = (cov[1][1] * da * da - 2.0 * cov[0][1] * da * db + cov[0][0] * db * db) / det;
    (-0.5 * q).exp() / (2.0 * std::f64::consts::PI * det.sqrt())
}

/// Exact f_{α,β} on the product grid a × b, indexed [a][b].
pub fn true_density(spec: &DgpSpec, a: &[f64], b: &[f64]) -> Vec<Vec<f64>> {
    let masses: Vec<f64> = (0..2)
        .map(|k| match spec.truncation {
            Some((lo, hi)) => box_mass(spec.means[k], spec.cov, lo, hi),
            None => 1.0,
        })
        .collect();
    a.iter()
        .map(|&ai| {
            b.iter()
                .map(|&bi| {
                    if let Some((lo, hi)) = spec.truncation {
                        if ai < lo || ai > hi || bi < lo || bi > hi {
                            return 0.0;
                        }
                    }
                    (0..2)
                        .map(|k| {
                            spec.mix[k] * bivariate_normal(ai, bi, spec.means[k], spec.cov)
                                / masses[k]
                        })
                        .sum()
                })
                .collect()
        })
        .collect()
}

/// ∫∫ over [−half, half]² of (estimate − truth)², trapezoid on the shared grid.
pub fn mise(est: &DensityEstimate, truth: &[Vec<f64>], half: f64) -> Result<f64> {
    if est.p != 1 {
        return Err(Error::GridMismatch(
            "MISE is defined for p = 1 grids".into(),
        ));
    }
    if truth.len() != est.a.len() || truth.iter().any(|r| r.len() != est.b_axis.len()) {
        return Err(Error::GridMismatch(
            "estimate and truth grids differ".into(),
        ));
    }
    let tol = 1e-9;
    let ai: Vec<usize> = (0..est.a.len())
        .filter(|&i| est.a[i].abs() <= half + tol)
        .collect();
    let bi: Vec<usize> = (0..est.b_axis.len())
        .filter(|&i| est.b_axis[i].abs() <= half + tol)
        .collect();
    let bx: Vec<f64> = bi.iter().map(|&j| est.b_axis[j]).collect();
    let ax: Vec<f64> = ai.iter().map(|&i| est.a[i]).collect();
    let inner: Vec<f64> = ai
        .iter()
        .map(|&i| {
            let y: Vec<f64> = bi
                .iter()
                .map(|&j| (est.values[i][j] - truth[i][j]).powi(2))
                .collect();
            trapezoid(&bx, &y)
        })
        .collect();
    Ok(trapezoid(&ax, &inner))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Adaptive,
    Oracle,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Adaptive => "adaptive",
            Mode::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub kappa_sigma: f64,
    pub bandwidth: Bandwidth,
    pub delta: Option<f64>,
    pub split: bool,
    pub grids: GridSpec,
    pub region_half: f64,
    pub keep_estimates: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            kappa_sigma: DEFAULT_KAPPA_SIGMA,
            bandwidth: Bandwidth::Silverman,
            delta: None,
            split: false,
            grids: GridSpec::default(),
            region_half: 7.5,
            keep_estimates: false,
        }
    }
}

/// Estimator and exact target shared by every replication of one design.
pub struct SimSetup {
    pub spec: DgpSpec,
    pub n: usize,
    pub estimator: Estimator,
    pub truth: Vec<Vec<f64>>,
    pub options: SimOptions,
    pub n_max: usize,
    pub t_grid: Vec<f64>,
}

impl SimSetup {
    pub fn new(case: Case, n: usize, options: SimOptions) -> Result<Self> {
        Self::build(case, n, options, None)
    }

    /// Reuse the singular systems of an earlier design with the same case and grids.
    pub fn with_cache(
        case: Case,
        n: usize,
        options: SimOptions,
        cache: Arc<SvdCache>,
    ) -> Result<Self> {
        Self::build(case, n, options, Some(cache))
    }

    fn build(
        case: Case,
        n: usize,
        options: SimOptions,
        cache: Option<Arc<SvdCache>>,
    ) -> Result<Self> {
        let spec = DgpSpec::new(case);
        let weight = case.weight();
        let cfg = EstimatorConfig::auto(n, 1, QNorm::Inf, weight, spec.x0, &options.grids, None)?;
        let probe = PenaltyParams::new(n, 1, QNorm::Inf, weight, spec.x0, cfg.eps, 1.0, 1.0)?;
        let orders = SHARED_ORDERS.max(probe.n_max + 1);
        let estimator = match cache {
            Some(c) => Estimator::with_cache(cfg, probe.n_max + 1, c)?,
            None => Estimator::new(cfg, orders)?,
        };
        let truth = true_density(&spec, &estimator.cfg.a_grid(), &estimator.cfg.b_axis.nodes);
        Ok(SimSetup {
            spec,
            n,
            estimator,
            truth,
            options,
            n_max: probe.n_max,
            t_grid: probe.t_grid,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ReplicationResult {
    pub mise: f64,
    pub n_hat: (usize, usize),
    pub t_hat: f64,
    pub estimate: Option<DensityEstimate>,
}

/// Constant-N profiles × 𝒯_n minimizing realized MISE on one table.
pub fn oracle_search(
    setup: &SimSetup,
    table: &crate::estimator::CoefficientTable,
    n_grid: &[usize],
    t_grid: &[f64],
) -> Result<(usize, f64, f64, DensityEstimate)> {
    let mut best: Option<(usize, f64, f64, DensityEstimate)> = None;
    for &nn in n_grid {
        let profile = vec![nn; table.t_values.len()];
        for &t in t_grid {
            let est = setup.estimator.density(table, &profile, t)?;
            let m = mise(&est, &setup.truth, setup.options.region_half)?;
            if best.as_ref().is_none_or(|b| m < b.2) {
                best = Some((nn, t, m, est));
            }
        }
    }
    best.ok_or_else(|| Error::InvalidArgument("empty oracle grid".into()))
}

struct Fitted {
    sample: Sample,
    density: crate::kde::RegressorDensity,
    table: crate::estimator::CoefficientTable,
}

fn fit_replication(setup: &SimSetup, seed: u64, rep: usize) -> Result<Fitted> {
    let sample = sample_dgp(&setup.spec, setup.n, seed, rep as u64)?;
    let opts = &setup.options;
    let (kde_x, coef_sample) = if opts.split {
        let h = sample.len() / 2;
        let rest = Sample::new(sample.y[h..].to_vec(), sample.x[h..].to_vec(), 1)?;
        (sample.x[..h].to_vec(), rest)
    } else {
        (sample.x.clone(), sample)
    };
    let density = fit_kde(&kde_x, 1, setup.spec.x0, &opts.bandwidth, opts.delta)?;
    let table = setup
        .estimator
        .coefficients(&coef_sample, &density, setup.n_max)?;
    Ok(Fitted {
        sample: coef_sample,
        density,
        table,
    })
}

fn adaptive_fit(
    setup: &SimSetup,
    fit: &Fitted,
    kappa: f64,
) -> Result<(DensityEstimate, (usize, usize), f64)> {
    let x0 = setup.spec.x0;
    let c_x = c_x_estimate(&fit.density, &box_grid(1, x0, 61));
    let cfg = &setup.estimator.cfg;
    let params = PenaltyParams::new(
        fit.sample.len(),
        1,
        cfg.q,
        cfg.weight,
        x0,
        cfg.eps,
        c_x,
        kappa,
    )?;
    let sel = select(&fit.table, &params)?;
    let est = setup.estimator.density(&fit.table, &sel.n_hat, sel.t_hat)?;
    let lo = *sel.n_hat.iter().min().unwrap_or(&0);
    let hi = *sel.n_hat.iter().max().unwrap_or(&0);
    Ok((est, (lo, hi), sel.t_hat))
}

pub fn run_replication(
    setup: &SimSetup,
    mode: Mode,
    seed: u64,
    rep: usize,
) -> Result<ReplicationResult> {
    let fit = fit_replication(setup, seed, rep)?;
    let (est, n_hat, t_hat) = match mode {
        Mode::Adaptive => adaptive_fit(setup, &fit, setup.options.kappa_sigma)?,
        Mode::Oracle => {
            let n_grid: Vec<usize> = (0..=setup.n_max).collect();
            let (nn, t, _, est) = oracle_search(setup, &fit.table, &n_grid, &setup.t_grid)?;
            (est, (nn, nn), t)
        }
    };
    let m = mise(&est, &setup.truth, setup.options.region_half)?;
    Ok(ReplicationResult {
        mise: m,
        n_hat,
        t_hat,
        estimate: setup.options.keep_estimates.then_some(est),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationRow {
    pub kappa_sigma: f64,
    pub mean: f64,
    pub se: Option<f64>,
}

/// Mean data-driven MISE per κ_Σ, each replication's coefficients reused across κ.
pub fn calibrate(
    setup: &SimSetup,
    kappas: &[f64],
    reps: usize,
    seed: u64,
) -> Result<Vec<CalibrationRow>> {
    if reps == 0 || kappas.is_empty() {
        return Err(Error::InvalidArgument(
            "calibration needs reps ≥ 1 and at least one κ".into(),
        ));
    }
    if let Some(k) = kappas.iter().find(|k| !(**k >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "kappa_sigma = {k} must be ≥ 0"
        )));
    }
    let per_rep: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let run = || -> Result<Vec<f64>> {
                let fit = fit_replication(setup, seed, rep)?;
                kappas
                    .iter()
                    .map(|&k| {
                        let (est, _, _) = adaptive_fit(setup, &fit, k)?;
                        mise(&est, &setup.truth, setup.options.region_half)
                    })
                    .collect()
            };
            run().map_err(|e| Error::Replication {
                rep,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    Ok(kappas
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let vals: Vec<f64> = per_rep.iter().map(|r| r[i]).collect();
            let (mean, se) = summarize(&vals);
            CalibrationRow {
                kappa_sigma: k,
                mean,
                se,
            }
        })
        .collect())
}

/// Smallest mean MISE; ties go to the smaller κ.
pub fn best_kappa(rows: &[CalibrationRow]) -> Option<f64> {
    let mut best: Option<&CalibrationRow> = None;
    for r in rows {
        if best
            .is_none_or(|b| r.mean < b.mean || (r.mean == b.mean && r.kappa_sigma < b.kappa_sigma))
        {
            best = Some(r);
        }
    }
    best.map(|r| r.kappa_sigma)
}

#[derive(Debug, Clone)]
pub struct MiseReport {
    pub case: Case,
    pub mode: Mode,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub values: Vec<f64>,
    pub n_hat: Vec<(usize, usize)>,
    pub t_hat: Vec<f64>,
    pub mean: f64,
    /// Standard error of the mean; absent for a single replication.
    pub se: Option<f64>,
    pub runtime_secs: f64,
    pub estimates: Vec<DensityEstimate>,
}

pub fn summarize(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some((var / n).sqrt()))
}

/// Run `reps` replications (in parallel on the current rayon pool).
pub fn run_study(setup: &SimSetup, mode: Mode, reps: usize, seed: u64) -> Result<MiseReport> {
    if reps == 0 {
        return Err(Error::InvalidArgument("reps must be ≥ 1".into()));
    }
    let start = Instant::now();
    let results: Vec<ReplicationResult> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            run_replication(setup, mode, seed, rep).map_err(|e| Error::Replication {
                rep,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let values: Vec<f64> = results.iter().map(|r| r.mise).collect();
    let (mean, se) = summarize(&values);
    log::debug!(
        "case {} {} n = {}: {reps} replications in {:.2}s",
        setup.spec.case.number(),
        mode.name(),
        setup.n,
        start.elapsed().as_secs_f64()
    );
    Ok(MiseReport {
        case: setup.spec.case,
        mode,
        n: setup.n,
        reps,
        seed,
        n_hat: results.iter().map(|r| r.n_hat).collect(),
        t_hat: results.iter().map(|r| r.t_hat).collect(),
        values,
        mean,
        se,
        runtime_secs: start.elapsed().as_secs_f64(),
        estimates: results.into_iter().filter_map(|r| r.estimate).collect(),
    })
}

/// Pointwise mean and empirical quantiles across replications, [a][b].
pub fn pointwise_summary(
    estimates: &[DensityEstimate],
    probs: &[f64],
) -> (Vec<Vec<f64>>, Vec<Vec<Vec<f64>>>) {
    if estimates.is_empty() {
        return (Vec::new(), vec![Vec::new(); probs.len()]);
    }
    let na = estimates[0].a.len();
    let nb = estimates[0].values[0].len();
    let mut mean = vec![vec![0.0; nb]; na];
    let mut quant = vec![vec![vec![0.0; nb]; na]; probs.len()];
    let mut buf = Vec::with_capacity(estimates.len());
    for i in 0..na {
        for j in 0..nb {
            buf.clear();
            buf.extend(estimates.iter().map(|e| e.values[i][j]));
            mean[i][j] = buf.iter().sum::<f64>() / buf.len() as f64;
            buf.sort_by(f64::total_cmp);
            for (q, &pr) in probs.iter().enumerate() {
                let pos = pr * (buf.len() - 1) as f64;
                let lo = pos.floor() as usize;
                let hi = pos.ceil() as usize;
                quant[q][i][j] = buf[lo] + (pos - lo as f64) * (buf[hi] - buf[lo]);
            }
        }
    }
    (mean, quant)
}

/// Seed-stream check helper: first uniform of a replication stream.
pub fn stream_probe(seed: u64, stream: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.random()
}
