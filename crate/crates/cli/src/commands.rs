//! Subcommand bodies, separated from argument parsing for testing.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use randcoef::adaptive::{select, PenaltyParams, SelectionResult};
use randcoef::estimator::{Estimator, EstimatorConfig};
use randcoef::io::{fmt17, ingest_csv, write_density_csv, DensityTable};
use randcoef::kde::{box_grid, c_x_estimate, fit_kde};
use randcoef::pswf::build_prolate_basis;
use randcoef::simbench::{
    best_kappa, calibrate, pointwise_summary, run_study, Case, MiseReport, SimOptions, SimSetup,
};
use randcoef::svd::{svd_system, WeightKind};
use randcoef::{Error, Result};

use crate::config::RunConfig;

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(format!("cannot create {}: {e}", path.display())))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// m, ρ_m, |μ_m|, Re μ_m, Im μ_m, ψ_m(0), ψ_m(1).
pub fn pswf_dump<W: Write>(c: f64, orders: usize, out: W) -> Result<()> {
    let basis = build_prolate_basis(c, orders, 1e-15)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["m", "rho", "abs_mu", "mu_re", "mu_im", "psi_0", "psi_1"])
        .map_err(csv_err)?;
    for m in 0..orders {
        let mu = basis.mu[m];
        w.write_record([
            m.to_string(),
            fmt17(basis.rho[m]),
            fmt17(mu.norm()),
            fmt17(mu.re),
            fmt17(mu.im),
            fmt17(basis.eval(m, 0.0)?),
            fmt17(basis.eval(m, 1.0)?),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// m, σ_m, ρ_m, g_m(1) and the adjoint normalization residual.
pub fn svd_dump<W: Write>(
    weight: WeightKind,
    c: f64,
    orders: usize,
    b_half: f64,
    b_step: f64,
    out: W,
) -> Result<()> {
    let grid = randcoef::quadrature::Grid::uniform_symmetric(b_half, b_step);
    let sys = svd_system(weight, c, orders, &grid)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["m", "sigma", "rho", "g_1", "norm_residual"])
        .map_err(csv_err)?;
    for m in 0..sys.order_count() {
        w.write_record([
            m.to_string(),
            fmt17(sys.sigma[m]),
            fmt17(sys.rho[m]),
            fmt17(sys.g(m, 1.0)),
            fmt17(sys.norm_residual[m]),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct EstimateSummary {
    pub n: usize,
    pub dropped: usize,
    pub eps: f64,
    pub t_cut: f64,
    pub n_range: (usize, usize),
    pub imag_residual: f64,
}

fn estimator_config(
    cfg: &RunConfig,
    n: usize,
    weight: WeightKind,
    x0: f64,
) -> Result<EstimatorConfig> {
    let mut ec = EstimatorConfig::auto(n, cfg.p, cfg.q, weight, x0, &cfg.grids, cfg.eps)?;
    ec.max_order = cfg.max_order;
    ec.sigma_floor = cfg.sigma_floor;
    ec.interp_tol = cfg.interp_tol;
    ec.validate()?;
    Ok(ec)
}

/// Long-format rows: stage N gives (t, N, B₁, Σ); stage T gives (T, B₂, Σ₂).
pub fn write_selection<W: Write>(sel: &SelectionResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["stage", "t", "n", "bias", "penalty", "selected"])
        .map_err(csv_err)?;
    for (ti, &t) in sel.t_values.iter().enumerate() {
        for (nn, (b, s)) in sel.b1[ti].iter().zip(&sel.sigma[ti]).enumerate() {
            let chosen = usize::from(sel.n_hat[ti] == nn);
            w.write_record([
                "N".to_string(),
                fmt17(t),
                nn.to_string(),
                fmt17(*b),
                fmt17(*s),
                chosen.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    for (k, &t) in sel.t_grid.iter().enumerate() {
        let chosen = usize::from(t == sel.t_hat);
        w.write_record([
            "T".to_string(),
            fmt17(t),
            String::new(),
            fmt17(sel.b2[k]),
            fmt17(sel.sigma2[k]),
            chosen.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn run_estimate(
    cfg: &RunConfig,
    data: &Path,
    out: &Path,
    dump_selection: Option<&Path>,
) -> Result<EstimateSummary> {
    let (weight, x0) = cfg.validate_estimate()?;
    let ingested = ingest_csv(data, Some(cfg.p))?;
    if ingested.dropped > 0 {
        log::warn!("dropped {} rows with non-finite entries", ingested.dropped);
    }
    let sample = ingested.sample;
    if sample.len() < 2 {
        return Err(Error::Data(format!(
            "need at least 2 observations, got {}",
            sample.len()
        )));
    }
    let (kde_x, coef) = if cfg.split {
        let h = sample.len() / 2;
        let p = cfg.p;
        let rest =
            randcoef::io::Sample::new(sample.y[h..].to_vec(), sample.x[h * p..].to_vec(), p)?;
        (sample.x[..h * p].to_vec(), rest)
    } else {
        (sample.x.clone(), sample)
    };
    let density = fit_kde(&kde_x, cfg.p, x0, &cfg.bandwidth, cfg.delta)?;
    let n = coef.len();
    let ec = estimator_config(cfg, n, weight, x0)?;
    let eps = ec.eps;
    log::info!("n = {n}, eps = {eps}, T_max = {}", ec.t_max);
    let (est, sel) = if cfg.adaptive {
        let c_x = c_x_estimate(
            &density,
            &box_grid(cfg.p, x0, if cfg.p == 1 { 61 } else { 15 }),
        );
        let params = PenaltyParams::new(n, cfg.p, cfg.q, weight, x0, ec.eps, c_x, cfg.kappa_sigma)?;
        if params.n_max > ec.max_order {
            return Err(Error::Config(format!(
                "N_max = {} exceeds max_order = {}",
                params.n_max, ec.max_order
            )));
        }
        let estimator = Estimator::new(ec, params.n_max + 1)?;
        let table = estimator.coefficients(&coef, &density, params.n_max)?;
        let sel = select(&table, &params)?;
        log::info!("selected T = {}", sel.t_hat);
        (estimator.density(&table, &sel.n_hat, sel.t_hat)?, Some(sel))
    } else {
        let t_cut = cfg.t_cut.unwrap_or(ec.t_max);
        let estimator = Estimator::new(ec, cfg.n_cut + 1)?;
        let table = estimator.coefficients(&coef, &density, cfg.n_cut)?;
        let profile = vec![cfg.n_cut; table.t_values.len()];
        (estimator.density(&table, &profile, t_cut)?, None)
    };
    if let (Some(path), Some(sel)) = (dump_selection, &sel) {
        write_selection(sel, create(path)?)?;
    } else if dump_selection.is_some() {
        log::warn!("--dump-selection ignored without --adaptive");
    }
    write_density_csv(create(out)?, &est.to_table())?;
    Ok(EstimateSummary {
        n,
        dropped: ingested.dropped,
        eps,
        t_cut: est.t_cut.unwrap_or(f64::NAN),
        n_range: est.n_summary.unwrap_or((0, 0)),
        imag_residual: est.imag_residual,
    })
}

fn sim_options(cfg: &RunConfig, keep: bool) -> SimOptions {
    SimOptions {
        kappa_sigma: cfg.kappa_sigma,
        bandwidth: cfg.bandwidth.clone(),
        delta: cfg.delta,
        split: cfg.split,
        grids: cfg.grids.clone(),
        keep_estimates: keep,
        ..SimOptions::default()
    }
}

fn grid_table(a: &[f64], b: &[f64], values: &[Vec<f64>]) -> DensityTable {
    let mut rows = Vec::with_capacity(a.len() * b.len());
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            rows.push(vec![ai, bj, values[i][j]]);
        }
    }
    DensityTable { p: 1, rows }
}

/// Per-replication MISE CSV with `mean` and `se` summary rows.
pub fn write_report<W: Write>(report: &MiseReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rep", "mise", "n_hat_min", "n_hat_max", "t_hat"])
        .map_err(csv_err)?;
    for (i, v) in report.values.iter().enumerate() {
        w.write_record([
            i.to_string(),
            fmt17(*v),
            report.n_hat[i].0.to_string(),
            report.n_hat[i].1.to_string(),
            fmt17(report.t_hat[i]),
        ])
        .map_err(csv_err)?;
    }
    let se = report.se.map_or(String::new(), fmt17);
    w.write_record([
        "mean".to_string(),
        fmt17(report.mean),
        String::new(),
        String::new(),
        String::new(),
    ])
    .map_err(csv_err)?;
    w.write_record([
        "se".to_string(),
        se,
        String::new(),
        String::new(),
        String::new(),
    ])
    .map_err(csv_err)?;
    w.flush()?;
    Ok(())
}

pub fn run_simulate(
    cfg: &RunConfig,
    out: &Path,
    emit_density: Option<&Path>,
) -> Result<MiseReport> {
    let case = Case::from_number(cfg.case)?;
    let setup = SimSetup::new(case, cfg.n, sim_options(cfg, emit_density.is_some()))?;
    log::info!(
        "case {} n = {} eps = {} N_max = {}",
        cfg.case,
        cfg.n,
        setup.estimator.cfg.eps,
        setup.n_max
    );
    let report = run_study(&setup, cfg.mode, cfg.reps, cfg.seed)?;
    write_report(&report, create(out)?)?;
    if let Some(dir) = emit_density {
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::Io(format!("cannot create {}: {e}", dir.display())))?;
        let a = setup.estimator.cfg.a_grid();
        let b = setup.estimator.cfg.b_axis.nodes.clone();
        let probs = [0.05, 0.5, 0.95];
        let (mean, quant) = pointwise_summary(&report.estimates, &probs);
        write_density_csv(create(&dir.join("mean.csv"))?, &grid_table(&a, &b, &mean))?;
        for (q, name) in quant.iter().zip(["q05.csv", "q50.csv", "q95.csv"]) {
            write_density_csv(create(&dir.join(name))?, &grid_table(&a, &b, q))?;
        }
        write_density_csv(
            create(&dir.join("truth.csv"))?,
            &grid_table(&a, &b, &setup.truth),
        )?;
    }
    Ok(report)
}

pub fn run_calibrate<W: Write>(cfg: &RunConfig, out: W) -> Result<f64> {
    let case = Case::from_number(cfg.case)?;
    let setup = SimSetup::new(case, cfg.n, sim_options(cfg, false))?;
    let rows = calibrate(&setup, &cfg.kappas, cfg.reps, cfg.seed)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kappa_sigma", "mean_mise", "se"])
        .map_err(csv_err)?;
    for r in &rows {
        w.write_record([
            fmt17(r.kappa_sigma),
            fmt17(r.mean),
            r.se.map_or(String::new(), fmt17),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    best_kappa(&rows).ok_or_else(|| Error::InvalidArgument("empty calibration grid".into()))
}
