//! The three-step estimator: empirical coefficients and spectral cut-off in
//! the partial Fourier domain, interpolation of the low band, inversion in
//! the first variable.

use std::collections::HashMap;
use std::f64::consts::{E, PI};
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::adaptive::dyadic_grid;
use crate::error::{Error, Result};
use crate::interpolate::{build_interpolator, InterpolationPlan, Interpolator, TGrid};
use crate::io::{DensityTable, Sample};
use crate::kde::RegressorDensity;
use crate::quadrature::Grid;
use crate::special::legendre_table_into;
use crate::svd::{MultiIndexSet, QNorm, SvdCache, SvdSystem, WeightKind};

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub p: usize,
    pub q: QNorm,
    pub weight: WeightKind,
    pub x0: f64,
    pub eps: f64,
    pub a: f64,
    pub t_grid: TGrid,
    pub t_max: f64,
    /// Slope grid, shared by every axis.
    pub b_axis: Grid,
    /// Output window [−a_half, a_half] for the intercept.
    pub a_half: f64,
    pub max_order: usize,
    pub sigma_floor: f64,
    pub interp_tol: f64,
}

/// ε recipe: 7eπ/(Rx₀ ln n) for the indicator, 7e²π/(2Rx₀ ln n) for cosh.
pub fn default_eps(n: usize, weight: WeightKind, x0: f64) -> f64 {
    let r = weight.r();
    let ln = (n as f64).ln();
    match weight {
        WeightKind::Indicator { .. } => 7.0 * E * PI / (r * x0 * ln),
        WeightKind::Cosh { .. } => 7.0 * E * E * PI / (2.0 * r * x0 * ln),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub fft_size: usize,
    pub a_step: f64,
    pub a_half: f64,
    pub b_half: f64,
    pub b_step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            fft_size: 1 << 13,
            a_step: 0.05,
            a_half: 7.5,
            b_half: 7.5,
            b_step: 0.05,
        }
    }
}

impl EstimatorConfig {
    /// Configuration for sample size `n`, with ε (snapped to the t-grid),
    /// a = 1/ε and T_max from the dyadic frequency grid. `eps` overrides ε.
    pub fn auto(
        n: usize,
        p: usize,
        q: QNorm,
        weight: WeightKind,
        x0: f64,
        grids: &GridSpec,
        eps: Option<f64>,
    ) -> Result<Self> {
        weight.validate()?;
        if n < 2 {
            return Err(Error::InvalidArgument(format!("sample size {n} too small")));
        }
        if !grids.fft_size.is_power_of_two() || grids.fft_size < 16 {
            return Err(Error::InvalidArgument(format!(
                "FFT size {} must be a power of two ≥ 16",
                grids.fft_size
            )));
        }
        let dt = 2.0 * PI / (grids.fft_size as f64 * grids.a_step);
        let t_grid = TGrid::new(grids.fft_size, dt)?;
        let raw = eps.unwrap_or_else(|| default_eps(n, weight, x0));
        if !(raw > 0.0) {
            return Err(Error::InvalidArgument(format!("eps = {raw} must be > 0")));
        }
        let eps = (raw / dt).round().max(1.0) * dt;
        let t_max = dyadic_grid(n, p, weight, eps)
            .last()
            .copied()
            .unwrap_or(2.0);
        let cfg = EstimatorConfig {
            p,
            q,
            weight,
            x0,
            eps,
            a: 1.0 / eps,
            t_grid,
            t_max,
            b_axis: Grid::uniform_symmetric(grids.b_half, grids.b_step),
            a_half: grids.a_half,
            max_order: 8,
            sigma_floor: 1e-13,
            interp_tol: 1e-14,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.weight.validate()?;
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.p == 0 {
            return bad("dimension p must be ≥ 1".into());
        }
        if !(self.x0 > 0.0) {
            return bad(format!("x0 = {} must be > 0", self.x0));
        }
        if !(self.eps > 0.0) || !(self.a > 0.0) {
            return bad(format!("eps = {} and a = {} must be > 0", self.eps, self.a));
        }
        if !(self.eps < self.t_max) {
            return bad(format!(
                "eps = {} must be below T_max = {}",
                self.eps, self.t_max
            ));
        }
        if self.t_max > self.t_grid.half_width() {
            return bad(format!(
                "T_max = {} exceeds the t-grid half width {}",
                self.t_max,
                self.t_grid.half_width()
            ));
        }
        if !self.t_grid.n.is_power_of_two() {
            return bad(format!(
                "t-grid length {} is not a power of two",
                self.t_grid.n
            ));
        }
        if self.t_grid.steps_of(self.eps).is_none() {
            return Err(Error::GridMismatch(format!(
                "eps = {} is not on the t-grid",
                self.eps
            )));
        }
        if !(self.sigma_floor >= 0.0) || !(self.interp_tol > 0.0) {
            return bad("sigma_floor ≥ 0 and interp_tol > 0 required".into());
        }
        Ok(())
    }

    pub fn a_step(&self) -> f64 {
        2.0 * PI / (self.t_grid.n as f64 * self.t_grid.dt)
    }

    /// Output intercept grid (indices into the FFT-conjugate grid).
    pub fn a_indices(&self) -> std::ops::Range<usize> {
        let z = self.t_grid.n / 2;
        let k = ((self.a_half / self.a_step()) + 1e-9).floor() as usize;
        z.saturating_sub(k)..(z + k + 1).min(self.t_grid.n)
    }

    pub fn a_grid(&self) -> Vec<f64> {
        let z = (self.t_grid.n / 2) as f64;
        let da = self.a_step();
        self.a_indices().map(|j| (j as f64 - z) * da).collect()
    }

    /// Positive t-grid indices with ε ≤ t ≤ T_max.
    pub fn positive_t_indices(&self) -> Vec<usize> {
        let z = self.t_grid.zero_index();
        let ke = self.t_grid.steps_of(self.eps).unwrap_or(1);
        let ks = ((self.t_max / self.t_grid.dt) + 1e-9).floor() as usize;
        (ke..=ks).map(|k| z + k).collect()
    }

    pub fn b_count(&self) -> usize {
        self.b_axis.len().pow(self.p as u32)
    }

    /// Per-axis indices of flat b-grid point `flat` (last axis fastest).
    pub fn b_multi(&self, flat: usize) -> Vec<usize> {
        let nb = self.b_axis.len();
        let mut out = vec![0; self.p];
        let mut r = flat;
        for k in (0..self.p).rev() {
            out[k] = r % nb;
            r /= nb;
        }
        out
    }
}

/// Empirical coefficients ĉ_m(t) on positive frequencies.
#[derive(Debug, Clone)]
pub struct CoefficientTable {
    pub t_values: Vec<f64>,
    /// t-grid index of each t (None for off-grid frequencies).
    pub t_index: Vec<Option<usize>>,
    pub idx: MultiIndexSet,
    /// [t][member]
    pub c: Vec<Vec<Complex64>>,
    /// [t][member]; 0 marks an order unavailable after clipping.
    pub sigma: Vec<Vec<f64>>,
    pub systems: Vec<Arc<SvdSystem>>,
}

impl CoefficientTable {
    /// ĉ at −t served by Hermitian reflection.
    pub fn coeff(&self, ti: usize, j: usize, negative: bool) -> Complex64 {
        let v = self.c[ti][j];
        if negative {
            v.conj()
        } else {
            v
        }
    }

    /// (|ĉ_m|/σ_m)² or None when σ_m is unavailable.
    pub fn energy(&self, ti: usize, j: usize) -> Option<f64> {
        let s = self.sigma[ti][j];
        (s > 0.0).then(|| self.c[ti][j].norm_sqr() / (s * s))
    }
}

/// Per-sample weights e^{itY}-independent part 1{X∈𝒳}/(x₀^p f̂^δ(X)).
/// t-values whose g coefficients share one matrix product.
const T_BLOCK: usize = 32;

fn sample_weights(sample: &Sample, density: &RegressorDensity, x0: f64) -> Vec<f64> {
    let p = sample.p;
    let scale = x0.powi(p as i32);
    (0..sample.len())
        .map(|i| {
            let row = sample.row(i);
            if row.iter().all(|v| v.abs() <= x0) {
                1.0 / (scale * density.trimmed(row))
            } else {
                0.0
            }
        })
        .collect()
}

pub fn compute_coefficients(
    sample: &Sample,
    density: &RegressorDensity,
    cfg: &EstimatorConfig,
    cache: &SvdCache,
    t_values: &[f64],
    n_cut: usize,
) -> Result<CoefficientTable> {
    let n = sample.len();
    if n == 0 {
        return Err(Error::Data("empty sample".into()));
    }
    if sample.p != cfg.p {
        return Err(Error::Data(format!(
            "sample has p = {}, config p = {}",
            sample.p, cfg.p
        )));
    }
    let idx = MultiIndexSet::new(cfg.p, cfg.q, n_cut);
    let systems = t_values
        .par_iter()
        .map(|&t| cache.get(cfg.x0 * t))
        .collect::<Result<Vec<_>>>()?;
    let weights = sample_weights(sample, density, cfg.x0);
    let active: Vec<usize> = (0..n).filter(|&i| weights[i] != 0.0).collect();
    let na = active.len();
    let degree = systems.iter().map(|s| s.max_degree()).max().unwrap_or(1);
    let p = cfg.p;
    // Normalized Legendre values P̄_k(X_jk/x₀) per axis, [active × k]
    let mut buf = vec![0.0; degree];
    let legendre: Vec<DMatrix<f64>> = (0..p)
        .map(|axis| {
            let mut m = DMatrix::zeros(na, degree);
            for (a, &i) in active.iter().enumerate() {
                legendre_table_into(sample.row(i)[axis] / cfg.x0, &mut buf);
                for (k, v) in buf.iter().enumerate() {
                    m[(a, k)] = *v;
                }
            }
            m
        })
        .collect();
    let orders_at: Vec<usize> = systems
        .iter()
        .map(|s| (n_cut + 1).min(s.order_count()))
        .collect();
    let block = T_BLOCK;
    let blocks: Vec<(usize, usize)> = (0..t_values.len())
        .step_by(block)
        .map(|lo| (lo, (lo + block).min(t_values.len())))
        .collect();
    let per_t: Vec<(Vec<Complex64>, Vec<f64>)> = blocks
        .par_iter()
        .flat_map_iter(|&(lo, hi)| {
            // Stacked g coefficients for this block, [k × (t, m)], then one product per axis.
            let mut offsets = Vec::with_capacity(hi - lo);
            let mut cols = 0;
            for &o in &orders_at[lo..hi] {
                offsets.push(cols);
                cols += o;
            }
            let used = (lo..hi)
                .flat_map(|ti| {
                    systems[ti].g_coeffs[..orders_at[ti]]
                        .iter()
                        .map(|b| b.len())
                })
                .max()
                .unwrap_or(1)
                .max(1);
            let mut coeffs = DMatrix::zeros(used, cols.max(1));
            for (bi, ti) in (lo..hi).enumerate() {
                for m in 0..orders_at[ti] {
                    for (k, v) in systems[ti].g_coeffs[m].iter().enumerate() {
                        coeffs[(k, offsets[bi] + m)] = *v;
                    }
                }
            }
            let gv: Vec<DMatrix<f64>> = legendre
                .iter()
                .map(|l| l.columns(0, used) * &coeffs)
                .collect();
            let mut out = Vec::with_capacity(hi - lo);
            for (bi, ti) in (lo..hi).enumerate() {
                let t = t_values[ti];
                let sys = &systems[ti];
                let orders = orders_at[ti];
                let phases: Vec<Complex64> = active
                    .iter()
                    .map(|&i| Complex64::from_polar(weights[i], t * sample.y[i]))
                    .collect();
                let mut cs = Vec::with_capacity(idx.len());
                let mut ss = Vec::with_capacity(idx.len());
                for m in &idx.members {
                    if m.iter().any(|&mk| mk >= orders) {
                        cs.push(Complex64::new(0.0, 0.0));
                        ss.push(0.0);
                        continue;
                    }
                    let columns: Vec<&[f64]> = m
                        .iter()
                        .enumerate()
                        .map(|(k, &mk)| {
                            let c = offsets[bi] + mk;
                            &gv[k].as_slice()[c * na..(c + 1) * na]
                        })
                        .collect();
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (a, ph) in phases.iter().enumerate() {
                        let g: f64 = columns.iter().map(|col| col[a]).product();
                        acc += ph * g;
                    }
                    cs.push(acc / n as f64);
                    ss.push(m.iter().map(|&mk| sys.sigma[mk]).product());
                }
                out.push((cs, ss));
            }
            out
        })
        .collect();
    let (c, sigma) = per_t.into_iter().unzip();
    let t_index = t_values
        .iter()
        .map(|&t| cfg.t_grid.steps_of(t).map(|k| cfg.t_grid.zero_index() + k))
        .collect();
    Ok(CoefficientTable {
        t_values: t_values.to_vec(),
        t_index,
        idx,
        c,
        sigma,
        systems,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Cutoff,
    Interpolated,
    Zero,
}

/// F̂₁(t, b) on the rows k_lo..k_lo+rows.len() of the t-grid; zero elsewhere.
#[derive(Debug, Clone)]
pub struct PartialTransform {
    pub grid: TGrid,
    pub k_lo: usize,
    /// [row][flat b]
    pub rows: Vec<Vec<Complex64>>,
    pub provenance: Vec<Provenance>,
    pub b_count: usize,
    /// Terms skipped for small or unavailable σ.
    pub floor_drops: usize,
}

impl PartialTransform {
    pub fn zeros(grid: TGrid, k_lo: usize, k_hi: usize, b_count: usize) -> Self {
        let len = k_hi + 1 - k_lo;
        PartialTransform {
            grid,
            k_lo,
            rows: vec![vec![Complex64::new(0.0, 0.0); b_count]; len],
            provenance: vec![Provenance::Zero; len],
            b_count,
            floor_drops: 0,
        }
    }

    pub fn value(&self, k: usize, b: usize) -> Complex64 {
        if k < self.k_lo || k >= self.k_lo + self.rows.len() {
            Complex64::new(0.0, 0.0)
        } else {
            self.rows[k - self.k_lo][b]
        }
    }

    pub fn column(&self, b: usize) -> Vec<Complex64> {
        (0..self.grid.n).map(|k| self.value(k, b)).collect()
    }
}

/// Σ_{|m|_q ≤ N(t)} ĉ_m(t)/σ_m φ_m(b) for one positive-frequency row.
fn cutoff_row(
    table: &CoefficientTable,
    cfg: &EstimatorConfig,
    ti: usize,
    n_t: usize,
    drops: &mut usize,
) -> Vec<Complex64> {
    let sys = &table.systems[ti];
    let b_count = cfg.b_count();
    let mut row = vec![Complex64::new(0.0, 0.0); b_count];
    let s0 = table.sigma[ti][0];
    let upto = table.idx.count_upto(n_t);
    let mut multi = Vec::with_capacity(b_count);
    if cfg.p > 1 {
        multi = (0..b_count).map(|f| cfg.b_multi(f)).collect();
    }
    for j in 0..upto {
        let s = table.sigma[ti][j];
        if !(s > 0.0) || s < cfg.sigma_floor * s0 {
            *drops += 1;
            continue;
        }
        let w = table.c[ti][j] / s;
        let m = &table.idx.members[j];
        if cfg.p == 1 {
            for (v, ph) in row.iter_mut().zip(&sys.phi[m[0]]) {
                *v += w * ph;
            }
        } else {
            for (f, v) in row.iter_mut().enumerate() {
                let mut ph = Complex64::new(1.0, 0.0);
                for (k, &mk) in m.iter().enumerate() {
                    ph *= sys.phi[mk][multi[f][k]];
                }
                *v += w * ph;
            }
        }
    }
    row
}

/// Spectral cut-off on the t-grid; `profile[i]` is N at `table.t_values[i]`.
pub fn spectral_cutoff(
    table: &CoefficientTable,
    cfg: &EstimatorConfig,
    profile: &[usize],
    t_cut: f64,
) -> Result<PartialTransform> {
    if profile.len() != table.t_values.len() {
        return Err(Error::InvalidArgument(
            "profile length differs from the t-table".into(),
        ));
    }
    let grid = cfg.t_grid;
    let z = grid.zero_index();
    let ks = (((t_cut.min(cfg.t_max)) / grid.dt) + 1e-9).floor() as usize;
    let ks = ks.min(z - 1);
    let mut pt = PartialTransform::zeros(grid, z - ks, z + ks, cfg.b_count());
    let rows: Vec<(usize, Vec<Complex64>, usize)> = table
        .t_index
        .par_iter()
        .enumerate()
        .filter_map(|(ti, k)| {
            let k = (*k)?;
            (k - z <= ks).then(|| {
                let mut drops = 0;
                let r = cutoff_row(table, cfg, ti, profile[ti], &mut drops);
                (k, r, drops)
            })
        })
        .collect();
    for (k, row, drops) in rows {
        let mirror = 2 * z - k;
        pt.rows[mirror - pt.k_lo] = row.iter().map(|v| v.conj()).collect();
        pt.provenance[mirror - pt.k_lo] = Provenance::Cutoff;
        pt.rows[k - pt.k_lo] = row;
        pt.provenance[k - pt.k_lo] = Provenance::Cutoff;
        pt.floor_drops += 2 * drops;
    }
    Ok(pt)
}

/// Replace |t| < ε by the interpolation of each b-section.
pub fn fill_low_frequencies(pt: &mut PartialTransform, plan: &InterpolationPlan) -> Result<()> {
    if plan.grid != pt.grid {
        return Err(Error::GridMismatch(
            "interpolation plan built for another t-grid".into(),
        ));
    }
    if plan
        .inner
        .iter()
        .any(|&k| k < pt.k_lo || k >= pt.k_lo + pt.rows.len())
    {
        return Err(Error::GridMismatch(
            "inner band outside the stored rows".into(),
        ));
    }
    let cols: Vec<Vec<Complex64>> = (0..pt.b_count)
        .into_par_iter()
        .map(|b| plan.apply(&pt.column(b)))
        .collect::<Result<_>>()?;
    for (b, col) in cols.into_iter().enumerate() {
        for (&k, v) in plan.inner.iter().zip(col) {
            pt.rows[k - pt.k_lo][b] = v;
        }
    }
    for &k in &plan.inner {
        pt.provenance[k - pt.k_lo] = Provenance::Interpolated;
    }
    Ok(())
}

/// Density values on the (a, b) grid.
#[derive(Debug, Clone)]
pub struct DensityEstimate {
    pub a: Vec<f64>,
    pub b_axis: Vec<f64>,
    pub p: usize,
    /// [a][flat b]
    pub values: Vec<Vec<f64>>,
    pub imag_residual: f64,
    pub floor_drops: usize,
    pub n_summary: Option<(usize, usize)>,
    pub t_cut: Option<f64>,
}

impl DensityEstimate {
    pub fn to_table(&self) -> DensityTable {
        let nb = self.b_axis.len();
        let mut rows = Vec::with_capacity(self.a.len() * self.values.first().map_or(0, Vec::len));
        for (ai, &a) in self.a.iter().enumerate() {
            for (f, &v) in self.values[ai].iter().enumerate() {
                let mut row = vec![a];
                let mut r = f;
                let mut bs = vec![0.0; self.p];
                for k in (0..self.p).rev() {
                    bs[k] = self.b_axis[r % nb];
                    r /= nb;
                }
                row.extend(bs);
                row.push(v);
                rows.push(row);
            }
        }
        DensityTable { p: self.p, rows }
    }
}

/// Raw inverse transform of one column on the full conjugate grid:
/// f_j = (Δt/2π)(−1)^j FFT[(−1)^k F_k]_j.
pub fn invert_column(grid: TGrid, column: &[Complex64]) -> Result<Vec<Complex64>> {
    if !grid.n.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "t-grid length {} is not a power of two",
            grid.n
        )));
    }
    let fft = FftPlanner::<f64>::new().plan_fft_forward(grid.n);
    let mut buf: Vec<Complex64> = column
        .iter()
        .enumerate()
        .map(|(k, v)| if k % 2 == 0 { *v } else { -*v })
        .collect();
    fft.process(&mut buf);
    let s = grid.dt / (2.0 * PI);
    Ok(buf
        .into_iter()
        .enumerate()
        .map(|(j, v)| if j % 2 == 0 { v * s } else { -v * s })
        .collect())
}

/// Forward transform F_k = Σ_j Δa e^{i t_k a_j} f_j of a full-grid column.
pub fn forward_column(grid: TGrid, values: &[Complex64]) -> Vec<Complex64> {
    let n = grid.n;
    let fft = FftPlanner::<f64>::new().plan_fft_inverse(n);
    let mut buf: Vec<Complex64> = values
        .iter()
        .enumerate()
        .map(|(j, v)| if j % 2 == 0 { *v } else { -*v })
        .collect();
    fft.process(&mut buf);
    let da = 2.0 * PI / (n as f64 * grid.dt);
    buf.into_iter()
        .enumerate()
        .map(|(k, v)| if k % 2 == 0 { v * da } else { -v * da })
        .collect()
}

pub fn invert_first_variable(
    pt: &PartialTransform,
    cfg: &EstimatorConfig,
) -> Result<DensityEstimate> {
    let grid = pt.grid;
    if !grid.n.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "t-grid length {} is not a power of two",
            grid.n
        )));
    }
    let range = cfg.a_indices();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(grid.n);
    let s = grid.dt / (2.0 * PI);
    let cols: Vec<(Vec<f64>, f64)> = (0..pt.b_count)
        .into_par_iter()
        .map(|b| {
            let mut buf = vec![Complex64::new(0.0, 0.0); grid.n];
            for (r, row) in pt.rows.iter().enumerate() {
                let k = pt.k_lo + r;
                buf[k] = if k.is_multiple_of(2) { row[b] } else { -row[b] };
            }
            fft.process(&mut buf);
            let mut imag: f64 = 0.0;
            let vals = range
                .clone()
                .map(|j| {
                    let v = if j % 2 == 0 { buf[j] * s } else { -buf[j] * s };
                    imag = imag.max(v.im.abs());
                    v.re.max(0.0)
                })
                .collect();
            (vals, imag)
        })
        .collect();
    let na = range.len();
    let mut values = vec![vec![0.0; pt.b_count]; na];
    let mut imag_residual: f64 = 0.0;
    for (b, (col, im)) in cols.into_iter().enumerate() {
        imag_residual = imag_residual.max(im);
        for (ai, v) in col.into_iter().enumerate() {
            values[ai][b] = v;
        }
    }
    Ok(DensityEstimate {
        a: cfg.a_grid(),
        b_axis: cfg.b_axis.nodes.clone(),
        p: cfg.p,
        values,
        imag_residual,
        floor_drops: pt.floor_drops,
        n_summary: None,
        t_cut: None,
    })
}

/// Shared state for repeated fits with one configuration: singular-system
/// cache and interpolation plans per frequency cut.
pub struct Estimator {
    pub cfg: EstimatorConfig,
    pub cache: Arc<SvdCache>,
    pub interp: Interpolator,
    plans: Mutex<HashMap<u64, Arc<InterpolationPlan>>>,
}

impl Estimator {
    pub fn new(cfg: EstimatorConfig, orders: usize) -> Result<Self> {
        cfg.validate()?;
        let interp = build_interpolator(cfg.a, cfg.eps, cfg.interp_tol)?;
        let cache = Arc::new(SvdCache::new(cfg.weight, orders.max(1), cfg.b_axis.clone()));
        Ok(Estimator {
            cfg,
            cache,
            interp,
            plans: Mutex::new(HashMap::new()),
        })
    }

    /// Share singular systems built by another estimator on the same grids.
    pub fn with_cache(cfg: EstimatorConfig, orders: usize, cache: Arc<SvdCache>) -> Result<Self> {
        cfg.validate()?;
        if cache.weight() != cfg.weight
            || cache.b_grid() != &cfg.b_axis
            || cache.m_count() < orders.max(1)
        {
            return Err(Error::InvalidArgument(
                "shared SVD cache does not match the configuration".into(),
            ));
        }
        let interp = build_interpolator(cfg.a, cfg.eps, cfg.interp_tol)?;
        Ok(Estimator {
            cfg,
            cache,
            interp,
            plans: Mutex::new(HashMap::new()),
        })
    }

    pub fn plan(&self, t_cut: f64) -> Result<Arc<InterpolationPlan>> {
        let key = t_cut.to_bits();
        if let Some(p) = self.plans.lock().expect("plan cache poisoned").get(&key) {
            return Ok(p.clone());
        }
        let p = Arc::new(self.interp.plan(self.cfg.t_grid, t_cut)?);
        self.plans
            .lock()
            .expect("plan cache poisoned")
            .insert(key, p.clone());
        Ok(p)
    }

    pub fn positive_t(&self) -> Vec<f64> {
        self.cfg
            .positive_t_indices()
            .into_iter()
            .map(|k| self.cfg.t_grid.t(k))
            .collect()
    }

    pub fn coefficients(
        &self,
        sample: &Sample,
        density: &RegressorDensity,
        n_cut: usize,
    ) -> Result<CoefficientTable> {
        compute_coefficients(
            sample,
            density,
            &self.cfg,
            &self.cache,
            &self.positive_t(),
            n_cut,
        )
    }

    /// Cut-off, low-band interpolation and inversion for one tuning.
    pub fn density(
        &self,
        table: &CoefficientTable,
        profile: &[usize],
        t_cut: f64,
    ) -> Result<DensityEstimate> {
        let mut pt = spectral_cutoff(table, &self.cfg, profile, t_cut)?;
        let plan = self.plan(t_cut)?;
        fill_low_frequencies(&mut pt, &plan)?;
        let mut est = invert_first_variable(&pt, &self.cfg)?;
        est.t_cut = Some(t_cut);
        est.n_summary = profile
            .iter()
            .min()
            .zip(profile.iter().max())
            .map(|(a, b)| (*a, *b));
        Ok(est)
    }

    /// f̂_β = (Σ_{|m|_q ≤ N} ĉ_m(ε) φ_m/σ_m)₊ on the flat b-grid.
    pub fn marginal_slopes(
        &self,
        sample: &Sample,
        density: &RegressorDensity,
        n_cut: usize,
    ) -> Result<Vec<f64>> {
        estimate_marginal_slopes(sample, density, &self.cfg, &self.cache, n_cut)
    }
}

pub fn estimate_marginal_slopes(
    sample: &Sample,
    density: &RegressorDensity,
    cfg: &EstimatorConfig,
    cache: &SvdCache,
    n_cut: usize,
) -> Result<Vec<f64>> {
    let table = compute_coefficients(sample, density, cfg, cache, &[cfg.eps], n_cut)?;
    let mut drops = 0;
    let row = cutoff_row(&table, cfg, 0, n_cut, &mut drops);
    Ok(row.into_iter().map(|v| v.re.max(0.0)).collect())
}
