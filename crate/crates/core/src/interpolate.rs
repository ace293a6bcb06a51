//! Paley–Wiener interpolation of the band [−ε, ε] from values outside it.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::pswf::{build_prolate_basis, ProlateBasis};
use crate::quadrature::gregory_weights;

const MAX_BANDWIDTH: f64 = 20.0;
const MIN_INNER_NODES: usize = 8;

/// Uniform grid t_k = (k − n/2)·dt, k = 0..n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TGrid {
    pub n: usize,
    pub dt: f64,
}

impl TGrid {
    pub fn new(n: usize, dt: f64) -> Result<Self> {
        if n < 2 || !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "t-grid needs n ≥ 2, dt > 0 (got {n}, {dt})"
            )));
        }
        Ok(TGrid { n, dt })
    }

    #[inline]
    pub fn t(&self, k: usize) -> f64 {
        (k as f64 - (self.n / 2) as f64) * self.dt
    }

    #[inline]
    pub fn zero_index(&self) -> usize {
        self.n / 2
    }

    /// Largest |t| available on both sides of zero.
    pub fn half_width(&self) -> f64 {
        self.t(self.n - 1).min(-self.t(0))
    }

    /// Integer j with j·dt = t, if t lies on the grid.
    pub fn steps_of(&self, t: f64) -> Option<usize> {
        let s = t / self.dt;
        let j = s.round();
        ((s - j).abs() < 1e-6 && j >= 0.0).then_some(j as usize)
    }
}

#[derive(Debug, Clone)]
pub struct Interpolator {
    pub a: f64,
    pub eps: f64,
    pub basis: ProlateBasis,
    pub m_terms: usize,
    /// ρ_m / ((1 − ρ_m) ε) for the retained terms.
    pub coef: Vec<f64>,
}

pub fn build_interpolator(a: f64, eps: f64, tol: f64) -> Result<Interpolator> {
    if !(a > 0.0 && eps > 0.0 && tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "interpolator needs a, eps, tol > 0 (got {a}, {eps}, {tol})"
        )));
    }
    let c = a * eps;
    if c > MAX_BANDWIDTH {
        return Err(Error::InvalidArgument(format!(
            "bandwidth a·eps = {c} exceeds {MAX_BANDWIDTH}; the interpolation constant is unusable"
        )));
    }
    let mut m = (2.0 * c / std::f64::consts::PI).ceil() as usize + 12;
    loop {
        let basis = build_prolate_basis(c, m, 1e-15)?;
        let ratio = |r: f64| r / (1.0 - r);
        if let Some(m_terms) = basis.rho.iter().position(|&r| ratio(r) < tol) {
            let mut coef = Vec::with_capacity(m_terms);
            for &r in &basis.rho[..m_terms] {
                let w = ratio(r) / eps;
                if !w.is_finite() || r >= 1.0 {
                    return Err(Error::Numerical(format!(
                        "1 − ρ underflows at bandwidth {c}; interpolation weight not finite"
                    )));
                }
                coef.push(w);
            }
            return Ok(Interpolator {
                a,
                eps,
                basis,
                m_terms,
                coef,
            });
        }
        m *= 2;
    }
}

/// Precomputed quadrature and prolate tables for one t-grid.
#[derive(Debug, Clone)]
pub struct InterpolationPlan {
    pub grid: TGrid,
    pub inner: Vec<usize>,
    pub outer: Vec<usize>,
    /// w_j ψ_m(t_j/ε) on outer nodes, one row per term.
    outer_table: Vec<Vec<f64>>,
    /// coef_m ψ_m(t_i/ε) on inner nodes, one row per term.
    inner_table: Vec<Vec<f64>>,
}

impl Interpolator {
    /// Plan for samples on `grid` that vanish beyond |t| > support.
    pub fn plan(&self, grid: TGrid, support: f64) -> Result<InterpolationPlan> {
        let ke = grid.steps_of(self.eps).ok_or_else(|| {
            Error::GridMismatch(format!(
                "eps = {} is not a multiple of the grid step {}",
                self.eps, grid.dt
            ))
        })?;
        let z = grid.zero_index();
        let inner: Vec<usize> = (z + 1 - ke..z + ke).collect();
        if inner.len() < MIN_INNER_NODES || z < ke {
            return Err(Error::GridMismatch(format!(
                "only {} grid nodes inside (-eps, eps); need {MIN_INNER_NODES}",
                inner.len()
            )));
        }
        let ks = ((support.min(grid.half_width()) / grid.dt) + 1e-9).floor() as usize;
        let mut outer = Vec::new();
        let mut weights = Vec::new();
        if ks >= ke {
            let side = gregory_weights(ks - ke + 1, grid.dt);
            for (i, k) in (ke..ks + 1).enumerate().rev() {
                outer.push(z - k);
                weights.push(side[i]);
            }
            for (i, k) in (ke..ks + 1).enumerate() {
                outer.push(z + k);
                weights.push(side[i]);
            }
        }
        let mut outer_table = vec![vec![0.0; outer.len()]; self.m_terms];
        let mut inner_table = vec![vec![0.0; inner.len()]; self.m_terms];
        for m in 0..self.m_terms {
            for (j, &k) in outer.iter().enumerate() {
                outer_table[m][j] = weights[j] * self.basis.eval(m, grid.t(k) / self.eps)?;
            }
            for (j, &k) in inner.iter().enumerate() {
                inner_table[m][j] = self.coef[m] * self.basis.eval(m, grid.t(k) / self.eps)?;
            }
        }
        Ok(InterpolationPlan {
            grid,
            inner,
            outer,
            outer_table,
            inner_table,
        })
    }
}

impl InterpolationPlan {
    /// Interpolated values on the inner nodes from full-grid samples.
    pub fn apply(&self, samples: &[Complex64]) -> Result<Vec<Complex64>> {
        if samples.len() != self.grid.n {
            return Err(Error::GridMismatch(format!(
                "{} samples for a {}-point grid",
                samples.len(),
                self.grid.n
            )));
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.inner.len()];
        for (row_out, row_in) in self.outer_table.iter().zip(&self.inner_table) {
            let mut s = Complex64::new(0.0, 0.0);
            for (w, &k) in row_out.iter().zip(&self.outer) {
                s += samples[k] * *w;
            }
            for (o, v) in out.iter_mut().zip(row_in) {
                *o += s * *v;
            }
        }
        Ok(out)
    }

    /// Replace inner entries of `samples` in place.
    pub fn fill(&self, samples: &mut [Complex64]) -> Result<()> {
        let vals = self.apply(samples)?;
        for (&k, v) in self.inner.iter().zip(vals) {
            samples[k] = v;
        }
        Ok(())
    }
}

/// One-shot interpolation on `grid`; returns values on the inner nodes.
pub fn interpolate(
    interp: &Interpolator,
    grid: TGrid,
    support: f64,
    samples: &[Complex64],
) -> Result<Vec<Complex64>> {
    interp.plan(grid, support)?.apply(samples)
}
