//! Trimmed Gaussian-kernel estimate of the regressor density on 𝒳 = [−x₀, x₀]^p.

use statrs::function::erf::erfc;

use crate::error::{Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Clone, PartialEq)]
pub enum Bandwidth {
    /// 1.06·sd·n^{−1/(p+4)} per axis.
    Silverman,
    /// One bandwidth per axis.
    Fixed(Vec<f64>),
    /// Silverman times a constant.
    Scaled(f64),
}

#[derive(Debug, Clone)]
pub struct RegressorDensity {
    pub p: usize,
    pub x0: f64,
    pub n0: usize,
    pub delta: f64,
    pub bandwidths: Vec<f64>,
    /// Retained points inside 𝒳, row-major.
    points: Vec<f64>,
    /// Kernel mass of the retained points inside 𝒳, averaged.
    mass: f64,
    /// Binned evaluation on a uniform grid over [−x₀, x₀] (p = 1, large n).
    binned: Option<Vec<f64>>,
}

/// Retained-sample size above which p = 1 fits switch to linear binning.
pub const BINNED_THRESHOLD: usize = 5000;
const BIN_COUNT: usize = 8193;

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Default trimming level 1/ln(n₀)².
pub fn default_delta(n0: usize) -> f64 {
    1.0 / (n0 as f64).ln().powi(2)
}

/// Fit on an n₀ × p row-major sample; points outside 𝒳 are discarded.
pub fn fit_kde(
    x: &[f64],
    p: usize,
    x0: f64,
    bandwidth: &Bandwidth,
    delta: Option<f64>,
) -> Result<RegressorDensity> {
    if p == 0 || !x.len().is_multiple_of(p) {
        return Err(Error::InvalidArgument(
            "regressor array is not n × p".into(),
        ));
    }
    if !(x0 > 0.0) {
        return Err(Error::InvalidArgument(format!("x0 = {x0} must be > 0")));
    }
    let n0 = x.len() / p;
    if n0 < 2 {
        return Err(Error::Data(format!(
            "need at least 2 regressor draws, got {n0}"
        )));
    }
    let points: Vec<f64> = x
        .chunks(p)
        .filter(|row| row.iter().all(|v| v.abs() <= x0))
        .flatten()
        .copied()
        .collect();
    let n_in = points.len() / p;
    if n_in == 0 {
        return Err(Error::Data(
            "no regressor draws inside the support box".into(),
        ));
    }
    let silverman = |axis: usize| -> Result<f64> {
        let mean = points.iter().skip(axis).step_by(p).sum::<f64>() / n_in as f64;
        let var = points
            .iter()
            .skip(axis)
            .step_by(p)
            .map(|v| (v - mean).powi(2))
            .sum::<f64>()
            / (n_in.max(2) - 1) as f64;
        let first = points[axis];
        if points.iter().skip(axis).step_by(p).all(|&v| v == first) || !(var > 0.0) {
            return Err(Error::Data(format!(
                "regressor axis {} has zero variance",
                axis + 1
            )));
        }
        Ok(1.06 * var.sqrt() * (n_in as f64).powf(-1.0 / (p as f64 + 4.0)))
    };
    let bandwidths = match bandwidth {
        Bandwidth::Silverman => (0..p).map(silverman).collect::<Result<Vec<_>>>()?,
        Bandwidth::Scaled(k) => (0..p)
            .map(|a| silverman(a).map(|h| h * k))
            .collect::<Result<Vec<_>>>()?,
        Bandwidth::Fixed(h) => {
            if h.len() != p || h.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::InvalidArgument(
                    "fixed bandwidths must be p positive values".into(),
                ));
            }
            h.clone()
        }
    };
    let delta = delta.unwrap_or_else(|| default_delta(n0));
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "trimming level delta = {delta} must be > 0"
        )));
    }
    let mass = points
        .chunks(p)
        .map(|row| {
            row.iter()
                .zip(&bandwidths)
                .map(|(&xi, &h)| std_normal_cdf((x0 - xi) / h) - std_normal_cdf((-x0 - xi) / h))
                .product::<f64>()
        })
        .sum::<f64>()
        / n_in as f64;
    let mut d = RegressorDensity {
        p,
        x0,
        n0,
        delta,
        bandwidths,
        points,
        mass,
        binned: None,
    };
    if p == 1 && n_in > BINNED_THRESHOLD {
        d.binned = Some(d.binned_grid());
    }
    Ok(d)
}

impl RegressorDensity {
    pub fn retained(&self) -> usize {
        self.points.len() / self.p
    }

    pub fn is_binned(&self) -> bool {
        self.binned.is_some()
    }

    fn bin_step(&self) -> f64 {
        2.0 * self.x0 / (BIN_COUNT - 1) as f64
    }

    /// Linear binning then a truncated discrete Gaussian convolution.
    fn binned_grid(&self) -> Vec<f64> {
        let step = self.bin_step();
        let mut counts = vec![0.0; BIN_COUNT];
        for &v in &self.points {
            let pos = ((v + self.x0) / step).clamp(0.0, (BIN_COUNT - 1) as f64);
            let lo = (pos.floor() as usize).min(BIN_COUNT - 2);
            let frac = pos - lo as f64;
            counts[lo] += 1.0 - frac;
            counts[lo + 1] += frac;
        }
        let h = self.bandwidths[0];
        let reach = ((8.6 * h / step).ceil() as usize).min(BIN_COUNT - 1);
        let kernel: Vec<f64> = (0..=reach)
            .map(|l| (-0.5 * (l as f64 * step / h).powi(2)).exp())
            .collect();
        let norm = h * self.retained() as f64 * self.mass;
        (0..BIN_COUNT)
            .map(|g| {
                let lo = g.saturating_sub(reach);
                let hi = (g + reach).min(BIN_COUNT - 1);
                let s: f64 = (lo..=hi).map(|k| counts[k] * kernel[g.abs_diff(k)]).sum();
                s * INV_SQRT_2PI / norm
            })
            .collect()
    }

    /// Untrimmed estimate, renormalized to unit mass on 𝒳.
    pub fn density(&self, x: &[f64]) -> f64 {
        if let Some(grid) = &self.binned {
            if x[0].abs() <= self.x0 {
                let pos = (x[0] + self.x0) / self.bin_step();
                let lo = (pos.floor() as usize).min(BIN_COUNT - 2);
                let frac = pos - lo as f64;
                return grid[lo] * (1.0 - frac) + grid[lo + 1] * frac;
            }
        }
        self.density_exact(x)
    }

    /// Direct kernel sum, O(n) per query.
    pub fn density_exact(&self, x: &[f64]) -> f64 {
        let n = self.retained();
        let norm: f64 = self.bandwidths.iter().product::<f64>() * n as f64 * self.mass;
        let mut s = 0.0;
        for row in self.points.chunks(self.p) {
            let mut q = 0.0;
            for ((&xi, &yi), &h) in x.iter().zip(row).zip(&self.bandwidths) {
                let z = (xi - yi) / h;
                q += z * z;
            }
            s += (-0.5 * q).exp();
        }
        s * INV_SQRT_2PI.powi(self.p as i32) / norm
    }

    pub fn floor(&self) -> f64 {
        self.delta.sqrt()
    }

    /// f̂(x) ∨ √δ.
    pub fn trimmed(&self, x: &[f64]) -> f64 {
        self.density(x).max(self.floor())
    }
}

/// Product grid on 𝒳 with `per_axis` points per axis, row-major.
pub fn box_grid(p: usize, x0: f64, per_axis: usize) -> Vec<f64> {
    let axis: Vec<f64> = (0..per_axis)
        .map(|i| -x0 + 2.0 * x0 * i as f64 / (per_axis - 1) as f64)
        .collect();
    let total = per_axis.pow(p as u32);
    let mut out = Vec::with_capacity(total * p);
    for flat in 0..total {
        let mut r = flat;
        for _ in 0..p {
            out.push(axis[r % per_axis]);
            r /= per_axis;
        }
    }
    out
}

/// max over the grid of 1/(trimmed density).
pub fn c_x_estimate(d: &RegressorDensity, grid: &[f64]) -> f64 {
    grid.chunks(d.p)
        .map(|x| 1.0 / d.trimmed(x))
        .fold(0.0, f64::max)
}
