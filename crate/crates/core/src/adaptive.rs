//! Goldenshluger–Lepski selection of the cut-off profile N̂(t) and the
//! frequency truncation T̂.

use std::f64::consts::{E, PI};

use crate::error::{Error, Result};
use crate::estimator::CoefficientTable;
use crate::quadrature::trapezoid;
use crate::svd::{QNorm, WeightKind};

/// Default calibration multiplier of Σ (see `calibrate`).
pub const DEFAULT_KAPPA_SIGMA: f64 = 0.01;

pub fn zeta0(p: usize, weight: WeightKind) -> f64 {
    let cosh = if weight.is_cosh() { 1.0 } else { 0.0 };
    1.0 / (1.0 + 4.0 * p as f64 * (1.0 + cosh))
}

pub fn k_max(n: usize, p: usize, weight: WeightKind) -> usize {
    (zeta0(p, weight) * (n as f64).ln() / 2f64.ln())
        .floor()
        .max(0.0) as usize
}

/// 𝒯_n = {2^k : 1 ≤ k ≤ K_max, 2^k ≥ ε}; when empty, the single point
/// 2^{max(1, ⌈log₂ ε⌉)}.
pub fn dyadic_grid(n: usize, p: usize, weight: WeightKind, eps: f64) -> Vec<f64> {
    let km = k_max(n, p, weight);
    let g: Vec<f64> = (1..=km)
        .map(|k| 2f64.powi(k as i32))
        .filter(|&t| t >= eps)
        .collect();
    if g.is_empty() {
        let k = (eps.log2().ceil() as i32).max(1);
        vec![2f64.powi(k)]
    } else {
        g
    }
}

/// Q_q^W(N₀).
pub fn q_factor(p: usize, q: QNorm, weight: WeightKind, n0: usize) -> f64 {
    match q {
        QNorm::Inf => {
            if weight.is_cosh() {
                1.0
            } else {
                2f64.powi(p as i32)
            }
        }
        QNorm::One => {
            let fact: f64 = (1..p).map(|k| k as f64).product();
            (n0 as f64 + p as f64 - 1.0).powi(p as i32 - 1) / fact
        }
    }
}

/// ν_q^W(t, N₀); overflow saturates to +∞.
pub fn nu(p: usize, q: QNorm, weight: WeightKind, t: f64, n0: usize) -> f64 {
    let r = weight.r();
    let kq = q.k_q(p) as f64;
    let kq2 = p as f64 + 1.0 - kq;
    let qf = q_factor(p, q, weight, n0);
    let n0f = n0 as f64;
    let at = t.abs();
    let v = match weight {
        WeightKind::Indicator { .. } => {
            let base = (7.0 * E * PI * (n0f + 1.0) / (r * at)).max(1.0);
            (n0f + 1.0).powf(kq) * qf * base.powf(2.0 * kq * n0f)
        }
        WeightKind::Cosh { .. } => {
            if at <= PI / (4.0 * r) {
                2f64.powf(kq)
                    * (E * PI / 2.0).powi(2 * p as i32)
                    * qf
                    * (7.0 * E * E * PI / (2.0 * r * at)).powf(2.0 * kq * n0f)
            } else {
                2f64.powi(p as i32)
                    * (2.0 * E * r * at / PI).powf(kq)
                    * qf
                    * (PI * kq * (n0f + kq2) / (2.0 * r * at)).exp()
            }
        }
    };
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Unfloored root N̲ of the defining equation of N_max.
pub fn n_max_root(n: usize, p: usize, q: QNorm, weight: WeightKind, x0: f64, eps: f64) -> f64 {
    let ln_n = (n as f64).ln();
    let kq = q.k_q(p) as f64;
    let r = weight.r();
    match weight {
        WeightKind::Indicator { .. } => {
            let k = 7.0 * E * PI / (r * x0 * eps);
            let h = |x: f64| 2.0 * kq * x * (k * x).ln() - ln_n;
            // h is increasing on [1/(eK), ∞) and negative at its left end
            let mut lo = 1.0 / (E * k);
            let mut hi = ln_n.max(1.0);
            while h(hi) < 0.0 {
                hi *= 2.0;
            }
            if h(1.0) <= 0.0 {
                lo = lo.max(1.0);
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if h(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-15 * hi {
                    break;
                }
            }
            0.5 * (lo + hi)
        }
        WeightKind::Cosh { .. } => {
            if eps == PI / (4.0 * r * x0) {
                ln_n / (2.0 * kq)
            } else {
                let l = (7.0 * E * E * PI / (2.0 * r * x0 * eps)).ln();
                if l > 0.0 {
                    ln_n / (2.0 * kq * l)
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyParams {
    pub p: usize,
    pub q: QNorm,
    pub weight: WeightKind,
    pub x0: f64,
    pub eps: f64,
    pub n: usize,
    pub zeta0: f64,
    pub k_max: usize,
    pub t_grid: Vec<f64>,
    pub p_n: f64,
    pub c1: f64,
    pub n_max_root: f64,
    pub n_max: usize,
    pub c_x: f64,
    pub kappa_sigma: f64,
}

impl PenaltyParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n: usize,
        p: usize,
        q: QNorm,
        weight: WeightKind,
        x0: f64,
        eps: f64,
        c_x: f64,
        kappa_sigma: f64,
    ) -> Result<Self> {
        weight.validate()?;
        if n < 2 || p == 0 || !(x0 > 0.0) || !(eps > 0.0) {
            return Err(Error::InvalidArgument(
                "penalty parameters need n ≥ 2, p ≥ 1, x0, eps > 0".into(),
            ));
        }
        if !(c_x > 0.0 && c_x.is_finite()) || !(kappa_sigma >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "c_X = {c_x} must be positive and kappa_sigma = {kappa_sigma} nonnegative"
            )));
        }
        let z = zeta0(p, weight);
        let root = n_max_root(n, p, q, weight, x0, eps);
        Ok(PenaltyParams {
            p,
            q,
            weight,
            x0,
            eps,
            n,
            zeta0: z,
            k_max: k_max(n, p, weight),
            t_grid: dyadic_grid(n, p, weight, eps),
            p_n: (6.0 * (1.0 + z) * (n as f64).ln()).max(3.0),
            c1: 1.0 + 1.0 / (2.0 + 5f64.sqrt()).powi(2),
            n_max_root: root,
            n_max: root.floor().max(0.0) as usize,
            c_x,
            kappa_sigma,
        })
    }

    pub fn nu(&self, t: f64, n0: usize) -> f64 {
        nu(self.p, self.q, self.weight, t, n0)
    }

    /// Σ(t, N₀) = κ·8(2+√5)(1+2p_n)(c_X/n)(|t|/2π)^p ν(x₀t, N₀).
    pub fn sigma_penalty(&self, t: f64, n0: usize) -> f64 {
        let v = self.nu(self.x0 * t, n0);
        if self.kappa_sigma == 0.0 {
            return 0.0;
        }
        self.kappa_sigma
            * 8.0
            * (2.0 + 5f64.sqrt())
            * (1.0 + 2.0 * self.p_n)
            * (self.c_x / self.n as f64)
            * (t.abs() / (2.0 * PI)).powi(self.p as i32)
            * v
    }
}

/// Σ over members with level in [lo, hi] of (|ĉ_m|/σ_m)²; unavailable σ skipped.
fn level_energy(table: &CoefficientTable, ti: usize, lo: usize, hi: usize) -> f64 {
    let start = if lo == 0 {
        0
    } else {
        table.idx.count_upto(lo - 1)
    };
    let end = table.idx.count_upto(hi);
    (start..end).filter_map(|j| table.energy(ti, j)).sum()
}

/// B₁(t, N₀) at table row `ti`.
pub fn b1(table: &CoefficientTable, params: &PenaltyParams, ti: usize, n0: usize) -> f64 {
    let t = table.t_values[ti];
    let mut best: f64 = 0.0;
    for np in n0..=params.n_max {
        let v = level_energy(table, ti, n0, np) - params.sigma_penalty(t, np);
        best = best.max(v);
    }
    best
}

/// Trapezoid over table frequencies in [lo, hi]; doubled for ±t.
fn symmetric_integral(t: &[f64], vals: &[f64], lo: f64, hi: f64) -> f64 {
    let tol = 1e-9;
    let sel: Vec<usize> = (0..t.len())
        .filter(|&i| t[i] >= lo - tol && t[i] <= hi + tol)
        .collect();
    if sel.len() < 2 {
        return 0.0;
    }
    let x: Vec<f64> = sel.iter().map(|&i| t[i]).collect();
    let y: Vec<f64> = sel.iter().map(|&i| vals[i]).collect();
    2.0 * trapezoid(&x, &y)
}

/// B₂(T, N) for a profile over the table frequencies.
pub fn b2(table: &CoefficientTable, params: &PenaltyParams, t_cut: f64, profile: &[usize]) -> f64 {
    let integrand: Vec<f64> = (0..table.t_values.len())
        .map(|ti| {
            let t = table.t_values[ti];
            level_energy(table, ti, 0, profile[ti]) - params.sigma_penalty(t, profile[ti])
        })
        .collect();
    params
        .t_grid
        .iter()
        .filter(|&&tp| tp >= t_cut)
        .map(|&tp| symmetric_integral(&table.t_values, &integrand, t_cut, tp))
        .fold(0.0, f64::max)
}

/// Σ₂(T, N) = ∫_{ε ≤ |t| ≤ T} Σ(t, N(t)) dt.
pub fn sigma2(
    table: &CoefficientTable,
    params: &PenaltyParams,
    t_cut: f64,
    profile: &[usize],
) -> f64 {
    let vals: Vec<f64> = (0..table.t_values.len())
        .map(|ti| params.sigma_penalty(table.t_values[ti], profile[ti]))
        .collect();
    symmetric_integral(&table.t_values, &vals, params.eps, t_cut)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub t_values: Vec<f64>,
    pub n_hat: Vec<usize>,
    pub t_hat: f64,
    /// [t][N] for N = 0..=N_max
    pub b1: Vec<Vec<f64>>,
    pub sigma: Vec<Vec<f64>>,
    /// per element of 𝒯_n
    pub t_grid: Vec<f64>,
    pub b2: Vec<f64>,
    pub sigma2: Vec<f64>,
}

fn argmin(vals: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in vals.iter().enumerate() {
        if *v < vals[best] {
            best = i;
        }
    }
    best
}

pub fn select(table: &CoefficientTable, params: &PenaltyParams) -> Result<SelectionResult> {
    if table.idx.n_cut < params.n_max {
        return Err(Error::InvalidArgument(format!(
            "coefficient table covers |m| ≤ {}, selection needs {}",
            table.idx.n_cut, params.n_max
        )));
    }
    let nt = table.t_values.len();
    let mut b1_tab = Vec::with_capacity(nt);
    let mut s_tab = Vec::with_capacity(nt);
    let mut n_hat = Vec::with_capacity(nt);
    for ti in 0..nt {
        let t = table.t_values[ti];
        let b: Vec<f64> = (0..=params.n_max)
            .map(|n0| b1(table, params, ti, n0))
            .collect();
        let s: Vec<f64> = (0..=params.n_max)
            .map(|n0| params.sigma_penalty(t, n0))
            .collect();
        let crit: Vec<f64> = b.iter().zip(&s).map(|(b, s)| b + params.c1 * s).collect();
        n_hat.push(argmin(&crit));
        b1_tab.push(b);
        s_tab.push(s);
    }
    let b2v: Vec<f64> = params
        .t_grid
        .iter()
        .map(|&t| b2(table, params, t, &n_hat))
        .collect();
    let s2v: Vec<f64> = params
        .t_grid
        .iter()
        .map(|&t| sigma2(table, params, t, &n_hat))
        .collect();
    let crit: Vec<f64> = b2v.iter().zip(&s2v).map(|(a, b)| a + b).collect();
    let t_hat = params.t_grid[argmin(&crit)];
    Ok(SelectionResult {
        t_values: table.t_values.clone(),
        n_hat,
        t_hat,
        b1: b1_tab,
        sigma: s_tab,
        t_grid: params.t_grid.clone(),
        b2: b2v,
        sigma2: s2v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nu_indicator_n0_zero() {
        let w = WeightKind::Indicator { r: 7.5 };
        for &t in &[0.01, 1.0, 50.0] {
            assert_eq!(nu(1, QNorm::Inf, w, t, 0), 2.0);
        }
        // saturation of the max term
        let n0 = 3;
        let t = 7.0 * E * PI * 4.0 / 7.5 * 1.01;
        assert!((nu(1, QNorm::Inf, w, t, n0) - 4.0 * 2.0).abs() < 1e-12);
    }

    #[test]
    fn nu_overflow_saturates() {
        let w = WeightKind::Indicator { r: 1.0 };
        assert_eq!(nu(2, QNorm::Inf, w, 1e-6, 60), f64::INFINITY);
    }

    #[test]
    fn grids_and_constants() {
        let w = WeightKind::Indicator { r: 7.5 };
        let p = PenaltyParams::new(1000, 1, QNorm::Inf, w, 1.5, 0.77, 3.0, 1.0).unwrap();
        assert_eq!(p.k_max, 1);
        assert_eq!(p.t_grid, vec![2.0]);
        assert!((p.c1 - (1.0 + 1.0 / (2.0 + 5f64.sqrt()).powi(2))).abs() < 1e-15);
        let c = WeightKind::Cosh { r: 7.5 };
        assert_eq!(dyadic_grid(300, 1, c, 1.27), vec![2.0]);
        assert_eq!(dyadic_grid(10_000_000, 1, w, 3.0), vec![4.0, 8.0, 16.0]);
    }

    #[test]
    fn n_max_indicator_solves_equation() {
        let w = WeightKind::Indicator { r: 7.5 };
        for &n in &[300usize, 1000, 100_000] {
            for q in [QNorm::One, QNorm::Inf] {
                let eps = 0.5;
                let root = n_max_root(n, 2, q, w, 1.5, eps);
                let kq = q.k_q(2) as f64;
                let lhs = 2.0 * kq * root * (7.0 * E * PI * root / (7.5 * 1.5 * eps)).ln();
                assert!((lhs - (n as f64).ln()).abs() < 1e-9);
            }
        }
    }
}
