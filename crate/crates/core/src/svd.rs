//! Singular systems of the truncated Fourier operator for the indicator and
//! hyperbolic-cosine weights, their tensor products and a memo cache.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::pswf::build_prolate_basis;
use crate::quadrature::{gauss_legendre, Grid};
use crate::special::{legendre_at_one, legendre_fourier, legendre_series, legendre_table_into};

const NYSTROM_START: usize = 257;
const NYSTROM_CAP: usize = 4097;
const NYSTROM_TOL: f64 = 1e-10;
const PROLATE_TOL: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightKind {
    Indicator { r: f64 },
    Cosh { r: f64 },
}

impl WeightKind {
    pub fn r(&self) -> f64 {
        match *self {
            WeightKind::Indicator { r } | WeightKind::Cosh { r } => r,
        }
    }

    pub fn is_cosh(&self) -> bool {
        matches!(self, WeightKind::Cosh { .. })
    }

    /// 1/W(b), zero outside the support of the indicator.
    pub fn inverse_weight(&self, b: f64) -> f64 {
        match *self {
            WeightKind::Indicator { r } => {
                if b.abs() <= r {
                    1.0
                } else {
                    0.0
                }
            }
            WeightKind::Cosh { r } => 1.0 / (b / r).cosh(),
        }
    }

    pub fn weight(&self, b: f64) -> f64 {
        match *self {
            WeightKind::Indicator { r } => {
                if b.abs() <= r {
                    1.0
                } else {
                    f64::INFINITY
                }
            }
            WeightKind::Cosh { r } => (b / r).cosh(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.r();
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "weight half-width R = {r} must be > 0"
            )));
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            WeightKind::Indicator { .. } => "indicator",
            WeightKind::Cosh { .. } => "cosh",
        }
    }
}

/// Singular system (σ_m, φ_m, g_m) of ℱ_c : L²(W) → L²([−1,1]).
#[derive(Debug, Clone)]
pub struct SvdSystem {
    pub c: f64,
    pub weight: WeightKind,
    pub rho: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Legendre coefficients of g_m on [−1, 1].
    pub g_coeffs: Vec<Vec<f64>>,
    /// φ_m sampled on `b_grid`.
    pub phi: Vec<Vec<Complex64>>,
    pub b_grid: Grid,
    /// |‖φ_m‖²_{L²(W)} − 1| before renormalization.
    pub norm_residual: Vec<f64>,
    /// Nyström node count used (cosh weight only).
    pub nystrom_nodes: Option<usize>,
}

impl SvdSystem {
    pub fn order_count(&self) -> usize {
        self.sigma.len()
    }

    pub fn g(&self, m: usize, u: f64) -> f64 {
        legendre_series(&self.g_coeffs[m], u)
    }

    /// g_m tabulated on arbitrary nodes in [−1, 1]; one row per order.
    pub fn g_nodes(&self, nodes: &[f64]) -> Vec<Vec<f64>> {
        (0..self.order_count())
            .map(|m| nodes.iter().map(|&u| self.g(m, u)).collect())
            .collect()
    }

    /// φ_m(b) at an arbitrary point via the adjoint formula.
    pub fn phi_at(&self, m: usize, b: f64) -> Complex64 {
        adjoint_value(self.weight, self.c, &self.g_coeffs[m], self.sigma[m], b)
    }

    /// Largest Legendre degree among the g_m, plus one.
    pub fn max_degree(&self) -> usize {
        self.g_coeffs.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// (1/σ)(1/W(b)) ∫_{−1}^{1} e^{−icbu} g(u) du for a Legendre series g.
pub fn adjoint_value(weight: WeightKind, c: f64, g: &[f64], sigma: f64, b: f64) -> Complex64 {
    let iw = weight.inverse_weight(b);
    if iw == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    legendre_fourier(g, -c * b) * (iw / sigma)
}

/// φ_m on `b_grid` from g_m; returns the renormalized samples and the
/// normalization residual measured by wide-range quadrature.
pub fn adjoint_apply(
    weight: WeightKind,
    c: f64,
    g: &[f64],
    sigma: f64,
    b_grid: &Grid,
) -> Result<(Vec<Complex64>, f64)> {
    if !(sigma > 1e-300) {
        return Err(Error::Numerical(format!(
            "singular value {sigma:e} below underflow guard; order count too large for c = {c}"
        )));
    }
    let norm2 = adjoint_norm_sq(weight, c, g, sigma);
    let scale = 1.0 / norm2.sqrt();
    let phi = b_grid
        .nodes
        .iter()
        .map(|&b| adjoint_value(weight, c, g, sigma, b) * scale)
        .collect();
    Ok((phi, (norm2 - 1.0).abs()))
}

/// ‖(1/σ) ℱ_c* g‖²_{L²(W)} by composite Gauss–Legendre quadrature.
fn adjoint_norm_sq(weight: WeightKind, c: f64, g: &[f64], sigma: f64) -> f64 {
    let r = weight.r();
    let half = match weight {
        WeightKind::Indicator { .. } => r,
        WeightKind::Cosh { .. } => 40.0 * r,
    };
    let width = (1.0 / c.abs()).min(r).min(1.0);
    let panels = ((2.0 * half / width).ceil() as usize).max(4);
    let grid = Grid::composite_gauss(-half, half, panels, 16);
    grid.nodes
        .iter()
        .zip(&grid.weights)
        .map(|(&b, &w)| {
            let v = legendre_fourier(g, -c * b);
            w * v.norm_sqr() * weight.inverse_weight(b)
        })
        .sum::<f64>()
        / (sigma * sigma)
}

fn validate_common(c: f64, m_count: usize, weight: WeightKind) -> Result<()> {
    weight.validate()?;
    if c == 0.0 || !c.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "bandwidth c = {c} must be nonzero"
        )));
    }
    if m_count == 0 {
        return Err(Error::InvalidArgument("order count must be ≥ 1".into()));
    }
    Ok(())
}

/// Number of leading entries above the clipping threshold 1e2·ε·ρ₀.
fn clip_count(rho: &[f64]) -> usize {
    let floor = 1e2 * f64::EPSILON * rho[0];
    rho.iter().take_while(|&&r| r > floor).count().max(1)
}

/// Singular system for W = 1{[−R, R]} from prolates at bandwidth Rc.
pub fn svd_indicator(c: f64, r: f64, m_count: usize, b_grid: &Grid) -> Result<SvdSystem> {
    let weight = WeightKind::Indicator { r };
    validate_common(c, m_count, weight)?;
    let basis = build_prolate_basis(r * c.abs(), m_count, PROLATE_TOL)?;
    let keep = clip_count(&basis.rho);
    let sqrt_r = r.sqrt();
    let mut sigma = Vec::with_capacity(keep);
    let mut phi = Vec::with_capacity(keep);
    for m in 0..keep {
        sigma.push(basis.mu[m].norm() * sqrt_r);
        // φ_m(b) = i^{∓m} ψ_m(b/R)/√R on [−R, R]
        let phase = Complex64::i().powu(m as u32);
        let phase = if c > 0.0 { phase.conj() } else { phase };
        let beta = &basis.legendre_coeffs[m];
        let row = b_grid
            .nodes
            .iter()
            .map(|&b| {
                if b.abs() <= r {
                    phase * (legendre_series(beta, b / r) / sqrt_r)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        phi.push(row);
    }
    Ok(SvdSystem {
        c,
        weight,
        rho: basis.rho[..keep].to_vec(),
        sigma,
        g_coeffs: basis.legendre_coeffs[..keep].to_vec(),
        phi,
        b_grid: b_grid.clone(),
        norm_residual: vec![0.0; keep],
        nystrom_nodes: None,
    })
}

/// Kernel of (|c|/2π) ℱ_c ℱ_c* for W = cosh(·/R).
pub fn cosh_kernel(c: f64, r: f64, u: f64, v: f64) -> f64 {
    let ca = c.abs();
    0.5 * ca * r / (0.5 * PI * r * ca * (u - v)).cosh()
}

struct NystromPairs {
    rho: Vec<f64>,
    /// g values at the full node set, one row per retained order.
    g_vals: Vec<Vec<f64>>,
    parity: Vec<usize>,
}

fn eigen_desc(a: DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>, Vec<usize>)> {
    let eig = SymmetricEigen::try_new(a, 1e-15, 10_000)
        .ok_or_else(|| Error::Eigen("Nyström block".into()))?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    Ok((vals, eig.eigenvectors, order))
}

/// Parity-split Nyström eigenpairs on `n` (odd) Gauss–Legendre nodes.
fn nystrom_cosh(c: f64, r: f64, n: usize, m_count: usize) -> Result<NystromPairs> {
    let (x, w) = gauss_legendre(n);
    let half = n / 2;
    // positive nodes are indices half+1..n, the middle node is 0
    let pos: Vec<usize> = (half + 1..n).collect();
    let sw: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
    let a = |i: usize, j: usize| sw[i] * cosh_kernel(c, r, x[i], x[j]) * sw[j];
    let mirror = |i: usize| n - 1 - i;

    let ne = pos.len() + 1;
    let mut even = DMatrix::<f64>::zeros(ne, ne);
    even[(0, 0)] = a(half, half);
    for (p, &i) in pos.iter().enumerate() {
        let v = 2f64.sqrt() * a(i, half);
        even[(p + 1, 0)] = v;
        even[(0, p + 1)] = v;
        for (q, &j) in pos.iter().enumerate().skip(p) {
            let v = a(i, j) + a(i, mirror(j));
            even[(p + 1, q + 1)] = v;
            even[(q + 1, p + 1)] = v;
        }
    }
    let no = pos.len();
    let mut odd = DMatrix::<f64>::zeros(no, no);
    for (p, &i) in pos.iter().enumerate() {
        for (q, &j) in pos.iter().enumerate().skip(p) {
            let v = a(i, j) - a(i, mirror(j));
            odd[(p, q)] = v;
            odd[(q, p)] = v;
        }
    }
    let (ev, evec, eorder) = eigen_desc(even)?;
    let (ov, ovec, oorder) = eigen_desc(odd)?;
    let top = ev[0].max(ov[0]);
    let neg = ev.iter().chain(&ov).cloned().fold(0.0, f64::min);
    if neg < -1e-10 * top {
        return Err(Error::Numerical(format!(
            "negative Nyström eigenvalue {neg:e}; quadrature too coarse"
        )));
    }
    // merge descending
    let mut merged: Vec<(f64, usize, usize)> = Vec::new();
    merged.extend(ev.iter().enumerate().map(|(k, &v)| (v, 0, k)));
    merged.extend(ov.iter().enumerate().map(|(k, &v)| (v, 1, k)));
    merged.sort_by(|a, b| b.0.total_cmp(&a.0));
    merged.truncate(m_count);

    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut rho = Vec::new();
    let mut g_vals = Vec::new();
    let mut parity = Vec::new();
    for (val, par, k) in merged {
        let mut g = vec![0.0; n];
        if par == 0 {
            let col = eorder[k];
            g[half] = evec[(0, col)] / sw[half];
            for (p, &i) in pos.iter().enumerate() {
                let v = evec[(p + 1, col)] * s2 / sw[i];
                g[i] = v;
                g[mirror(i)] = v;
            }
        } else {
            let col = oorder[k];
            for (p, &i) in pos.iter().enumerate() {
                let v = ovec[(p, col)] * s2 / sw[i];
                g[i] = v;
                g[mirror(i)] = -v;
            }
        }
        rho.push(val);
        g_vals.push(g);
        parity.push(par);
    }
    Ok(NystromPairs {
        rho,
        g_vals,
        parity,
    })
}

/// Legendre coefficients of node values by Gauss–Legendre discrete
/// orthogonality; trailing noise trimmed, wrong parity zeroed.
fn legendre_project(x: &[f64], w: &[f64], vals: &[f64], parity: usize) -> Vec<f64> {
    let n = x.len();
    let mut beta = vec![0.0; n];
    let mut table = vec![0.0; n];
    for i in 0..n {
        legendre_table_into(x[i], &mut table);
        let wv = w[i] * vals[i];
        for k in 0..n {
            beta[k] += wv * table[k];
        }
    }
    for (k, b) in beta.iter_mut().enumerate() {
        if k % 2 != parity {
            *b = 0.0;
        }
    }
    let peak = beta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let last = beta
        .iter()
        .rposition(|v| v.abs() > 1e-15 * peak)
        .unwrap_or(0);
    beta.truncate(last + 1);
    let at_one: f64 = beta
        .iter()
        .enumerate()
        .map(|(k, b)| b * legendre_at_one(k))
        .sum();
    if at_one < 0.0 {
        beta.iter_mut().for_each(|b| *b = -*b);
    }
    beta
}

/// Singular system for W = cosh(·/R) by Nyström discretization.
pub fn svd_cosh(c: f64, r: f64, m_count: usize, b_grid: &Grid) -> Result<SvdSystem> {
    let weight = WeightKind::Cosh { r };
    validate_common(c, m_count, weight)?;
    let mut n = NYSTROM_START;
    let mut prev = nystrom_cosh(c, r, n, m_count)?;
    loop {
        let next_n = 2 * n - 1;
        if next_n > NYSTROM_CAP {
            return Err(Error::Numerical(format!(
                "Nyström eigenvalues did not settle below {NYSTROM_CAP} nodes (c = {c}, R = {r})"
            )));
        }
        let cur = nystrom_cosh(c, r, next_n, m_count)?;
        let moved = prev
            .rho
            .iter()
            .zip(&cur.rho)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        n = next_n;
        prev = cur;
        if moved < NYSTROM_TOL {
            break;
        }
    }
    let keep = clip_count(&prev.rho).min(prev.rho.len());
    let (x, w) = gauss_legendre(n);
    let mut sigma = Vec::with_capacity(keep);
    let mut g_coeffs = Vec::with_capacity(keep);
    let mut phi = Vec::with_capacity(keep);
    let mut residual = Vec::with_capacity(keep);
    for m in 0..keep {
        let beta = legendre_project(&x, &w, &prev.g_vals[m], prev.parity[m]);
        let s = (2.0 * PI * prev.rho[m] / c.abs()).sqrt();
        let (row, res) = adjoint_apply(weight, c, &beta, s, b_grid)?;
        sigma.push(s);
        g_coeffs.push(beta);
        phi.push(row);
        residual.push(res);
    }
    Ok(SvdSystem {
        c,
        weight,
        rho: prev.rho[..keep].to_vec(),
        sigma,
        g_coeffs,
        phi,
        b_grid: b_grid.clone(),
        norm_residual: residual,
        nystrom_nodes: Some(n),
    })
}

pub fn svd_system(weight: WeightKind, c: f64, m_count: usize, b_grid: &Grid) -> Result<SvdSystem> {
    match weight {
        WeightKind::Indicator { r } => svd_indicator(c, r, m_count, b_grid),
        WeightKind::Cosh { r } => svd_cosh(c, r, m_count, b_grid),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QNorm {
    One,
    Inf,
}

impl QNorm {
    /// k_q = 1{q=1} + p·1{q=∞}.
    pub fn k_q(&self, p: usize) -> usize {
        match self {
            QNorm::One => 1,
            QNorm::Inf => p,
        }
    }

    pub fn of(&self, m: &[usize]) -> usize {
        match self {
            QNorm::One => m.iter().sum(),
            QNorm::Inf => m.iter().copied().max().unwrap_or(0),
        }
    }
}

/// Multi-indices m ∈ ℕ₀^p with |m|_q ≤ N, ordered by level then lexicographically.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiIndexSet {
    pub p: usize,
    pub q: QNorm,
    pub n_cut: usize,
    pub members: Vec<Vec<usize>>,
    pub levels: Vec<usize>,
}

impl MultiIndexSet {
    pub fn new(p: usize, q: QNorm, n_cut: usize) -> Self {
        assert!(p >= 1);
        let mut all = Vec::new();
        let mut cur = vec![0usize; p];
        loop {
            if q.of(&cur) <= n_cut {
                all.push(cur.clone());
            }
            // odometer over [0, n_cut]^p
            let mut k = 0;
            loop {
                if k == p {
                    let mut members: Vec<Vec<usize>> = all;
                    members.sort_by(|a, b| q.of(a).cmp(&q.of(b)).then_with(|| a.cmp(b)));
                    let levels = members.iter().map(|m| q.of(m)).collect();
                    return MultiIndexSet {
                        p,
                        q,
                        n_cut,
                        members,
                        levels,
                    };
                }
                cur[k] += 1;
                if cur[k] > n_cut {
                    cur[k] = 0;
                    k += 1;
                } else {
                    break;
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Number of members with level ≤ n (members are level-sorted).
    pub fn count_upto(&self, n: usize) -> usize {
        self.levels.partition_point(|&l| l <= n)
    }
}

/// Tensor-product accessors over identical per-axis systems.
#[derive(Debug, Clone)]
pub struct TensorSystem {
    pub axes: Vec<Arc<SvdSystem>>,
    pub idx: MultiIndexSet,
}

pub fn tensorize(axes: Vec<Arc<SvdSystem>>, idx: MultiIndexSet) -> Result<TensorSystem> {
    if axes.len() != idx.p {
        return Err(Error::InvalidArgument(format!(
            "{} axes for a {}-dimensional index set",
            axes.len(),
            idx.p
        )));
    }
    let first = &axes[0];
    for a in &axes[1..] {
        if a.c != first.c || a.weight != first.weight {
            return Err(Error::InvalidArgument(
                "mismatched axes in tensor product".into(),
            ));
        }
    }
    Ok(TensorSystem { axes, idx })
}

impl TensorSystem {
    /// Whether every axis order of member `j` is available.
    pub fn available(&self, j: usize) -> bool {
        self.idx.members[j]
            .iter()
            .zip(&self.axes)
            .all(|(&m, a)| m < a.order_count())
    }

    pub fn sigma(&self, j: usize) -> f64 {
        self.idx.members[j]
            .iter()
            .zip(&self.axes)
            .map(|(&m, a)| a.sigma[m])
            .product()
    }

    pub fn rho(&self, j: usize) -> f64 {
        self.idx.members[j]
            .iter()
            .zip(&self.axes)
            .map(|(&m, a)| a.rho[m])
            .product()
    }

    pub fn g(&self, j: usize, u: &[f64]) -> f64 {
        self.idx.members[j]
            .iter()
            .zip(&self.axes)
            .zip(u)
            .map(|((&m, a), &x)| a.g(m, x))
            .product()
    }

    /// φ_m at the product b-grid point with per-axis indices `bi`.
    pub fn phi(&self, j: usize, bi: &[usize]) -> Complex64 {
        self.idx.members[j]
            .iter()
            .zip(&self.axes)
            .zip(bi)
            .map(|((&m, a), &i)| a.phi[m][i])
            .product()
    }
}

type Slot = Arc<OnceLock<std::result::Result<Arc<SvdSystem>, Error>>>;

/// Memo of singular systems keyed by |c| quantized to `resolution`.
/// Each bandwidth is built at most once; concurrent requests for the same
/// key wait for the single build.
pub struct SvdCache {
    weight: WeightKind,
    m_count: usize,
    b_grid: Grid,
    resolution: f64,
    slots: Mutex<HashMap<i64, Slot>>,
    builds: AtomicUsize,
}

impl SvdCache {
    pub fn new(weight: WeightKind, m_count: usize, b_grid: Grid) -> Self {
        SvdCache {
            weight,
            m_count,
            b_grid,
            resolution: 1e-9,
            slots: Mutex::new(HashMap::new()),
            builds: AtomicUsize::new(0),
        }
    }

    pub fn weight(&self) -> WeightKind {
        self.weight
    }

    pub fn b_grid(&self) -> &Grid {
        &self.b_grid
    }

    pub fn m_count(&self) -> usize {
        self.m_count
    }

    /// System at bandwidth |c|. For c < 0 callers conjugate φ.
    pub fn get(&self, c: f64) -> Result<Arc<SvdSystem>> {
        let key = (c.abs() / self.resolution).round() as i64;
        let slot = {
            let mut map = self.slots.lock().expect("svd cache poisoned");
            map.entry(key).or_default().clone()
        };
        slot.get_or_init(|| {
            self.builds.fetch_add(1, Ordering::SeqCst);
            log::debug!(
                "building {} singular system at c = {}",
                self.weight.name(),
                key as f64 * self.resolution
            );
            svd_system(
                self.weight,
                key as f64 * self.resolution,
                self.m_count,
                &self.b_grid,
            )
            .map(Arc::new)
        })
        .clone()
    }

    /// Number of systems actually built.
    pub fn builds(&self) -> usize {
        self.builds.load(Ordering::SeqCst)
    }
}
