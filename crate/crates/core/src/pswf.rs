//! Prolate spheroidal wave functions on [−1, 1] and their extension to ℝ.
//!
//! The functions are expanded on normalized Legendre polynomials; the
//! coefficients are eigenvectors of the even and odd tridiagonal blocks of
//! the commuting differential operator.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;
use crate::special::{legendre_a, legendre_at_one, legendre_fourier, legendre_series};

const K_CAP: usize = 8192;
const EXTENSION_TOL: f64 = 1e-8;
const RHO_MAX: f64 = 1.0 - f64::EPSILON / 2.0;

#[derive(Debug, Clone)]
pub struct ProlateBasis {
    pub c: f64,
    /// Legendre coefficients, one row per order; wrong-parity entries are 0.
    pub legendre_coeffs: Vec<Vec<f64>>,
    pub mu: Vec<Complex64>,
    pub rho: Vec<f64>,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl ProlateBasis {
    pub fn order_count(&self) -> usize {
        self.rho.len()
    }

    pub fn truncation(&self) -> usize {
        self.legendre_coeffs.first().map_or(0, Vec::len)
    }

    /// ψ_m(x) on ℝ; uses the Legendre expansion on [−1,1] and the
    /// Fourier image of the expansion outside.
    pub fn eval(&self, m: usize, x: f64) -> Result<f64> {
        if m >= self.order_count() {
            return Err(Error::OrderOutOfRange {
                m,
                available: self.order_count(),
            });
        }
        let beta = &self.legendre_coeffs[m];
        if x.abs() <= 1.0 {
            return Ok(legendre_series(beta, x));
        }
        let v = legendre_fourier(beta, self.c * x) / self.mu[m];
        let residual = v.im.abs() / (1.0 + v.re.abs());
        if residual > EXTENSION_TOL {
            return Err(Error::ExtensionResidual { x, residual });
        }
        Ok(v.re)
    }

    /// ∫_{−1}^{1} e^{iωt} ψ_m(t) dt.
    pub fn fourier(&self, m: usize, omega: f64) -> Complex64 {
        legendre_fourier(&self.legendre_coeffs[m], omega)
    }
}

/// Legendre-basis entries of −d/dx(1−x²)d/dx + c²x².
fn block_matrix(c: f64, parity: usize, size: usize) -> DMatrix<f64> {
    let c2 = c * c;
    let mut a = DMatrix::<f64>::zeros(size, size);
    for i in 0..size {
        let k = 2 * i + parity;
        let kf = k as f64;
        let x2 = legendre_a(k).powi(2)
            + if k > 0 {
                legendre_a(k - 1).powi(2)
            } else {
                0.0
            };
        a[(i, i)] = kf * (kf + 1.0) + c2 * x2;
        if i + 1 < size {
            let off = c2 * legendre_a(k) * legendre_a(k + 1);
            a[(i, i + 1)] = off;
            a[(i + 1, i)] = off;
        }
    }
    a
}

/// First `count` eigenvectors (ascending eigenvalue) of one parity block,
/// returned as full-length Legendre coefficient vectors of length `k_len`.
fn block_vectors(c: f64, parity: usize, k_len: usize, count: usize) -> Result<Vec<Vec<f64>>> {
    let size = (k_len - parity).div_ceil(2);
    if count > size {
        return Err(Error::Numerical("parity block too small".into()));
    }
    let a = block_matrix(c, parity, size);
    let eig = SymmetricEigen::try_new(a, 1e-15, 10_000)
        .ok_or_else(|| Error::Eigen(format!("tridiagonal block, c = {c}")))?;
    let mut order: Vec<usize> = (0..size).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let mut out = Vec::with_capacity(count);
    for &col in order.iter().take(count) {
        let mut beta = vec![0.0; k_len];
        for i in 0..size {
            beta[2 * i + parity] = eig.eigenvectors[(i, col)];
        }
        let at_one: f64 = beta
            .iter()
            .enumerate()
            .map(|(k, b)| b * legendre_at_one(k))
            .sum();
        if at_one < 0.0 {
            beta.iter_mut().for_each(|b| *b = -*b);
        }
        out.push(beta);
    }
    Ok(out)
}

/// ∫ψ'_m ψ_{m+1} from Legendre coefficients, using
/// P̄'_k = Σ_{j<k, j≢k} 2√((k+½)(j+½)) P̄_j.
fn derivative_overlap(bm: &[f64], bn: &[f64]) -> f64 {
    let k_len = bm.len();
    // suffix[j] = Σ_{k>j, k≡j+1 (mod 2)} √(k+½) β^m_k
    let mut suffix = vec![0.0; k_len + 2];
    for j in (0..k_len).rev() {
        let next = j + 1;
        let term = if next < k_len {
            legendre_at_one(next) * bm[next]
        } else {
            0.0
        };
        suffix[j] = term + suffix[j + 2];
    }
    (0..k_len)
        .map(|j| 2.0 * legendre_at_one(j) * bn[j] * suffix[j])
        .sum()
}

/// ∫ t ψ_m ψ_{m+1} from Legendre coefficients.
fn position_overlap(bm: &[f64], bn: &[f64]) -> f64 {
    let k_len = bm.len();
    let mut s = 0.0;
    for k in 0..k_len {
        if bm[k] == 0.0 {
            continue;
        }
        let mut v = 0.0;
        if k + 1 < k_len {
            v += legendre_a(k) * bn[k + 1];
        }
        if k > 0 {
            v += legendre_a(k - 1) * bn[k - 1];
        }
        s += bm[k] * v;
    }
    s
}

/// P̄_k(0) for even k (zero for odd k).
fn legendre_at_zero(k_len: usize) -> Vec<f64> {
    let mut v = vec![0.0; k_len];
    // classical P_{2j}(0) = (−1)^j (2j−1)!!/(2j)!!
    let mut p = 1.0;
    for k in (0..k_len).step_by(2) {
        if k > 0 {
            p *= -((k - 1) as f64) / k as f64;
        }
        v[k] = p * legendre_at_one(k);
    }
    v
}

/// μ_m from the ratio chain μ_{m+1} = μ_m ∫ψ'_mψ_{m+1} / (ic ∫tψ_mψ_{m+1}).
fn eigenvalues_mu(c: f64, coeffs: &[Vec<f64>]) -> Vec<Complex64> {
    let k_len = coeffs[0].len();
    let p0 = legendre_at_zero(k_len);
    let psi0_at_zero: f64 = coeffs[0].iter().zip(&p0).map(|(b, p)| b * p).sum();
    let mut mu = Vec::with_capacity(coeffs.len());
    mu.push(Complex64::new(
        2f64.sqrt() * coeffs[0][0] / psi0_at_zero,
        0.0,
    ));
    for m in 0..coeffs.len() - 1 {
        let i1 = derivative_overlap(&coeffs[m], &coeffs[m + 1]);
        let i2 = position_overlap(&coeffs[m], &coeffs[m + 1]);
        let next = mu[m] * Complex64::new(0.0, -i1 / (c * i2));
        mu.push(next);
    }
    mu
}

/// Build the first `m_count` prolate functions at bandwidth `c`.
pub fn build_prolate_basis(c: f64, m_count: usize, tol: f64) -> Result<ProlateBasis> {
    if c == 0.0 || !c.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "bandwidth c = {c} must be nonzero"
        )));
    }
    if m_count == 0 || !(tol > 0.0) {
        return Err(Error::InvalidArgument("need M ≥ 1 and tol > 0".into()));
    }
    let ca = c.abs();
    let mut k_len = 2 * ca.ceil() as usize + m_count + 30;
    loop {
        let even = block_vectors(ca, 0, k_len, m_count.div_ceil(2))?;
        let odd = block_vectors(ca, 1, k_len, m_count / 2)?;
        let mut coeffs = Vec::with_capacity(m_count);
        for m in 0..m_count {
            coeffs.push(if m % 2 == 0 {
                even[m / 2].clone()
            } else {
                odd[m / 2].clone()
            });
        }
        let tail_ok = coeffs
            .iter()
            .all(|b| b[k_len - 4..].iter().all(|v| v.abs() < tol));
        if tail_ok {
            let mut mu = eigenvalues_mu(ca, &coeffs);
            if c < 0.0 {
                mu.iter_mut().for_each(|z| *z = z.conj());
            }
            // round-off can push ρ₀ a few ulps past 1 at large bandwidth
            let rho = mu
                .iter()
                .map(|z| (ca * z.norm_sqr() / (2.0 * PI)).min(RHO_MAX))
                .collect();
            let (nodes, weights) = gauss_legendre(k_len.max(200));
            return Ok(ProlateBasis {
                c,
                legendre_coeffs: coeffs,
                mu,
                rho,
                nodes,
                weights,
            });
        }
        k_len *= 2;
        if k_len > K_CAP {
            return Err(Error::TruncationCap { cap: K_CAP, tol });
        }
    }
}
