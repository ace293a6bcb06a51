//! Normalized Legendre polynomials and spherical Bessel functions.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Recurrence coefficient a_k with t·P̄_k = a_k P̄_{k+1} + a_{k−1} P̄_{k−1}.
#[inline]
pub fn legendre_a(k: usize) -> f64 {
    let k = k as f64;
    (k + 1.0) / ((2.0 * k + 1.0) * (2.0 * k + 3.0)).sqrt()
}

/// L²-normalized Legendre polynomial P̄_n(x) = √(n+½)·P_n(x).
pub fn legendre_eval(n: usize, x: f64) -> Result<f64> {
    if !(x.abs() <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "Legendre argument {x} outside [-1, 1]"
        )));
    }
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return Ok(std::f64::consts::FRAC_1_SQRT_2);
    }
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    Ok(p1 * (n as f64 + 0.5).sqrt())
}

/// Table P̄_0(x), …, P̄_{len−1}(x) written into `out` (no range check).
pub fn legendre_table_into(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = std::f64::consts::FRAC_1_SQRT_2;
    if out.len() == 1 {
        return;
    }
    out[1] = x * out[0] / legendre_a(0);
    for k in 1..out.len() - 1 {
        out[k + 1] = (x * out[k] - legendre_a(k - 1) * out[k - 1]) / legendre_a(k);
    }
}

pub fn legendre_table(x: f64, len: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    legendre_table_into(x, &mut v);
    v
}

/// Evaluate Σ β_k P̄_k(x) for |x| ≤ 1 by Clenshaw summation.
pub fn legendre_series(beta: &[f64], x: f64) -> f64 {
    // P̄_{k+1} = (x P̄_k − a_{k−1} P̄_{k−1}) / a_k
    let n = beta.len();
    if n == 0 {
        return 0.0;
    }
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for k in (0..n).rev() {
        let alpha = x / legendre_a(k);
        let beta_next = if k + 1 < n {
            legendre_a(k) / legendre_a(k + 1)
        } else {
            0.0
        };
        let b0 = beta[k] + alpha * b1 - beta_next * b2;
        b2 = b1;
        b1 = b0;
    }
    b1 * std::f64::consts::FRAC_1_SQRT_2
}

/// Values P̄_k(1) = √(k+½).
#[inline]
pub fn legendre_at_one(k: usize) -> f64 {
    (k as f64 + 0.5).sqrt()
}

/// Spherical Bessel functions j_0(x), …, j_kmax(x).
///
/// Upward recurrence where it is stable (k < |x|), Miller's downward
/// recurrence normalized by Σ(2k+1)j_k² = 1 otherwise.
pub fn spherical_bessel_seq(x: f64, kmax: usize) -> Vec<f64> {
    let mut out = vec![0.0; kmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let ax = x.abs();
    if (kmax as f64) < ax {
        out[0] = ax.sin() / ax;
        if kmax >= 1 {
            out[1] = ax.sin() / (ax * ax) - ax.cos() / ax;
        }
        for k in 1..kmax {
            out[k + 1] = (2.0 * k as f64 + 1.0) / ax * out[k] - out[k - 1];
        }
    } else {
        let start = kmax + 40 + (ax.sqrt() * 4.0) as usize;
        let mut f_next = 0.0;
        let mut f = 1e-300_f64.sqrt();
        let mut full = vec![0.0; start + 1];
        full[start] = f;
        for k in (1..=start).rev() {
            let f_prev = (2.0 * k as f64 + 1.0) / ax * f - f_next;
            f_next = f;
            f = f_prev;
            full[k - 1] = f;
            if f.abs() > 1e100 {
                for v in full[k - 1..].iter_mut() {
                    *v *= 1e-100;
                }
                f *= 1e-100;
                f_next *= 1e-100;
            }
        }
        let s: f64 = full
            .iter()
            .enumerate()
            .map(|(k, v)| (2.0 * k as f64 + 1.0) * v * v)
            .sum();
        let mut scale = 1.0 / s.sqrt();
        // sign from the closed forms of j_0 and j_1
        let j0 = ax.sin() / ax;
        let j1 = ax.sin() / (ax * ax) - ax.cos() / ax;
        let sign = if j0.abs() >= j1.abs() {
            j0.signum() * full[0].signum()
        } else {
            j1.signum() * full[1].signum()
        };
        scale *= sign;
        for k in 0..=kmax {
            out[k] = full[k] * scale;
        }
    }
    if x < 0.0 {
        for (k, v) in out.iter_mut().enumerate() {
            if k % 2 == 1 {
                *v = -*v;
            }
        }
    }
    out
}

/// ∫_{−1}^{1} e^{iωu} Σ_k β_k P̄_k(u) du via 2 i^k √(k+½) j_k(ω).
pub fn legendre_fourier(beta: &[f64], omega: f64) -> Complex64 {
    if beta.is_empty() {
        return Complex64::new(0.0, 0.0);
    }
    let j = spherical_bessel_seq(omega, beta.len() - 1);
    let mut re = 0.0;
    let mut im = 0.0;
    for (k, (&b, &jk)) in beta.iter().zip(&j).enumerate() {
        let v = 2.0 * b * legendre_at_one(k) * jk;
        match k % 4 {
            0 => re += v,
            1 => im += v,
            2 => re -= v,
            _ => im -= v,
        }
    }
    Complex64::new(re, im)
}
