//! Quadrature rules and one-dimensional evaluation grids.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on [−1, 1], nodes ascending.
///
/// Newton iteration on the three-term recurrence; exactly mirrored so that
/// `nodes[i] == -nodes[n - 1 - i]` holds bitwise.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() <= 1e-16 * z.abs().max(1.0) {
                let (_, d) = legendre_with_derivative(n, z);
                dp = d;
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        // i-th largest node
        x[n - 1 - i] = z;
        x[i] = -z;
        w[n - 1 - i] = wi;
        w[i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Classical (unnormalized) Legendre P_n(z) and its derivative.
fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * z * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, dp)
}

/// A set of nodes with positive quadrature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Grid {
    /// Uniform grid of `n` points on [lo, hi] with trapezoid weights.
    pub fn uniform(lo: f64, hi: f64, n: usize) -> Self {
        assert!(n >= 2 && hi > lo);
        let h = (hi - lo) / (n - 1) as f64;
        let nodes = (0..n).map(|i| lo + i as f64 * h).collect();
        let mut weights = vec![h; n];
        weights[0] = 0.5 * h;
        weights[n - 1] = 0.5 * h;
        Grid { nodes, weights }
    }

    /// Uniform grid with spacing `step` symmetric about zero covering [−half, half].
    pub fn uniform_symmetric(half: f64, step: f64) -> Self {
        let k = (half / step).round() as usize;
        let n = 2 * k + 1;
        let mut g = Grid::uniform(-(k as f64) * step, k as f64 * step, n);
        // make exact multiples of step
        for (i, x) in g.nodes.iter_mut().enumerate() {
            *x = (i as f64 - k as f64) * step;
        }
        g
    }

    /// Gauss–Legendre rule mapped to [lo, hi].
    pub fn gauss(lo: f64, hi: f64, n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        let m = 0.5 * (hi + lo);
        let r = 0.5 * (hi - lo);
        Grid {
            nodes: x.iter().map(|&t| m + r * t).collect(),
            weights: w.iter().map(|&v| r * v).collect(),
        }
    }

    /// Composite Gauss–Legendre: `panels` equal panels of `order` nodes each.
    pub fn composite_gauss(lo: f64, hi: f64, panels: usize, order: usize) -> Self {
        let (x, w) = gauss_legendre(order);
        let h = (hi - lo) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let a = lo + p as f64 * h;
            for (t, v) in x.iter().zip(&w) {
                nodes.push(a + 0.5 * h * (t + 1.0));
                weights.push(0.5 * h * v);
            }
        }
        Grid { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Nodes are equally spaced (within round-off).
    pub fn is_uniform(&self) -> bool {
        if self.nodes.len() < 3 {
            return true;
        }
        let h = self.nodes[1] - self.nodes[0];
        self.nodes
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs())
    }
}

/// Trapezoid weights with fourth-order Gregory end corrections for `n`
/// equally spaced points of spacing `h`. Falls back to plain trapezoid when
/// `n < 8`.
pub fn gregory_weights(n: usize, h: f64) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        2..=7 => {
            let mut w = vec![h; n];
            w[0] = 0.5 * h;
            w[n - 1] = 0.5 * h;
            w
        }
        _ => {
            let mut w = vec![h; n];
            let ends = [3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0];
            for (i, e) in ends.iter().enumerate() {
                w[i] = e * h;
                w[n - 1 - i] = e * h;
            }
            w
        }
    }
}

/// Plain trapezoid integral of samples on an arbitrary ascending abscissa.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}
