//! Chebyshev–Gauss–Lobatto nodes on [0, 1], differentiation matrix and
//! Clenshaw–Curtis weights.

use std::f64::consts::PI;

use nalgebra::DMatrix;

#[derive(Debug, Clone)]
pub struct Chebyshev {
    /// Nodes y_0 = 0 < … < y_M = 1.
    pub y: Vec<f64>,
    /// Differentiation matrix, row i gives u′(y_i).
    pub d: DMatrix<f64>,
    /// Quadrature weights, Σ w_j = 1.
    pub w: Vec<f64>,
}

impl Chebyshev {
    pub fn new(m: usize) -> Self {
        let n = m + 1;
        let h = PI / (2.0 * m as f64);
        let y: Vec<f64> = (0..n).map(|j| (j as f64 * h).sin().powi(2)).collect();

        // Barycentric differentiation, differences via product formulas to avoid cancellation.
        let lam = |j: usize| {
            let s = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == m {
                0.5 * s
            } else {
                s
            }
        };
        let mut d = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            let mut diag = 0.0;
            for j in 0..n {
                if i == j {
                    continue;
                }
                let diff = ((i + j) as f64 * h).sin() * ((i as f64 - j as f64) * h).sin();
                let v = lam(j) / lam(i) / diff;
                d[(i, j)] = v;
                diag -= v;
            }
            d[(i, i)] = diag;
        }

        Self { y, d, w: clenshaw_curtis(m) }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Clenshaw–Curtis weights for M + 1 Lobatto nodes on [0, 1].
fn clenshaw_curtis(m: usize) -> Vec<f64> {
    let n = m;
    let mut w = vec![0.0; n + 1];
    let nf = n as f64;
    let theta = |j: usize| PI * j as f64 / nf;
    if n % 2 == 0 {
        w[0] = 1.0 / (nf * nf - 1.0);
        w[n] = w[0];
        for (j, wj) in w.iter_mut().enumerate().take(n).skip(1) {
            let mut v = 1.0;
            for k in 1..n / 2 {
                let kf = k as f64;
                v -= 2.0 * (2.0 * kf * theta(j)).cos() / (4.0 * kf * kf - 1.0);
            }
            v -= (nf * theta(j)).cos() / (nf * nf - 1.0);
            *wj = 2.0 * v / nf;
        }
    } else {
        w[0] = 1.0 / (nf * nf);
        w[n] = w[0];
        for (j, wj) in w.iter_mut().enumerate().take(n).skip(1) {
            let mut v = 1.0;
            for k in 1..=(n - 1) / 2 {
                let kf = k as f64;
                v -= 2.0 * (2.0 * kf * theta(j)).cos() / (4.0 * kf * kf - 1.0);
            }
            *wj = 2.0 * v / nf;
        }
    }
    // Map from [−1, 1] to [0, 1].
    w.iter().map(|v| 0.5 * v).collect()
}
