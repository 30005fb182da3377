#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use solwave_core::spectral::{Fourier, PeriodicGrid, SurfaceProfile};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn grid(l: f64, n: usize, m: usize) -> PeriodicGrid {
    PeriodicGrid::new(l, n, m).unwrap()
}

/// A sum of three Gaussian bumps, localized well inside the box, rescaled to
/// the requested H² norm.
pub fn random_bumps(rng: &mut impl Rng, f: &Fourier, h2: f64) -> SurfaceProfile {
    let l = f.grid.half_length;
    let bumps: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| (rng.random_range(-l / 4.0..l / 4.0), rng.random_range(1.0..2.5), rng.random_range(-1.0..1.0)))
        .collect();
    let p = SurfaceProfile::from_fn(f, |x| bumps.iter().map(|(c, w, a)| a * (-((x - c) / w).powi(2)).exp()).sum());
    scale_to(f, &p, h2)
}

pub fn scale_to(f: &Fourier, p: &SurfaceProfile, h2: f64) -> SurfaceProfile {
    let s = h2 / f.sobolev_sq(&p.values, 2.0).sqrt();
    SurfaceProfile::from_values(f, p.values.iter().map(|v| v * s).collect()).unwrap()
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Least-squares slope of log y against log x.
pub fn loglog_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, (x, y)| (a.0 + x.ln(), a.1 + y.ln()));
    let (mx, my) = (sx / n, sy / n);
    let sxx: f64 = pts.iter().map(|(x, _)| (x.ln() - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|(x, y)| (x.ln() - mx) * (y.ln() - my)).sum();
    sxy / sxx
}

/// Richardson-extrapolated central difference of `f` at 0.
pub fn richardson(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    let d1 = (f(h) - f(-h)) / (2.0 * h);
    let d2 = (f(2.0 * h) - f(-2.0 * h)) / (4.0 * h);
    (4.0 * d1 - d2) / 3.0
}
