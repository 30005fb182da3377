//! Periodic grid on [−L, L), real FFTs and surface profiles.
//!
//! All surface fields live in the trigonometric space spanned by the modes
//! |m| < N/2; the Nyquist mode is dropped on construction so that the discrete
//! derivative is exactly skew and every discrete operator built on top of it is
//! exactly symmetric.

use std::f64::consts::PI;
use std::sync::Arc;

use realfft::num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum admissible depth `1 + min η`.
pub const H0: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicGrid {
    /// Domain is x ∈ [−L, L).
    pub half_length: f64,
    /// Number of x nodes N (power of two).
    pub n_modes: usize,
    /// Vertical resolution M; the strip has M + 1 Chebyshev nodes.
    pub n_layers: usize,
}

impl PeriodicGrid {
    pub fn new(half_length: f64, n_modes: usize, n_layers: usize) -> Result<Self> {
        if !(half_length > 0.0 && half_length.is_finite()) {
            return Err(Error::InvalidGrid(format!("half_length must be positive, got {half_length}")));
        }
        if n_modes < 4 || !n_modes.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("n_modes must be a power of two, got {n_modes}")));
        }
        if n_layers < 16 {
            return Err(Error::InvalidGrid(format!("n_layers must be at least 16, got {n_layers}")));
        }
        Ok(Self { half_length, n_modes, n_layers })
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_length / self.n_modes as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        -self.half_length + i as f64 * self.dx()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_modes).map(|i| self.x(i)).collect()
    }

    /// Wavenumber of the m-th stored half-spectrum coefficient, m = 0..=N/2.
    pub fn wavenumber(&self, m: usize) -> f64 {
        m as f64 * PI / self.half_length
    }

    /// Largest retained wavenumber.
    pub fn k_max(&self) -> f64 {
        self.wavenumber(self.n_modes / 2 - 1)
    }
}

/// FFT plans and wavenumbers for one grid. Plans are shared and thread-safe.
#[derive(Clone)]
pub struct Fourier {
    pub grid: PeriodicGrid,
    fwd: Arc<dyn RealToComplex<f64>>,
    inv: Arc<dyn ComplexToReal<f64>>,
    /// Wavenumbers k_m for m = 0..=N/2.
    pub k: Vec<f64>,
}

impl std::fmt::Debug for Fourier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fourier").field("grid", &self.grid).finish()
    }
}

impl Fourier {
    pub fn new(grid: PeriodicGrid) -> Self {
        let mut planner = RealFftPlanner::<f64>::new();
        let n = grid.n_modes;
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let k = (0..=n / 2).map(|m| grid.wavenumber(m)).collect();
        Self { grid, fwd, inv, k }
    }

    pub fn n(&self) -> usize {
        self.grid.n_modes
    }

    pub fn n_half(&self) -> usize {
        self.grid.n_modes / 2 + 1
    }

    /// Normalized coefficients c_m with η(x_i) = Σ c_m e^{i k_m (x_i + L)}, m = 0..=N/2
    /// (negative modes by conjugate symmetry).
    pub fn forward(&self, x: &[f64]) -> Vec<Complex64> {
        let mut input = x.to_vec();
        let mut out = self.fwd.make_output_vec();
        self.fwd.process(&mut input, &mut out).expect("fft length");
        let s = 1.0 / self.n() as f64;
        for c in out.iter_mut() {
            *c *= s;
        }
        out
    }

    /// Inverse of [`Fourier::forward`]. The Nyquist coefficient is ignored.
    pub fn inverse(&self, c: &[Complex64]) -> Vec<f64> {
        let mut spec = c.to_vec();
        let nh = spec.len() - 1;
        spec[0].im = 0.0;
        spec[nh] = Complex64::new(0.0, 0.0);
        let mut out = self.inv.make_output_vec();
        self.inv.process(&mut spec, &mut out).expect("ifft length");
        out
    }

    /// Removes the Nyquist mode.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.inverse(&self.forward(x))
    }

    /// Applies a real even Fourier multiplier `s(k)`.
    pub fn multiplier(&self, x: &[f64], s: impl Fn(f64) -> f64) -> Vec<f64> {
        let mut c = self.forward(x);
        for (ci, &k) in c.iter_mut().zip(&self.k) {
            *ci *= s(k);
        }
        self.inverse(&c)
    }

    /// Spectral derivative.
    pub fn deriv(&self, x: &[f64]) -> Vec<f64> {
        let mut c = self.forward(x);
        for (ci, &k) in c.iter_mut().zip(&self.k) {
            *ci *= Complex64::new(0.0, k);
        }
        self.inverse(&c)
    }

    /// Spectral second derivative.
    pub fn deriv2(&self, x: &[f64]) -> Vec<f64> {
        self.multiplier(x, |k| -k * k)
    }

    /// Sobolev norm squared Σ (1+k²)^s |η̂|² in the continuum normalization
    /// (s = 0 gives the trapezoid L² norm).
    pub fn sobolev_sq(&self, x: &[f64], s: f64) -> f64 {
        let c = self.forward(x);
        self.weighted_sq(&c, |k| (1.0 + k * k).powf(s))
    }

    /// `2L Σ_m w(k_m) |c_m|²` over all modes m ∈ (−N/2, N/2).
    pub fn weighted_sq(&self, c: &[Complex64], w: impl Fn(f64) -> f64) -> f64 {
        let nh = self.n_half() - 1;
        let mut acc = w(0.0) * c[0].norm_sqr();
        for m in 1..nh {
            acc += 2.0 * w(self.k[m]) * c[m].norm_sqr();
        }
        2.0 * self.grid.half_length * acc
    }

    /// Evaluates the trigonometric interpolant at an arbitrary point.
    pub fn interpolate(&self, c: &[Complex64], x: f64) -> f64 {
        let nh = self.n_half() - 1;
        let t = x + self.grid.half_length;
        let mut acc = c[0].re;
        for m in 1..nh {
            let ph = Complex64::from_polar(1.0, self.k[m] * t);
            acc += 2.0 * (c[m] * ph).re;
        }
        acc
    }
}

/// Trapezoid integral on the periodic grid.
pub fn integrate(grid: &PeriodicGrid, x: &[f64]) -> f64 {
    grid.dx() * x.iter().sum::<f64>()
}

/// Trapezoid L² inner product.
pub fn inner(grid: &PeriodicGrid, a: &[f64], b: &[f64]) -> f64 {
    grid.dx() * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
}

/// Trapezoid L² norm.
pub fn norm0(grid: &PeriodicGrid, a: &[f64]) -> f64 {
    inner(grid, a, a).sqrt()
}

/// Surface elevation samples with their Fourier coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceProfile {
    pub grid: PeriodicGrid,
    pub values: Vec<f64>,
    /// Normalized half-spectrum, see [`Fourier::forward`].
    #[serde(skip)]
    pub coeffs: Vec<Complex64>,
}

impl SurfaceProfile {
    /// Builds a profile from nodal values, dropping the Nyquist mode.
    pub fn from_values(fourier: &Fourier, values: Vec<f64>) -> Result<Self> {
        if values.len() != fourier.n() {
            return Err(Error::GridMismatch(format!(
                "expected {} samples, got {}",
                fourier.n(),
                values.len()
            )));
        }
        let mut coeffs = fourier.forward(&values);
        let nh = coeffs.len() - 1;
        coeffs[nh] = Complex64::new(0.0, 0.0);
        coeffs[0].im = 0.0;
        let values = fourier.inverse(&coeffs);
        Ok(Self { grid: fourier.grid, values, coeffs })
    }

    /// Samples `f` at the grid nodes.
    pub fn from_fn(fourier: &Fourier, f: impl Fn(f64) -> f64) -> Self {
        let v = fourier.grid.nodes().into_iter().map(f).collect();
        Self::from_values(fourier, v).expect("length matches by construction")
    }

    pub fn zeros(fourier: &Fourier) -> Self {
        Self::from_fn(fourier, |_| 0.0)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Checks `1 + min η > h₀`.
    pub fn check_depth(&self) -> Result<()> {
        check_depth(&self.values)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

pub(crate) fn check_depth(eta: &[f64]) -> Result<()> {
    let min = eta.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(1.0 + min > H0) {
        return Err(Error::DomainViolation { depth: 1.0 + min, h0: H0 });
    }
    Ok(())
}
