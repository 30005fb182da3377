//! The reduced functionals 𝒢, 𝒦, ℒ and 𝒥_μ, their L² gradients and homogeneous
//! parts, and the reconstruction of the potential trace ξ_η.
//!
//! Integrals are trapezoid sums on the periodic grid. Products are projected
//! onto the retained Fourier modes before any operator is applied, and every
//! gradient is the exact derivative of the discrete value.

use serde::{Deserialize, Serialize};

use crate::dispersion::{f_multiplier, FluidParams};
use crate::error::{Error, Result};
use crate::spectral::{inner, integrate, Fourier, SurfaceProfile};
use crate::strip::{KSolution, Strip, SurfaceOperator};

/// Quadratic, cubic and quartic parts of 𝒢, 𝒦 and ℒ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Parts {
    pub g2: f64,
    pub k2: f64,
    pub l2: f64,
    pub g3: f64,
    pub k3: f64,
    pub l3: f64,
    pub g4: f64,
    pub k4: f64,
    pub l4: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalBundle {
    pub g: f64,
    pub k: f64,
    pub l: f64,
    pub j: f64,
    pub mu: f64,
    /// ν_η = (μ + 𝒢)/ℒ.
    pub speed: f64,
    pub parts: Option<Parts>,
    /// ℳ_μ = 𝒥_μ − 𝒦₂ − (μ + 𝒢₂)²/ℒ₂.
    pub m_mu: Option<f64>,
}

/// Surface elevation with the trace of the potential. On the line the trace of
/// a localized wave tends to different constants at ±∞; it is stored as a
/// periodic part `xi` plus `xi_slope · x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveState {
    pub eta: SurfaceProfile,
    pub xi: SurfaceProfile,
    pub xi_slope: f64,
    pub mu: f64,
}

/// Functionals for one fluid and one discretization.
#[derive(Debug, Clone)]
pub struct Functionals {
    pub strip: Strip,
    pub params: FluidParams,
}

/// Strip solutions shared by the values and gradients.
struct Core<'a> {
    op: SurfaceOperator<'a>,
    sq: Vec<f64>,
    s_eta: KSolution,
    s_sq: KSolution,
}

fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

impl Functionals {
    pub fn new(strip: Strip, params: FluidParams) -> Self {
        Self { strip, params }
    }

    pub fn fourier(&self) -> &Fourier {
        &self.strip.fourier
    }

    fn check_grid(&self, eta: &SurfaceProfile) -> Result<()> {
        if eta.grid != *self.strip.grid() {
            return Err(Error::GridMismatch("profile and strip grids differ".into()));
        }
        Ok(())
    }

    fn core(&self, eta: &SurfaceProfile) -> Result<Core<'_>> {
        self.check_grid(eta)?;
        let op = self.strip.operator(&eta.values)?;
        let sq = self.fourier().project(&mul(&op.eta, &op.eta));
        let s_eta = op.k_solve(&op.eta)?;
        let s_sq = op.k_solve(&sq)?;
        Ok(Core { op, sq, s_eta, s_sq })
    }

    fn values(&self, c: &Core<'_>) -> (f64, f64, f64) {
        let grid = self.strip.grid();
        let (w, b) = (self.params.omega, self.params.beta);
        let e = &c.op.eta;
        let ex = &c.op.eta_x;
        let g = 0.25 * w * inner(grid, &c.sq, &c.s_eta.k_zeta) - 0.25 * w * inner(grid, e, e);
        let local: Vec<f64> = e
            .iter()
            .zip(ex)
            .map(|(h, d)| 0.5 * h * h + b * ((1.0 + d * d).sqrt() - 1.0) + w * w / 6.0 * h * h * h)
            .collect();
        let k = integrate(grid, &local) - w * w / 8.0 * inner(grid, &c.sq, &c.s_sq.k_zeta);
        let l = 0.5 * inner(grid, e, &c.s_eta.k_zeta);
        (g, k, l)
    }

    fn gradients(&self, c: &Core<'_>) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let f = self.fourier();
        let (w, b) = (self.params.omega, self.params.beta);
        let e = &c.op.eta;
        let ke = &c.s_eta.k_zeta;
        let ksq = &c.s_sq.k_zeta;
        let h_sq_e = c.op.hprime_volume(&c.s_sq, &c.s_eta);
        let h_e_e = c.op.hprime_volume(&c.s_eta, &c.s_eta);
        let h_sq_sq = c.op.hprime_volume(&c.s_sq, &c.s_sq);
        let curv: Vec<f64> = c.op.eta_x.iter().map(|d| d / (1.0 + d * d).sqrt()).collect();
        let dcurv = f.deriv(&curv);
        let n = e.len();
        let mut gg = vec![0.0; n];
        let mut gk = vec![0.0; n];
        let mut gl = vec![0.0; n];
        for i in 0..n {
            gg[i] = 0.25 * w * (h_sq_e[i] + ksq[i]) + 0.5 * w * e[i] * ke[i] - 0.5 * w * e[i];
            gl[i] = 0.5 * h_e_e[i] + ke[i];
            gk[i] = e[i] - b * dcurv[i] - w * w / 8.0 * h_sq_sq[i] - 0.5 * w * w * e[i] * ksq[i]
                + 0.5 * w * w * e[i] * e[i];
        }
        (f.project(&gg), f.project(&gk), f.project(&gl))
    }

    /// (𝒢, 𝒦, ℒ).
    pub fn eval_gkl(&self, eta: &SurfaceProfile) -> Result<(f64, f64, f64)> {
        Ok(self.values(&self.core(eta)?))
    }

    /// L² gradients (𝒢′, 𝒦′, ℒ′).
    pub fn grad_gkl(&self, eta: &SurfaceProfile) -> Result<(SurfaceProfile, SurfaceProfile, SurfaceProfile)> {
        let c = self.core(eta)?;
        let (g, k, l) = self.gradients(&c);
        let f = self.fourier();
        Ok((
            SurfaceProfile::from_values(f, g)?,
            SurfaceProfile::from_values(f, k)?,
            SurfaceProfile::from_values(f, l)?,
        ))
    }

    /// Homogeneous parts from the flat multiplier K⁰.
    pub fn eval_parts(&self, eta: &SurfaceProfile) -> Parts {
        let f = self.fourier();
        let grid = self.strip.grid();
        let (w, b) = (self.params.omega, self.params.beta);
        let e = f.project(&eta.values);
        let ex = f.deriv(&e);
        let exx = f.deriv2(&e);
        let k0 = |v: &[f64]| f.multiplier(v, f_multiplier);
        let ke = k0(&e);
        let sq = f.project(&mul(&e, &e));
        let ksq = k0(&sq);
        let eke = f.project(&mul(&e, &ke));
        let k_eke = k0(&eke);
        let int = |v: Vec<f64>| integrate(grid, &v);
        let g2 = -0.25 * w * inner(grid, &e, &e);
        let k2 = int(e.iter().zip(&ex).map(|(h, d)| 0.5 * h * h + 0.5 * b * d * d).collect());
        let l2 = 0.5 * inner(grid, &e, &ke);
        let g3 = 0.25 * w * inner(grid, &sq, &ke);
        let k3 = w * w / 6.0 * int(e.iter().map(|h| h * h * h).collect());
        let l3 = 0.5 * int((0..e.len()).map(|i| -ke[i] * ke[i] * e[i] + ex[i] * ex[i] * e[i]).collect());
        let g4 = 0.5 * w * int((0..e.len()).map(|i| e[i] * e[i] * ex[i] * ex[i]).collect())
            - 0.25 * w * inner(grid, &sq, &k_eke);
        let k4 = -b / 8.0 * int(ex.iter().map(|d| d.powi(4)).collect()) - w * w / 8.0 * inner(grid, &sq, &ksq);
        let l4 = 0.5 * int((0..e.len()).map(|i| k_eke[i] * eke[i] + ke[i] * e[i] * e[i] * exx[i]).collect());
        Parts { g2, k2, l2, g3, k3, l3, g4, k4, l4 }
    }

    /// L² gradients of the cubic parts (𝒢₃′, 𝒦₃′, ℒ₃′).
    pub fn grad_cubic_parts(&self, eta: &SurfaceProfile) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let f = self.fourier();
        let w = self.params.omega;
        let e = f.project(&eta.values);
        let ex = f.deriv(&e);
        let k0 = |v: &[f64]| f.multiplier(v, f_multiplier);
        let ke = k0(&e);
        let ksq = k0(&mul(&e, &e));
        let k_eke = k0(&mul(&e, &ke));
        let d_eex = f.deriv(&mul(&e, &ex));
        let n = e.len();
        let g3: Vec<f64> = (0..n).map(|i| 0.25 * w * (2.0 * e[i] * ke[i] + ksq[i])).collect();
        let k3: Vec<f64> = e.iter().map(|h| 0.5 * w * w * h * h).collect();
        let l3: Vec<f64> =
            (0..n).map(|i| 0.5 * (-2.0 * k_eke[i] - ke[i] * ke[i] + ex[i] * ex[i] - 2.0 * d_eex[i])).collect();
        (f.project(&g3), f.project(&k3), f.project(&l3))
    }

    fn bundle(&self, mu: f64, c: &Core<'_>, eta: &SurfaceProfile, with_parts: bool) -> Result<FunctionalBundle> {
        let (g, k, l) = self.values(c);
        if !(l > 0.0) {
            return Err(Error::ZeroProfile);
        }
        let speed = (mu + g) / l;
        let j = k + (mu + g) * speed;
        let (parts, m_mu) = if with_parts {
            let p = self.eval_parts(eta);
            // ℳ_μ rearranged so that only the small differences 𝒦 − 𝒦₂,
            // 𝒢 − 𝒢₂ and ℒ − ℒ₂ are formed by subtraction.
            let (a, bb) = (mu + g, mu + p.g2);
            let quot = ((g - p.g2) * (a + bb) * p.l2 - bb * bb * (l - p.l2)) / (l * p.l2);
            (Some(p), Some((k - p.k2) + quot))
        } else {
            (None, None)
        };
        Ok(FunctionalBundle { g, k, l, j, mu, speed, parts, m_mu })
    }

    fn check_nonzero(eta: &SurfaceProfile) -> Result<()> {
        if eta.values.iter().all(|v| *v == 0.0) {
            return Err(Error::ZeroProfile);
        }
        Ok(())
    }

    /// 𝒥_μ(η) = 𝒦 + (μ + 𝒢)²/ℒ with the wave speed; optionally the parts and ℳ_μ.
    pub fn eval_j(&self, mu: f64, eta: &SurfaceProfile, with_parts: bool) -> Result<FunctionalBundle> {
        Self::check_nonzero(eta)?;
        let c = self.core(eta)?;
        self.bundle(mu, &c, eta, with_parts)
    }

    /// 𝒥_μ and its L² gradient 𝒦′ + 2ν𝒢′ − ν²ℒ′ from one pair of strip solves.
    pub fn j_and_grad(&self, mu: f64, eta: &SurfaceProfile) -> Result<(FunctionalBundle, Vec<f64>)> {
        Self::check_nonzero(eta)?;
        let c = self.core(eta)?;
        let b = self.bundle(mu, &c, eta, false)?;
        let (gg, gk, gl) = self.gradients(&c);
        let nu = b.speed;
        let grad = (0..gg.len()).map(|i| gk[i] + 2.0 * nu * gg[i] - nu * nu * gl[i]).collect();
        Ok((b, grad))
    }

    pub fn grad_j(&self, mu: f64, eta: &SurfaceProfile) -> Result<SurfaceProfile> {
        let (_, g) = self.j_and_grad(mu, eta)?;
        SurfaceProfile::from_values(self.fourier(), g)
    }

    /// ξ_η = N(η)ψ′ with ψ = ν_η η − (ω/2)η².
    pub fn xi_from_eta(&self, mu: f64, eta: &SurfaceProfile) -> Result<WaveState> {
        let b = self.eval_j(mu, eta, false)?;
        let f = self.fourier();
        let op = self.strip.operator(&eta.values)?;
        let sq = f.project(&mul(&op.eta, &op.eta));
        let psi: Vec<f64> = op.eta.iter().zip(&sq).map(|(h, s)| b.speed * h - 0.5 * self.params.omega * s).collect();
        let (xi, slope) = op.nd_line(&psi)?;
        Ok(WaveState {
            eta: SurfaceProfile::from_values(f, op.eta.clone())?,
            xi: SurfaceProfile::from_values(f, xi)?,
            xi_slope: slope,
            mu,
        })
    }

    /// (ℋ, ℐ) for a state whose trace is `xi + xi_slope · x`.
    pub fn eval_hi(&self, state: &WaveState) -> Result<(f64, f64)> {
        self.check_grid(&state.eta)?;
        let f = self.fourier();
        let grid = self.strip.grid();
        let (w, b) = (self.params.omega, self.params.beta);
        let op = self.strip.operator(&state.eta.values)?;
        let e = &op.eta;
        let xi_full: Vec<f64> =
            state.xi.values.iter().zip(grid.nodes()).map(|(v, x)| v + state.xi_slope * x).collect();
        let g_xi = op.dn_ramp(&state.xi.values, state.xi_slope)?;
        let d_sq = f.deriv(&f.project(&mul(e, e)));
        let local: Vec<f64> = e
            .iter()
            .zip(&op.eta_x)
            .map(|(h, d)| w * w / 6.0 * h * h * h + 0.5 * h * h + b * ((1.0 + d * d).sqrt() - 1.0))
            .collect();
        let h = 0.5 * inner(grid, &xi_full, &g_xi) + 0.5 * w * inner(grid, &xi_full, &d_sq) + integrate(grid, &local);
        let i = inner(grid, &xi_full, &op.eta_x) + 0.5 * w * inner(grid, e, e);
        Ok((h, i))
    }
}

/// |||η|||_α with |||η|||²_α = ∫ (1 + μ^{−4α}(|k| − k₀)⁴)|η̂|² over the discrete spectrum.
pub fn weighted_norm(fourier: &Fourier, eta: &SurfaceProfile, alpha: f64, mu: f64, k0: f64) -> f64 {
    let s = mu.powf(-4.0 * alpha);
    fourier.weighted_sq(&fourier.forward(&eta.values), |k| 1.0 + s * (k.abs() - k0).powi(4)).sqrt()
}
