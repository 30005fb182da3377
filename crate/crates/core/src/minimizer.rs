//! Penalized minimization of 𝒥_μ over the H² ball, and the spectral
//! post-processing used to compare minimizers with the model solitons.

use std::collections::VecDeque;

use realfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dispersion::{f_multiplier, LinearWaveData, Regime};
use crate::error::{Error, Result};
use crate::functionals::{FunctionalBundle, Functionals};
use crate::spectral::{inner, Fourier, PeriodicGrid, SurfaceProfile};

/// ρ(t) = strength·(t − M̃²)³₊/(M² − t) on t = ‖η‖₂².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    /// M.
    pub radius: f64,
    /// M̃.
    pub inner_radius: f64,
    pub strength: f64,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self::new(0.3, 1.0)
    }
}

impl PenaltyConfig {
    /// Inner radius 0.95·M.
    pub fn new(radius: f64, strength: f64) -> Self {
        Self { radius, inner_radius: 0.95 * radius, strength }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.inner_radius && self.inner_radius < self.radius && self.strength > 0.0) {
            return Err(Error::InvalidParams(format!("bad penalty configuration {self:?}")));
        }
        Ok(())
    }
}

/// (ρ(t), ρ′(t)).
pub fn penalty(t: f64, cfg: &PenaltyConfig) -> Result<(f64, f64)> {
    let (m2, mt2) = (cfg.radius * cfg.radius, cfg.inner_radius * cfg.inner_radius);
    if t >= m2 {
        return Err(Error::OutsideBall { t, m2 });
    }
    if t <= mt2 {
        return Ok((0.0, 0.0));
    }
    let (a, b) = (t - mt2, m2 - t);
    let s = cfg.strength;
    Ok((s * a.powi(3) / b, s * (3.0 * a * a * b + a.powi(3)) / (b * b)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Descent {
    /// Steepest descent in the metric (1 + βk²).
    PreconditionedGradient,
    /// Limited-memory BFGS whose initial inverse Hessian is the inverse of the
    /// linearized symbol 1 + βk² − ων − ν²f(k) at the current speed.
    QuasiNewton,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizeConfig {
    pub mu: f64,
    /// Stop when ‖∇𝒥_{ρ,μ}‖₀ ≤ grad_tol.
    pub grad_tol: f64,
    pub max_iter: usize,
    pub descent: Descent,
    /// Momenta visited before `mu`, each started from the previous minimizer.
    pub continuation: Option<Vec<f64>>,
    /// Stored correction pairs for the quasi-Newton update.
    pub memory: usize,
    /// Restrict to profiles even about x = 0, which removes the translation mode.
    pub even: bool,
}

impl MinimizeConfig {
    pub fn new(mu: f64) -> Self {
        Self {
            mu,
            grad_tol: 1e-7 * mu,
            max_iter: 4000,
            descent: Descent::QuasiNewton,
            continuation: None,
            memory: 12,
            even: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.grad_tol > 0.0 && self.max_iter > 0) {
            return Err(Error::InvalidParams(format!(
                "need mu > 0, grad_tol > 0, max_iter > 0 (got {}, {}, {})",
                self.mu, self.grad_tol, self.max_iter
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizerResult {
    pub eta: SurfaceProfile,
    /// 𝒥_μ, its ingredients, the homogeneous parts and ℳ_μ at the final profile.
    pub bundle: FunctionalBundle,
    /// 𝒥_μ + ρ(‖η‖₂²).
    pub objective: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub penalty_active: bool,
    /// (𝒥_{ρ,μ}, ‖∇𝒥_{ρ,μ}‖₀) after every accepted step.
    pub history: Vec<(f64, f64)>,
}

/// Relative size of the rounding noise in 𝒥 (strip solves and quadrature).
pub const NOISE: f64 = 1e-12;

struct Eval {
    eta: Vec<f64>,
    obj: f64,
    grad: Vec<f64>,
    gnorm: f64,
    speed: f64,
    rho: f64,
}

fn even_part(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n).map(|i| 0.5 * (v[i] + v[(n - i) % n])).collect()
}

fn h2_weight(k: f64) -> f64 {
    (1.0 + k * k).powi(2)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(u, v)| a * u + v).collect()
}

struct Problem<'a> {
    func: &'a Functionals,
    pen: PenaltyConfig,
    mu: f64,
    even: bool,
}

impl Problem<'_> {
    fn f(&self) -> &Fourier {
        self.func.fourier()
    }

    fn eval(&self, eta: Vec<f64>) -> Result<Eval> {
        let f = self.f();
        let eta = f.project(&eta);
        let t = f.sobolev_sq(&eta, 2.0);
        let (rho, drho) = penalty(t, &self.pen)?;
        let prof = SurfaceProfile::from_values(f, eta.clone())?;
        let (b, g) = self.func.j_and_grad(self.mu, &prof)?;
        let mut grad = g;
        if drho > 0.0 {
            let w = f.multiplier(&eta, h2_weight);
            grad = axpy(2.0 * drho, &w, &grad);
        }
        if self.even {
            grad = even_part(&grad);
        }
        let grid = &f.grid;
        let gnorm = inner(grid, &grad, &grad).sqrt();
        Ok(Eval { eta, obj: b.j + rho, grad, gnorm, speed: b.speed, rho })
    }
}

/// Minimizes 𝒥_{ρ,μ} from `init`, through the continuation schedule if one is given.
pub fn minimize(
    func: &Functionals,
    cfg: &MinimizeConfig,
    pen: &PenaltyConfig,
    init: &SurfaceProfile,
) -> Result<MinimizerResult> {
    cfg.validate()?;
    pen.validate()?;
    if init.values.iter().all(|v| *v == 0.0) {
        return Err(Error::ZeroProfile);
    }
    let mut start = init.clone();
    let mut total = 0;
    let mut history = Vec::new();
    for &mu in cfg.continuation.iter().flatten() {
        let stage = MinimizeConfig { mu, grad_tol: cfg.grad_tol * mu / cfg.mu, continuation: None, ..cfg.clone() };
        let r = minimize_one(func, &stage, pen, &start)?;
        total += r.iterations;
        history.extend(r.history);
        start = r.eta;
    }
    let mut r = minimize_one(func, cfg, pen, &start)?;
    r.iterations += total;
    history.extend(r.history);
    r.history = history;
    Ok(r)
}

fn minimize_one(
    func: &Functionals,
    cfg: &MinimizeConfig,
    pen: &PenaltyConfig,
    init: &SurfaceProfile,
) -> Result<MinimizerResult> {
    let prob = Problem { func, pen: *pen, mu: cfg.mu, even: cfg.even };
    let f = func.fourier();
    let p = func.params;
    let collapse = 1e-8 * cfg.mu.sqrt();
    let v0 = if cfg.even { even_part(&init.values) } else { init.values.clone() };
    let mut cur = prob.eval(v0)?;

    // Metric symbols for the search direction.
    let sobolev = move |k: f64| 1.0 + p.beta * k * k;
    let nu_ref = cur.speed;
    let linear = move |k: f64| {
        let s = 1.0 + p.beta * k * k;
        (s - p.omega * nu_ref - nu_ref * nu_ref * f_multiplier(k)).max(1e-3 * s)
    };

    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut history = vec![(cur.obj, cur.gnorm)];
    let mut step: f64 = 1.0;
    let mut iterations = 0;
    let mut converged = cur.gnorm <= cfg.grad_tol;

    while !converged && iterations < cfg.max_iter {
        let dir = match cfg.descent {
            Descent::PreconditionedGradient => f.multiplier(&cur.grad, |k| -1.0 / sobolev(k)),
            Descent::QuasiNewton => lbfgs_direction(f, &cur.grad, &mem, &linear),
        };
        let mut dir = if cfg.even { even_part(&dir) } else { dir };
        let mut slope = dot(&cur.grad, &dir);
        if !(slope < 0.0) {
            // Not a descent direction: drop the curvature memory.
            mem.clear();
            dir = f.multiplier(&cur.grad, |k| -1.0 / linear(k));
            slope = dot(&cur.grad, &dir);
        }

        // Keep the first trial step inside a relative trust region.
        let scale = f.sobolev_sq(&cur.eta, 2.0).sqrt();
        let dnorm = f.sobolev_sq(&dir, 2.0).sqrt();
        let mut alpha: f64 = match cfg.descent {
            Descent::QuasiNewton if !mem.is_empty() => 1.0,
            _ => step,
        };
        alpha = alpha.min(0.25 * scale / dnorm.max(1e-300));

        let noise = NOISE * (cur.obj.abs() + cfg.mu);
        let slope0 = slope * f.grid.dx();
        let mut accepted = None;
        for _ in 0..40 {
            let trial = axpy(alpha, &dir, &cur.eta);
            match prob.eval(trial) {
                Ok(e) => {
                    let dj = e.obj - cur.obj;
                    // Below the noise band the change is estimated from the gradients.
                    let dj = if dj.abs() <= noise {
                        0.5 * alpha * (slope0 + dot(&e.grad, &dir) * f.grid.dx())
                    } else {
                        dj
                    };
                    if dj <= 1e-4 * alpha * slope0 && e.obj <= cur.obj + noise {
                        accepted = Some(e);
                        break;
                    }
                }
                Err(Error::OutsideBall { .. }) | Err(Error::DomainViolation { .. }) => {}
                Err(e) => return Err(e),
            }
            alpha *= 0.5;
        }
        let Some(next) = accepted else {
            if !mem.is_empty() {
                mem.clear();
                continue;
            }
            return Err(Error::Diverged(format!(
                "line search exhausted at iteration {iterations}, J = {:e}, |grad| = {:e}",
                cur.obj, cur.gnorm
            )));
        };

        let s: Vec<f64> = next.eta.iter().zip(&cur.eta).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next.grad.iter().zip(&cur.grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            mem.push_back((s, y, 1.0 / sy));
            if mem.len() > cfg.memory {
                mem.pop_front();
            }
        }
        step = (2.0 * alpha).min(1.0);
        cur = next;
        iterations += 1;
        history.push((cur.obj, cur.gnorm));
        if f.sobolev_sq(&cur.eta, 2.0).sqrt() < collapse {
            return Err(Error::CollapsedToZero(f.sobolev_sq(&cur.eta, 2.0).sqrt()));
        }
        converged = cur.gnorm <= cfg.grad_tol;
    }

    let eta = SurfaceProfile::from_values(f, cur.eta.clone())?;
    let bundle = func.eval_j(cfg.mu, &eta, true)?;
    Ok(MinimizerResult {
        eta,
        bundle,
        objective: cur.obj,
        grad_norm: cur.gnorm,
        iterations,
        converged,
        penalty_active: cur.rho > 0.0,
        history,
    })
}

/// Two-loop recursion with the initial inverse Hessian γ·P⁻¹.
fn lbfgs_direction(
    f: &Fourier,
    grad: &[f64],
    mem: &VecDeque<(Vec<f64>, Vec<f64>, f64)>,
    symbol: &impl Fn(f64) -> f64,
) -> Vec<f64> {
    let mut q = grad.to_vec();
    let mut alphas = Vec::with_capacity(mem.len());
    for (s, y, r) in mem.iter().rev() {
        let a = r * dot(s, &q);
        q = axpy(-a, y, &q);
        alphas.push(a);
    }
    let mut z = f.multiplier(&q, |k| 1.0 / symbol(k));
    if let Some((s, y, _)) = mem.back() {
        let hy = f.multiplier(y, |k| 1.0 / symbol(k));
        let gamma = dot(s, y) / dot(y, &hy);
        z.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, r), a) in mem.iter().zip(alphas.iter().rev()) {
        let b = r * dot(y, &z);
        z = axpy(a - b, s, &z);
    }
    z.iter().map(|v| -v).collect()
}

fn carrier_mask(lw: &LinearWaveData, delta0: f64) -> Result<impl Fn(f64) -> bool> {
    let ok = match lw.regime {
        Regime::StrongST => delta0 > 0.0,
        Regime::WeakST => delta0 > 0.0 && delta0 < lw.k0 / 3.0,
    };
    if !(ok && delta0.is_finite()) {
        return Err(Error::BadCutoff(delta0));
    }
    let k0 = lw.k0;
    Ok(move |k: f64| (k.abs() - k0).abs() <= delta0)
}

/// η = η₁ + η₂ with η̂₁ the restriction of η̂ to the carrier set S.
pub fn split_spectrum(
    fourier: &Fourier,
    eta: &SurfaceProfile,
    lw: &LinearWaveData,
    delta0: f64,
) -> Result<(SurfaceProfile, SurfaceProfile)> {
    let inside = carrier_mask(lw, delta0)?;
    let zero = Complex64::new(0.0, 0.0);
    let mut c1 = eta.coeffs.clone();
    let mut c2 = eta.coeffs.clone();
    for (m, &k) in fourier.k.iter().enumerate() {
        if inside(k) {
            c2[m] = zero;
        } else {
            c1[m] = zero;
        }
    }
    let make = |c: Vec<Complex64>| SurfaceProfile { grid: eta.grid, values: fourier.inverse(&c), coeffs: c };
    Ok((make(c1), make(c2)))
}

/// Complex profile φ = re + i·im on a periodic grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexProfile {
    pub grid: PeriodicGrid,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl ComplexProfile {
    pub fn from_real(grid: PeriodicGrid, re: Vec<f64>) -> Self {
        let im = vec![0.0; re.len()];
        Self { grid, re, im }
    }

    pub fn from_fn(grid: PeriodicGrid, f: impl Fn(f64) -> (f64, f64)) -> Self {
        let (re, im) = grid.nodes().into_iter().map(f).unzip();
        Self { grid, re, im }
    }

    /// ∫|φ|². Trapezoid sum.
    pub fn l2_sq(&self) -> f64 {
        self.grid.dx() * self.re.iter().zip(&self.im).map(|(a, b)| a * a + b * b).sum::<f64>()
    }

    /// Normalized full spectrum; wavenumbers from [`full_wavenumbers`].
    fn spectrum(&self) -> Vec<Complex64> {
        let n = self.re.len();
        let mut buf: Vec<Complex64> = self.re.iter().zip(&self.im).map(|(a, b)| Complex64::new(*a, *b)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let s = 1.0 / n as f64;
        buf.iter_mut().for_each(|c| *c *= s);
        buf[n / 2] = Complex64::new(0.0, 0.0);
        buf
    }

    /// ∫(|φ|² + |φ′|²) from the spectrum.
    pub fn h1_sq(&self) -> f64 {
        let c = self.spectrum();
        let k = full_wavenumbers(&self.grid);
        2.0 * self.grid.half_length * c.iter().zip(&k).map(|(c, k)| (1.0 + k * k) * c.norm_sqr()).sum::<f64>()
    }
}

fn full_wavenumbers(grid: &PeriodicGrid) -> Vec<f64> {
    let n = grid.n_modes;
    (0..n)
        .map(|m| {
            let j = if m < n / 2 { m as f64 } else { m as f64 - n as f64 };
            j * std::f64::consts::PI / grid.half_length
        })
        .collect()
}

/// Rescaled long-wave part of a minimizer.
///
/// StrongST: φ(X) = μ^{−2/3}η₁(μ^{−1/3}X). WeakST: φ(X) = 2μ^{−1}η₁⁺(μ^{−1}X)e^{−ik₀x},
/// η₁⁺ the positive-frequency half. The X-grid is the x-grid scaled by
/// μ^{1/3} or μ, so no interpolation is needed.
pub fn extract_envelope(
    fourier: &Fourier,
    eta: &SurfaceProfile,
    mu: f64,
    lw: &LinearWaveData,
    delta0: f64,
) -> Result<ComplexProfile> {
    let (eta1, _) = split_spectrum(fourier, eta, lw, delta0)?;
    let g = eta.grid;
    match lw.regime {
        Regime::StrongST => {
            let grid = PeriodicGrid { half_length: g.half_length * mu.cbrt(), ..g };
            let s = mu.powf(-2.0 / 3.0);
            Ok(ComplexProfile::from_real(grid, eta1.values.iter().map(|v| s * v).collect()))
        }
        Regime::WeakST => {
            let grid = PeriodicGrid { half_length: g.half_length * mu, ..g };
            let n = g.n_modes;
            let nodes = g.nodes();
            let (mut re, mut im) = (vec![0.0; n], vec![0.0; n]);
            for (i, &x) in nodes.iter().enumerate() {
                // η₁⁺(x) = Σ_{m>0} c_m e^{ik_m(x+L)}.
                let t = x + g.half_length;
                let mut acc = Complex64::new(0.0, 0.0);
                for (m, c) in eta1.coeffs.iter().enumerate().skip(1) {
                    if *c != Complex64::new(0.0, 0.0) {
                        acc += c * Complex64::from_polar(1.0, fourier.k[m] * t);
                    }
                }
                let v = acc * Complex64::from_polar(2.0 / mu, -lw.k0 * x);
                re[i] = v.re;
                im[i] = v.im;
            }
            Ok(ComplexProfile { grid, re, im })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlignMode {
    Translate,
    TranslateRotate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    /// min over shifts (and phases) of ‖φ − e^{iθ}ψ(· − shift)‖₁.
    pub distance: f64,
    /// φ ≈ e^{iθ}ψ(x − shift).
    pub shift: f64,
    pub phase: f64,
}

/// H¹ distance between `phi` and the best translate (and phase rotation) of `reference`.
pub fn align_distance(phi: &ComplexProfile, reference: &ComplexProfile, mode: AlignMode) -> Result<Alignment> {
    if phi.grid != reference.grid {
        return Err(Error::GridMismatch("profiles live on different grids".into()));
    }
    let grid = phi.grid;
    let n = grid.n_modes;
    let (a, b) = (phi.spectrum(), reference.spectrum());
    let k = full_wavenumbers(&grid);
    let w: Vec<Complex64> = (0..n).map(|m| a[m].conj() * b[m] * (1.0 + k[m] * k[m])).collect();
    let two_l = 2.0 * grid.half_length;

    // ⟨φ, τ_s ψ⟩₁ = 2L Σ (1+k²) conj(φ̂)ψ̂ e^{−iks} and its first two s-derivatives.
    let corr = |s: f64| -> [Complex64; 3] {
        let mut out = [Complex64::new(0.0, 0.0); 3];
        for (c, &k) in w.iter().zip(&k) {
            let t = c * Complex64::from_polar(two_l, -k * s);
            out[0] += t;
            out[1] += t * Complex64::new(0.0, -k);
            out[2] -= t * (k * k);
        }
        out
    };
    let score = |c: Complex64| match mode {
        AlignMode::Translate => c.re,
        AlignMode::TranslateRotate => c.norm(),
    };

    // Coarse search over grid shifts by one inverse FFT:
    // buf[j] = Σ w_m e^{ik_m j dx}, the correlation at s = −j dx.
    let mut buf: Vec<Complex64> = w.clone();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let mut best = (0.0, f64::NEG_INFINITY);
    for (j, c) in buf.iter().enumerate() {
        let v = score(c * two_l);
        if v > best.1 {
            let jj = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
            best = (-jj * grid.dx(), v);
        }
    }

    // Safeguarded Newton on the derivative of the score within one cell.
    let dx = grid.dx();
    let (lo, hi) = (best.0 - dx, best.0 + dx);
    let mut shift = best.0;
    for _ in 0..60 {
        let [c0, c1, c2] = corr(shift);
        let (d1, d2) = match mode {
            AlignMode::Translate => (c1.re, c2.re),
            AlignMode::TranslateRotate => {
                ((c0.conj() * c1).re, c1.norm_sqr() + (c0.conj() * c2).re)
            }
        };
        if !(d2 < 0.0) {
            break;
        }
        let next = (shift - d1 / d2).clamp(lo, hi);
        let done = (next - shift).abs() <= 1e-15 * (1.0 + shift.abs());
        shift = next;
        if done {
            break;
        }
    }
    let mut cs = corr(shift)[0];
    if score(cs) < best.1 {
        shift = best.0;
        cs = corr(shift)[0];
    }
    let phase = match mode {
        AlignMode::Translate => 0.0,
        AlignMode::TranslateRotate => (-cs.arg()).rem_euclid(2.0 * std::f64::consts::PI),
    };
    let d2 = phi.h1_sq() + reference.h1_sq() - 2.0 * score(cs);
    Ok(Alignment { distance: d2.max(0.0).sqrt(), shift, phase })
}
