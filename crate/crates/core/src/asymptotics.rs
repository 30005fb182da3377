//! Model solitary waves of the KdV and NLS limits, the coefficients of the
//! cubic and quartic reductions, a focusing certificate and explicit test
//! functions for the upper bound on the minimum.

use serde::{Deserialize, Serialize};

use crate::dispersion::{beta_critical, f_multiplier, f_prime, g_dispersion, solve_bifurcation, FluidParams, LinearWaveData, Regime};
use crate::error::{Error, Result};
use crate::functionals::Functionals;
use crate::spectral::{integrate, Fourier, SurfaceProfile};

/// `amplitude · sech^power(rate · x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SechProfile {
    pub amplitude: f64,
    pub rate: f64,
    pub power: i32,
}

impl SechProfile {
    pub fn value(&self, x: f64) -> f64 {
        self.amplitude * sech(self.rate * x).powi(self.power)
    }

    pub fn deriv(&self, x: f64) -> f64 {
        let (s, t) = (sech(self.rate * x), (self.rate * x).tanh());
        -(self.power as f64) * self.rate * self.amplitude * s.powi(self.power) * t
    }

    pub fn deriv2(&self, x: f64) -> f64 {
        let p = self.power as f64;
        let s = sech(self.rate * x);
        let sp = s.powi(self.power);
        self.amplitude * self.rate * self.rate * (p * p * sp - (p * p + p) * sp * s * s)
    }
}

fn sech(x: f64) -> f64 {
    // cosh overflows near 710; sech is zero there anyway.
    let a = x.abs();
    if a > 700.0 {
        0.0
    } else {
        2.0 * (-a).exp() / (1.0 + (-2.0 * a).exp())
    }
}

/// KdV soliton with its variational constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KdVData {
    pub nu_kdv: f64,
    pub c_kdv: f64,
    pub alpha_kdv: f64,
    pub profile: SechProfile,
    /// β − ν₀²/3.
    pub dispersion: f64,
    /// ω²/3 + 1.
    pub nonlinearity: f64,
    pub nu0: f64,
    pub omega: f64,
}

impl KdVData {
    /// `½∫((β−ν₀²/3)φ′² + (ω²/3+1)φ³)` with spectral derivatives.
    pub fn energy(&self, f: &Fourier, phi: &[f64]) -> f64 {
        let d = f.deriv(phi);
        let dens: Vec<f64> = phi
            .iter()
            .zip(&d)
            .map(|(p, dp)| 0.5 * (self.dispersion * dp * dp + self.nonlinearity * p * p * p))
            .collect();
        integrate(&f.grid, &dens)
    }

    /// Residual of `−(β−ν₀²/3)φ″ − 2ν_KdV φ + (3/2)(ω²/3+1)φ²` at x.
    pub fn ode_residual(&self, x: f64) -> f64 {
        let p = self.profile.value(x);
        -self.dispersion * self.profile.deriv2(x) - 2.0 * self.nu_kdv * p + 1.5 * self.nonlinearity * p * p
    }

    /// Leading-order wave speed at momentum μ.
    pub fn speed(&self, mu: f64) -> f64 {
        self.nu0 + self.speed_defect_coefficient() * mu.powf(2.0 / 3.0)
    }

    /// Limit of (ν_μ − ν₀)/μ^{2/3}.
    pub fn speed_defect_coefficient(&self) -> f64 {
        2.0 * self.nu_kdv / (self.omega * self.omega + 4.0).sqrt()
    }
}

/// NLS envelope soliton with its variational constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NLSData {
    pub nu_nls: f64,
    pub c_nls: f64,
    pub alpha_nls: f64,
    /// g″(k₀).
    pub g2: f64,
    /// A₃/2 + A₄.
    pub focusing: f64,
    pub profile: SechProfile,
    pub nu0: f64,
    pub k0: f64,
    pub omega: f64,
}

impl NLSData {
    /// `∫(⅛g″|φ′|² + ⅜(A₃/2+A₄)|φ|⁴)` for φ = re + i·im.
    pub fn energy(&self, f: &Fourier, re: &[f64], im: Option<&[f64]>) -> f64 {
        let zero = vec![0.0; re.len()];
        let im = im.unwrap_or(&zero);
        let (dr, di) = (f.deriv(re), f.deriv(im));
        let dens: Vec<f64> = (0..re.len())
            .map(|i| {
                let m2 = re[i] * re[i] + im[i] * im[i];
                0.125 * self.g2 * (dr[i] * dr[i] + di[i] * di[i]) + 0.375 * self.focusing * m2 * m2
            })
            .collect();
        integrate(&f.grid, &dens)
    }

    /// Residual of `−¼g″φ″ − 2ν_NLS φ + (3/2)(A₃/2+A₄)φ³` at x.
    pub fn ode_residual(&self, x: f64) -> f64 {
        let p = self.profile.value(x);
        -0.25 * self.g2 * self.profile.deriv2(x) - 2.0 * self.nu_nls * p + 1.5 * self.focusing * p * p * p
    }

    pub fn speed(&self, mu: f64) -> f64 {
        self.nu0 + self.speed_defect_coefficient() * mu * mu
    }

    /// Limit of (ν_μ − ν₀)/μ².
    pub fn speed_defect_coefficient(&self) -> f64 {
        4.0 * self.nu_nls / (self.omega + 2.0 * self.nu0 * f_multiplier(self.k0))
    }
}

/// Coefficients of the cubic and quartic reductions at the carrier k₀.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSet {
    pub a31: f64,
    pub a32: f64,
    pub a3: f64,
    pub a41: f64,
    pub a42: f64,
    pub a43: f64,
    pub a4: f64,
    /// A₄¹ with the extra factor ω on the surface-tension term, as it is
    /// sometimes quoted. The quartic oracle selects `a41`.
    pub a41_alt: f64,
}

impl CoefficientSet {
    pub fn focusing(&self) -> f64 {
        0.5 * self.a3 + self.a4
    }

    /// A₃ + 2A₄.
    pub fn margin(&self) -> f64 {
        self.a3 + 2.0 * self.a4
    }
}

fn require(lw: &LinearWaveData, r: Regime) -> Result<()> {
    if lw.regime != r {
        let expected = match r {
            Regime::StrongST => "strong surface tension",
            Regime::WeakST => "weak surface tension",
        };
        return Err(Error::WrongRegime { expected });
    }
    Ok(())
}

pub fn kdv_data(p: &FluidParams, lw: &LinearWaveData) -> Result<KdVData> {
    require(lw, Regime::StrongST)?;
    let (w, b, nu0) = (p.omega, p.beta, lw.nu0);
    let disp = b - nu0 * nu0 / 3.0;
    let nonlin = w * w / 3.0 + 1.0;
    let w4 = w * w + 4.0;
    let r: f64 = 3.0 / 16.0;
    let nu_kdv = -2.0 * r.powf(2.0 / 3.0) * nonlin.powf(4.0 / 3.0) / (disp.cbrt() * w4.cbrt());
    let amplitude = -3f64.sqrt() * r.powf(1.0 / 6.0) * nonlin.cbrt() / (disp.cbrt() * w4.cbrt());
    let rate = r.cbrt() * nonlin.powf(2.0 / 3.0) / (disp.powf(2.0 / 3.0) * w4.powf(1.0 / 6.0));
    let c_kdv = -1.8 * (2f64 / 3.0).cbrt() * nonlin.powf(4.0 / 3.0) / (disp.cbrt() * w4.powf(5.0 / 6.0));
    Ok(KdVData {
        nu_kdv,
        c_kdv,
        alpha_kdv: 2.0 / w4.sqrt(),
        profile: SechProfile { amplitude, rate, power: 2 },
        dispersion: disp,
        nonlinearity: nonlin,
        nu0,
        omega: w,
    })
}

pub fn coefficients(p: &FluidParams, lw: &LinearWaveData) -> Result<CoefficientSet> {
    require(lw, Regime::WeakST)?;
    let (w, b, k0, nu0) = (p.omega, p.beta, lw.k0, lw.nu0);
    let f1 = f_multiplier(k0);
    let f2 = f_multiplier(2.0 * k0);
    let (k2, n2) = (k0 * k0, nu0 * nu0);

    let a31 = 0.5 * w * nu0 * f2 + w * nu0 * f1 + 0.5 * w * w + n2 * f2 * f1 + 0.5 * n2 * f1 * f1 - 1.5 * k2 * n2;
    let a32 = 0.5 * w * nu0 + w * nu0 * f1 + 0.5 * w * w + n2 * f1 + 0.5 * n2 * f1 * f1 - 0.5 * n2 * k2;
    let a3 = -a31 * a31 / (3.0 * g_dispersion(2.0 * k0, lw)) - 2.0 * a32 * a32 / (3.0 * g_dispersion(0.0, lw));

    let tail = w * w / 24.0 * (f2 + 2.0);
    let a41 = -b * k2 * k2 / 8.0 - tail;
    let a41_alt = -b * w * k2 * k2 / 8.0 - tail;
    let a42 = w * k2 / 6.0 - w / 12.0 * f1 * (f2 + 2.0);
    let a43 = f1 * f1 * (f2 + 2.0) / 6.0 - 0.5 * k2 * f1;
    let a4 = a41 + 2.0 * nu0 * a42 - n2 * a43;
    Ok(CoefficientSet { a31, a32, a3, a41, a42, a43, a4, a41_alt })
}

pub fn nls_data(p: &FluidParams, lw: &LinearWaveData, c: &CoefficientSet) -> Result<NLSData> {
    require(lw, Regime::WeakST)?;
    let bf = c.focusing();
    if !(bf < 0.0) {
        return Err(Error::NotFocusing(bf));
    }
    let g2 = lw.g2_at_k0;
    if !(g2 > 0.0) {
        return Err(Error::InvalidParams(format!("g''(k0) must be positive, got {g2}")));
    }
    let f1 = f_multiplier(lw.k0);
    let alpha = 0.5 / (0.25 * lw.nu0 * f1 + p.omega / 8.0);
    Ok(NLSData {
        nu_nls: -9.0 * alpha * alpha / (8.0 * g2) * bf * bf,
        c_nls: -3.0 * alpha.powi(3) / (4.0 * g2) * bf * bf,
        alpha_nls: alpha,
        g2,
        focusing: bf,
        profile: SechProfile { amplitude: alpha * (-3.0 * bf / g2).sqrt(), rate: -3.0 * alpha * bf / g2, power: 1 },
        nu0: lw.nu0,
        k0: lw.k0,
        omega: p.omega,
    })
}

/// One sample of the focusing certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FocusingSample {
    pub omega: f64,
    pub beta_fraction: f64,
    pub beta: f64,
    pub k0: f64,
    pub nu0: f64,
    /// A₃ + 2A₄.
    pub margin: f64,
    /// |β − ν₀²f′(k₀)/(2k₀)| / β.
    pub beta_roundtrip: f64,
    /// |ω − (1+βk₀²−ν₀²f(k₀))/ν₀|.
    pub omega_roundtrip: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FocusingReport {
    pub samples: Vec<FocusingSample>,
    pub min_margin: f64,
    /// (ω, β/β_c) where A₃ + 2A₄ is largest.
    pub worst: (f64, f64),
    pub max_margin: f64,
    pub max_roundtrip: f64,
    /// Adjacent samples along an ω-slice with opposite signs.
    pub sign_flips: usize,
    pub all_negative: bool,
}

impl FocusingReport {
    pub fn passed(&self, roundtrip_tol: f64) -> bool {
        self.all_negative && self.sign_flips == 0 && self.max_roundtrip <= roundtrip_tol
    }
}

/// Evaluates A₃ + 2A₄ over ω × (β/β_c). Failures are recorded, not raised.
pub fn certify_focusing(omega_grid: &[f64], beta_fraction_grid: &[f64]) -> FocusingReport {
    let mut samples = Vec::with_capacity(omega_grid.len() * beta_fraction_grid.len());
    let mut sign_flips = 0;
    for &omega in omega_grid {
        let mut prev: Option<f64> = None;
        for &frac in beta_fraction_grid {
            let beta = frac * beta_critical(omega);
            let s = focusing_sample(omega, frac, beta);
            if let (Some(a), true) = (prev, s.margin.is_finite()) {
                if a.signum() != s.margin.signum() {
                    sign_flips += 1;
                }
            }
            if s.margin.is_finite() {
                prev = Some(s.margin);
            }
            samples.push(s);
        }
    }
    let mut min_margin = f64::INFINITY;
    let mut max_margin = f64::NEG_INFINITY;
    let mut worst = (f64::NAN, f64::NAN);
    let mut max_roundtrip: f64 = 0.0;
    let mut all_negative = !samples.is_empty();
    for s in &samples {
        if s.error.is_some() || !(s.margin < 0.0) {
            all_negative = false;
        }
        min_margin = min_margin.min(s.margin);
        if s.margin > max_margin {
            max_margin = s.margin;
            worst = (s.omega, s.beta_fraction);
        }
        max_roundtrip = max_roundtrip.max(s.beta_roundtrip).max(s.omega_roundtrip);
    }
    FocusingReport { samples, min_margin, worst, max_margin, max_roundtrip, sign_flips, all_negative }
}

fn focusing_sample(omega: f64, beta_fraction: f64, beta: f64) -> FocusingSample {
    let mut s = FocusingSample {
        omega,
        beta_fraction,
        beta,
        k0: f64::NAN,
        nu0: f64::NAN,
        margin: f64::NAN,
        beta_roundtrip: f64::NAN,
        omega_roundtrip: f64::NAN,
        error: None,
    };
    let run = || -> Result<(LinearWaveData, CoefficientSet)> {
        let p = FluidParams::new(omega, beta)?;
        let lw = solve_bifurcation(&p)?;
        let c = coefficients(&p, &lw)?;
        Ok((lw, c))
    };
    match run() {
        Ok((lw, c)) => {
            let (k0, nu0) = (lw.k0, lw.nu0);
            let b = nu0 * nu0 * f_prime(k0) / (2.0 * k0);
            let w = (1.0 + b * k0 * k0 - nu0 * nu0 * f_multiplier(k0)) / nu0;
            s.k0 = k0;
            s.nu0 = nu0;
            s.margin = c.margin();
            s.beta_roundtrip = (b - beta).abs() / beta;
            s.omega_roundtrip = (w - omega).abs();
        }
        Err(e) => s.error = Some(e.to_string()),
    }
    s
}

/// Explicit trial profile at momentum μ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub eta: SurfaceProfile,
    /// Long-wave scale α(μ).
    pub alpha: f64,
    /// 2ν₀μ + c·μ^r.
    pub predicted: f64,
    /// c_KdV or c_NLS.
    pub model_constant: f64,
    /// 5/3 or 3.
    pub exponent: f64,
}

/// Builds the trial profile and solves ν₀ℒ(η*) − 𝒢(η*) = μ for its scale.
pub fn test_function(func: &Functionals, lw: &LinearWaveData, mu: f64) -> Result<TestFunction> {
    if !(mu > 0.0 && mu <= 0.1) {
        return Err(Error::InvalidParams(format!("test function needs 0 < mu <= 0.1, got {mu}")));
    }
    let p = &func.params;
    let f = func.fourier();
    let (build, guess, c, r): (Box<dyn Fn(f64) -> SurfaceProfile>, f64, f64, f64) = match lw.regime {
        Regime::StrongST => {
            let kd = kdv_data(p, lw)?;
            let phi = kd.profile;
            (Box::new(move |a| SurfaceProfile::from_fn(f, |x| a * a * phi.value(a * x))), mu.cbrt(), kd.c_kdv, 5.0 / 3.0)
        }
        Regime::WeakST => {
            let co = coefficients(p, lw)?;
            let nd = nls_data(p, lw, &co)?;
            let phi = nd.profile;
            let k0 = lw.k0;
            let c2 = -0.5 * co.a31 / g_dispersion(2.0 * k0, lw);
            let c0 = -0.5 * co.a32 / g_dispersion(0.0, lw);
            let build = move |a: f64| {
                SurfaceProfile::from_fn(f, |x| {
                    let v = phi.value(a * x);
                    a * v * (k0 * x).cos() + a * a * v * v * (c2 * (2.0 * k0 * x).cos() + c0)
                })
            };
            (Box::new(build), mu, nd.c_nls, 3.0)
        }
    };

    let h = |a: f64| -> Result<f64> {
        let eta = build(a);
        eta.check_depth()?;
        let (g, _, l) = func.eval_gkl(&eta)?;
        Ok(lw.nu0 * l - g - mu)
    };

    // Bracket the smallest root from below; h(0) = −μ. Away from the
    // asymptotic range the map α ↦ ν₀ℒ − 𝒢 need not be monotone.
    let (mut lo, mut hlo) = (0.0, -mu);
    let mut hi = guess;
    let mut hhi = h(hi)?;
    let mut tries = 0;
    while hhi <= 0.0 {
        lo = hi;
        hlo = hhi;
        hi *= 1.25;
        hhi = h(hi)?;
        tries += 1;
        if tries > 60 {
            return Err(Error::InversionFailure);
        }
    }

    // Illinois false position.
    let tol = 1e-14 * mu.max(1e-300);
    let mut side = 0;
    let (mut a, mut ha) = (hi, hhi);
    for _ in 0..200 {
        a = (lo * hhi - hi * hlo) / (hhi - hlo);
        ha = h(a).map_err(|_| Error::InversionFailure)?;
        if ha.abs() <= tol || (hi - lo) <= 1e-15 * hi {
            break;
        }
        if ha > 0.0 {
            hi = a;
            hhi = ha;
            if side == 1 {
                hlo *= 0.5;
            }
            side = 1;
        } else {
            lo = a;
            hlo = ha;
            if side == -1 {
                hhi *= 0.5;
            }
            side = -1;
        }
    }
    if !(ha.abs() <= 1e-10) {
        return Err(Error::InversionFailure);
    }
    Ok(TestFunction {
        eta: build(a),
        alpha: a,
        predicted: 2.0 * lw.nu0 * mu + c * mu.powf(r),
        model_constant: c,
        exponent: r,
    })
}
