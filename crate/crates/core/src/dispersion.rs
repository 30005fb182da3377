//! Linear wave quantities: the flat-strip multiplier `f(k) = |k| coth |k|`, the
//! phase speed of linear waves, the critical Bond number and the bifurcation point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this |k| the multiplier and its derivatives are summed from the Taylor series.
pub const SERIES_CUTOFF: f64 = 0.5;

/// |β − β_c| below this is rejected as ambiguous.
pub const REGIME_TOL: f64 = 1e-9;

/// Taylor coefficients c_n of `k coth k = Σ c_n k^{2n}`, i.e. 2^{2n} B_{2n} / (2n)!.
/// Eleven terms put the truncation error at the cutoff below 1e-17.
const COTH_SERIES: [f64; 11] = [
    1.0,
    1.0 / 3.0,
    -1.0 / 45.0,
    2.0 / 945.0,
    -1.0 / 4725.0,
    2.0 / 93555.0,
    -691.0 / 2730.0 * 4096.0 / 479_001_600.0,
    7.0 / 6.0 * 16384.0 / 87_178_291_200.0,
    -3617.0 / 510.0 * 65536.0 / 20_922_789_888_000.0,
    43867.0 / 798.0 * 262_144.0 / 6_402_373_705_728_000.0,
    -174_611.0 / 330.0 * 1_048_576.0 / 2_432_902_008_176_640_000.0,
];

/// Dimensionless vorticity and surface tension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidParams {
    pub omega: f64,
    pub beta: f64,
}

impl FluidParams {
    /// Validates `beta > 0` and that the regime is classifiable.
    pub fn new(omega: f64, beta: f64) -> Result<Self> {
        if !(omega.is_finite() && beta.is_finite()) {
            return Err(Error::InvalidParams("omega and beta must be finite".into()));
        }
        if beta <= 0.0 {
            return Err(Error::InvalidParams(format!("beta must be positive, got {beta}")));
        }
        let beta_c = beta_critical(omega);
        if (beta - beta_c).abs() < REGIME_TOL {
            return Err(Error::RegimeAmbiguous { beta, beta_c, tol: REGIME_TOL });
        }
        Ok(Self { omega, beta })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// β > β_c: long-wave bifurcation at k₀ = 0 (KdV scaling).
    StrongST,
    /// β < β_c: modulated-carrier bifurcation at k₀ > 0 (NLS scaling).
    WeakST,
}

/// Bifurcation data derived from [`FluidParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearWaveData {
    pub params: FluidParams,
    pub beta_c: f64,
    pub k0: f64,
    pub nu0: f64,
    pub regime: Regime,
    /// g″(k₀).
    pub g2_at_k0: f64,
}

fn series(k: f64, deriv: u32) -> f64 {
    let k2 = k * k;
    let mut s = 0.0;
    match deriv {
        0 => {
            for c in COTH_SERIES.iter().rev() {
                s = s * k2 + c;
            }
            s
        }
        // Σ 2n c_n k^{2n-1}
        1 => {
            for n in (1..COTH_SERIES.len()).rev() {
                s = s * k2 + COTH_SERIES[n] * (2 * n) as f64;
            }
            s * k
        }
        // Σ 2n(2n-1) c_n k^{2n-2}
        _ => {
            for n in (1..COTH_SERIES.len()).rev() {
                s = s * k2 + COTH_SERIES[n] * (2 * n * (2 * n - 1)) as f64;
            }
            s
        }
    }
}

/// `f(k) = |k| coth |k|`.
pub fn f_multiplier(k: f64) -> f64 {
    let a = k.abs();
    if a < SERIES_CUTOFF {
        series(a, 0)
    } else {
        a / a.tanh()
    }
}

/// `f′(k)`, odd in k.
pub fn f_prime(k: f64) -> f64 {
    let a = k.abs();
    let d = if a < SERIES_CUTOFF {
        series(a, 1)
    } else {
        let s = a.sinh();
        1.0 / a.tanh() - a / (s * s)
    };
    d.copysign(k)
}

/// `f″(k)`, even in k.
pub fn f_second(k: f64) -> f64 {
    let a = k.abs();
    if a < SERIES_CUTOFF {
        series(a, 2)
    } else {
        let s = a.sinh();
        2.0 * (a / a.tanh() - 1.0) / (s * s)
    }
}

/// Positive root ν of `1 + βk² − ων − ν² f(k) = 0`.
pub fn nu_linear(k: f64, p: &FluidParams) -> f64 {
    let f = f_multiplier(k);
    let w = p.omega;
    -w / (2.0 * f) + 0.5 * (w * w / (f * f) + 4.0 * (1.0 + p.beta * k * k) / f).sqrt()
}

/// `dν/dk` by implicit differentiation of the dispersion relation.
pub fn nu_linear_prime(k: f64, p: &FluidParams) -> f64 {
    let nu = nu_linear(k, p);
    (2.0 * p.beta * k - nu * nu * f_prime(k)) / (p.omega + 2.0 * nu * f_multiplier(k))
}

/// `β_c = (ω² + 2 − ω√(ω²+4))/6`.
pub fn beta_critical(omega: f64) -> f64 {
    (omega * omega + 2.0 - omega * (omega * omega + 4.0).sqrt()) / 6.0
}

/// Locates `k₀ = argmin ν` and `ν₀ = ν(k₀)`.
pub fn solve_bifurcation(p: &FluidParams) -> Result<LinearWaveData> {
    let p = FluidParams::new(p.omega, p.beta)?;
    let beta_c = beta_critical(p.omega);
    if p.beta > beta_c {
        let nu0 = 0.5 * (-p.omega + (p.omega * p.omega + 4.0).sqrt());
        return Ok(LinearWaveData {
            params: p,
            beta_c,
            k0: 0.0,
            nu0,
            regime: Regime::StrongST,
            g2_at_k0: 2.0 * p.beta - 2.0 / 3.0 * nu0 * nu0,
        });
    }

    // Coarse scan of (0, 20].
    let step = 0.01;
    let mut best = (step, nu_linear(step, &p));
    for i in 2..=2000 {
        let k = i as f64 * step;
        let v = nu_linear(k, &p);
        if v < best.1 {
            best = (k, v);
        }
    }
    let mut a = (best.0 - step).max(0.0);
    let mut b = best.0 + step;

    // Golden section.
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = nu_linear(c, &p);
    let mut fd = nu_linear(d, &p);
    while b - a > 1e-12 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = nu_linear(c, &p);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = nu_linear(d, &p);
        }
    }
    let mut k0 = 0.5 * (a + b);

    // One Newton step on the stationarity condition 2βk − ν²f′(k) = 0.
    let nu = nu_linear(k0, &p);
    let h = 2.0 * p.beta * k0 - nu * nu * f_prime(k0);
    let dh = 2.0 * p.beta - nu * nu * f_second(k0);
    if dh > 0.0 {
        k0 -= h / dh;
    }
    let nu0 = nu_linear(k0, &p);
    Ok(LinearWaveData {
        params: p,
        beta_c,
        k0,
        nu0,
        regime: Regime::WeakST,
        g2_at_k0: 2.0 * p.beta - nu0 * nu0 * f_second(k0),
    })
}

/// `g(k) = 1 + βk² − ων₀ − ν₀² f(k)`.
pub fn g_dispersion(k: f64, lw: &LinearWaveData) -> f64 {
    let p = &lw.params;
    1.0 + p.beta * k * k - p.omega * lw.nu0 - lw.nu0 * lw.nu0 * f_multiplier(k)
}

/// `g′(k)`.
pub fn g_prime(k: f64, lw: &LinearWaveData) -> f64 {
    2.0 * lw.params.beta * k - lw.nu0 * lw.nu0 * f_prime(k)
}

/// `g″(k)`.
pub fn g_second(k: f64, lw: &LinearWaveData) -> f64 {
    2.0 * lw.params.beta - lw.nu0 * lw.nu0 * f_second(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_matches_direct_at_cutoff() {
        for &k in &[0.3, 0.45, 0.4999, 0.5001] {
            let s = series(k, 0);
            let d = k / k.tanh();
            assert!((s - d).abs() < 1e-15, "k={k}: {s} vs {d}");
            let s1 = series(k, 1);
            let d1 = 1.0 / k.tanh() - k / k.sinh().powi(2);
            assert!((s1 - d1).abs() < 1e-13, "f' at {k}: {s1} vs {d1}");
            let s2 = series(k, 2);
            let d2 = 2.0 * (k / k.tanh() - 1.0) / k.sinh().powi(2);
            assert!((s2 - d2).abs() < 1e-12, "f'' at {k}: {s2} vs {d2}");
        }
    }

    #[test]
    fn strong_regime_closed_form() {
        let lw = solve_bifurcation(&FluidParams { omega: 0.0, beta: 2.0 }).unwrap();
        assert_eq!(lw.regime, Regime::StrongST);
        assert_eq!(lw.k0, 0.0);
        assert!((lw.nu0 - 1.0).abs() < 1e-15);
    }
}
