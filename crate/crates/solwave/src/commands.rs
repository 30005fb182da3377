//! The work behind each subcommand, kept out of `main` so tests can drive it.

use std::path::Path;

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};
use solwave_core::asymptotics::{coefficients, nls_data, CoefficientSet, NLSData};
use solwave_core::dispersion::{g_dispersion, nu_linear, solve_bifurcation, FluidParams, LinearWaveData, Regime};
use solwave_core::Error;

use crate::config::Config;
use crate::output::{fmt_f64, write_json, CsvTable};
use crate::sweep::{solve_point, SweepRow};
use crate::validate::{consistency, run_all, Check, Faults, ValidationReport};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DispersionReport {
    pub params: FluidParams,
    pub linear: LinearWaveData,
    /// min over the table of g(k); nonnegative up to rounding.
    pub g_min: f64,
    pub g_nonnegative: bool,
    pub rows: usize,
}

/// Tabulates ν(k) and g(k) on [0, k_max] plus an exact row at k₀ (marker 1).
pub fn dispersion(p: &FluidParams, k_max: f64, samples: usize, out: &Path) -> Result<DispersionReport> {
    if !(k_max > 0.0) || samples < 2 {
        bail!("need k_max > 0 and at least two samples");
    }
    let lw = solve_bifurcation(p)?;
    let mut ks: Vec<(f64, bool)> = (0..samples).map(|i| (k_max * i as f64 / (samples - 1) as f64, false)).collect();
    ks.push((lw.k0, true));
    ks.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut t = CsvTable::create(&out.join("dispersion.csv"), &["k", "nu", "g", "is_k0"])?;
    let mut g_min = f64::INFINITY;
    for &(k, mark) in &ks {
        let g = g_dispersion(k, &lw);
        g_min = g_min.min(g);
        t.row([fmt_f64(k), fmt_f64(nu_linear(k, p)), fmt_f64(g), (mark as u8).to_string()])?;
    }
    let rep = DispersionReport { params: *p, linear: lw, g_min, g_nonnegative: g_min >= -1e-12, rows: ks.len() };
    write_json(&out.join("dispersion.json"), &rep)?;
    Ok(rep)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoeffsReport {
    pub params: FluidParams,
    pub linear: LinearWaveData,
    pub coefficients: CoefficientSet,
    /// A₃ + 2A₄; negative means focusing.
    pub margin: f64,
    pub nls: Option<NLSData>,
}

pub fn coeffs(p: &FluidParams, out: &Path) -> Result<CoeffsReport> {
    let lw = solve_bifurcation(p)?;
    if lw.regime != Regime::WeakST {
        return Err(Error::WrongRegime { expected: "WeakST" }.into());
    }
    let c = coefficients(p, &lw)?;
    let rep = CoeffsReport { params: *p, linear: lw, coefficients: c, margin: c.margin(), nls: nls_data(p, &lw, &c).ok() };
    write_json(&out.join("coeffs.json"), &rep)?;
    Ok(rep)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinimizeReport {
    pub row: SweepRow,
    pub checks: Vec<Check>,
}

/// One momentum: profile, envelope and the reconstruction identities.
pub fn minimize_one(cfg: &Config, mu: f64, out: &Path) -> Result<MinimizeReport> {
    cfg.validate()?;
    let point = solve_point(cfg, mu, None)?;
    let mut checks = Vec::new();
    if let Some(r) = &point.result {
        let g = r.eta.grid;
        let mut t = CsvTable::create(&out.join("profile.csv"), &["x", "eta"])?;
        for (x, v) in g.nodes().iter().zip(&r.eta.values) {
            t.row([fmt_f64(*x), fmt_f64(*v)])?;
        }
        checks = consistency(&point.func, mu, &r.eta, &format!("mu = {mu}"))?;
    }
    if let Some(env) = &point.envelope {
        let mut t = CsvTable::create(&out.join("envelope.csv"), &["x", "re", "im"])?;
        for (i, x) in env.grid.nodes().iter().enumerate() {
            t.row([fmt_f64(*x), fmt_f64(env.re[i]), fmt_f64(env.im[i])])?;
        }
    }
    let rep = MinimizeReport { row: point.row, checks };
    write_json(&out.join("minimize.json"), &rep)?;
    Ok(rep)
}

pub fn validate(seed: u64, out: &Path) -> Result<ValidationReport> {
    let rep = run_all(seed, Faults::default())?;
    write_json(&out.join("validate.json"), &rep)?;
    Ok(rep)
}
