//! One minimization per momentum, post-processed against the model soliton.

use std::path::Path;
use std::sync::mpsc;

use anyhow::{Context, Result};
use rayon::ThreadPoolBuilder;
use serde::{Deserialize, Serialize};
use solwave_core::asymptotics::{coefficients, kdv_data, nls_data, test_function, KdVData, NLSData};
use solwave_core::dispersion::{FluidParams, LinearWaveData, Regime};
use solwave_core::functionals::Functionals;
use solwave_core::minimizer::{
    align_distance, extract_envelope, minimize, split_spectrum, AlignMode, ComplexProfile, MinimizeConfig,
    MinimizerResult, PenaltyConfig,
};
use solwave_core::spectral::{Fourier, PeriodicGrid, SurfaceProfile};
use solwave_core::strip::Strip;
use solwave_core::Error;

use crate::config::Config;
use crate::output::{fmt_f64, fmt_opt, write_columns, write_json, CsvTable};

/// Model soliton of the regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Model {
    KdV(KdVData),
    Nls(NLSData),
}

impl Model {
    pub fn new(p: &FluidParams, lw: &LinearWaveData) -> Result<Self> {
        Ok(match lw.regime {
            Regime::StrongST => Model::KdV(kdv_data(p, lw)?),
            Regime::WeakST => Model::Nls(nls_data(p, lw, &coefficients(p, lw)?)?),
        })
    }

    /// r⋆ with c_μ = 2ν₀μ + c μ^{r⋆} + ….
    pub fn energy_exponent(&self) -> f64 {
        match self {
            Model::KdV(_) => 5.0 / 3.0,
            Model::Nls(_) => 3.0,
        }
    }

    pub fn speed_exponent(&self) -> f64 {
        match self {
            Model::KdV(_) => 2.0 / 3.0,
            Model::Nls(_) => 2.0,
        }
    }

    pub fn energy_constant(&self) -> f64 {
        match self {
            Model::KdV(d) => d.c_kdv,
            Model::Nls(d) => d.c_nls,
        }
    }

    pub fn speed_constant(&self) -> f64 {
        match self {
            Model::KdV(d) => d.speed_defect_coefficient(),
            Model::Nls(d) => d.speed_defect_coefficient(),
        }
    }

    /// ∫|φ|² of the model envelope: 2α.
    pub fn envelope_mass(&self) -> f64 {
        match self {
            Model::KdV(d) => 2.0 * d.alpha_kdv,
            Model::Nls(d) => 2.0 * d.alpha_nls,
        }
    }

    /// Decay rate of the envelope in x at momentum μ, and the sech power.
    fn decay(&self, mu: f64) -> (f64, i32) {
        match self {
            Model::KdV(d) => (d.profile.rate * mu.cbrt(), d.profile.power),
            Model::Nls(d) => (d.profile.rate * mu, d.profile.power),
        }
    }

    pub fn envelope(&self, grid: PeriodicGrid) -> ComplexProfile {
        let prof = match self {
            Model::KdV(d) => d.profile,
            Model::Nls(d) => d.profile,
        };
        ComplexProfile::from_fn(grid, |x| (prof.value(x), 0.0))
    }

    pub fn align_mode(&self) -> AlignMode {
        match self {
            Model::KdV(_) => AlignMode::Translate,
            Model::Nls(_) => AlignMode::TranslateRotate,
        }
    }
}

/// Box for momentum μ: the model envelope decays to 1e-10 of its peak at the
/// edge, and WeakST boxes hold at least 20 carrier wavelengths.
pub fn grid_for(cfg: &Config, lw: &LinearWaveData, model: &Model, mu: f64) -> Result<PeriodicGrid> {
    let l = match cfg.grid.half_length {
        Some(l) => l,
        None => {
            let (rate, p) = model.decay(mu);
            let p = p as f64;
            let edge = (2f64.powf(p) * 1e10).ln() / (p * rate);
            match lw.regime {
                Regime::StrongST => edge,
                Regime::WeakST => edge.max(20.0 * 2.0 * std::f64::consts::PI / lw.k0),
            }
        }
    };
    let n = match cfg.grid.n_modes {
        Some(n) => n,
        None => {
            let k_need = match lw.regime {
                Regime::StrongST => 2.0,
                Regime::WeakST => 3.5 * lw.k0,
            };
            ((2.0 * l * k_need / std::f64::consts::PI).ceil() as usize).next_power_of_two().max(512)
        }
    };
    Ok(PeriodicGrid::new(l, n, cfg.grid.n_layers)?)
}

fn penalty_for(cfg: &Config, lw: &LinearWaveData) -> PenaltyConfig {
    let m = cfg.minimize.ball_radius.unwrap_or(match lw.regime {
        Regime::StrongST => 0.6,
        Regime::WeakST => 2.5,
    });
    PenaltyConfig::new(m, cfg.minimize.penalty_strength)
}

pub fn delta0_for(cfg: &Config, lw: &LinearWaveData) -> f64 {
    cfg.sweep.delta0.unwrap_or(match lw.regime {
        Regime::StrongST => 1.0,
        Regime::WeakST => 0.25 * lw.k0,
    })
}

/// One line of the sweep table. Failed rows carry `error` and leave the
/// measured columns empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mu: f64,
    pub half_length: f64,
    pub n_modes: usize,
    pub n_layers: usize,
    /// 𝒥_μ at the minimizer.
    pub c_mu: Option<f64>,
    pub speed: Option<f64>,
    /// (c_μ − 2ν₀μ)/μ^{r⋆}.
    pub c_defect: Option<f64>,
    pub c_defect_model: f64,
    /// (ν_μ − ν₀)/μ^{2/3 or 2}.
    pub speed_defect: Option<f64>,
    pub speed_defect_model: f64,
    /// ‖φ_η‖₀².
    pub envelope_mass: Option<f64>,
    pub envelope_mass_model: f64,
    /// Aligned ‖φ_η − φ_model‖₁.
    pub align_dist: Option<f64>,
    /// ‖η₂‖₂/‖η₁‖₂.
    pub split_ratio: Option<f64>,
    pub m_mu: Option<f64>,
    pub grad_norm: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: bool,
    pub penalty_active: bool,
    /// Sign of the initial packet that produced the reported minimizer.
    pub branch: i32,
    pub error: Option<String>,
}

pub const ROW_HEADER: [&str; 21] = [
    "mu",
    "half_length",
    "n_modes",
    "n_layers",
    "c_mu",
    "speed",
    "c_defect",
    "c_defect_model",
    "speed_defect",
    "speed_defect_model",
    "envelope_mass",
    "envelope_mass_model",
    "align_dist",
    "split_ratio",
    "m_mu",
    "grad_norm",
    "iterations",
    "converged",
    "penalty_active",
    "branch",
    "error",
];

impl SweepRow {
    pub fn record(&self) -> Vec<String> {
        vec![
            fmt_f64(self.mu),
            fmt_f64(self.half_length),
            self.n_modes.to_string(),
            self.n_layers.to_string(),
            fmt_opt(self.c_mu),
            fmt_opt(self.speed),
            fmt_opt(self.c_defect),
            fmt_f64(self.c_defect_model),
            fmt_opt(self.speed_defect),
            fmt_f64(self.speed_defect_model),
            fmt_opt(self.envelope_mass),
            fmt_f64(self.envelope_mass_model),
            fmt_opt(self.align_dist),
            fmt_opt(self.split_ratio),
            fmt_opt(self.m_mu),
            fmt_opt(self.grad_norm),
            self.iterations.map(|i| i.to_string()).unwrap_or_default(),
            self.converged.to_string(),
            self.penalty_active.to_string(),
            self.branch.to_string(),
            self.error.clone().unwrap_or_default(),
        ]
    }
}

/// A solved point with everything needed downstream.
#[derive(Debug, Clone)]
pub struct Point {
    pub row: SweepRow,
    pub result: Option<MinimizerResult>,
    pub envelope: Option<ComplexProfile>,
    pub func: Functionals,
    pub lw: LinearWaveData,
    pub model: Model,
}

fn scaled(f: &Fourier, eta: &SurfaceProfile, s: f64) -> Result<SurfaceProfile> {
    Ok(SurfaceProfile::from_values(f, eta.values.iter().map(|v| s * v).collect())?)
}

/// StrongST warm start: η(x) = r^{2/3}η_prev(r^{1/3}x) with r = μ/μ_prev.
fn rescale_strong(f: &Fourier, prev: &SurfaceProfile, prev_mu: f64, mu: f64) -> Result<SurfaceProfile> {
    let pf = Fourier::new(prev.grid);
    let r = mu / prev_mu;
    let (a, s) = (r.powf(2.0 / 3.0), r.cbrt());
    let lp = prev.grid.half_length;
    Ok(SurfaceProfile::from_fn(f, |x| {
        let y = s * x;
        if y.abs() < lp {
            a * pf.interpolate(&prev.coeffs, y)
        } else {
            0.0
        }
    }))
}

/// Minimizes from `init`, retrying with 1.5× amplitude on collapse to zero.
fn run_from(
    func: &Functionals,
    mcfg: &MinimizeConfig,
    pen: &PenaltyConfig,
    init: &SurfaceProfile,
) -> std::result::Result<MinimizerResult, Error> {
    let f = func.fourier();
    let mut init = init.clone();
    for attempt in 0..3 {
        match minimize(func, mcfg, pen, &init) {
            Err(Error::CollapsedToZero(_)) if attempt < 2 => {
                init = SurfaceProfile::from_values(f, init.values.iter().map(|v| 1.5 * v).collect())?;
            }
            r => return r,
        }
    }
    unreachable!("loop returns on the last attempt")
}

/// Solves one momentum. WeakST tries both signs of the packet and keeps the lower 𝒥.
pub fn solve_point(cfg: &Config, mu: f64, warm: Option<(&SurfaceProfile, f64)>) -> Result<Point> {
    let p = cfg.params()?;
    let lw = solwave_core::dispersion::solve_bifurcation(&p)?;
    let model = Model::new(&p, &lw)?;
    let grid = grid_for(cfg, &lw, &model, mu)?;
    let func = Functionals::new(Strip::new(grid), p);
    let pen = penalty_for(cfg, &lw);
    let mcfg = MinimizeConfig {
        grad_tol: cfg.minimize.grad_tol_rel * mu,
        max_iter: cfg.minimize.max_iter,
        descent: cfg.minimize.descent,
        memory: cfg.minimize.memory,
        ..MinimizeConfig::new(mu)
    };
    let mut row = SweepRow {
        mu,
        half_length: grid.half_length,
        n_modes: grid.n_modes,
        n_layers: grid.n_layers,
        c_mu: None,
        speed: None,
        c_defect: None,
        c_defect_model: model.energy_constant(),
        speed_defect: None,
        speed_defect_model: model.speed_constant(),
        envelope_mass: None,
        envelope_mass_model: model.envelope_mass(),
        align_dist: None,
        split_ratio: None,
        m_mu: None,
        grad_norm: None,
        iterations: None,
        converged: false,
        penalty_active: false,
        branch: 1,
        error: None,
    };
    let f = func.fourier();

    let attempts: Vec<(i32, std::result::Result<SurfaceProfile, Error>)> = match (lw.regime, warm) {
        (Regime::StrongST, Some((prev, prev_mu))) => vec![(1, rescale_strong(f, prev, prev_mu, mu).map_err(|e| Error::InvalidParams(e.to_string())))],
        (Regime::StrongST, None) => vec![(1, test_function(&func, &lw, mu).map(|t| t.eta))],
        (Regime::WeakST, _) => {
            let base = test_function(&func, &lw, mu).map(|t| t.eta);
            let neg = base.clone().and_then(|e| scaled(f, &e, -1.0).map_err(|e| Error::InvalidParams(e.to_string())));
            vec![(1, base), (-1, neg)]
        }
    };
    let mut best: Option<(i32, MinimizerResult)> = None;
    let mut last_err = None;
    for (sign, init) in attempts {
        match init.and_then(|i| run_from(&func, &mcfg, &pen, &i)) {
            Ok(r) => {
                let better = match &best {
                    None => true,
                    Some((_, b)) => (r.converged && !b.converged) || (r.converged == b.converged && r.bundle.j < b.bundle.j),
                };
                if better {
                    best = Some((sign, r));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let Some((sign, r)) = best else {
        row.error = Some(last_err.map(|e| e.to_string()).unwrap_or_else(|| "no attempt ran".into()));
        return Ok(Point { row, result: None, envelope: None, func, lw, model });
    };

    let delta0 = delta0_for(cfg, &lw);
    let j0 = 2.0 * lw.nu0 * mu;
    row.c_mu = Some(r.bundle.j);
    row.speed = Some(r.bundle.speed);
    row.c_defect = Some((r.bundle.j - j0) / mu.powf(model.energy_exponent()));
    row.speed_defect = Some((r.bundle.speed - lw.nu0) / mu.powf(model.speed_exponent()));
    row.m_mu = r.bundle.m_mu;
    row.grad_norm = Some(r.grad_norm);
    row.iterations = Some(r.iterations);
    row.converged = r.converged;
    row.penalty_active = r.penalty_active;
    row.branch = sign;
    if !r.converged {
        row.error = Some(format!("not converged after {} iterations", r.iterations));
    }
    let envelope = match post_process(f, &r.eta, mu, &lw, &model, delta0, &mut row) {
        Ok(env) => Some(env),
        Err(e) => {
            row.error = Some(e.to_string());
            None
        }
    };
    Ok(Point { row, result: Some(r), envelope, func, lw, model })
}

fn post_process(
    f: &Fourier,
    eta: &SurfaceProfile,
    mu: f64,
    lw: &LinearWaveData,
    model: &Model,
    delta0: f64,
    row: &mut SweepRow,
) -> Result<ComplexProfile> {
    let (e1, e2) = split_spectrum(f, eta, lw, delta0)?;
    row.split_ratio = Some((f.sobolev_sq(&e2.values, 2.0) / f.sobolev_sq(&e1.values, 2.0)).sqrt());
    let env = extract_envelope(f, eta, mu, lw, delta0)?;
    row.envelope_mass = Some(env.l2_sq());
    let reference = model.envelope(env.grid);
    row.align_dist = Some(align_distance(&env, &reference, model.align_mode())?.distance);
    Ok(env)
}

/// Runs the sweep, flushing each row to `out` as it completes (in μ order).
pub fn run_sweep(cfg: &Config, out: Option<&Path>) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let mus = cfg.sweep.mu.clone();
    let mut table = match out {
        Some(dir) => Some(CsvTable::create(&dir.join("sweep.csv"), &ROW_HEADER)?),
        None => None,
    };
    let mut rows: Vec<SweepRow> = Vec::with_capacity(mus.len());
    let mut persist = |i: usize, point: &Point, rows: &mut Vec<SweepRow>| -> Result<()> {
        rows.push(point.row.clone());
        if let (Some(dir), Some(t)) = (out, table.as_mut()) {
            t.row(point.row.record())?;
            if let Some(r) = &point.result {
                let g = r.eta.grid;
                write_columns(&dir.join(format!("profile_{i:02}.csv")), &["x", "eta"], &[&g.nodes(), &r.eta.values])?;
            }
            write_json(&dir.join("sweep.json"), &SweepReport { config: cfg.clone(), rows: rows.clone() })?;
        }
        Ok(())
    };

    let strong = cfg.params().and_then(|p| Ok(solwave_core::dispersion::solve_bifurcation(&p)?))?.regime == Regime::StrongST;
    if cfg.minimize.continuation && strong {
        let mut prev: Option<(SurfaceProfile, f64)> = None;
        for (i, &mu) in mus.iter().enumerate() {
            let point = solve_point(cfg, mu, prev.as_ref().map(|(e, m)| (e, *m)))?;
            if let Some(r) = &point.result {
                prev = Some((r.eta.clone(), mu));
            }
            persist(i, &point, &mut rows)?;
        }
        return Ok(rows);
    }

    let pool = ThreadPoolBuilder::new().num_threads(cfg.sweep.jobs).build().context("building thread pool")?;
    let (tx, rx) = mpsc::channel();
    let mut failure = None;
    pool.scope(|s| {
        for (i, &mu) in mus.iter().enumerate() {
            let tx = tx.clone();
            s.spawn(move |_| {
                let _ = tx.send((i, solve_point(cfg, mu, None)));
            });
        }
        drop(tx);
        // Rows are written in μ order whatever order they finish in.
        let mut pending: Vec<Option<Point>> = (0..mus.len()).map(|_| None).collect();
        let mut next = 0;
        for (i, res) in rx {
            match res {
                Ok(p) => pending[i] = Some(p),
                Err(e) => {
                    failure.get_or_insert(e);
                    continue;
                }
            }
            while next < pending.len() {
                let Some(p) = pending[next].take() else { break };
                if let Err(e) = persist(next, &p, &mut rows) {
                    failure.get_or_insert(e);
                }
                next += 1;
            }
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(rows),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: Config,
    pub rows: Vec<SweepRow>,
}
