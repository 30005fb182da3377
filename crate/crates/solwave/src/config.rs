//! Experiment configuration: one TOML file with `[fluid]`, `[grid]`, `[minimize]`
//! and `[sweep]` sections. Every key is optional; command-line flags override.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use solwave_core::dispersion::FluidParams;
use solwave_core::minimizer::Descent;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub fluid: FluidSection,
    pub grid: GridSection,
    pub minimize: MinimizeSection,
    pub sweep: SweepSection,
    /// Seed for the random fields of `validate`.
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            fluid: FluidSection::default(),
            grid: GridSection::default(),
            minimize: MinimizeSection::default(),
            sweep: SweepSection::default(),
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FluidSection {
    pub omega: f64,
    pub beta: f64,
}

impl Default for FluidSection {
    fn default() -> Self {
        Self { omega: 0.0, beta: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    /// Half box length L; chosen per μ from the model soliton when absent.
    pub half_length: Option<f64>,
    /// Fourier nodes N; at least 512 and enough to resolve 3.5k₀ when absent.
    pub n_modes: Option<usize>,
    pub n_layers: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { half_length: None, n_modes: None, n_layers: 48 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinimizeSection {
    /// grad_tol = grad_tol_rel · μ.
    pub grad_tol_rel: f64,
    pub max_iter: usize,
    pub descent: Descent,
    pub memory: usize,
    /// H²-ball radius M; 0.6 (StrongST) or 2.5 (WeakST) when absent.
    pub ball_radius: Option<f64>,
    pub penalty_strength: f64,
    /// Warm-start each μ from the rescaled previous minimizer (StrongST only).
    pub continuation: bool,
}

impl Default for MinimizeSection {
    fn default() -> Self {
        Self {
            grad_tol_rel: 1e-7,
            max_iter: 4000,
            descent: Descent::QuasiNewton,
            memory: 12,
            ball_radius: None,
            penalty_strength: 1.0,
            continuation: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// Strictly decreasing, all in (0, 0.1].
    pub mu: Vec<f64>,
    /// Carrier cutoff δ₀; 1 (StrongST) or k₀/4 (WeakST) when absent.
    pub delta0: Option<f64>,
    /// Worker threads; 0 lets rayon decide.
    pub jobs: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { mu: vec![0.05, 0.02, 0.01, 0.005], delta0: None, jobs: 0 }
    }
}

/// Flag values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub omega: Option<f64>,
    pub beta: Option<f64>,
    pub mu: Option<Vec<f64>>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(w) = o.omega {
            self.fluid.omega = w;
        }
        if let Some(b) = o.beta {
            self.fluid.beta = b;
        }
        if let Some(mu) = &o.mu {
            self.sweep.mu = mu.clone();
        }
        if let Some(j) = o.jobs {
            self.sweep.jobs = j;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
    }

    pub fn params(&self) -> Result<FluidParams> {
        Ok(FluidParams::new(self.fluid.omega, self.fluid.beta)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.params()?;
        let mu = &self.sweep.mu;
        if mu.is_empty() {
            bail!("sweep.mu is empty");
        }
        if let Some(bad) = mu.iter().find(|m| !(**m > 0.0 && **m <= 0.1)) {
            bail!("sweep.mu entries must lie in (0, 0.1], got {bad}");
        }
        if mu.windows(2).any(|w| w[1] >= w[0]) {
            bail!("sweep.mu must be strictly decreasing");
        }
        if self.grid.n_layers < 16 {
            bail!("grid.n_layers must be at least 16");
        }
        if let Some(n) = self.grid.n_modes {
            if !n.is_power_of_two() || n < 16 {
                bail!("grid.n_modes must be a power of two >= 16");
            }
        }
        if self.minimize.grad_tol_rel <= 0.0 || self.minimize.max_iter == 0 {
            bail!("minimize.grad_tol_rel and minimize.max_iter must be positive");
        }
        Ok(())
    }
}
