use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use solwave::commands;
use solwave::config::{Config, Overrides};
use solwave::output::out_dir;
use solwave::sweep::run_sweep;

#[derive(Parser)]
#[command(name = "solwave", version, about = "Solitary waves on rotational water of finite depth")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML experiment file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    omega: Option<f64>,
    #[arg(long, global = true)]
    beta: Option<f64>,
    /// Comma-separated momenta.
    #[arg(long, global = true, value_delimiter = ',')]
    mu: Option<Vec<f64>>,
    /// Output directory (default $SOLWAVE_OUT, else ./out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Tabulate ν(k) and g(k) and report the bifurcation point.
    Dispersion {
        #[arg(long, default_value_t = 10.0)]
        k_max: f64,
        #[arg(long, default_value_t = 401)]
        samples: usize,
    },
    /// Cubic and quartic coefficients of the modulated-carrier expansion.
    Coeffs,
    /// Minimize at a single momentum (the first --mu value).
    Minimize,
    /// Minimize over the configured momenta.
    Sweep,
    /// Run the fast identity checks.
    Validate,
}

fn load(c: &Common) -> Result<Config> {
    let mut cfg = match &c.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    cfg.apply(&Overrides { omega: c.omega, beta: c.beta, mu: c.mu.clone(), jobs: c.jobs, seed: c.seed });
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool> {
    let cfg = load(&cli.common)?;
    let out = out_dir(cli.common.out.as_deref());
    std::fs::create_dir_all(&out)?;
    let p = cfg.params()?;
    match cli.cmd {
        Cmd::Dispersion { k_max, samples } => {
            let r = commands::dispersion(&p, k_max, samples, &out)?;
            let lw = r.linear;
            println!("regime {:?}  beta_c {:.12}  k0 {:.12}  nu0 {:.12}", lw.regime, lw.beta_c, lw.k0, lw.nu0);
            println!("min g on table {:.3e} ({})", r.g_min, if r.g_nonnegative { "ok" } else { "NEGATIVE" });
            Ok(r.g_nonnegative)
        }
        Cmd::Coeffs => {
            let r = commands::coeffs(&p, &out)?;
            let c = r.coefficients;
            println!("A3 {:.12e}  A4 {:.12e}  A3 + 2 A4 {:.12e}", c.a3, c.a4, r.margin);
            Ok(true)
        }
        Cmd::Minimize => {
            let mu = cfg.sweep.mu[0];
            let r = commands::minimize_one(&cfg, mu, &out)?;
            report_row(&r.row);
            for c in &r.checks {
                println!("{}", c.line());
            }
            Ok(r.row.converged && r.checks.iter().all(|c| c.passed))
        }
        Cmd::Sweep => {
            let rows = run_sweep(&cfg, Some(&out))?;
            rows.iter().for_each(report_row);
            Ok(rows.iter().all(|r| r.converged))
        }
        Cmd::Validate => {
            let r = commands::validate(cfg.seed, &out)?;
            for c in &r.checks {
                println!("{}", c.line());
            }
            Ok(r.passed)
        }
    }
}

fn report_row(r: &solwave::sweep::SweepRow) {
    let f = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.6e}"));
    println!(
        "mu {:.4e}  J {}  defect {} (model {:.6e})  dist {}  iters {}  {}",
        r.mu,
        f(r.c_mu),
        f(r.c_defect),
        r.c_defect_model,
        f(r.align_dist),
        r.iterations.map_or("-".into(), |i| i.to_string()),
        r.error.as_deref().unwrap_or("ok")
    );
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
