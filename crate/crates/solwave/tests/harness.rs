use std::fs;

use solwave::commands;
use solwave::config::{Config, Overrides};
use solwave::output::{fmt_f64, out_dir, write_json, OUT_ENV};
use solwave::sweep::{run_sweep, SweepReport, ROW_HEADER};
use solwave::validate::{flat_strip, Faults};
use solwave_core::dispersion::FluidParams;

#[test]
fn config_round_trips_and_overrides() {
    let text = r#"
seed = 3
[fluid]
omega = 1.0
beta = 2.5
[grid]
n_modes = 256
[sweep]
mu = [0.02, 0.01]
"#;
    let mut cfg = Config::from_toml(text).unwrap();
    assert_eq!(cfg.fluid.omega, 1.0);
    assert_eq!(cfg.grid.n_modes, Some(256));
    assert_eq!(cfg.grid.n_layers, 48);
    assert_eq!(cfg.minimize.grad_tol_rel, 1e-7);
    assert_eq!(Config::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);

    cfg.apply(&Overrides { omega: Some(-0.5), mu: Some(vec![0.03]), seed: Some(11), ..Default::default() });
    assert_eq!((cfg.fluid.omega, cfg.fluid.beta, cfg.seed), (-0.5, 2.5, 11));
    assert_eq!(cfg.sweep.mu, vec![0.03]);
    cfg.validate().unwrap();

    assert!(Config::from_toml("[fluid]\nbogus = 1").is_err());
    let bad = |s: &str| Config::from_toml(s).unwrap().validate().is_err();
    assert!(bad("[sweep]\nmu = [0.01, 0.02]"));
    assert!(bad("[sweep]\nmu = [0.2]"));
    assert!(bad("[grid]\nn_modes = 300"));
    assert!(bad("[grid]\nn_layers = 8"));
    assert!(bad("[fluid]\nbeta = 0.3333333333333333"));
}

#[test]
fn floats_round_trip_through_text() {
    for v in [0.1, -1.0 / 3.0, 6.02214076e23, 5e-324, std::f64::consts::PI] {
        let s = fmt_f64(v);
        assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.json");
    let vals = vec![0.1, 1.0 / 3.0, -2.718281828459045e-17];
    write_json(&path, &vals).unwrap();
    let back: Vec<f64> = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(back, vals);
}

#[test]
fn out_dir_precedence() {
    let flag = std::path::Path::new("/tmp/flagged");
    assert_eq!(out_dir(Some(flag)), flag);
    // SAFETY: no other test in this binary reads the variable.
    unsafe { std::env::set_var(OUT_ENV, "/tmp/from-env") };
    assert_eq!(out_dir(None), std::path::PathBuf::from("/tmp/from-env"));
    unsafe { std::env::remove_var(OUT_ENV) };
    assert_eq!(out_dir(None), std::path::PathBuf::from("out"));
}

#[test]
fn dispersion_table_marks_k0() {
    let dir = tempfile::tempdir().unwrap();
    let p = FluidParams::new(0.0, 0.2).unwrap();
    let rep = commands::dispersion(&p, 6.0, 61, dir.path()).unwrap();
    assert!(rep.g_nonnegative);
    let mut rdr = csv::Reader::from_path(dir.path().join("dispersion.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 62);
    let marked: Vec<_> = rows.iter().filter(|r| &r[3] == "1").collect();
    assert_eq!(marked.len(), 1);
    let k0: f64 = marked[0][0].parse().unwrap();
    assert_eq!(k0, rep.linear.k0);
    assert!(marked[0][2].parse::<f64>().unwrap().abs() < 1e-12);

    assert!(commands::coeffs(&p, dir.path()).unwrap().margin < 0.0);
    assert!(commands::coeffs(&FluidParams::new(0.0, 2.0).unwrap(), dir.path()).is_err());
}

#[test]
fn validation_notices_a_planted_fault() {
    assert!(flat_strip(7, Faults::default()).unwrap().iter().all(|c| c.passed));
    let bad = flat_strip(7, Faults { k0_multiplier: 1e-3 }).unwrap();
    assert!(bad.iter().any(|c| !c.passed));
}

#[test]
fn sweep_writes_rows_as_it_goes() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = Config::default();
    cfg.grid.half_length = Some(120.0);
    cfg.grid.n_modes = Some(256);
    cfg.grid.n_layers = 24;
    cfg.sweep.mu = vec![0.05, 0.04];
    cfg.sweep.jobs = 2;
    let rows = run_sweep(&cfg, Some(dir.path())).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.converged && r.error.is_none()));
    assert!(rows[0].c_mu.unwrap() > rows[1].c_mu.unwrap());

    let mut rdr = csv::Reader::from_path(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), ROW_HEADER.to_vec());
    let recs: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(recs.len(), 2);
    assert_eq!(recs[1][0].parse::<f64>().unwrap(), 0.04);

    let rep: SweepReport = serde_json::from_str(&fs::read_to_string(dir.path().join("sweep.json")).unwrap()).unwrap();
    assert_eq!(rep.config, cfg);
    assert_eq!(rep.rows, rows);
    assert!(dir.path().join("profile_01.csv").exists());
}
