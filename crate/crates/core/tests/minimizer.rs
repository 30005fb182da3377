mod common;

use common::{grid, max_abs, max_diff};
use realfft::num_complex::Complex64;
use solwave_core::asymptotics::{kdv_data, test_function};
use solwave_core::dispersion::{beta_critical, solve_bifurcation, FluidParams, LinearWaveData};
use solwave_core::functionals::Functionals;
use solwave_core::minimizer::{
    align_distance, extract_envelope, minimize, penalty, split_spectrum, AlignMode, ComplexProfile, Descent,
    MinimizeConfig, PenaltyConfig, NOISE,
};
use solwave_core::spectral::{Fourier, PeriodicGrid, SurfaceProfile};
use solwave_core::strip::Strip;
use solwave_core::Error;

fn setup(omega: f64, beta: f64, l: f64, n: usize, m: usize) -> (Functionals, LinearWaveData) {
    let p = FluidParams::new(omega, beta).unwrap();
    let lw = solve_bifurcation(&p).unwrap();
    (Functionals::new(Strip::new(grid(l, n, m)), p), lw)
}

/// Translate by `s` through the Fourier series.
fn shifted(f: &Fourier, eta: &SurfaceProfile, s: f64) -> SurfaceProfile {
    let c: Vec<Complex64> = eta.coeffs.iter().zip(&f.k).map(|(c, k)| c * Complex64::from_polar(1.0, -k * s)).collect();
    SurfaceProfile::from_values(f, f.inverse(&c)).unwrap()
}

#[test]
fn penalty_shape() {
    let cfg = PenaltyConfig::new(0.6, 1.0);
    assert!((cfg.inner_radius - 0.57).abs() < 1e-15);
    let (m2, mt2) = (0.36, 0.57f64 * 0.57);
    for i in 0..=100 {
        assert_eq!(penalty(mt2 * i as f64 / 100.0, &cfg).unwrap(), (0.0, 0.0));
    }
    let mut prev = 0.0;
    for i in 1..1000 {
        let t = mt2 + (m2 - mt2) * i as f64 / 1000.0;
        let (r, dr) = penalty(t, &cfg).unwrap();
        assert!(dr >= 0.0 && r >= prev);
        prev = r;
        let h = 1e-4 * (m2 - t).min(t - mt2);
        let fd = (penalty(t + h, &cfg).unwrap().0 - penalty(t - h, &cfg).unwrap().0) / (2.0 * h);
        assert!((fd - dr).abs() <= 1e-6 * dr.max(1e-12), "rho' at {t}: {fd} vs {dr}");
    }
    assert!(penalty(m2 * (1.0 - 1e-12), &cfg).unwrap().0 > 1e6);
    assert!(matches!(penalty(m2, &cfg), Err(Error::OutsideBall { .. })));
    assert!(PenaltyConfig { radius: 0.5, inner_radius: 0.5, strength: 1.0 }.validate().is_err());
    assert!(PenaltyConfig::new(0.5, 0.0).validate().is_err());
}

#[test]
fn config_validation() {
    let (func, _) = setup(0.0, 2.0, 20.0, 64, 16);
    let eta = SurfaceProfile::zeros(func.fourier());
    let pen = PenaltyConfig::default();
    assert!(matches!(minimize(&func, &MinimizeConfig::new(0.01), &pen, &eta), Err(Error::ZeroProfile)));
    let bump = SurfaceProfile::from_fn(func.fourier(), |x| 0.01 * (-x * x).exp());
    assert!(minimize(&func, &MinimizeConfig::new(-0.01), &pen, &bump).is_err());
    let big = SurfaceProfile::from_fn(func.fourier(), |x| (-x * x).exp());
    assert!(matches!(minimize(&func, &MinimizeConfig::new(0.01), &pen, &big), Err(Error::OutsideBall { .. })));
}

#[test]
fn split_is_an_exact_partition() {
    let (func, lw) = setup(0.0, 2.0, 40.0, 256, 16);
    let f = func.fourier();
    let eta = SurfaceProfile::from_fn(f, |x| 0.05 * (-x * x / 4.0).exp() + 0.01 * (3.0 * x).cos() * (-x * x).exp());
    let (a, b) = split_spectrum(f, &eta, &lw, 1.0).unwrap();
    for m in 0..eta.coeffs.len() {
        assert_eq!(a.coeffs[m] + b.coeffs[m], eta.coeffs[m]);
        assert!(a.coeffs[m] == Complex64::new(0.0, 0.0) || b.coeffs[m] == Complex64::new(0.0, 0.0));
    }
    assert!(max_diff(&eta.values, &a.values.iter().zip(&b.values).map(|(x, y)| x + y).collect::<Vec<_>>()) < 1e-15);

    // Spectrum inside S: nothing is moved.
    let mut c = vec![Complex64::new(0.0, 0.0); eta.coeffs.len()];
    c[1] = Complex64::new(0.05, 0.0);
    c[7] = Complex64::new(0.0, -0.01);
    let low = SurfaceProfile { grid: eta.grid, values: f.inverse(&c), coeffs: c };
    let (a, b) = split_spectrum(f, &low, &lw, 1.0).unwrap();
    assert_eq!(a.coeffs, low.coeffs);
    assert!(max_abs(&b.values) == 0.0);

    assert!(matches!(split_spectrum(f, &eta, &lw, 0.0), Err(Error::BadCutoff(_))));
    let p = FluidParams::new(0.0, 0.6 * beta_critical(0.0)).unwrap();
    let weak = solve_bifurcation(&p).unwrap();
    assert!(split_spectrum(f, &eta, &weak, weak.k0 / 4.0).is_ok());
    assert!(matches!(split_spectrum(f, &eta, &weak, weak.k0 / 3.0), Err(Error::BadCutoff(_))));
}

#[test]
fn envelope_inverts_the_scalings() {
    let mu: f64 = 1e-4;
    let (func, lw) = setup(0.0, 2.0, 800.0, 2048, 16);
    let f = func.fourier();
    let eta = SurfaceProfile::from_fn(f, |x| mu.powf(2.0 / 3.0) * (mu.cbrt() * x).cosh().powi(-2));
    let phi = extract_envelope(f, &eta, mu, &lw, 1.0).unwrap();
    assert!((phi.grid.half_length - 800.0 * mu.cbrt()).abs() < 1e-12);
    let exact: Vec<f64> = phi.grid.nodes().iter().map(|x| x.cosh().powi(-2)).collect();
    assert!(max_diff(&phi.re, &exact) <= 1e-6, "{}", max_diff(&phi.re, &exact));
    assert!(max_abs(&phi.im) == 0.0);

    // WeakST: η = ½μφ(μx)e^{ik₀x} + c.c. with a complex φ.
    let p = FluidParams::new(0.0, 0.6 * beta_critical(0.0)).unwrap();
    let weak = solve_bifurcation(&p).unwrap();
    let mu = 0.005;
    let f = Fourier::new(grid(3000.0, 16384, 16));
    let theta = 0.7;
    let env = |x: f64| Complex64::from_polar(1.0 / (mu * x).cosh(), theta);
    let eta = SurfaceProfile::from_fn(&f, |x| mu * (env(x) * Complex64::from_polar(1.0, weak.k0 * x)).re);
    let phi = extract_envelope(&f, &eta, mu, &weak, weak.k0 / 4.0).unwrap();
    let mut err: f64 = 0.0;
    for (i, x) in phi.grid.nodes().iter().enumerate() {
        let e = Complex64::from_polar(1.0 / x.cosh(), theta);
        err = err.max((Complex64::new(phi.re[i], phi.im[i]) - e).norm());
    }
    assert!(err <= 1e-6, "weak envelope error {err}");
}

#[test]
fn alignment_recovers_shifts_and_phases() {
    let g = PeriodicGrid::new(20.0, 256, 16).unwrap();
    let prof = |s: f64, th: f64| {
        ComplexProfile::from_fn(g, move |x| {
            let c = Complex64::from_polar(1.0 / (x - s).cosh().powi(2), th);
            (c.re, c.im)
        })
    };
    let a = prof(0.0, 0.0);
    let same = align_distance(&a, &a, AlignMode::Translate).unwrap();
    assert!(same.distance <= 1e-12 && same.shift.abs() < 1e-9, "{same:?}");

    let dx = g.dx();
    let b = prof(dx, 0.0);
    let r = align_distance(&a, &b, AlignMode::Translate).unwrap();
    assert!(r.distance <= 1e-10, "grid-step shift: {}", r.distance);
    assert!((r.shift + dx).abs() < 1e-8);

    let c = prof(-1.37, 2.1);
    let r = align_distance(&a, &c, AlignMode::TranslateRotate).unwrap();
    assert!(r.distance <= 1e-8, "{r:?}");
    assert!((r.shift - 1.37).abs() < 1e-7);
    // φ = e^{−2.1i}c(x − 1.37).
    assert!((r.phase - (std::f64::consts::TAU - 2.1)).abs() < 1e-7, "{r:?}");
    // Without the phase freedom the distance stays large.
    assert!(align_distance(&a, &c, AlignMode::Translate).unwrap().distance > 0.1);

    let other = ComplexProfile::from_real(PeriodicGrid::new(10.0, 256, 16).unwrap(), vec![0.0; 256]);
    assert!(matches!(align_distance(&a, &other, AlignMode::Translate), Err(Error::GridMismatch(_))));
}

fn strong_run(descent: Descent) -> (Functionals, LinearWaveData, SurfaceProfile, solwave_core::minimizer::MinimizerResult) {
    let mu = 0.01;
    let (func, lw) = setup(0.0, 2.0, 200.0, 256, 24);
    let init = test_function(&func, &lw, mu).unwrap().eta;
    let mut cfg = MinimizeConfig::new(mu);
    cfg.descent = descent;
    let r = minimize(&func, &cfg, &PenaltyConfig::new(0.6, 1.0), &init).unwrap();
    (func, lw, init, r)
}

#[test]
fn strong_minimizer_from_test_function() {
    let mu: f64 = 0.01;
    let (func, lw, init, r) = strong_run(Descent::QuasiNewton);
    let kdv = kdv_data(&func.params, &lw).unwrap();
    let j_init = func.eval_j(mu, &init, false).unwrap().j;
    let j0 = 2.0 * lw.nu0 * mu;
    assert!(r.converged && r.grad_norm <= 1e-7 * mu, "{} after {}", r.grad_norm, r.iterations);
    assert!(r.bundle.j < j_init);
    assert!(j_init <= j0 + 0.9 * kdv.c_kdv * mu.powf(5.0 / 3.0));
    assert!(r.bundle.j < j0);
    assert!(r.bundle.m_mu.unwrap() < 0.0);
    assert!(!r.penalty_active);
    assert!(r.eta.values.iter().cloned().fold(f64::INFINITY, f64::min) < 0.0);
    for w in r.history.windows(2) {
        assert!(w[1].0 <= w[0].0 + NOISE * (w[0].0.abs() + mu), "history increased");
    }
    assert_eq!(r.history.len(), r.iterations + 1);

    let f = func.fourier();
    let (e1, e2) = split_spectrum(f, &r.eta, &lw, 1.0).unwrap();
    let ratio = (f.sobolev_sq(&e2.values, 2.0) / f.sobolev_sq(&e1.values, 2.0)).sqrt();
    assert!(ratio <= 0.05, "eta2/eta1 = {ratio}");

    // Close to the KdV envelope already at this momentum.
    let phi = extract_envelope(f, &r.eta, mu, &lw, 1.0).unwrap();
    let reference = ComplexProfile::from_fn(phi.grid, |x| (kdv.profile.value(x), 0.0));
    let d = align_distance(&phi, &reference, AlignMode::Translate).unwrap();
    assert!(d.distance < 0.2 * reference.h1_sq().sqrt(), "{d:?}");
}

#[test]
fn descent_methods_agree() {
    let (_, _, _, qn) = strong_run(Descent::QuasiNewton);
    let (_, _, _, pg) = strong_run(Descent::PreconditionedGradient);
    assert!(pg.converged);
    assert!((qn.bundle.j - pg.bundle.j).abs() < 1e-11);
    assert!(max_diff(&qn.eta.values, &pg.eta.values) < 1e-6);
    assert!(pg.iterations > qn.iterations);
}

#[test]
fn translated_start_gives_translated_minimizer() {
    let mu = 0.01;
    let (func, lw) = setup(0.0, 2.0, 200.0, 256, 24);
    let f = func.fourier();
    let init = test_function(&func, &lw, mu).unwrap().eta;
    let mut cfg = MinimizeConfig::new(mu);
    cfg.even = false;
    let pen = PenaltyConfig::new(0.6, 1.0);
    let a = minimize(&func, &cfg, &pen, &init).unwrap();
    let s = 7.3;
    let b = minimize(&func, &cfg, &pen, &shifted(f, &init, s)).unwrap();
    assert!(a.converged && b.converged);
    assert!((a.bundle.j - b.bundle.j).abs() <= 1e-9);
    let back = shifted(f, &b.eta, -s);
    assert!(max_diff(&back.values, &a.eta.values) < 1e-6);
}

#[test]
fn continuation_reaches_the_same_minimizer() {
    let mu = 0.01;
    let (func, lw) = setup(0.0, 2.0, 200.0, 256, 24);
    let init = test_function(&func, &lw, 0.02).unwrap().eta;
    let pen = PenaltyConfig::new(0.6, 1.0);
    let direct = minimize(&func, &MinimizeConfig::new(mu), &pen, &test_function(&func, &lw, mu).unwrap().eta).unwrap();
    let mut cfg = MinimizeConfig::new(mu);
    cfg.continuation = Some(vec![0.02]);
    let cont = minimize(&func, &cfg, &pen, &init).unwrap();
    assert!(cont.converged);
    assert!((cont.bundle.j - direct.bundle.j).abs() < 1e-11);
    assert!(cont.history.len() > cont.iterations);
}
