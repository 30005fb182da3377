mod common;

use common::grid;
use solwave_core::asymptotics::{
    certify_focusing, coefficients, kdv_data, nls_data, test_function, KdVData, NLSData, SechProfile,
};
use solwave_core::dispersion::{beta_critical, solve_bifurcation, FluidParams, LinearWaveData};
use solwave_core::functionals::Functionals;
use solwave_core::spectral::{integrate, Fourier, SurfaceProfile};
use solwave_core::strip::Strip;
use solwave_core::Error;

fn linear(omega: f64, beta: f64) -> (FluidParams, LinearWaveData) {
    let p = FluidParams::new(omega, beta).unwrap();
    (p, solve_bifurcation(&p).unwrap())
}

/// A grid wide enough that the profile decays to roundoff at the ends.
fn profile_grid(phi: &SechProfile, n: usize) -> Fourier {
    Fourier::new(grid(40.0 / phi.rate.abs(), n, 16))
}

fn profile_samples(f: &Fourier, phi: &SechProfile) -> Vec<f64> {
    f.grid.nodes().iter().map(|&x| phi.value(x)).collect()
}

fn check_kdv(kd: &KdVData) {
    let f = profile_grid(&kd.profile, 2048);
    let phi = profile_samples(&f, &kd.profile);
    let mass = integrate(&f.grid, &phi.iter().map(|v| v * v).collect::<Vec<_>>());
    assert!((mass - 2.0 * kd.alpha_kdv).abs() < 1e-8, "mass {mass} vs {}", 2.0 * kd.alpha_kdv);
    let e = kd.energy(&f, &phi);
    assert!((e - kd.c_kdv).abs() < 1e-8, "energy {e} vs {}", kd.c_kdv);
    for x in f.grid.nodes() {
        assert!(kd.ode_residual(x).abs() < 1e-8, "residual at {x}: {}", kd.ode_residual(x));
    }
}

fn check_nls(nd: &NLSData) {
    let f = profile_grid(&nd.profile, 2048);
    let phi = profile_samples(&f, &nd.profile);
    let mass = integrate(&f.grid, &phi.iter().map(|v| v * v).collect::<Vec<_>>());
    assert!((mass - 2.0 * nd.alpha_nls).abs() < 1e-8 * nd.alpha_nls, "mass {mass} vs {}", 2.0 * nd.alpha_nls);
    let e = nd.energy(&f, &phi, None);
    assert!((e - nd.c_nls).abs() < 1e-8 * nd.c_nls.abs(), "energy {e} vs {}", nd.c_nls);
    let scale = nd.profile.amplitude * (nd.g2 * nd.profile.rate.powi(2)).max(nd.nu_nls.abs());
    for x in f.grid.nodes() {
        assert!(nd.ode_residual(x).abs() < 1e-8 * scale.max(1.0), "residual at {x}: {}", nd.ode_residual(x));
    }
}

#[test]
fn sech_derivatives_match_differences() {
    for phi in [
        SechProfile { amplitude: -0.7, rate: 0.4, power: 2 },
        SechProfile { amplitude: 1.3, rate: 2.0, power: 1 },
    ] {
        for &x in &[-3.0, -0.2, 0.0, 0.9, 4.0] {
            let h = 1e-4;
            let d1 = (phi.value(x + h) - phi.value(x - h)) / (2.0 * h);
            let d2 = (phi.value(x + h) - 2.0 * phi.value(x) + phi.value(x - h)) / (h * h);
            assert!((d1 - phi.deriv(x)).abs() < 1e-7);
            assert!((d2 - phi.deriv2(x)).abs() < 1e-5);
        }
    }
    assert_eq!(SechProfile { amplitude: 1.0, rate: 1.0, power: 2 }.value(800.0), 0.0);
}

#[test]
fn kdv_constant_at_reference_point() {
    let (p, lw) = linear(0.0, 2.0);
    let kd = kdv_data(&p, &lw).unwrap();
    let expected = -(9.0 / 5.0) * (2f64 / 3.0).cbrt() / ((5f64 / 3.0).cbrt() * 4f64.powf(5.0 / 6.0));
    assert!((kd.c_kdv - expected).abs() < 1e-10 * expected.abs());
    assert!((kd.c_kdv + 0.4177).abs() < 1e-4);
    assert!((kd.alpha_kdv - 1.0).abs() < 1e-15);
}

#[test]
fn kdv_soliton_identities_over_parameters() {
    for &omega in &[-3.0, -1.0, 0.0, 0.5, 1.0, 4.0] {
        let bc = beta_critical(omega);
        for &scale in &[1.2, 2.0, 6.0] {
            let (p, lw) = linear(omega, scale * bc);
            let kd = kdv_data(&p, &lw).unwrap();
            assert!(kd.nu_kdv < 0.0 && kd.c_kdv < 0.0);
            assert!(kd.profile.amplitude < 0.0, "waves of depression");
            check_kdv(&kd);
        }
    }
}

#[test]
fn nls_soliton_identities() {
    for &(omega, frac) in &[(0.0, 0.6), (1.0, 0.5), (-1.0, 0.3), (2.5, 0.8)] {
        let (p, lw) = linear(omega, frac * beta_critical(omega));
        let c = coefficients(&p, &lw).unwrap();
        let nd = nls_data(&p, &lw, &c).unwrap();
        check_nls(&nd);
        let expect = 1.0 / (0.25 * lw.nu0 * solwave_core::dispersion::f_multiplier(lw.k0) + omega / 8.0);
        assert!((2.0 * nd.alpha_nls - expect).abs() < 1e-14 * expect);
        assert!(nd.profile.value(0.0) > 0.0 && nd.profile.value(3.0) < nd.profile.value(0.0));
        assert_eq!(nd.profile.value(1.7), nd.profile.value(-1.7));
    }
}

#[test]
fn regime_guards() {
    let (ps, lws) = linear(0.0, 2.0);
    let (pw, lww) = linear(0.0, 0.2);
    assert!(matches!(coefficients(&ps, &lws), Err(Error::WrongRegime { .. })));
    assert!(matches!(kdv_data(&pw, &lww), Err(Error::WrongRegime { .. })));
    let mut c = coefficients(&pw, &lww).unwrap();
    c.a4 = 20.0;
    assert!(matches!(nls_data(&pw, &lww, &c), Err(Error::NotFocusing(_))));
}

#[test]
fn coefficient_structure() {
    for &omega in &[-4.0, -1.0, 0.0, 2.0, 5.0] {
        for &frac in &[0.1, 0.5, 0.9] {
            let (p, lw) = linear(omega, frac * beta_critical(omega));
            let c = coefficients(&p, &lw).unwrap();
            assert_eq!(c.a4, c.a41 + 2.0 * lw.nu0 * c.a42 - lw.nu0 * lw.nu0 * c.a43);
            assert!(c.a3 <= 0.0);
            assert!(c.margin() < 0.0);
        }
    }
    let (p, lw) = linear(0.0, 0.2);
    let c = coefficients(&p, &lw).unwrap();
    assert!((lw.k0 - 1.86657).abs() < 1e-4);
    assert!((c.a3 + 24.408).abs() < 1e-2, "A3 = {}", c.a3);
}

/// Quartic parts on a wave packet ε sech(δx) cos(k₀x), divided by ∫η⁴.
fn quartic_ratios(omega: f64, frac: f64, delta: f64) -> (f64, f64, f64) {
    let (p, _) = linear(omega, frac * beta_critical(omega));
    let lw = solve_bifurcation(&p).unwrap();
    let half = 36.0 / delta;
    let k_need = 10.0 * lw.k0.max(1.0);
    let n = ((2.0 * half * k_need / std::f64::consts::PI) as usize).next_power_of_two();
    let func = Functionals::new(Strip::new(grid(half, n, 16)), p);
    let f = func.fourier();
    let eta = SurfaceProfile::from_fn(f, |x| 0.01 / (delta * x).cosh() * (lw.k0 * x).cos());
    let q = integrate(&f.grid, &eta.values.iter().map(|v| v.powi(4)).collect::<Vec<_>>());
    let parts = func.eval_parts(&eta);
    (parts.k4 / q, parts.g4 / q, parts.l4 / q)
}

#[test]
fn quartic_coefficients_match_packet_oracle() {
    for &(omega, frac) in &[(0.0, 0.6), (2.0, 0.5), (-1.5, 0.4)] {
        let (p, lw) = linear(omega, frac * beta_critical(omega));
        let c = coefficients(&p, &lw).unwrap();
        let coarse = quartic_ratios(omega, frac, 0.1);
        let fine = quartic_ratios(omega, frac, 0.05);
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-3);
        assert!(rel(fine.0, c.a41) < 1e-2, "A41 {} vs {} (omega {omega})", fine.0, c.a41);
        assert!(rel(fine.0, c.a41) <= rel(coarse.0, c.a41) + 1e-6);
        if omega != 0.0 {
            assert!(rel(fine.1, c.a42) < 1e-2, "A42 {} vs {}", fine.1, c.a42);
        } else {
            assert!(fine.1.abs() < 1e-12);
        }
        assert!(rel(fine.2, c.a43) < 1e-2, "A43 {} vs {}", fine.2, c.a43);
        // The variant with ω on the surface-tension term is rejected.
        assert!(rel(fine.0, c.a41_alt) > 0.1, "variant {} not separated from {}", c.a41_alt, fine.0);
    }
}

#[test]
fn focusing_certified_on_default_grid() {
    let omegas: Vec<f64> = (0..=20).map(|i| -5.0 + 0.5 * i as f64).collect();
    let fracs: Vec<f64> = (1..=19).map(|i| 0.05 * i as f64).collect();
    let rep = certify_focusing(&omegas, &fracs);
    assert_eq!(rep.samples.len(), 21 * 19);
    assert!(rep.samples.iter().all(|s| s.error.is_none()));
    assert!(rep.all_negative, "max margin {} at {:?}", rep.max_margin, rep.worst);
    assert_eq!(rep.sign_flips, 0);
    assert!(rep.max_roundtrip < 1e-9, "round trip {}", rep.max_roundtrip);
    assert!(rep.passed(1e-9));
}

fn strong_functionals(omega: f64, beta: f64, half: f64, n: usize) -> (Functionals, LinearWaveData) {
    let (p, lw) = linear(omega, beta);
    (Functionals::new(Strip::new(grid(half, n, 24)), p), lw)
}

#[test]
fn strong_test_function_bound() {
    let (func, lw) = strong_functionals(0.0, 2.0, 240.0, 256);
    let mu = 5e-3;
    let tf = test_function(&func, &lw, mu).unwrap();
    let (g, _, l) = func.eval_gkl(&tf.eta).unwrap();
    assert!((lw.nu0 * l - g - mu).abs() < 1e-10);
    let b = func.eval_j(mu, &tf.eta, false).unwrap();
    let ratio = (b.j - 2.0 * lw.nu0 * mu) / (tf.model_constant * mu.powf(5.0 / 3.0));
    assert!((ratio - 1.0).abs() < 0.1, "ratio {ratio}");
    assert!((tf.predicted - (2.0 * lw.nu0 * mu + tf.model_constant * mu.powf(5.0 / 3.0))).abs() < 1e-15);
}

#[test]
fn strong_test_function_scale() {
    let (func, lw) = strong_functionals(0.0, 2.0, 400.0, 256);
    let mu = 1e-3;
    let tf = test_function(&func, &lw, mu).unwrap();
    let r = tf.alpha / mu.cbrt();
    assert!((r - 1.0).abs() < 0.05, "alpha/mu^(1/3) = {r}");
}

#[test]
fn test_function_respects_depth_bound() {
    for omega in [0.0, 1.0] {
        let (func, lw) = strong_functionals(omega, 2.0, 80.0, 256);
        let tf = test_function(&func, &lw, 0.1).unwrap();
        tf.eta.check_depth().unwrap();
    }
    let (p, lw) = linear(0.0, 0.2);
    let func = Functionals::new(Strip::new(grid(40.0, 512, 24)), p);
    // The packet family leaves the admissible set before it carries μ = 0.1.
    let r = test_function(&func, &lw, 0.1);
    assert!(matches!(r, Err(Error::DomainViolation { .. })), "{r:?}");
    assert!(matches!(test_function(&func, &lw, 0.0), Err(Error::InvalidParams(_))));
}

#[test]
fn weak_test_function_bound() {
    let (p, lw) = linear(0.0, 0.6 * beta_critical(0.0));
    let func = Functionals::new(Strip::new(grid(240.0, 2048, 20)), p);
    let mu = 1e-3;
    let tf = test_function(&func, &lw, mu).unwrap();
    let (g, _, l) = func.eval_gkl(&tf.eta).unwrap();
    assert!((lw.nu0 * l - g - mu).abs() < 1e-10);
    assert!((tf.alpha / mu - 1.0).abs() < 0.05);
    let b = func.eval_j(mu, &tf.eta, false).unwrap();
    let ratio = (b.j - 2.0 * lw.nu0 * mu) / (tf.model_constant * mu.powi(3));
    assert!((ratio - 1.0).abs() < 0.05, "ratio {ratio}");
}
