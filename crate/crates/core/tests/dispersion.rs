use solwave_core::dispersion::{
    beta_critical, f_multiplier, f_prime, f_second, g_dispersion, g_prime, nu_linear, nu_linear_prime,
    solve_bifurcation, FluidParams, Regime,
};
use solwave_core::Error;

fn params(omega: f64, beta: f64) -> FluidParams {
    FluidParams::new(omega, beta).unwrap()
}

#[test]
fn multiplier_values() {
    assert_eq!(f_multiplier(0.0), 1.0);
    assert!((f_multiplier(2.0) - 2.0 / 2f64.tanh()).abs() < 1e-15);
    assert!((f_multiplier(2.0) - 2.074_629_441_455_096).abs() < 1e-14);
    for i in 0..400 {
        let k = -10.0 + 0.05 * i as f64;
        let f = f_multiplier(k);
        assert_eq!(f, f_multiplier(-k));
        assert!(f >= 1.0);
        assert!(f_prime(k) * k >= 0.0);
        assert_eq!(f_second(k), f_second(-k));
    }
}

#[test]
fn multiplier_derivatives_match_differences() {
    for &k in &[0.1, 0.49, 0.51, 1.0, 3.0, 7.5] {
        let h = 1e-5;
        let d1 = (f_multiplier(k + h) - f_multiplier(k - h)) / (2.0 * h);
        let d2 = (f_prime(k + h) - f_prime(k - h)) / (2.0 * h);
        assert!((d1 - f_prime(k)).abs() < 1e-9, "f' at {k}");
        assert!((d2 - f_second(k)).abs() < 1e-9, "f'' at {k}");
    }
}

#[test]
fn linear_speed_solves_dispersion_relation() {
    assert_eq!(nu_linear(0.0, &params(0.0, 2.0)), 1.0);
    for &(w, b) in &[(0.0, 2.0), (0.0, 0.2), (1.5, 0.05), (-2.0, 3.0), (4.0, 0.01)] {
        let p = params(w, b);
        for i in 0..200 {
            let k = 0.1 * i as f64;
            let nu = nu_linear(k, &p);
            assert!(nu > 0.0);
            let res = 1.0 + b * k * k - w * nu - nu * nu * f_multiplier(k);
            assert!(res.abs() < 1e-12 * (1.0 + b * k * k), "residual {res} at k={k}");
            if w == 0.0 {
                assert!((nu - ((1.0 + b * k * k) / f_multiplier(k)).sqrt()).abs() < 1e-14 * nu);
            }
            if k > 0.0 {
                let h = 1e-6;
                let fd = (nu_linear(k + h, &p) - nu_linear(k - h, &p)) / (2.0 * h);
                assert!((fd - nu_linear_prime(k, &p)).abs() < 1e-7);
            }
        }
    }
}

/// Curvature of ν at k = 0 by Richardson extrapolation of (ν(k) − ν(0))/k².
fn curvature_at_zero(omega: f64, beta: f64) -> f64 {
    let p = FluidParams { omega, beta };
    let c = |k: f64| (nu_linear(k, &p) - nu_linear(0.0, &p)) / (k * k);
    let h = 0.005;
    (4.0 * c(h) - c(2.0 * h)) / 3.0
}

#[test]
fn critical_bond_number_from_transition() {
    assert!((beta_critical(0.0) - 1.0 / 3.0).abs() < 1e-16);
    for &w in &[-3.0, -1.0, 0.0, 0.7, 2.0, 5.0] {
        // ν stops having its minimum at k = 0 where its curvature changes sign.
        let (mut lo, mut hi) = (1e-4, 10.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if curvature_at_zero(w, mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let bc = 0.5 * (lo + hi);
        assert!((bc - beta_critical(w)).abs() < 1e-8, "omega {w}: {bc} vs {}", beta_critical(w));
    }
    let mut prev = f64::INFINITY;
    for i in 0..200 {
        let w = -10.0 + 0.1 * i as f64;
        let b = beta_critical(w);
        assert!(b > 0.0 && b < prev);
        prev = b;
    }
    assert!(beta_critical(1e4) < 1e-8);
}

#[test]
fn parameter_validation() {
    assert!(matches!(FluidParams::new(0.0, -1.0), Err(Error::InvalidParams(_))));
    assert!(matches!(FluidParams::new(f64::NAN, 1.0), Err(Error::InvalidParams(_))));
    let bc = beta_critical(0.5);
    assert!(matches!(FluidParams::new(0.5, bc + 5e-10), Err(Error::RegimeAmbiguous { .. })));
    assert!(FluidParams::new(0.5, bc + 1e-7).is_ok());
}

#[test]
fn strong_regime_bifurcation() {
    for &w in &[-2.0, 0.0, 1.0, 3.0] {
        let b = 2.0 * beta_critical(w).max(0.5);
        let lw = solve_bifurcation(&params(w, b)).unwrap();
        assert_eq!(lw.regime, Regime::StrongST);
        assert_eq!(lw.k0, 0.0);
        assert!((lw.nu0 - 0.5 * (-w + (w * w + 4.0).sqrt())).abs() < 1e-15);
        assert!(lw.g2_at_k0 > 0.0);
        for i in 1..2000 {
            assert!(g_dispersion(0.01 * i as f64, &lw) > 0.0);
        }
    }
}

#[test]
fn weak_regime_bifurcation() {
    for &(w, frac) in &[(0.0, 0.6), (1.0, 0.3), (-1.0, 0.8), (3.0, 0.1), (-4.0, 0.5)] {
        let lw = solve_bifurcation(&params(w, frac * beta_critical(w))).unwrap();
        assert_eq!(lw.regime, Regime::WeakST);
        assert!(lw.k0 > 0.0);
        assert!(g_dispersion(lw.k0, &lw).abs() < 1e-10);
        assert!(g_prime(lw.k0, &lw).abs() < 1e-10);
        assert!(lw.g2_at_k0 > 0.0);
        // Dense scan: g ≥ 0, smallest sample within one cell of k₀.
        let step = 1e-3;
        let mut best = (0.0, f64::INFINITY);
        for i in -20000..=20000 {
            let k = step * i as f64;
            let g = g_dispersion(k, &lw);
            assert!(g >= -1e-10, "g({k}) = {g}");
            assert_eq!(g, g_dispersion(-k, &lw));
            if k >= 0.0 && g < best.1 {
                best = (k, g);
            }
        }
        assert!((best.0 - lw.k0).abs() <= step, "{} vs {}", best.0, lw.k0);
    }
}
