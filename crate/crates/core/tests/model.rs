use oscbath::model::{
    default_regulator, discretize_spectral, gamma_tilde, memory_gamma, spectral_from_gamma, BathKernel, Scheme,
};
use oscbath::quadrature::{integrate, integrate_panels, Tolerance};
use oscbath::{SpectralDensity, SystemParams, C64};

fn drude() -> SpectralDensity {
    SpectralDensity::OhmicDrude { eta: 0.1, omega_c: 1.0 }
}

fn band_limited_gamma(spectral: &SpectralDensity, p: &SystemParams, tau: f64, omega_max: f64) -> f64 {
    let pieces = ((omega_max * tau / std::f64::consts::PI).ceil() as usize).max(1);
    let nodes: Vec<f64> = (0..=pieces).map(|k| omega_max * k as f64 / pieces as f64).collect();
    let tol = Tolerance { abs: 1e-15, rel: 1e-13, max_intervals: 100_000 };
    let mut f = |w: f64| C64::new(spectral.density(p, w).unwrap() * (w * tau).sin(), 0.0);
    integrate_panels(&mut f, &nodes, tol).unwrap().0.re
}

#[test]
fn drude_density_round_trips_through_laplace_image() {
    for p in [SystemParams::default(), SystemParams::new(2.5, 1.0, 0.7, 1.0, 1.0).unwrap()] {
        let spectral = SpectralDensity::OhmicDrude { eta: 0.3, omega_c: 10.0 };
        let kernel = BathKernel::new(spectral.clone(), p);
        let recovered = spectral_from_gamma(&kernel, 1e-8);
        for k in 1..=100 {
            let w = 0.5 * k as f64;
            let g = spectral.density(&p, w).unwrap();
            let back = recovered.eval(w).unwrap();
            assert!((back / g - 1.0).abs() <= 1e-6, "ω={w}: {back} vs {g}");
        }
    }
}

#[test]
fn zero_coupling_recovers_zero_density() {
    let p = SystemParams::default();
    let spectral = SpectralDensity::Discrete { omegas: vec![1.0, 2.0], couplings: vec![0.0, 0.0] };
    let kernel = BathKernel::new(spectral.clone(), p);
    let g = spectral_from_gamma(&kernel, default_regulator(&spectral, &p));
    for k in 1..50 {
        assert_eq!(g.eval(0.13 * k as f64).unwrap(), 0.0);
    }
}

#[test]
fn discrete_spike_carries_its_coupling_weight() {
    let p = SystemParams::new(1.5, 1.0, 0.8, 1.0, 1.0).unwrap();
    let (w0, f0) = (2.0, 0.4);
    let spectral = SpectralDensity::Discrete { omegas: vec![w0], couplings: vec![f0] };
    let kernel = BathKernel::new(spectral, p);
    let eps = 1e-4;
    let g = spectral_from_gamma(&kernel, eps);
    let nodes = [w0 - 1.0, w0 - 1e-2, w0 - 1e-4, w0, w0 + 1e-4, w0 + 1e-2, w0 + 1.0];
    let tol = Tolerance { abs: 1e-12, rel: 1e-10, max_intervals: 10_000 };
    let mut f = |w: f64| C64::new(g.eval(w).unwrap(), 0.0);
    let weight = integrate_panels(&mut f, &nodes, tol).unwrap().0.re;
    let want = f0 * f0 / (p.m * p.rho * w0);
    assert!((weight / want - 1.0).abs() <= 1e-3, "{weight} vs {want}");
}

#[test]
fn recovered_densities_are_passive() {
    let p = SystemParams::default();
    let models = [
        drude(),
        SpectralDensity::Discrete { omegas: vec![0.7, 1.9, 3.1], couplings: vec![0.2, 0.5, 0.1] },
        SpectralDensity::Tabulated { omega: vec![0.0, 1.0, 2.0, 4.0], g: vec![0.0, 0.3, 0.2, 0.0] },
    ];
    for spectral in models {
        let eps = default_regulator(&spectral, &p).max(1e-4);
        let kernel = BathKernel::new(spectral.clone(), p);
        let g = spectral_from_gamma(&kernel, eps);
        for k in 1..=400 {
            let w = 0.0125 * k as f64;
            let v = g.eval(w).unwrap();
            assert!(v >= 0.0, "{spectral:?} at ω={w}: {v}");
        }
    }
}

#[test]
fn discrete_laplace_image_matches_direct_quadrature() {
    let p = SystemParams::new(1.2, 1.0, 0.9, 1.0, 1.0).unwrap();
    let spectral = SpectralDensity::Discrete { omegas: vec![0.6, 1.7, 3.3], couplings: vec![0.3, 0.2, 0.4] };
    let t_big = 60.0;
    for &s in &[C64::new(0.5, 0.0), C64::new(0.8, 1.3), C64::new(1.5, -2.0), C64::new(3.0, 0.4)] {
        let want = gamma_tilde(&spectral, &p, s).unwrap();
        let tol = Tolerance { abs: 1e-13, rel: 1e-11, max_intervals: 50_000 };
        let nodes: Vec<f64> = (0..=240).map(|k| t_big * k as f64 / 240.0).collect();
        let mut f = |tau: f64| {
            if tau == 0.0 {
                return C64::new(0.0, 0.0);
            }
            (-s * tau).exp() * memory_gamma(&spectral, &p, tau).unwrap()
        };
        let got = integrate_panels(&mut f, &nodes, tol).unwrap().0;
        assert!((got - want).norm() <= 1e-6, "s={s}: {got} vs {want}");
    }
}

#[test]
fn drude_laplace_image_matches_closed_form_kernel() {
    let p = SystemParams::default();
    let spectral = SpectralDensity::OhmicDrude { eta: 0.2, omega_c: 3.0 };
    for &s in &[C64::new(0.5, 0.0), C64::new(1.0, 2.0)] {
        let want = gamma_tilde(&spectral, &p, s).unwrap();
        let tol = Tolerance { abs: 1e-14, rel: 1e-12, max_intervals: 10_000 };
        let got = integrate(|tau: f64| (-s * tau).exp() * (0.2 * 3.0 * (-3.0 * tau).exp()), 0.0, 60.0, tol).unwrap().0;
        assert!((got - want).norm() <= 1e-10, "{got} vs {want}");
    }
}

#[test]
fn discretized_drude_bath_converges_to_band_limited_kernel() {
    let p = SystemParams::default();
    let spectral = drude();
    let omega_max = 20.0;
    let scale = 0.1;
    let taus: Vec<f64> = (1..=100).map(|k| 0.05 * k as f64).collect();
    let reference: Vec<f64> = taus.iter().map(|&t| band_limited_gamma(&spectral, &p, t, omega_max)).collect();
    let error = |n: usize| {
        let bath = discretize_spectral(&spectral, &p, n, Scheme::Linear, omega_max, None).unwrap();
        let discrete = SpectralDensity::discrete(&bath);
        taus.iter()
            .zip(&reference)
            .map(|(&t, &r)| (memory_gamma(&discrete, &p, t).unwrap() - r).abs())
            .fold(0.0, f64::max)
    };
    let errors: Vec<f64> = [256, 512, 1024].iter().map(|&n| error(n)).collect();
    assert!(errors[0] <= 1e-3 * scale, "256 modes: {}", errors[0]);
    assert!(errors[0] / errors[1] >= 1.7, "{errors:?}");
    assert!(errors[1] / errors[2] >= 1.7, "{errors:?}");
}

#[test]
fn discretized_zero_density_has_zero_couplings() {
    let p = SystemParams::default();
    let spectral = SpectralDensity::OhmicDrude { eta: 0.0, omega_c: 2.0 };
    let bath = discretize_spectral(&spectral, &p, 16, Scheme::Linear, 10.0, None).unwrap();
    assert!(bath.couplings.iter().all(|&f| f == 0.0));
    let log = discretize_spectral(&drude(), &p, 16, Scheme::Log, 10.0, Some(0.01)).unwrap();
    assert!(log.omegas.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn discrete_bath_json_round_trips_exactly() {
    let text = r#"{"type":"discrete","omegas":[0.1,1.7000000000000002,3.3333333333333335],"couplings":[0.25,1e-17,0.30000000000000004]}"#;
    let spectral = SpectralDensity::from_json(text).unwrap();
    assert_eq!(serde_json::to_string(&spectral).unwrap(), text);
    let bad = r#"{"type":"discrete","omegas":[1.0],"couplings":[0.1],"extra":1}"#;
    assert!(SpectralDensity::from_json(bad).is_err());
}
