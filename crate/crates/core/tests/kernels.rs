mod common;

use oscbath::kernels::{kernels_exact, symplectic_form, FlowEngine};
use oscbath::linalg::{complexify, expm};
use oscbath::model::{BathKernel, SpectralDensity};
use oscbath::oracle::ode_kernels_series;
use oscbath::talbot::{kernels_talbot, TalbotOptions};
use oscbath::{DiscreteBath, KernelSet, SystemParams, C64};

fn max_dev(a: &KernelSet, b: &KernelSet) -> f64 {
    let mut d = (a.alpha - b.alpha).norm().max((a.beta - b.beta).norm());
    for j in 0..a.eta.len() {
        d = d.max((a.eta[j] - b.eta[j]).norm()).max((a.delta[j] - b.delta[j]).norm());
    }
    d.max((&a.q - &b.q).camax()).max((&a.qdot - &b.qdot).camax())
}

#[test]
fn exact_matches_ode_on_single_mode() {
    let bath = DiscreteBath::new(vec![1.0], vec![0.3]).unwrap();
    let p = SystemParams::default();
    let ode = ode_kernels_series(&p, &bath, &[1.0], 1e-12).unwrap();
    let ex = kernels_exact(&p, &bath, C64::new(1.0, 0.0)).unwrap();
    let d = max_dev(&ode[0], &ex);
    assert!(d <= 1e-10, "deviation {d}");
}

#[test]
fn exact_matches_ode_on_corpus() {
    let p = SystemParams::default();
    let times: Vec<f64> = (1..=20).map(|k| 0.25 * k as f64).collect();
    for bath in common::corpus(7, 5, 6, 0.5) {
        let engine = FlowEngine::new(&p, &bath).unwrap();
        let ode = ode_kernels_series(&p, &bath, &times, 1e-12).unwrap();
        for (o, &t) in ode.iter().zip(&times) {
            let d = max_dev(o, &engine.kernels(C64::new(t, 0.0)));
            assert!(d <= 1e-10, "N={} t={t} deviation {d}", bath.len());
        }
    }
}

#[test]
fn delta_is_scaled_time_derivative_of_eta() {
    let p = SystemParams::default();
    let bath = DiscreteBath::new(vec![0.7, 1.9, 3.1], vec![0.4, 0.2, 0.5]).unwrap();
    let e = FlowEngine::new(&p, &bath).unwrap();
    let h = 1e-5;
    for &t in &[0.3, 1.1, 2.7, 4.4] {
        let plus = e.kernels(C64::new(t + h, 0.0));
        let minus = e.kernels(C64::new(t - h, 0.0));
        let mid = e.kernels(C64::new(t, 0.0));
        for j in 0..3 {
            let fd = (plus.eta[j] - minus.eta[j]) / (2.0 * h);
            assert!((fd - mid.delta[j] * bath.omegas[j]).norm() <= 1e-6);
            let fdq = (&plus.q - &minus.q) / C64::new(2.0 * h, 0.0);
            let dq = (fdq - &mid.qdot).camax();
            assert!(dq <= 1e-6, "t={t} dq={dq}\n{}\n{}", (&plus.q - &minus.q) / C64::new(2.0 * h, 0.0), mid.qdot);
        }
        assert!((&mid.q - mid.q.transpose()).camax() <= 1e-12);
    }
}

#[test]
fn flow_is_symplectic() {
    let p = SystemParams::default();
    for bath in common::corpus(11, 5, 6, 0.5) {
        let e = FlowEngine::new(&p, &bath).unwrap();
        let j = complexify(&symplectic_form::<f64>(bath.len()));
        for &t in &[0.5, 3.0, 10.0] {
            let s = e.flow(C64::new(t, 0.0));
            let r = s.transpose() * &j * &s - &j;
            assert!(r.norm() <= 1e-10, "t={t}: {}", r.norm());
        }
    }
}

#[test]
fn complex_time_matches_direct_exponential() {
    let p = SystemParams::default();
    let bath = DiscreteBath::new(vec![1.3, 2.2], vec![0.3, 0.4]).unwrap();
    let e = FlowEngine::new(&p, &bath).unwrap();
    let a = complexify(&e.dynamics.a);
    for &tau in &[0.3, 1.0, 2.0] {
        let t = C64::new(0.0, -tau);
        let direct = expm(&(&a * t));
        let diff = (e.flow(t) - &direct).camax();
        assert!(diff <= 1e-10 * direct.camax().max(1.0), "tau {tau}: {diff}");
    }
}

#[test]
fn fallback_engine_agrees_with_eigen_engine() {
    // The scaling-and-squaring route, exercised through a near-free oscillator.
    let p = SystemParams { omega: 0.0, ..SystemParams::default() };
    let bath = DiscreteBath::new(vec![1.3, 2.2], vec![0.3, 0.4]).unwrap();
    let e = FlowEngine::new(&p, &bath).unwrap();
    let ode = ode_kernels_series(&p, &bath, &[0.7, 2.0], 1e-12).unwrap();
    for o in &ode {
        assert!(max_dev(o, &e.kernels(o.t)) <= 1e-10);
    }
}

#[test]
fn talbot_matches_exact_on_corpus() {
    let p = SystemParams::default();
    for bath in common::corpus(3, 4, 6, 0.5) {
        let kernel = BathKernel::new(SpectralDensity::discrete(&bath), p);
        let e = FlowEngine::new(&p, &bath).unwrap();
        for k in 0..10 {
            let t = 0.1 + 0.49 * k as f64;
            let tal = kernels_talbot(&kernel, t, TalbotOptions::default()).unwrap();
            let ex = e.kernels(C64::new(t, 0.0));
            assert!((tal.alpha - ex.alpha.re).abs() <= 1e-7, "alpha t={t} {} {}", tal.alpha, ex.alpha);
            assert!((tal.beta - ex.beta.re).abs() <= 1e-7, "beta t={t}");
        }
    }
}

#[test]
fn talbot_drude_self_convergent() {
    let p = SystemParams::default();
    let kernel = BathKernel::new(SpectralDensity::OhmicDrude { eta: 0.2, omega_c: 10.0 }, p);
    let r = kernels_talbot(&kernel, 1.0, TalbotOptions { tol: 1e-9, ..Default::default() }).unwrap();
    println!("drude t=1 alpha={:.17e} beta={:.17e} err={:e} nodes={}", r.alpha, r.beta, r.error_estimate, r.nodes);
    assert!(r.error_estimate <= 1e-9);
}
