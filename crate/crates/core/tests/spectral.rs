use oscbath::oracle::spectral::{projected_weight, spectral_propagator, spectral_propagator_resummed};
use oscbath::propagator::{assemble_propagator, evaluate_propagator, PropagatorOptions};
use oscbath::{DiscreteBath, Error, SystemParams, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bare(t: C64, x: f64, xp: f64) -> C64 {
    let s = t.sin();
    let pref = (C64::new(0.0, 2.0 * std::f64::consts::PI) * s).powf(-0.5);
    pref * (C64::new(0.0, 0.5) * ((x * x + xp * xp) * t.cos() - 2.0 * x * xp) / s).exp()
}

#[test]
fn free_oscillator_matches_mehler_kernel() {
    let p = SystemParams::default();
    let bath = DiscreteBath::empty();
    for &(x, xp) in &[(0.0, 0.0), (0.7, -0.4), (-1.5, 1.1)] {
        let t = C64::new(0.9, 0.0);
        let got = spectral_propagator_resummed(&p, &bath, x, &[], xp, &[], t).unwrap();
        let want = bare(t, x, xp);
        assert!((got - want).norm() <= 1e-12, "{got} vs {want}");
        let tc = C64::new(0.9, -0.8);
        let got = spectral_propagator(&p, &bath, 80, x, &[], xp, &[], tc).unwrap();
        let want = bare(tc, x, xp);
        assert!((got - want).norm() <= 1e-8 * want.norm(), "{got} vs {want}");
    }
}

#[test]
fn resummation_follows_the_branch_past_caustics() {
    let p = SystemParams::default();
    let bath = DiscreteBath::empty();
    for &t in &[2.0, 4.0, 5.5] {
        let t = C64::new(t, 0.0);
        let got = spectral_propagator_resummed(&p, &bath, 0.3, &[], -0.2, &[], t).unwrap();
        let form = assemble_propagator(&p, &bath, t, &PropagatorOptions::default()).unwrap();
        let want = evaluate_propagator(&form, 0.3, &[], -0.2, &[]).unwrap();
        assert!((got - want).norm() <= 1e-9 * want.norm(), "t={}: {got} vs {want}", t.re);
    }
}

#[test]
fn coupled_truncated_and_resummed_sums_agree_in_complex_time() {
    let p = SystemParams::default();
    let bath = DiscreteBath::new(vec![1.7], vec![0.2]).unwrap();
    let t = C64::new(0.9, -0.7);
    let form = assemble_propagator(&p, &bath, t, &PropagatorOptions::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..5 {
        let (x, y, xp, yp) = (rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
        let sum = spectral_propagator(&p, &bath, 70, x, &[y], xp, &[yp], t).unwrap();
        let closed = spectral_propagator_resummed(&p, &bath, x, &[y], xp, &[yp], t).unwrap();
        let engine = evaluate_propagator(&form, x, &[y], xp, &[yp]).unwrap();
        assert!((sum - closed).norm() <= 1e-8 * closed.norm(), "{sum} vs {closed}");
        assert!((engine - closed).norm() <= 1e-8 * closed.norm(), "{engine} vs {closed}");
    }
}

#[test]
fn real_time_eigen_sum_reports_truncation() {
    let p = SystemParams::default();
    let bath = DiscreteBath::new(vec![1.7], vec![0.2]).unwrap();
    let r = spectral_propagator(&p, &bath, 30, 0.2, &[0.1], -0.3, &[0.4], C64::new(0.9, 0.0));
    assert!(matches!(r, Err(Error::Truncation { .. })), "{r:?}");
}

#[test]
fn initial_time_sum_resolves_a_narrow_gaussian() {
    let p = SystemParams::default();
    // width 0.5 of the ground state, displaced and boosted
    let s: f64 = 0.5;
    let phi = |x: f64| {
        let z = (x - 0.4) / s;
        C64::new(-0.5 * z * z, 0.3 * x).exp()
    };
    let norm = s * std::f64::consts::PI.sqrt();
    let w = projected_weight(&p, 80, phi, -8.0, 8.0, 1601).unwrap();
    assert!(w / norm >= 0.999, "captured fraction {}", w / norm);
}

#[test]
fn coupled_resummed_sum_matches_propagator_in_real_time() {
    let p = SystemParams::default();
    let bath = DiscreteBath::new(vec![1.7], vec![0.2]).unwrap();
    let t = C64::new(0.9, 0.0);
    let form = assemble_propagator(&p, &bath, t, &PropagatorOptions::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for _ in 0..25 {
        let q: Vec<f64> = (0..4).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let oracle = spectral_propagator_resummed(&p, &bath, q[0], &[q[1]], q[2], &[q[3]], t).unwrap();
        let engine = evaluate_propagator(&form, q[0], &[q[1]], q[2], &[q[3]]).unwrap();
        worst = worst.max((oracle - engine).norm());
    }
    assert!(worst <= 1e-6, "max deviation {worst}");
}
