//! Acceptance criteria, one pass/fail line each.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use oscbath::equilibrium::{equilibrium_moments, equilibrium_validation, Mode};
use oscbath::kernels::{kernels_exact, symplectic_form};
use oscbath::linalg::complexify;
use oscbath::model::BathKernel;
use oscbath::oracle::spectral::spectral_propagator_resummed;
use oscbath::oracle::{covariance_evolve_series, gibbs_covariance, ode_kernels_series, thermal_bath_moments, PhaseCovariance, SystemMoments};
use oscbath::propagator::{assemble_propagator, classical_map, evaluate_propagator, weak_coupling_propagator, PropagatorOptions};
use oscbath::reduced::{propagate_gaussian, propagate_grid, reduced_kernel_with};
use oscbath::talbot::{kernels_talbot, TalbotOptions};
use oscbath::{DiscreteBath, FlowEngine, GaussianState, Grid, KernelSet, SpectralDensity, SystemParams, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn random_bath(rng: &mut ChaCha8Rng, n: usize, fmax: f64) -> DiscreteBath {
    let mut omegas: Vec<f64> = Vec::new();
    while omegas.len() < n {
        let w = rng.gen_range(0.5..5.0);
        if omegas.iter().all(|&o| (o - w).abs() > 0.05) {
            omegas.push(w);
        }
    }
    let couplings = (0..n).map(|_| rng.gen_range(0.0..fmax)).collect();
    DiscreteBath::new(omegas, couplings).unwrap()
}

fn corpus() -> Vec<DiscreteBath> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..20)
        .map(|_| {
            let n = rng.gen_range(1..=6);
            random_bath(&mut rng, n, 0.5)
        })
        .collect()
}

fn kernel_deviation(a: &KernelSet, b: &KernelSet) -> f64 {
    let mut d = (a.alpha - b.alpha).norm().max((a.beta - b.beta).norm());
    for (x, y) in a.eta.iter().zip(&b.eta).chain(a.delta.iter().zip(&b.delta)) {
        d = d.max((x - y).norm());
    }
    d.max((&a.q - &b.q).camax()).max((&a.qdot - &b.qdot).camax())
}

fn engine_cross_check(corpus: &[DiscreteBath]) -> Outcome {
    let p = SystemParams::default();
    let start = Instant::now();
    let times: Vec<f64> = (0..=20).map(|k| 0.25 * k as f64).collect();
    let mut worst: f64 = 0.0;
    for bath in corpus {
        let ode = ode_kernels_series(&p, bath, &times, 1e-11).unwrap();
        for o in &ode {
            worst = worst.max(kernel_deviation(o, &kernels_exact(&p, bath, o.t).unwrap()));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst <= 1e-10 && secs < 30.0, format!("max deviation {worst:.3e} (limit 1e-10), {secs:.2} s (limit 30 s)"))
}

fn laplace_cross_check(corpus: &[DiscreteBath]) -> Outcome {
    let p = SystemParams::default();
    let mut worst: f64 = 0.0;
    for bath in corpus {
        let kernel = BathKernel::new(SpectralDensity::discrete(bath), p);
        let engine = FlowEngine::new(&p, bath).unwrap();
        for k in 1..=20 {
            let t = 0.25 * k as f64;
            let tal = match kernels_talbot(&kernel, t, TalbotOptions::default()) {
                Ok(v) => v,
                Err(e) => return outcome(false, format!("N={} t={t}: {e}", bath.len())),
            };
            let ex = engine.kernels(C64::new(t, 0.0));
            worst = worst.max((tal.alpha - ex.alpha.re).abs()).max((tal.beta - ex.beta.re).abs());
        }
    }
    outcome(worst <= 1e-7, format!("max deviation {worst:.3e} (limit 1e-7)"))
}

fn mehler(m: f64, w: f64, t: f64, x: f64, xp: f64) -> C64 {
    let s = (w * t).sin();
    let pref = (C64::new(m * w, 0.0) / (C64::new(0.0, 2.0 * std::f64::consts::PI) * s)).sqrt();
    pref * (C64::new(0.0, m * w / (2.0 * s)) * ((x * x + xp * xp) * (w * t).cos() - 2.0 * x * xp)).exp()
}

fn free_limit() -> Outcome {
    let p = SystemParams::new(1.3, 0.9, 0.7, 1.0, 1.0).unwrap();
    let omegas = [1.7, 2.6];
    let bath = DiscreteBath::new(omegas.to_vec(), vec![0.0, 0.0]).unwrap();
    let mut worst: f64 = 0.0;
    let mut rel = |got: C64, want: C64| worst = worst.max((got - want).norm() / want.norm().max(1e-300));
    for &t in &[0.4, 1.1, 2.3] {
        let ks = kernels_exact(&p, &bath, C64::new(t, 0.0)).unwrap();
        rel(ks.alpha, C64::new((p.omega * t).cos(), 0.0));
        rel(ks.beta, C64::new((p.omega * t).sin() / p.omega, 0.0));
        let form = assemble_propagator(&p, &bath, C64::new(t, 0.0), &PropagatorOptions::default()).unwrap();
        rel(form.a, C64::new((p.omega * t).cos(), 0.0));
        rel(form.b, C64::new(1.0, 0.0));
        for &(x, y1, y2, xp, yp1, yp2) in &[(0.3, -0.2, 0.5, -0.4, 0.1, 0.7), (1.0, 0.4, -0.6, 0.2, -0.9, 0.3)] {
            let got = evaluate_propagator(&form, x, &[y1, y2], xp, &[yp1, yp2]).unwrap();
            let want = mehler(p.m, p.omega, t, x, xp) * mehler(p.rho, omegas[0], t, y1, yp1) * mehler(p.rho, omegas[1], t, y2, yp2);
            rel(got, want);
        }
    }
    for mode in [Mode::Validated, Mode::PaperLiteral] {
        for &temp in &[0.3, 1.0, 4.0] {
            let r = equilibrium_moments(&p, &bath, temp, mode).unwrap();
            let tau = p.tau(temp);
            let c = 1.0 / (p.omega * tau / 2.0).tanh();
            let x2 = p.hbar * c / (2.0 * p.m * p.omega);
            let p2 = p.hbar * p.m * p.omega * c / 2.0;
            let z: f64 = [p.omega, omegas[0], omegas[1]].iter().map(|w| 1.0 / (2.0 * (w * tau / 2.0).sinh())).product();
            let h = p.hbar * p.omega * c / 2.0;
            rel(C64::new(r.x2, 0.0), C64::new(x2, 0.0));
            rel(C64::new(r.p2, 0.0), C64::new(p2, 0.0));
            rel(C64::new(r.z, 0.0), C64::new(z, 0.0));
            rel(C64::new(r.h, 0.0), C64::new(h, 0.0));
        }
    }
    outcome(worst <= 1e-12, format!("max relative deviation {worst:.3e} over alpha, beta, a, b, K, Z, x2, p2, H (limit 1e-12)"))
}

fn propagator_vs_spectral() -> Outcome {
    let p = SystemParams::default();
    let bath = DiscreteBath::new(vec![1.7], vec![0.2]).unwrap();
    let t = C64::new(0.9, 0.0);
    let start = Instant::now();
    let form = assemble_propagator(&p, &bath, t, &PropagatorOptions::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let width_bath = (1.0f64 / 1.7).sqrt();
    let mut worst: f64 = 0.0;
    for _ in 0..25 {
        let x = rng.gen_range(-4.0..4.0);
        let xp = rng.gen_range(-4.0..4.0);
        let y = rng.gen_range(-4.0..4.0) * width_bath;
        let yp = rng.gen_range(-4.0..4.0) * width_bath;
        let oracle = spectral_propagator_resummed(&p, &bath, x, &[y], xp, &[yp], t).unwrap();
        let engine = evaluate_propagator(&form, x, &[y], xp, &[yp]).unwrap();
        worst = worst.max((oracle - engine).norm());
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-6 && secs < 60.0,
        format!("max deviation {worst:.3e} (limit 1e-6) against the resummed eigenbasis sum, {secs:.2} s"),
    )
}

fn symplecticity(corpus: &[DiscreteBath]) -> Outcome {
    let p = SystemParams::default();
    let (mut worst, mut forms, mut caustics) = (0.0f64, 0, 0);
    for bath in corpus {
        let j = complexify(&symplectic_form::<f64>(bath.len()));
        for k in 1..=20 {
            let t = 0.25 * k as f64;
            match assemble_propagator(&p, bath, C64::new(t, 0.0), &PropagatorOptions::default()) {
                Ok(form) => {
                    let s = classical_map(&form, p.hbar).unwrap();
                    worst = worst.max((s.transpose() * &j * &s - &j).norm());
                    forms += 1;
                }
                Err(_) => caustics += 1,
            }
        }
    }
    outcome(worst <= 1e-10, format!("max residual {worst:.3e} (limit 1e-10) over {forms} forms, {caustics} caustic times"))
}

fn reduced_vs_covariance() -> Outcome {
    let p = SystemParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let init = SystemMoments { mean_x: 0.6, mean_p: -0.3, var_x: 0.35, var_p: 0.9, cov_xp: 0.1 };
    let state = GaussianState::from_moments(&init, p.hbar).unwrap();
    let times: Vec<f64> = (1..=12).map(|k| 0.25 * k as f64).collect();
    let (mut dm, mut dt, mut du) = (0.0f64, 0.0f64, 0.0f64);
    for case in 0..8 {
        let bath = random_bath(&mut rng, 1 + case % 4, 0.5);
        let tau_b = [0.2, 0.7, 1.5, 5.0][case % 4];
        let engine = FlowEngine::new(&p, &bath).unwrap();
        let full = PhaseCovariance::product(&init, &thermal_bath_moments(&p, &bath, tau_b));
        let series = covariance_evolve_series(&p, &bath, &full, &times, 1e-12).unwrap();
        for (k, &t) in times.iter().enumerate() {
            let kernel = reduced_kernel_with(&engine, t, tau_b, &PropagatorOptions::default()).unwrap();
            let out = propagate_gaussian(&kernel, &state).unwrap();
            let got = out.moments(p.hbar);
            let want = series[k].system();
            for d in [
                got.mean_x - want.mean_x,
                got.mean_p - want.mean_p,
                got.var_x - want.var_x,
                got.var_p - want.var_p,
                got.cov_xp - want.cov_xp,
            ] {
                dm = dm.max(d.abs());
            }
            dt = dt.max((out.trace() - 1.0).norm());
            du = du.max(-out.uncertainty_margin(p.hbar));
        }
    }
    outcome(
        dm <= 1e-8 && dt <= 1e-10 && du <= 1e-10,
        format!("moments {dm:.3e} (1e-8), trace drift {dt:.3e} (1e-10), uncertainty violation {:.3e} (1e-10)", du.max(0.0)),
    )
}

fn weak_coupling_order() -> Outcome {
    let p = SystemParams::default();
    let base = DiscreteBath::new(vec![1.6, 2.3], vec![0.2, 0.3]).unwrap();
    let t = 0.9;
    let dev = |s: f64| {
        let b = base.scaled(s);
        let e = assemble_propagator(&p, &b, C64::new(t, 0.0), &PropagatorOptions::default()).unwrap();
        let w = weak_coupling_propagator(&p, &b, t).unwrap();
        (e.quad - w.quad).camax()
    };
    let (d1, d2, d4) = (dev(1.0), dev(0.5), dev(0.25));
    let order = ((d1 / d2).log2() + (d2 / d4).log2()) / 2.0;
    outcome((order - 2.0).abs() <= 0.1, format!("fitted order {order:.4} (2.0 +/- 0.1); deviations {d1:.3e}, {d2:.3e}, {d4:.3e}"))
}

fn equilibrium_vs_gibbs() -> Outcome {
    let p = SystemParams::default();
    let bath = DiscreteBath::new(vec![1.6, 2.3], vec![0.2, 0.3]).unwrap();
    let (mut dx, mut dp, mut dz, mut literal) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for &wt in &[0.5, 3.0] {
        let temp = p.hbar * p.omega / (p.kb * wt);
        let r = equilibrium_moments(&p, &bath, temp, Mode::Validated).unwrap();
        let g = gibbs_covariance(&p, &bath, temp).unwrap().state.system();
        dx = dx.max((r.x2 / g.var_x - 1.0).abs());
        dp = dp.max((r.p2 / g.var_p - 1.0).abs());
        let v = equilibrium_validation(&p, &bath, temp).unwrap();
        dz = dz.max(v.z.oracle_rel_dev);
        literal = literal.max(v.x2.rel_dev.unwrap_or(0.0)).max(v.z.rel_dev.unwrap_or(0.0));
    }
    outcome(
        dx <= 1e-6 && dp <= 1e-6 && dz <= 1e-8,
        format!("validated x2 {dx:.3e}, p2 {dp:.3e} (1e-6), Z {dz:.3e} (1e-8); paper-literal deviates up to {literal:.3e} (reported)"),
    )
}

fn grid_vs_closed_form() -> Outcome {
    let p = SystemParams::default();
    let bath = DiscreteBath::new(vec![1.5, 2.5], vec![0.2, 0.3]).unwrap();
    let start = Instant::now();
    let engine = FlowEngine::new(&p, &bath).unwrap();
    let state = GaussianState::coherent(&p, 0.4, 0.3).unwrap();
    let kernel = reduced_kernel_with(&engine, 1.0, 1.0, &PropagatorOptions::default()).unwrap();
    let grid = Grid::new(-8.0, 8.0, 128).unwrap();
    let out = propagate_grid(&kernel, &grid.sample(&state), &grid).unwrap();
    let want = grid.sample(&propagate_gaussian(&kernel, &state).unwrap());
    let d = (&out - &want).camax();
    let secs = start.elapsed().as_secs_f64();
    outcome(d <= 1e-6 && secs < 120.0, format!("max-abs deviation {d:.3e} (limit 1e-6) on 128x128, {secs:.2} s"))
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_oscbath"));
    c.env_remove("OSCBATH_THREADS");
    c
}

fn outputs_of(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    files
        .into_iter()
        .flat_map(|f| if f.is_dir() { outputs_of(&f) } else { vec![(f.clone(), std::fs::read(&f).unwrap())] })
        .map(|(f, b)| (f.strip_prefix(dir).unwrap_or(&f).to_path_buf(), b))
        .collect()
}

fn determinism() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let points = root.path().join("points.csv");
    std::fs::write(&points, "x,X_1,X_2,xp,Xp_1,Xp_2\n0.1,0.2,-0.3,0.4,0.0,0.5\n-0.7,0.1,0.2,0.3,-0.4,0.0\n").unwrap();
    let full = root.path().join("full.json");
    std::fs::write(
        &full,
        format!(
            r#"{{"system":{{"m":1,"omega":1,"rho":1,"hbar":1,"kB":1}},
            "bath":{{"type":"discrete","omegas":[1.6,2.3],"couplings":[0.2,0.3]}},
            "run":{{"time":{{"t0":0.25,"t1":2.0,"dt":0.25}},"tau_b":1.0,
                   "temperatures":{{"T0":0.2,"T1":5.0,"n":7,"scale":"log"}},
                   "initial":{{"coherent":{{"x0":0.5,"p0":-0.2}}}},
                   "grid":{{"x_min":-8.0,"x_max":8.0,"n":48}},
                   "points":"{}"}}}}"#,
            points.display()
        ),
    )
    .unwrap();
    let commands: [(&str, PathBuf, bool); 7] = [
        ("kernels", full.clone(), false),
        ("propagate", full.clone(), true),
        ("equilibrium", full.clone(), false),
        ("greens", full.clone(), false),
        ("bath", configs.join("drude.json"), false),
        ("validate", configs.join("default.json"), false),
        ("evaluate", full.clone(), false),
    ];
    let mut failures = Vec::new();
    for (cmd, cfg, is_dir) in commands {
        let mut seen: Option<Vec<(PathBuf, Vec<u8>)>> = None;
        for threads in ["1", "2", "8"] {
            let dir = root.path().join(format!("{cmd}-{threads}"));
            std::fs::create_dir_all(&dir).unwrap();
            let out = if is_dir { dir.join("run") } else { dir.join("out.dat") };
            let status = bin()
                .args([cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", threads])
                .status()
                .unwrap();
            if !status.success() {
                failures.push(format!("{cmd} exited with {status} at {threads} threads"));
                break;
            }
            let files = outputs_of(&dir);
            match &seen {
                None => seen = Some(files),
                Some(first) if *first != files => failures.push(format!("{cmd} differs at {threads} threads")),
                Some(_) => {}
            }
        }
    }
    outcome(failures.is_empty(), if failures.is_empty() { "7 commands byte-identical at 1, 2, 8 threads".into() } else { failures.join("; ") })
}

fn main() {
    let corpus = corpus();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("engine cross-check", Box::new(|| engine_cross_check(&corpus))),
        ("Laplace cross-check", Box::new(|| laplace_cross_check(&corpus))),
        ("free limit", Box::new(free_limit)),
        ("propagator vs spectral oracle", Box::new(propagator_vs_spectral)),
        ("symplecticity", Box::new(|| symplecticity(&corpus))),
        ("reduced dynamics vs covariance oracle", Box::new(reduced_vs_covariance)),
        ("weak-coupling order", Box::new(weak_coupling_order)),
        ("equilibrium vs Gibbs oracle", Box::new(equilibrium_vs_gibbs)),
        ("grid vs closed form", Box::new(grid_vs_closed_form)),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let r = std::panic::catch_unwind(std::panic::AssertUnwindSafe(check))
            .unwrap_or_else(|_| outcome(false, "panicked".into()));
        println!("criterion {:>2} {} {name}: {}", k + 1, if r.passed { "PASS" } else { "FAIL" }, r.detail);
        if !r.passed {
            failed += 1;
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
