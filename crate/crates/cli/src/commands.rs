use std::io::Write;
use std::path::{Path, PathBuf};

use oscbath::equilibrium::{equilibrium_sweep, equilibrium_validation, EquilibriumValidation, Mode};
use oscbath::io::fmt17;
use oscbath::kernels::write_kernel_csv;
use oscbath::model::discretize_spectral;
use oscbath::propagator::{assemble_propagator_with, evaluate_propagator};
use oscbath::reduced::{propagate_gaussian, propagate_grid, reduced_kernel_with, write_state_csv};
use oscbath::{FlowEngine, GaussianState, Grid, KernelSet, SpectralDensity, C64};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{missing, RunConfig};
use crate::error::CliError;

/// Relative agreement demanded between validated moments and the Gibbs covariance.
pub const MOMENT_TOLERANCE: f64 = 1e-6;
/// Relative agreement demanded between the validated `Z` and the normal-mode product.
pub const PARTITION_TOLERANCE: f64 = 1e-8;

/// Writes to `out`, or to standard output when no path is given.
pub fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn json_bytes<S: Serialize>(value: &S) -> Result<Vec<u8>, CliError> {
    let mut text = serde_json::to_vec_pretty(value)?;
    text.push(b'\n');
    Ok(text)
}

fn csv_row(cells: &[f64]) -> String {
    cells.iter().map(|&v| fmt17(v)).collect::<Vec<_>>().join(",")
}

fn engine(cfg: &RunConfig) -> Result<FlowEngine, CliError> {
    let bath = cfg.discrete_bath()?;
    if bath.has_degenerate_frequencies() {
        log::warn!("two bath frequencies coincide within 1e-9 relative");
    }
    Ok(FlowEngine::new(&cfg.system, &bath)?)
}

pub fn kernels(cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    let engine = engine(cfg)?;
    let times = cfg.time_grid()?;
    let sets: Vec<KernelSet> = times.par_iter().map(|&t| engine.kernels(C64::new(t, 0.0))).collect();
    let mut buf = Vec::new();
    write_kernel_csv(&mut buf, &sets)?;
    emit(out, &buf)
}

/// Per-time reduced dynamics: moments always, grid density matrices when a grid is configured.
pub fn propagate(cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    let engine = engine(cfg)?;
    let times = cfg.time_grid()?;
    let tau_b = cfg.tau_b()?;
    let initial = cfg.run.initial.ok_or_else(|| missing("initial"))?.state(&cfg.system)?;
    let grid = match cfg.run.grid {
        Some(g) => Some(Grid::new(g.x_min, g.x_max, g.n)?),
        None => None,
    };
    if grid.is_some() && out.is_none() {
        return Err(CliError::Config("a grid run needs --out <directory>".into()));
    }
    let opts = cfg.propagator_options();
    let hbar = cfg.system.hbar;
    let evolved: Vec<Result<(GaussianState, Option<_>), CliError>> = times
        .par_iter()
        .map(|&t| {
            if t == 0.0 {
                return Ok((initial, grid.as_ref().map(|g| g.sample(&initial))));
            }
            let kernel = reduced_kernel_with(&engine, t, tau_b, &opts)?;
            let state = propagate_gaussian(&kernel, &initial)?;
            let rho = match &grid {
                Some(g) => Some(propagate_grid(&kernel, &g.sample(&initial), g)?),
                None => None,
            };
            Ok((state, rho))
        })
        .collect();
    let mut table = String::from("t,mean_x,mean_p,var_x,var_p,cov_xp,Re(trace),Im(trace),purity\n");
    let mut states = Vec::with_capacity(times.len());
    for (&t, r) in times.iter().zip(evolved) {
        let (state, rho) = r?;
        let m = state.moments(hbar);
        let tr = state.trace();
        let purity = state.purity()?;
        table.push_str(&csv_row(&[t, m.mean_x, m.mean_p, m.var_x, m.var_p, m.cov_xp, tr.re, tr.im, purity]));
        table.push('\n');
        states.push(rho);
    }
    match out {
        None => emit(None, table.as_bytes()),
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
            emit(Some(&dir.join("moments.csv")), table.as_bytes())?;
            if let Some(g) = &grid {
                for (k, rho) in states.into_iter().enumerate() {
                    let mut buf = Vec::new();
                    write_state_csv(&mut buf, g, &rho.expect("grid run"))?;
                    emit(Some(&dir.join(format!("rho_{k:05}.csv"))), &buf)?;
                }
            }
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct EquilibriumReportFile {
    mode: Mode,
    moment_tolerance: f64,
    partition_tolerance: f64,
    validated_matches_oracle: bool,
    temperatures: Vec<EquilibriumValidation>,
}

fn report_path(out: &Path) -> PathBuf {
    out.with_extension("report.json")
}

/// `T,Z,x2,p2,H` sweep plus a validation report next to the CSV.
pub fn equilibrium(cfg: &RunConfig, out: Option<&Path>, mode: Option<Mode>) -> Result<(), CliError> {
    let bath = cfg.discrete_bath()?;
    let temps = cfg.run.temperatures.ok_or_else(|| missing("temperatures"))?.temperatures()?;
    let mode = mode.or(cfg.run.mode).unwrap_or_default();
    let rows = equilibrium_sweep(&cfg.system, &bath, &temps, mode);
    let mut table = String::from("T,Z,x2,p2,H\n");
    for r in rows {
        let r = r?;
        table.push_str(&csv_row(&[r.temperature, r.z, r.x2, r.p2, r.h]));
        table.push('\n');
    }
    emit(out, table.as_bytes())?;

    let checks: Vec<EquilibriumValidation> = temps
        .par_iter()
        .map(|&t| equilibrium_validation(&cfg.system, &bath, t))
        .collect::<Result<_, _>>()?;
    let ok = checks.iter().all(|c| {
        c.x2.oracle_rel_dev <= MOMENT_TOLERANCE
            && c.p2.oracle_rel_dev <= MOMENT_TOLERANCE
            && c.z.oracle_rel_dev <= PARTITION_TOLERANCE
    });
    let report = EquilibriumReportFile {
        mode,
        moment_tolerance: MOMENT_TOLERANCE,
        partition_tolerance: PARTITION_TOLERANCE,
        validated_matches_oracle: ok,
        temperatures: checks,
    };
    match out {
        Some(path) => emit(Some(&report_path(path)), &json_bytes(&report)?)?,
        None => log::info!("validation report skipped: no --out path"),
    }
    if !ok {
        return Err(CliError::Numerical("validated equilibrium moments miss the Gibbs oracle".into()));
    }
    Ok(())
}

/// Reduced kernel coefficients at each time of the grid.
pub fn greens(cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    let engine = engine(cfg)?;
    let times = cfg.time_grid()?;
    let tau_b = cfg.tau_b()?;
    let opts = cfg.propagator_options();
    let forms = times
        .par_iter()
        .map(|&t| reduced_kernel_with(&engine, t, tau_b, &opts).map(|k| k.to_json()))
        .collect::<Result<Vec<_>, _>>()?;
    emit(out, &json_bytes(&forms)?)
}

/// Discretizes the configured density and reports the captured weight.
pub fn bath(cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    let d = cfg.run.discretize.ok_or_else(|| missing("discretize"))?;
    let bath = match cfg.bath.as_discrete() {
        Some(b) => b,
        None => discretize_spectral(&cfg.bath, &cfg.system, d.n_modes, d.scheme, d.omega_max, d.omega_min)?,
    };
    let p = &cfg.system;
    let weight: f64 = bath.omegas.iter().zip(&bath.couplings).map(|(w, f)| f * f / (p.m * p.rho * w)).sum();
    log::info!("{} modes, summed weight {}", bath.len(), fmt17(weight));
    emit(out, &json_bytes(&SpectralDensity::discrete(&bath))?)
}

/// Reads evaluation points `x,X...,xp,Xp...`; a non-numeric first line is taken as a header.
pub fn read_points(path: &Path, n_modes: usize) -> Result<Vec<Vec<f64>>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let width = 2 * n_modes + 2;
    let mut rows = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Result<Vec<f64>, _> = line.split(',').map(|c| c.trim().parse::<f64>()).collect();
        match parsed {
            Ok(v) if v.len() == width => rows.push(v),
            Ok(v) => {
                return Err(CliError::Config(format!("points line {}: {} columns, expected {width}", k + 1, v.len())))
            }
            Err(_) if k == 0 => continue,
            Err(e) => return Err(CliError::Config(format!("points line {}: {e}", k + 1))),
        }
    }
    Ok(rows)
}

/// Total propagator at the points listed in `run.points`, for every time of the grid.
pub fn evaluate(cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    let engine = engine(cfg)?;
    let n = engine.bath.len();
    let times = cfg.time_grid()?;
    let path = cfg.run.points.as_ref().ok_or_else(|| missing("points"))?;
    let points = read_points(path, n)?;
    let opts = cfg.propagator_options();
    let forms = times
        .par_iter()
        .map(|&t| assemble_propagator_with(&engine, C64::new(t, 0.0), &opts))
        .collect::<Result<Vec<_>, _>>()?;
    let mut header = vec!["t".to_string(), "x".into()];
    header.extend((1..=n).map(|j| format!("X_{j}")));
    header.push("xp".into());
    header.extend((1..=n).map(|j| format!("Xp_{j}")));
    header.extend(["Re(K)".into(), "Im(K)".into()]);
    let mut table = header.join(",") + "\n";
    for (form, &t) in forms.iter().zip(&times) {
        for q in &points {
            let k = evaluate_propagator(form, q[0], &q[1..=n], q[n + 1], &q[n + 2..])?;
            let mut row = vec![t];
            row.extend_from_slice(q);
            row.extend([k.re, k.im]);
            table.push_str(&csv_row(&row));
            table.push('\n');
        }
    }
    emit(out, table.as_bytes())
}
