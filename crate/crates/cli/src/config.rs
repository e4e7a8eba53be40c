//! Run configuration: `{"system": ..., "bath": ..., "run": ...}`.

use std::path::{Path, PathBuf};

use oscbath::equilibrium::Mode;
use oscbath::model::{discretize_spectral, Scheme};
use oscbath::oracle::SystemMoments;
use oscbath::propagator::PropagatorOptions;
use oscbath::{DiscreteBath, GaussianState, SpectralDensity, SystemParams};
use serde::Deserialize;

use crate::error::CliError;

/// Largest number of rows a time grid or sweep may expand to.
const MAX_ROWS: usize = 1_000_000;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemParams,
    pub bath: SpectralDensity,
    #[serde(default)]
    pub run: RunBlock,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    pub time: Option<TimeGrid>,
    pub temperatures: Option<Sweep>,
    pub grid: Option<GridSpec>,
    pub tau_b: Option<f64>,
    pub initial: Option<InitialState>,
    pub discretize: Option<Discretization>,
    /// CSV of propagator evaluation points `x,X...,xp,Xp...`.
    pub points: Option<PathBuf>,
    pub tol: Option<f64>,
    pub mode: Option<Mode>,
    pub propagator: Option<PropagatorOptions>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub t0: f64,
    pub t1: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepScale {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    #[serde(rename = "T0")]
    pub t0: f64,
    #[serde(rename = "T1")]
    pub t1: f64,
    pub n: usize,
    #[serde(default)]
    pub scale: SweepScale,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum InitialState {
    Coherent { x0: f64, p0: f64 },
    Moments { mean_x: f64, mean_p: f64, var_x: f64, var_p: f64, cov_xp: f64 },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Discretization {
    pub n_modes: usize,
    pub scheme: Scheme,
    pub omega_max: f64,
    pub omega_min: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every block that is present, before any computation.
    pub fn validate(&self) -> Result<(), CliError> {
        self.system.validate()?;
        self.bath.validate()?;
        let run = &self.run;
        if let Some(t) = &run.time {
            t.times()?;
        }
        if let Some(s) = &run.temperatures {
            s.temperatures()?;
        }
        if let Some(g) = &run.grid {
            oscbath::Grid::new(g.x_min, g.x_max, g.n)?;
        }
        if let Some(tau) = run.tau_b {
            if !(tau > 0.0 && tau.is_finite()) {
                return Err(CliError::Config("tau_b must be positive and finite".into()));
            }
        }
        if let Some(tol) = run.tol {
            check_tol(tol)?;
        }
        if let Some(d) = &run.discretize {
            if d.n_modes == 0 || !(d.omega_max > 0.0) {
                return Err(CliError::Config("discretize needs n_modes >= 1 and omega_max > 0".into()));
            }
            if d.scheme == Scheme::Log && d.omega_min.is_none() {
                return Err(CliError::Config("log discretization requires omega_min".into()));
            }
        }
        if let Some(init) = &run.initial {
            init.state(&self.system)?;
        }
        Ok(())
    }

    /// The bath as discrete modes, discretizing a continuum density if configured.
    pub fn discrete_bath(&self) -> Result<DiscreteBath, CliError> {
        if let Some(b) = self.bath.as_discrete() {
            return Ok(b);
        }
        let d = self
            .run
            .discretize
            .ok_or_else(|| CliError::Config("a continuum bath needs a run.discretize block".into()))?;
        Ok(discretize_spectral(&self.bath, &self.system, d.n_modes, d.scheme, d.omega_max, d.omega_min)?)
    }

    pub fn time_grid(&self) -> Result<Vec<f64>, CliError> {
        self.run.time.ok_or_else(|| missing("time"))?.times()
    }

    pub fn tau_b(&self) -> Result<f64, CliError> {
        self.run.tau_b.ok_or_else(|| missing("tau_b"))
    }

    pub fn propagator_options(&self) -> PropagatorOptions {
        self.run.propagator.unwrap_or_default()
    }
}

pub fn missing(key: &str) -> CliError {
    CliError::Config(format!("run.{key} is required for this command"))
}

pub fn check_tol(tol: f64) -> Result<f64, CliError> {
    if !(1e-13..=1e-3).contains(&tol) {
        return Err(CliError::Config(format!("tolerance {tol} outside [1e-13, 1e-3]")));
    }
    Ok(tol)
}

impl TimeGrid {
    pub fn times(&self) -> Result<Vec<f64>, CliError> {
        if !(self.dt > 0.0) || !(self.t1 >= self.t0) || !self.t0.is_finite() || !self.t1.is_finite() {
            return Err(CliError::Config("time grid needs dt > 0 and t1 >= t0".into()));
        }
        let steps = ((self.t1 - self.t0) / self.dt + 1e-9).floor();
        if steps >= MAX_ROWS as f64 {
            return Err(CliError::Config(format!("time grid exceeds {MAX_ROWS} rows")));
        }
        Ok((0..=steps as usize).map(|k| self.t0 + k as f64 * self.dt).collect())
    }
}

impl Sweep {
    pub fn temperatures(&self) -> Result<Vec<f64>, CliError> {
        if !(self.t0 > 0.0) || !(self.t1 >= self.t0) || !self.t1.is_finite() || self.n == 0 || self.n > MAX_ROWS {
            return Err(CliError::Config("temperature sweep needs 0 < T0 <= T1 and 1 <= n".into()));
        }
        if self.n == 1 {
            return Ok(vec![self.t0]);
        }
        let last = (self.n - 1) as f64;
        Ok((0..self.n)
            .map(|k| {
                let s = k as f64 / last;
                match self.scale {
                    SweepScale::Linear => self.t0 + (self.t1 - self.t0) * s,
                    SweepScale::Log => self.t0 * (self.t1 / self.t0).powf(s),
                }
            })
            .collect())
    }
}

impl InitialState {
    pub fn state(&self, params: &SystemParams) -> Result<GaussianState, CliError> {
        Ok(match *self {
            InitialState::Coherent { x0, p0 } => GaussianState::coherent(params, x0, p0)?,
            InitialState::Moments { mean_x, mean_p, var_x, var_p, cov_xp } => {
                GaussianState::from_moments(&SystemMoments { mean_x, mean_p, var_x, var_p, cov_xp }, params.hbar)?
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"system":{"m":1,"omega":1,"rho":1,"hbar":1,"kB":1},
        "bath":{"type":"discrete","omegas":[1.5],"couplings":[0.2]}}"#;

    #[test]
    fn minimal_config_parses() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.discrete_bath().unwrap().len(), 1);
        assert!(matches!(cfg.time_grid(), Err(CliError::Config(_))));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = MINIMAL.replace("\"kB\":1", "\"kB\":1,\"spin\":2");
        assert!(matches!(RunConfig::parse(&bad), Err(CliError::Config(_))));
        let bad = MINIMAL.replace("}}", "}, \"run\":{\"tau\":1}}");
        assert!(matches!(RunConfig::parse(&bad), Err(CliError::Config(_))));
    }

    #[test]
    fn grids_expand_inclusively() {
        let t = TimeGrid { t0: 0.0, t1: 1.0, dt: 0.1 }.times().unwrap();
        assert_eq!(t.len(), 11);
        assert!((t[10] - 1.0).abs() < 1e-15);
        let s = Sweep { t0: 0.1, t1: 10.0, n: 3, scale: SweepScale::Log }.temperatures().unwrap();
        assert!((s[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn continuum_bath_needs_discretization() {
        let text = MINIMAL.replace(
            r#"{"type":"discrete","omegas":[1.5],"couplings":[0.2]}"#,
            r#"{"type":"ohmic-drude","eta":0.1,"omega_c":10.0}"#,
        );
        let cfg = RunConfig::parse(&text).unwrap();
        assert!(matches!(cfg.discrete_bath(), Err(CliError::Config(_))));
    }
}
