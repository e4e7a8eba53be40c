//! Thermal equilibrium from the propagator at imaginary time `t = −iτ`, `τ = ħ/(k_B T)`.
//!
//! Two evaluation modes are provided. `PaperLiteral` uses the noise-variable
//! coefficients and the closed forms for `Z`, `⟨x²⟩`, `⟨p²⟩` and `⟨H⟩` directly.
//! `Validated` uses the canonical coefficients of the assembled
//! propagator; there the bath trace gives the density exponent
//! `(im/2ħβ)[(a + mζ/2ρβ)(x² + x′²) − 2(b + mζ/2ρβ) x x′]` and `Z` is the Gaussian
//! integral of the assembled form at coincident points.

use nalgebra::{Complex, ComplexField};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::pair;
use crate::kernels::{normal_mode_frequencies, FlowEngine};
use crate::linalg::{gaussian_log_integral, solve_vec, CMatrix, CVector};
use crate::model::{DiscreteBath, SystemParams};
use crate::oracle::gibbs_covariance;
use crate::propagator::{assemble_matrices, assemble_propagator_with, exponent_parts, ExponentParts, PropagatorOptions};
use crate::reduced::GaussianState;
use crate::scalar::{cx, imag_unit, lit, re, to_f64, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    PaperLiteral,
    #[default]
    Validated,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper-literal" => Ok(Mode::PaperLiteral),
            "validated" => Ok(Mode::Validated),
            other => Err(Error::Config(format!("unknown mode '{other}' (expected paper-literal or validated)"))),
        }
    }
}

/// Imaginary residues above this are reported as inconsistencies.
pub const RESIDUE_LIMIT: f64 = 1e-8;
/// Relative agreement demanded between `Z` and the normal-mode product.
pub const PARTITION_TOLERANCE: f64 = 1e-6;

/// Coefficients at `t = −iτ` in one evaluation mode.
#[derive(Debug, Clone, Copy)]
pub struct WickCoefficients<T: Real> {
    pub tau: T,
    pub a: Complex<T>,
    pub b: Complex<T>,
    pub beta: Complex<T>,
    pub zeta: Complex<T>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumReport<T: Real> {
    pub mode: Mode,
    pub temperature: T,
    pub tau: T,
    pub z: T,
    pub x2: T,
    pub p2: T,
    pub h: T,
    pub a_wick: [f64; 2],
    pub b_wick: [f64; 2],
    pub beta_wick: [f64; 2],
    pub zeta_wick: [f64; 2],
}

struct Wick<T: Real> {
    engine: FlowEngine<T>,
    parts: ExponentParts<T>,
    tau: T,
}

fn wick<T: Real>(params: &SystemParams<T>, bath: &DiscreteBath<T>, temperature: T) -> Result<Wick<T>> {
    if !(temperature > T::zero()) {
        return Err(Error::InvalidParameter("temperature must be positive".into()));
    }
    let tau = params.tau(temperature);
    let engine = FlowEngine::new(params, bath)?;
    let ks = engine.kernels(cx(T::zero(), -tau));
    let parts = exponent_parts(params, assemble_matrices(params, bath, &ks, &PropagatorOptions::default())?)?;
    Ok(Wick { engine, parts, tau })
}

/// `(ξ̇ + βμ)·𝒩⁻¹(ℒ − m)⁻¹·(ξ̇ + βμ)` for the given `μ`.
fn zeta_with<T: Real>(params: &SystemParams<T>, parts: &ExponentParts<T>, mu: &CVector<T>) -> Result<Complex<T>> {
    let km = &parts.matrices;
    let n = km.xidot.len();
    if n == 0 {
        return Ok(re(T::zero()));
    }
    let v = &km.xidot + mu * km.beta;
    let shifted = &km.l - CMatrix::<T>::identity(n, n) * re(params.m);
    let right = solve_vec(&shifted, &v).map_err(|_| Error::Singular("L - mI at the requested temperature".into()))?;
    let left = &km.ninv * &v;
    let z = left.dot(&right);
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Singular("L - mI at the requested temperature".into()));
    }
    Ok(z)
}

fn wick_coefficients<T: Real>(params: &SystemParams<T>, w: &Wick<T>, mode: Mode) -> Result<WickCoefficients<T>> {
    let km = &w.parts.matrices;
    let rho = params.rho;
    match mode {
        Mode::Validated => Ok(WickCoefficients {
            tau: w.tau,
            a: w.parts.a,
            b: w.parts.b,
            beta: km.beta,
            zeta: zeta_with(params, &w.parts, &km.mu_canonical)?,
        }),
        Mode::PaperLiteral => {
            let a = km.alpha + km.xidot.dot(&(&km.ninv * &km.mu)) / rho;
            let b = re(T::one()) - km.xidot.dot(&(&km.ninv * &km.xidot)) / (km.beta * rho);
            Ok(WickCoefficients { tau: w.tau, a, b, beta: km.beta, zeta: zeta_with(params, &w.parts, &km.mu)? })
        }
    }
}

/// Coefficients `a`, `b`, `β`, `ζ` at `t = −iτ` in the requested mode.
pub fn coefficients_at<T: Real>(
    params: &SystemParams<T>,
    bath: &DiscreteBath<T>,
    temperature: T,
    mode: Mode,
) -> Result<WickCoefficients<T>> {
    wick_coefficients(params, &wick(params, bath, temperature)?, mode)
}

/// `ζ` at `t = −iτ` with the canonical coefficients.
pub fn zeta<T: Real>(params: &SystemParams<T>, bath: &DiscreteBath<T>, tau: T) -> Result<Complex<T>> {
    let temperature = params.hbar / (params.kb * tau);
    let w = wick(params, bath, temperature)?;
    Ok(wick_coefficients(params, &w, Mode::Validated)?.zeta)
}

fn real_part<T: Real>(quantity: &str, z: Complex<T>) -> Result<T> {
    let residue = z.im.abs() / z.re.abs().max(T::one());
    if residue > lit(RESIDUE_LIMIT) {
        return Err(Error::Consistency { quantity: quantity.into(), residue: to_f64(residue) });
    }
    Ok(z.re)
}

/// `Π_k [2 sinh(Ω_k τ/2)]⁻¹` over the normal modes.
pub fn partition_function_modes<T: Real>(params: &SystemParams<T>, bath: &DiscreteBath<T>, temperature: T) -> Result<T> {
    let tau = params.tau(temperature);
    let modes = normal_mode_frequencies(params, bath)?;
    Ok(modes.iter().fold(T::one(), |z, &w| z / (lit::<T>(2.0) * (w * tau * lit(0.5)).sinh())))
}

fn partition_validated<T: Real>(w: &Wick<T>) -> Result<Complex<T>> {
    let form = assemble_propagator_with(&w.engine, cx(T::zero(), -w.tau), &PropagatorOptions::default())?;
    let n = form.n_modes + 1;
    // v = (q, q) with q = (x, X)
    let fold = CMatrix::<T>::from_fn(n, n, |i, j| {
        -(form.quad[(i, j)] + form.quad[(i, j + n)] + form.quad[(i + n, j)] + form.quad[(i + n, j + n)])
    });
    let log_z = gaussian_log_integral(&fold, &CVector::<T>::zeros(n))? + form.amplitude.ln();
    Ok(log_z.exp())
}

fn partition_literal<T: Real>(params: &SystemParams<T>, w: &Wick<T>, c: &WickCoefficients<T>) -> Result<Complex<T>> {
    let km = &w.parts.matrices;
    let n = km.xidot.len();
    let m = params.m;
    let shifted = &km.l - CMatrix::<T>::identity(n, n) * re(m);
    let det = if n == 0 { re(T::one()) } else { shifted.determinant() };
    let denom = c.a - c.b + c.zeta * m / (c.beta * params.rho);
    let pref = re(m.powf(lit(n as f64 * 0.5)) / lit::<T>(2.0).powf(lit((n + 1) as f64 * 0.5)));
    Ok(pref / det.sqrt() / denom.sqrt())
}

/// Partition function; fails when it disagrees with the normal-mode product.
pub fn partition_function<T: Real>(params: &SystemParams<T>, bath: &DiscreteBath<T>, temperature: T) -> Result<T> {
    let w = wick(params, bath, temperature)?;
    let z = real_part("Z", partition_validated(&w)?)?;
    let modes = partition_function_modes(params, bath, temperature)?;
    if ((z - modes) / modes).abs() > lit(PARTITION_TOLERANCE) {
        let c = wick_coefficients(params, &w, Mode::PaperLiteral)?;
        let literal = partition_literal(params, &w, &c)?;
        return Err(Error::Validation {
            quantity: "Z".into(),
            paper_literal: to_f64(literal.re),
            validated: to_f64(z),
            oracle: to_f64(modes),
        });
    }
    Ok(z)
}

/// Reduced equilibrium density matrix of the oscillator.
pub fn equilibrium_density<T: Real>(params: &SystemParams<T>, bath: &DiscreteBath<T>, temperature: T) -> Result<GaussianState<T>> {
    let w = wick(params, bath, temperature)?;
    let c = wick_coefficients(params, &w, Mode::Validated)?;
    let shift = c.zeta * params.m / (c.beta * params.rho * lit::<T>(2.0));
    let scale = imag_unit::<T>() * params.m / (c.beta * params.hbar);
    let state = GaussianState {
        c11: scale * (c.a + shift),
        c12: -scale * (c.b + shift),
        c22: scale * (c.a + shift),
        u1: re(T::zero()),
        u2: re(T::zero()),
        log_norm: re(T::zero()),
    };
    Ok(state.normalized())
}

fn moments_from<T: Real>(params: &SystemParams<T>, c: &WickCoefficients<T>, mode: Mode) -> Result<(T, T)> {
    let (m, rho, hbar) = (params.m, params.rho, params.hbar);
    let i = imag_unit::<T>();
    let shift = c.zeta * m / (c.beta * rho);
    let (x2, p2) = match mode {
        Mode::Validated => (
            i * hbar * c.beta / ((c.a - c.b) * (m * lit(2.0))),
            (c.a + c.b + shift) * (m * hbar) / (i * c.beta * lit::<T>(2.0)),
        ),
        Mode::PaperLiteral => (
            i * hbar * c.beta / ((c.a - c.b + shift) * (m * lit(2.0))),
            (c.a + c.b) * (m * hbar) / (i * c.beta * lit::<T>(2.0)),
        ),
    };
    Ok((real_part("<x^2>", x2)?, real_part("<p^2>", p2)?))
}

/// Equilibrium moments of the oscillator in the requested mode.
pub fn equilibrium_moments<T: Real>(
    params: &SystemParams<T>,
    bath: &DiscreteBath<T>,
    temperature: T,
    mode: Mode,
) -> Result<EquilibriumReport<T>> {
    let w = wick(params, bath, temperature)?;
    let c = wick_coefficients(params, &w, mode)?;
    let (x2, p2) = moments_from(params, &c, mode)?;
    let z = match mode {
        Mode::Validated => partition_function(params, bath, temperature)?,
        Mode::PaperLiteral => real_part("Z", partition_literal(params, &w, &c)?)?,
    };
    let h = match mode {
        Mode::Validated => energy(params, x2, p2),
        Mode::PaperLiteral => real_part("<H>", literal_energy(params, &c))?,
    };
    Ok(EquilibriumReport {
        mode,
        temperature,
        tau: w.tau,
        z,
        x2,
        p2,
        h,
        a_wick: pair(c.a),
        b_wick: pair(c.b),
        beta_wick: pair(c.beta),
        zeta_wick: pair(c.zeta),
    })
}

/// `ħ(a+b)/(4iβ) + iħω²β/(4[a − b + mζ/(ρβ)])`, the closed-form energy.
pub fn literal_energy<T: Real>(params: &SystemParams<T>, c: &WickCoefficients<T>) -> Complex<T> {
    let i = imag_unit::<T>();
    let hbar = params.hbar;
    let denom = c.a - c.b + c.zeta * params.m / (c.beta * params.rho);
    (c.a + c.b) * hbar / (i * c.beta * lit::<T>(4.0)) + i * c.beta * (hbar * params.omega * params.omega) / (denom * lit::<T>(4.0))
}

/// Oscillator energy `⟨p²⟩/2m + mω²⟨x²⟩/2`.
pub fn energy<T: Real>(params: &SystemParams<T>, x2: T, p2: T) -> T {
    p2 / (params.m * lit(2.0)) + params.m * params.omega * params.omega * x2 * lit(0.5)
}

/// Temperature sweep evaluated in parallel; results keep the input order.
pub fn equilibrium_sweep<T: Real>(
    params: &SystemParams<T>,
    bath: &DiscreteBath<T>,
    temperatures: &[T],
    mode: Mode,
) -> Vec<Result<EquilibriumReport<T>>> {
    temperatures.par_iter().map(|&t| equilibrium_moments(params, bath, t, mode)).collect()
}

/// One quantity compared across both modes and the oracle.
#[derive(Debug, Clone, Serialize)]
pub struct QuantityCheck {
    pub paper_literal: Option<f64>,
    pub validated: f64,
    pub oracle: f64,
    /// Relative deviation of the paper-literal value from the validated one.
    pub rel_dev: Option<f64>,
    /// Relative deviation of the validated value from the oracle.
    pub oracle_rel_dev: f64,
    pub paper_literal_error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumValidation {
    pub temperature: f64,
    #[serde(rename = "Z")]
    pub z: QuantityCheck,
    pub x2: QuantityCheck,
    pub p2: QuantityCheck,
    #[serde(rename = "H")]
    pub h: QuantityCheck,
}

/// Compares both modes with the normal-mode product and the Gibbs covariance.
pub fn equilibrium_validation<T: Real>(
    params: &SystemParams<T>,
    bath: &DiscreteBath<T>,
    temperature: T,
) -> Result<EquilibriumValidation> {
    let w = wick(params, bath, temperature)?;
    let cv = wick_coefficients(params, &w, Mode::Validated)?;
    let (x2, p2) = moments_from(params, &cv, Mode::Validated)?;
    let z = real_part("Z", partition_validated(&w)?)?;
    let h = energy(params, x2, p2);
    let gibbs = gibbs_covariance(params, bath, temperature)?.state.system();
    let z_modes = partition_function_modes(params, bath, temperature)?;
    let h_oracle = energy(params, gibbs.var_x, gibbs.var_p);

    let literal = wick_coefficients(params, &w, Mode::PaperLiteral).and_then(|c| {
        let (x2, p2) = moments_from(params, &c, Mode::PaperLiteral)?;
        let z = real_part("Z", partition_literal(params, &w, &c)?)?;
        Ok((z, x2, p2, real_part("<H>", literal_energy(params, &c))?))
    });
    let check = |validated: T, oracle: T, pick: fn(&(T, T, T, T)) -> T| {
        let validated = to_f64(validated);
        let oracle = to_f64(oracle);
        let (paper_literal, rel_dev, err) = match &literal {
            Ok(v) => {
                let p = to_f64(pick(v));
                (Some(p), Some(((p - validated) / validated).abs()), None)
            }
            Err(e) => (None, None, Some(e.to_string())),
        };
        QuantityCheck {
            paper_literal,
            validated,
            oracle,
            rel_dev,
            oracle_rel_dev: ((validated - oracle) / oracle).abs(),
            paper_literal_error: err,
        }
    };
    Ok(EquilibriumValidation {
        temperature: to_f64(temperature),
        z: check(z, z_modes, |v| v.0),
        x2: check(x2, gibbs.var_x, |v| v.1),
        p2: check(p2, gibbs.var_p, |v| v.2),
        h: check(h, h_oracle, |v| v.3),
    })
}
