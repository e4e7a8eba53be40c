//! Exact total propagator `K(x, X, t; x′, X′)` as a complex Gaussian form, and its
//! first-order weak-coupling approximation.
//!
//! The exponent is `½ vᵀ Q v` with `v = (x, X_1..X_N, x′, X′_1..X′_N)`, and `Q`
//! already contains the factor `i/ħ`. Because the coupling is through the bath
//! velocities the form is not invariant under `(x, X) ↔ (x′, X′)`; instead
//! `K_f(q, q′) = K_{−f}(q′, q)`.

use nalgebra::{Complex, ComplexField, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::pair;
use crate::kernels::{ip_bath, ix_bath, FlowEngine, KernelSet, IP, IX};
use crate::linalg::{condition_number, solve_refined, solve_vec, symmetrize, unwrap_phase, CMatrix, CVector};
use crate::model::{DiscreteBath, SystemParams};
use crate::scalar::{cx, imag_unit, lit, polar, re, to_f64, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropagatorOptions {
    /// Caustic threshold on |β|, in units of the shortest oscillator period scale.
    pub beta_min: f64,
    pub max_condition: f64,
    /// Relative distance below the real axis of the phase-tracking path.
    pub path_epsilon: f64,
}

impl Default for PropagatorOptions {
    fn default() -> Self {
        PropagatorOptions { beta_min: 1e-9, max_condition: 1e12, path_epsilon: 1e-4 }
    }
}

/// Bath matrices built from one [`KernelSet`].
#[derive(Debug, Clone, Serialize)]
pub struct KernelMatrices<T: Real> {
    pub t: Complex<T>,
    pub alpha: Complex<T>,
    /// Canonical `x(0)` coefficient of `x(t)`.
    pub alpha_canonical: Complex<T>,
    pub beta: Complex<T>,
    pub xi: CVector<T>,
    pub xidot: CVector<T>,
    /// Noise-variable combination `ω² ξ + (α/β) ξ̇`.
    pub mu: CVector<T>,
    /// Canonical combination `ρ c + (α_c/β) ξ̇`, with `c` the canonical `x(0)` coefficient of `X(t)`.
    pub mu_canonical: CVector<T>,
    pub m: CMatrix<T>,
    pub mdot: CMatrix<T>,
    pub nmat: CMatrix<T>,
    pub l: CMatrix<T>,
    pub ninv: CMatrix<T>,
}

fn frequency_scale<T: Real>(params: &SystemParams<T>, bath: &DiscreteBath<T>) -> T {
    bath.omegas.iter().fold(params.omega, |m, &w| m.max(w)).max(lit(1e-300))
}

pub fn assemble_matrices<T: Real>(
    params: &SystemParams<T>,
    bath: &DiscreteBath<T>,
    ks: &KernelSet<T>,
    opts: &PropagatorOptions,
) -> Result<KernelMatrices<T>> {
    let n = bath.len();
    let (m, rho) = (params.m, params.rho);
    let t = ks.t;
    let beta = ks.beta;
    let threshold = lit::<T>(opts.beta_min) / frequency_scale(params, bath);
    if beta.modulus() <= threshold {
        return Err(Error::Caustic { beta_abs: to_f64(beta.modulus()), threshold: to_f64(threshold) });
    }
    let f = &bath.couplings;
    let w = &bath.omegas;
    let xi = CVector::<T>::from_fn(n, |k, _| ks.eta[k] * f[k] / w[k]);
    let xidot = CVector::<T>::from_fn(n, |k, _| ks.delta[k] * f[k]);
    let mut alpha_c = ks.alpha;
    for k in 0..n {
        alpha_c -= xidot[k] * (f[k] / (m * rho));
    }
    let sin: Vec<Complex<T>> = w.iter().map(|&wj| (t * wj).sin()).collect();
    let cos: Vec<Complex<T>> = w.iter().map(|&wj| (t * wj).cos()).collect();
    let mmat = CMatrix::<T>::from_fn(n, n, |j, k| {
        let d = if j == k { cos[j] } else { re(T::zero()) };
        d + ks.q[(j, k)] * (w[k] * w[k])
    });
    let mdot = CMatrix::<T>::from_fn(n, n, |j, k| {
        let d = if j == k { -sin[j] * w[j] } else { re(T::zero()) };
        d + ks.qdot[(j, k)] * (w[k] * w[k])
    });
    // R = S[X, P]; canonical x(0) coefficient of X is ω² ξ/ρ − R f
    let r = CMatrix::<T>::from_fn(n, n, |j, k| {
        let d = if j == k { sin[j] / w[j] } else { re(T::zero()) };
        (d - ks.qdot[(j, k)]) / rho
    });
    let fvec = CVector::<T>::from_fn(n, |k, _| re(f[k]));
    let c_canonical = &xi * re(params.omega * params.omega / rho) - &r * &fvec;
    let mu = &xi * re(params.omega * params.omega) + &xidot * (ks.alpha / beta);
    let mu_canonical = &c_canonical * re(rho) + &xidot * (alpha_c / beta);
    let nmat = CMatrix::<T>::from_fn(n, n, |j, k| {
        let d = if j == k { -sin[j] * (m / w[j]) } else { re(T::zero()) };
        d + ks.qdot[(j, k)] * m - xidot[j] * xidot[k] / (beta * rho)
    });
    let nmat = symmetrize(&nmat);
    let l = CMatrix::<T>::from_fn(n, n, |j, i| {
        mmat[(j, i)] * m - xidot[j] * ks.eta[i] * (f[i] * w[i]) / (beta * rho)
    });
    if n > 0 {
        let cond = condition_number(&nmat);
        if !(cond <= lit(opts.max_condition)) {
            let mode = (0..n)
                .min_by(|&a, &b| sin[a].modulus().partial_cmp(&sin[b].modulus()).unwrap())
                .unwrap_or(0);
            return Err(Error::NearSingular { condition: to_f64(cond), mode });
        }
    }
    let ninv = solve_refined(&nmat, &CMatrix::<T>::identity(n, n))?;
    Ok(KernelMatrices {
        t,
        alpha: ks.alpha,
        alpha_canonical: alpha_c,
        beta,
        xi,
        xidot,
        mu,
        mu_canonical,
        m: mmat,
        mdot,
        nmat,
        l,
        ninv,
    })
}

/// Gaussian representation of the propagator.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagatorForm<T: Real> {
    pub t: Complex<T>,
    pub amplitude: Complex<T>,
    pub a: Complex<T>,
    pub b: Complex<T>,
    /// Exponent matrix over `(x, X, x′, X′)`; `ln K = ln amplitude + ½ vᵀ quad v`.
    pub quad: CMatrix<T>,
    pub n_modes: usize,
    /// Net number of caustics crossed along the phase-tracking path.
    pub maslov_index: i32,
}

/// Coefficients entering the exact exponent, for reuse by the reduced kernel.
#[derive(Debug, Clone)]
pub struct ExponentParts<T: Real> {
    pub matrices: KernelMatrices<T>,
    pub a: Complex<T>,
    pub b: Complex<T>,
    /// `𝒩⁻¹ ξ̇`.
    pub ninv_xidot: CVector<T>,
    /// `𝒩⁻¹ μ_c`.
    pub ninv_mu: CVector<T>,
    /// `𝒩⁻¹ ℒ`, symmetric.
    pub ninv_l: CMatrix<T>,
}

pub fn exponent_parts<T: Real>(params: &SystemParams<T>, matrices: KernelMatrices<T>) -> Result<ExponentParts<T>> {
    let rho = params.rho;
    let beta = matrices.beta;
    let v = solve_vec(&matrices.nmat, &matrices.xidot)?;
    let w = solve_vec(&matrices.nmat, &matrices.mu_canonical)?;
    let g = symmetrize(&solve_refined(&matrices.nmat, &matrices.l)?);
    let a = matrices.alpha_canonical + matrices.xidot.dot(&w) / rho;
    let b = re(T::one()) + matrices.xidot.dot(&v) / (beta * rho);
    Ok(ExponentParts { matrices, a, b, ninv_xidot: v, ninv_mu: w, ninv_l: g })
}

/// Exponent matrix `W` (without the `i/ħ`) of the exact propagator.
fn exponent_matrix<T: Real>(params: &SystemParams<T>, parts: &ExponentParts<T>) -> CMatrix<T> {
    let km = &parts.matrices;
    let n = km.xi.len();
    let size = 2 * n + 2;
    let (m, rho) = (params.m, params.rho);
    let beta = km.beta;
    let mut wm = CMatrix::<T>::zeros(size, size);
    let (x, xp) = (0, n + 1);
    let bx = |k: usize| 1 + k;
    let bxp = |k: usize| n + 2 + k;
    wm[(x, x)] = parts.a * m / beta;
    wm[(xp, xp)] = parts.a * m / beta;
    wm[(x, xp)] = -parts.b * m / beta;
    wm[(xp, x)] = wm[(x, xp)];
    for j in 0..n {
        for k in 0..n {
            wm[(bx(j), bx(k))] = -parts.ninv_l[(j, k)] * rho;
            wm[(bxp(j), bxp(k))] = -parts.ninv_l[(j, k)] * rho;
            wm[(bx(j), bxp(k))] = km.ninv[(j, k)] * (rho * m);
            wm[(bxp(k), bx(j))] = wm[(bx(j), bxp(k))];
        }
    }
    let mut set = |i: usize, j: usize, v: Complex<T>| {
        wm[(i, j)] += v;
        wm[(j, i)] += v;
    };
    for k in 0..n {
        let v = parts.ninv_xidot[k] * m / beta;
        let w = parts.ninv_mu[k] * m;
        set(xp, bx(k), -v);
        set(x, bxp(k), v);
        set(xp, bxp(k), -w);
        set(x, bx(k), w);
    }
    wm
}

fn qp_block<T: Real>(s: &CMatrix<T>, n: usize) -> CMatrix<T> {
    let q = |k: usize| if k == 0 { IX } else { ix_bath(k - 1) };
    let p = |k: usize| if k == 0 { IP } else { ip_bath(n - 1, k - 1) };
    CMatrix::<T>::from_fn(n, n, |i, j| s[(q(i), p(j))])
}

/// Continuous argument of `det S_qp(z)` along `z(s) = s·t̃`, with `t̃` pushed slightly below the real axis.
fn tracked_phase<T: Real>(engine: &FlowEngine<T>, t: Complex<T>, eps: T) -> Result<(T, T, i32)> {
    let n = engine.bath.len() + 1;
    let t_path = if t.im == T::zero() { t - cx(T::zero(), eps * t.modulus()) } else { t };
    let det_at = |z: Complex<T>| qp_block(&engine.flow(z), n).determinant();
    let omega_max = frequency_scale(&engine.params, &engine.bath);
    let mut s = (lit::<T>(1e-4) / (omega_max * t_path.modulus())).min(lit(1e-2));
    let start = t_path.argument() * lit::<T>(n as f64);
    let mut phase = start;
    let initial = det_at(t_path * s).argument();
    phase = unwrap_phase(phase, initial);
    let mut h: T = lit(1e-2);
    let min_h: T = lit(1e-13);
    while s < T::one() {
        let next = (s + h).min(T::one());
        let d = det_at(t_path * next);
        let candidate = unwrap_phase(phase, d.argument());
        if (candidate - phase).abs() > T::pi() / lit(8.0) && h > min_h {
            h *= lit(0.5);
            continue;
        }
        if h <= min_h {
            return Err(Error::Caustic { beta_abs: to_f64(d.modulus()), threshold: 0.0 });
        }
        phase = candidate;
        s = next;
        h = (h * lit(1.5)).min(lit(0.05));
    }
    let det = det_at(t);
    let final_phase = unwrap_phase(phase, det.argument());
    let maslov = to_f64((final_phase - start) / T::pi()).round() as i32;
    Ok((final_phase, det.modulus(), maslov))
}

pub fn assemble_propagator<T: Real>(
    params: &SystemParams<T>,
    bath: &DiscreteBath<T>,
    t: Complex<T>,
    opts: &PropagatorOptions,
) -> Result<PropagatorForm<T>> {
    let engine = FlowEngine::new(params, bath)?;
    assemble_propagator_with(&engine, t, opts)
}

pub fn assemble_propagator_with<T: Real>(engine: &FlowEngine<T>, t: Complex<T>, opts: &PropagatorOptions) -> Result<PropagatorForm<T>> {
    let params = &engine.params;
    let ks = engine.kernels(t);
    let matrices = assemble_matrices(params, &engine.bath, &ks, opts)?;
    let parts = exponent_parts(params, matrices)?;
    let quad = exponent_matrix(params, &parts) * (imag_unit::<T>() / params.hbar);
    let n = engine.bath.len() + 1;
    let (phase, _, maslov) = tracked_phase(engine, t, lit(opts.path_epsilon))?;
    let two_pi_hbar = T::two_pi() * params.hbar;
    let mut magnitude = (params.m / (two_pi_hbar * parts.matrices.beta.modulus())).sqrt();
    if n > 1 {
        let det_n = parts.matrices.nmat.clone().determinant().modulus();
        magnitude *= (params.m * params.rho / two_pi_hbar).powf(lit((n - 1) as f64 * 0.5)) / det_n.sqrt();
    }
    let total_phase = -(phase + T::frac_pi_2() * lit::<T>(n as f64)) * lit::<T>(0.5);
    if maslov != 0 {
        log::debug!("propagator at t = {}: {} caustic crossings", to_f64(t.re), maslov);
    }
    Ok(PropagatorForm {
        t,
        amplitude: polar(magnitude, total_phase),
        a: parts.a,
        b: parts.b,
        quad,
        n_modes: n - 1,
        maslov_index: maslov,
    })
}

/// Point value of the propagator.
pub fn evaluate_propagator<T: Real>(form: &PropagatorForm<T>, x: T, big_x: &[T], xp: T, big_xp: &[T]) -> Result<Complex<T>> {
    let n = form.n_modes;
    if big_x.len() != n || big_xp.len() != n {
        return Err(Error::InvalidParameter(format!("expected {n} bath coordinates")));
    }
    let mut v = CVector::<T>::zeros(2 * n + 2);
    v[0] = re(x);
    v[n + 1] = re(xp);
    for k in 0..n {
        v[1 + k] = re(big_x[k]);
        v[n + 2 + k] = re(big_xp[k]);
    }
    let exponent = (v.transpose() * &form.quad * &v)[(0, 0)] * lit::<T>(0.5);
    let value = form.amplitude * exponent.exp();
    if !value.re.is_finite() || !value.im.is_finite() {
        return Err(Error::Overflow { real_part: to_f64(exponent.re) });
    }
    Ok(value)
}

/// Linear canonical map `(q′, p′) ↦ (q, p)` generated by the exponent, in `(x, p, X, P)` ordering.
pub fn classical_map<T: Real>(form: &PropagatorForm<T>, hbar: T) -> Result<CMatrix<T>> {
    let n = form.n_modes + 1;
    let w = &form.quad * cx(T::zero(), -hbar);
    let wqq = w.view((0, 0), (n, n)).into_owned();
    let wqqp = w.view((0, n), (n, n)).into_owned();
    let wqpq = w.view((n, 0), (n, n)).into_owned();
    let wqpqp = w.view((n, n), (n, n)).into_owned();
    let inv = solve_refined(&wqpq, &CMatrix::<T>::identity(n, n))?;
    let s_qq = -&inv * &wqpqp;
    let s_qp = -inv;
    let s_pq = &wqq * &s_qq + wqqp;
    let s_pp = &wqq * &s_qp;
    let nb = n - 1;
    let q = |k: usize| if k == 0 { IX } else { ix_bath(k - 1) };
    let p = |k: usize| if k == 0 { IP } else { ip_bath(nb, k - 1) };
    let mut s = CMatrix::<T>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            s[(q(i), q(j))] = s_qq[(i, j)];
            s[(q(i), p(j))] = s_qp[(i, j)];
            s[(p(i), q(j))] = s_pq[(i, j)];
            s[(p(i), p(j))] = s_pp[(i, j)];
        }
    }
    Ok(s)
}

/// First-order weak-coupling propagator: bare blocks plus cross terms linear in the couplings.
pub fn weak_coupling_propagator<T: Real>(params: &SystemParams<T>, bath: &DiscreteBath<T>, t: T) -> Result<PropagatorForm<T>> {
    params.validate()?;
    bath.validate()?;
    if !(t > T::zero()) {
        return Err(Error::InvalidParameter("weak-coupling propagator needs t > 0".into()));
    }
    let n = bath.len();
    let (m, rho, w0) = (params.m, params.rho, params.omega);
    for (k, &wk) in bath.omegas.iter().enumerate() {
        if (wk - w0).abs() <= lit::<T>(1e-9) * wk.max(w0) {
            return Err(Error::Resonance { mode: k });
        }
    }
    let s0 = (w0 * t).sin();
    let eps: T = lit(1e-12);
    if s0.abs() <= eps || w0 == T::zero() {
        return Err(Error::Caustic { beta_abs: to_f64(s0.abs()), threshold: 1e-12 });
    }
    let beta0 = s0 / w0;
    let alpha0 = (w0 * t).cos();
    let size = 2 * n + 2;
    let mut wm = CMatrix::<T>::zeros(size, size);
    let (x, xp) = (0, n + 1);
    wm[(x, x)] = re(m * w0 * alpha0 / s0);
    wm[(xp, xp)] = wm[(x, x)];
    wm[(x, xp)] = re(-m * w0 / s0);
    wm[(xp, x)] = wm[(x, xp)];
    let mut amplitude = bare_amplitude(m, w0, t, params.hbar);
    for k in 0..n {
        let (wk, f) = (bath.omegas[k], bath.couplings[k]);
        let sk = (wk * t).sin();
        if sk.abs() <= eps {
            return Err(Error::NearSingular { condition: f64::INFINITY, mode: k });
        }
        let (bk, bkp) = (1 + k, n + 2 + k);
        wm[(bk, bk)] = re(rho * wk * (wk * t).cos() / sk);
        wm[(bkp, bkp)] = wm[(bk, bk)];
        wm[(bk, bkp)] = re(-rho * wk / sk);
        wm[(bkp, bk)] = wm[(bk, bkp)];
        amplitude *= bare_amplitude(rho, wk, t, params.hbar);
        let eta = weak_eta(w0, wk, t);
        let delta = ((w0 * t).cos() - (wk * t).cos()) / (wk * wk - w0 * w0);
        let xi = f * eta / wk;
        let xidot = f * delta;
        let beta_mu = beta0 * (w0 * w0 * xi - f * sk / wk) + alpha0 * xidot;
        let c = wk / sk;
        let mut add = |i: usize, j: usize, v: T| {
            wm[(i, j)] += re(v);
            wm[(j, i)] += re(v);
        };
        add(xp, bk, c * xidot / beta0);
        add(x, bkp, -c * xidot / beta0);
        add(xp, bkp, c * beta_mu / beta0);
        add(x, bk, -c * beta_mu / beta0);
    }
    Ok(PropagatorForm {
        t: re(t),
        amplitude,
        a: re(alpha0),
        b: re(T::one()),
        quad: wm * (imag_unit::<T>() / params.hbar),
        n_modes: n,
        maslov_index: 0,
    })
}

/// Zeroth-order convolution η_j in the limit of vanishing coupling.
pub fn weak_eta<T: Real>(omega: T, omega_j: T, t: T) -> T {
    (omega_j * (omega * t).sin() - omega * (omega_j * t).sin()) / (omega * (omega_j * omega_j - omega * omega))
}

/// `sqrt(mω/(2πiħ sin ωt))` continued through the zeros of `sin ωt`.
fn bare_amplitude<T: Real>(mass: T, omega: T, t: T, hbar: T) -> Complex<T> {
    let s = (omega * t).sin();
    let magnitude = (mass * omega / (T::two_pi() * hbar * s.abs())).sqrt();
    let crossings = (omega * t / T::pi()).floor();
    let phase = -T::frac_pi_4() - T::frac_pi_2() * crossings;
    polar(magnitude, phase)
}

/// JSON shape of a [`PropagatorForm`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagatorFormJson {
    pub t: [f64; 2],
    pub amplitude: [f64; 2],
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub quad: Vec<Vec<[f64; 2]>>,
    pub n_modes: usize,
    pub maslov_index: i32,
}

impl<T: Real> PropagatorForm<T> {
    pub fn to_json(&self) -> PropagatorFormJson {
        PropagatorFormJson {
            t: pair(self.t),
            amplitude: pair(self.amplitude),
            a: pair(self.a),
            b: pair(self.b),
            quad: (0..self.quad.nrows()).map(|i| (0..self.quad.ncols()).map(|j| pair(self.quad[(i, j)])).collect()).collect(),
            n_modes: self.n_modes,
            maslov_index: self.maslov_index,
        }
    }
}

impl PropagatorFormJson {
    pub fn to_form(&self) -> Result<PropagatorForm<f64>> {
        let size = 2 * self.n_modes + 2;
        if self.quad.len() != size || self.quad.iter().any(|r| r.len() != size) {
            return Err(Error::Config(format!("quad must be {size}x{size}")));
        }
        let c = |p: [f64; 2]| Complex::new(p[0], p[1]);
        Ok(PropagatorForm {
            t: c(self.t),
            amplitude: c(self.amplitude),
            a: c(self.a),
            b: c(self.b),
            quad: DMatrix::from_fn(size, size, |i, j| c(self.quad[i][j])),
            n_modes: self.n_modes,
            maslov_index: self.maslov_index,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bare_origin_value() {
        let p = SystemParams::<f64>::default();
        let form = assemble_propagator(&p, &DiscreteBath::empty(), re(std::f64::consts::FRAC_PI_2), &PropagatorOptions::default()).unwrap();
        let v = evaluate_propagator(&form, 0.0, &[], 0.0, &[]).unwrap();
        let want = (Complex::new(0.0, 2.0 * std::f64::consts::PI)).powf(-0.5);
        assert!((v - want).norm() < 1e-12, "{v} vs {want}");
    }

    #[test]
    fn weak_eta_hand_value() {
        let w = 1.3;
        let v = weak_eta(w, 2.0 * w, std::f64::consts::PI / (2.0 * w));
        assert!((v - 2.0 / (3.0 * w * w)).abs() < 1e-14);
    }

    #[test]
    fn resonance_rejected() {
        let p = SystemParams::<f64>::default();
        let bath = DiscreteBath::new(vec![1.0], vec![0.1]).unwrap();
        assert!(matches!(weak_coupling_propagator(&p, &bath, 0.7), Err(Error::Resonance { mode: 0 })));
    }
}
