//! Reduced dynamics of the oscillator with the bath traced out.
//!
//! The bath starts in a thermal state uncorrelated with the oscillator. Tracing
//! the bath out of `K ρ K†` leaves a Gaussian kernel in `(x, x₁, x′, x₂)`:
//!
//! ```text
//! ρ(x, x′, t) = ∫∫ G(x, x′; x₁, x₂, t) ρ(x₁, x₂, 0) dx₁ dx₂
//! ```
//!
//! The final bath coordinate enters only linearly and integrates to a delta
//! function fixing `q = X₁ − X₂`; the centroid `(X₁ + X₂)/2` is then integrated
//! against the thermal state, producing `p = −ρ(𝒩⁻¹ℒ) q + (c′₁ − c′₂)`.

use nalgebra::{Complex, ComplexField, DMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt17, pair};
use crate::kernels::FlowEngine;
use crate::linalg::{gaussian_log_integral, CMatrix, CVector};
use crate::model::{DiscreteBath, SystemParams};
use crate::oracle::SystemMoments;
use crate::propagator::{assemble_matrices, exponent_parts, PropagatorOptions};
use crate::scalar::{cx, imag_unit, lit, re, to_f64, Real};

/// Thermal state of the free bath oscillators.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThermalBath<T> {
    pub tau_b: T,
    /// `coth(ω_k τ_B / 2)`.
    pub coth: Vec<T>,
    pub position_variance: Vec<T>,
    pub momentum_variance: Vec<T>,
}

/// Per-mode thermal kernel `ρ_B(X, X′) ∝ exp(−ρω/(2ħ sinh ωτ_B) [(X² + X′²) cosh ωτ_B − 2XX′])`.
pub fn thermal_bath_form<T: Real>(bath: &DiscreteBath<T>, params: &SystemParams<T>, tau_b: T) -> Result<ThermalBath<T>> {
    if !(tau_b > T::zero()) {
        return Err(Error::InvalidParameter("bath inverse-temperature time must be positive".into()));
    }
    let half: T = lit(0.5);
    let coth: Vec<T> = bath.omegas.iter().map(|&w| T::one() / (w * tau_b * half).tanh()).collect();
    let position_variance = bath.omegas.iter().zip(&coth).map(|(&w, &c)| params.hbar * half * c / (params.rho * w)).collect();
    let momentum_variance = bath.omegas.iter().zip(&coth).map(|(&w, &c)| params.hbar * half * c * params.rho * w).collect();
    Ok(ThermalBath { tau_b, coth, position_variance, momentum_variance })
}

/// Gaussian density matrix `ρ(x, x′) = exp(ℓ + u·(x, x′) + ½ (x, x′) c (x, x′)ᵀ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianState<T: Real> {
    pub c11: Complex<T>,
    pub c12: Complex<T>,
    pub c22: Complex<T>,
    pub u1: Complex<T>,
    pub u2: Complex<T>,
    pub log_norm: Complex<T>,
}

/// Exponent in centroid/difference variables `X = (x + x′)/2`, `y = x − x′`.
#[derive(Debug, Clone, Copy)]
struct Centred<T: Real> {
    cxx: Complex<T>,
    cxy: Complex<T>,
    cyy: Complex<T>,
    ux: Complex<T>,
    uy: Complex<T>,
}

impl<T: Real> GaussianState<T> {
    fn centred(&self) -> Centred<T> {
        let two = lit::<T>(2.0);
        Centred {
            cxx: self.c11 + self.c12 * two + self.c22,
            cxy: (self.c11 - self.c22) / two,
            cyy: (self.c11 - self.c12 * two + self.c22) / lit::<T>(4.0),
            ux: self.u1 + self.u2,
            uy: (self.u1 - self.u2) / two,
        }
    }

    fn from_centred(k: Centred<T>, log_norm: Complex<T>) -> Self {
        let q = k.cxx / lit::<T>(4.0);
        let half = lit::<T>(0.5);
        GaussianState {
            c11: q + k.cxy + k.cyy,
            c12: q - k.cyy,
            c22: q - k.cxy + k.cyy,
            u1: k.ux * half + k.uy,
            u2: k.ux * half - k.uy,
            log_norm,
        }
        .normalized()
    }

    /// Unit-trace state with the given first and second moments.
    pub fn from_moments(m: &SystemMoments<T>, hbar: T) -> Result<Self> {
        let det = m.var_x * m.var_p - m.cov_xp * m.cov_xp;
        if !(m.var_x > T::zero()) || det < hbar * hbar * lit(0.25) * (T::one() - lit(1e-10)) {
            return Err(Error::InvalidParameter("moments violate the uncertainty relation".into()));
        }
        let i = imag_unit::<T>();
        let cxx = re(-T::one() / m.var_x);
        let cxy = i * (m.cov_xp / (hbar * m.var_x));
        let cyy = re(-m.var_p / (hbar * hbar)) + cxy * cxy / cxx;
        let ux = re(m.mean_x / m.var_x);
        let uy = i * (m.mean_p / hbar) + ux * cxy / cxx;
        Ok(Self::from_centred(Centred { cxx, cxy, cyy, ux, uy }, re(T::zero())))
    }

    /// Coherent state of the bare oscillator centred at `(x₀, p₀)`.
    pub fn coherent(params: &SystemParams<T>, x0: T, p0: T) -> Result<Self> {
        let half = params.hbar * lit(0.5);
        let vx = half / (params.m * params.omega);
        let vp = half * params.m * params.omega;
        Self::from_moments(&SystemMoments { mean_x: x0, mean_p: p0, var_x: vx, var_p: vp, cov_xp: T::zero() }, params.hbar)
    }

    pub fn log_trace(&self) -> Complex<T> {
        let k = self.centred();
        let a = -k.cxx;
        self.log_norm + (re(T::two_pi()) / a).ln() * lit::<T>(0.5) + k.ux * k.ux / (a * lit::<T>(2.0))
    }

    pub fn trace(&self) -> Complex<T> {
        self.log_trace().exp()
    }

    pub fn normalized(mut self) -> Self {
        self.log_norm -= self.log_trace();
        self
    }

    /// Mean, variances and symmetrized covariance; imaginary residues are discarded.
    pub fn moments(&self, hbar: T) -> SystemMoments<T> {
        let k = self.centred();
        let i = imag_unit::<T>();
        let var_x = -re(T::one()) / k.cxx;
        let mean_x = -k.ux / k.cxx;
        let cov_xp = i * k.cxy * hbar / k.cxx;
        let var_p = -(k.cyy - k.cxy * k.cxy / k.cxx) * (hbar * hbar);
        let mean_p = -i * hbar * (k.uy - k.ux * k.cxy / k.cxx);
        SystemMoments { mean_x: mean_x.re, mean_p: mean_p.re, var_x: var_x.re, var_p: var_p.re, cov_xp: cov_xp.re }
    }

    /// Largest imaginary part among the moments, which vanishes for a Hermitian state.
    pub fn moment_residue(&self, hbar: T) -> T {
        let k = self.centred();
        let i = imag_unit::<T>();
        [
            -re(T::one()) / k.cxx,
            -k.ux / k.cxx,
            i * k.cxy * hbar / k.cxx,
            -(k.cyy - k.cxy * k.cxy / k.cxx) * (hbar * hbar),
            -i * hbar * (k.uy - k.ux * k.cxy / k.cxx),
        ]
        .iter()
        .fold(T::zero(), |m, z| m.max(z.im.abs()))
    }

    /// `⟨x²⟩⟨p²⟩ − cov² − ħ²/4` for the centred moments.
    pub fn uncertainty_margin(&self, hbar: T) -> T {
        let m = self.moments(hbar);
        m.var_x * m.var_p - m.cov_xp * m.cov_xp - hbar * hbar * lit(0.25)
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> Result<T> {
        // ρ(x, x′) ρ(x′, x) = exp(2ℓ + (u₁+u₂)(x+x′) + ½ vᵀ (c + PcP) v)
        let a = CMatrix::<T>::from_row_slice(
            2,
            2,
            &[-(self.c11 + self.c22), -(self.c12 * lit::<T>(2.0)), -(self.c12 * lit::<T>(2.0)), -(self.c11 + self.c22)],
        );
        let s = self.u1 + self.u2;
        let b = CVector::<T>::from_vec(vec![s, s]);
        Ok((gaussian_log_integral(&a, &b)? + self.log_norm * lit::<T>(2.0)).exp().re)
    }

    pub fn evaluate(&self, x: T, xp: T) -> Complex<T> {
        let half = lit::<T>(0.5);
        (self.log_norm
            + self.u1 * x
            + self.u2 * xp
            + (self.c11 * (x * x) + self.c12 * (x * xp * lit(2.0)) + self.c22 * (xp * xp)) * half)
            .exp()
    }

    /// Largest deviation from `ρ(x, x′) = ρ(x′, x)*` among the exponent coefficients.
    pub fn hermiticity_residual(&self) -> T {
        [
            (self.c11 - self.c22.conj()).modulus(),
            (self.c12 - self.c12.conj()).modulus(),
            (self.u1 - self.u2.conj()).modulus(),
        ]
        .iter()
        .fold(T::zero(), |m, &v| m.max(v))
    }

    pub fn to_json(&self) -> GaussianStateJson {
        GaussianStateJson {
            c: [[pair(self.c11), pair(self.c12)], [pair(self.c12), pair(self.c22)]],
            u: [pair(self.u1), pair(self.u2)],
            log_norm: pair(self.log_norm),
        }
    }
}

/// JSON shape of a [`GaussianState`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianStateJson {
    pub c: [[[f64; 2]; 2]; 2],
    pub u: [[f64; 2]; 2],
    pub log_norm: [f64; 2],
}

impl GaussianStateJson {
    pub fn to_state(&self) -> Result<GaussianState<f64>> {
        let z = |p: [f64; 2]| Complex::new(p[0], p[1]);
        if self.c[0][1] != self.c[1][0] {
            return Err(Error::Config("exponent matrix must be symmetric".into()));
        }
        Ok(GaussianState {
            c11: z(self.c[0][0]),
            c12: z(self.c[0][1]),
            c22: z(self.c[1][1]),
            u1: z(self.u[0]),
            u2: z(self.u[1]),
            log_norm: z(self.log_norm),
        })
    }
}

/// Reduced kernel `G = exp(log_prefactor + ½ uᵀ quad u)`, `u = (x, x₁, x′, x₂)`.
#[derive(Debug, Clone, Serialize)]
pub struct ReducedKernelForm<T: Real> {
    pub t: T,
    pub tau_b: T,
    pub log_prefactor: T,
    pub quad: CMatrix<T>,
    /// `q = X₁ − X₂` as a linear map of `u`, one row per bath mode.
    pub q_map: CMatrix<T>,
    /// Centroid conjugate `p` as a linear map of `u`.
    pub p_map: CMatrix<T>,
}

pub fn reduced_kernel<T: Real>(
    params: &SystemParams<T>,
    bath: &DiscreteBath<T>,
    t: T,
    tau_b: T,
    opts: &PropagatorOptions,
) -> Result<ReducedKernelForm<T>> {
    let engine = FlowEngine::new(params, bath)?;
    reduced_kernel_with(&engine, t, tau_b, opts)
}

pub fn reduced_kernel_with<T: Real>(
    engine: &FlowEngine<T>,
    t: T,
    tau_b: T,
    opts: &PropagatorOptions,
) -> Result<ReducedKernelForm<T>> {
    let params = &engine.params;
    let bath = &engine.bath;
    let thermal = thermal_bath_form(bath, params, tau_b)?;
    let ks = engine.kernels(re(t));
    let parts = exponent_parts(params, assemble_matrices(params, bath, &ks, opts)?)?;
    let km = &parts.matrices;
    let n = bath.len();
    let (m, rho, hbar) = (params.m, params.rho, params.hbar);
    let beta = km.beta.re;
    let a = parts.a.re;
    let b = parts.b.re;
    let v = parts.ninv_xidot.map(|z| z.re);
    let w = parts.ninv_mu.map(|z| z.re);
    let g = parts.ninv_l.map(|z| z.re);
    let xidot = km.xidot.map(|z| z.re);
    let mu = km.mu_canonical.map(|z| z.re);

    let (ix, ix1, ixp, ix2) = (0, 1, 2, 3);
    let mut dmat = DMatrix::<T>::zeros(n, 4);
    let mut cminus = DMatrix::<T>::zeros(n, 4);
    let mut cplus = DMatrix::<T>::zeros(n, 4);
    for k in 0..n {
        dmat[(k, ix)] = -mu[k] / rho;
        dmat[(k, ixp)] = mu[k] / rho;
        dmat[(k, ix1)] = xidot[k] / (rho * beta);
        dmat[(k, ix2)] = -xidot[k] / (rho * beta);
        let vv = v[k] * m / beta;
        let ww = w[k] * m;
        cminus[(k, ix)] = vv;
        cminus[(k, ixp)] = -vv;
        cminus[(k, ix1)] = -ww;
        cminus[(k, ix2)] = ww;
        cplus[(k, ix)] = vv;
        cplus[(k, ixp)] = vv;
        cplus[(k, ix1)] = -ww;
        cplus[(k, ix2)] = -ww;
    }
    let pmat = &cminus - &g * &dmat * rho;

    // real part of the exponent multiplying i/ħ
    let mut phase = DMatrix::<T>::zeros(4, 4);
    let ma = m * a / beta;
    let mb = m * b / beta;
    phase[(ix, ix)] = ma;
    phase[(ix1, ix1)] = ma;
    phase[(ix, ix1)] = -mb;
    phase[(ix1, ix)] = -mb;
    phase[(ixp, ixp)] = -ma;
    phase[(ix2, ix2)] = -ma;
    phase[(ixp, ix2)] = mb;
    phase[(ix2, ixp)] = mb;
    let cross = dmat.transpose() * &cplus;
    phase += (&cross + cross.transpose()) * lit::<T>(0.5);

    let mut damping = DMatrix::<T>::zeros(4, 4);
    for k in 0..n {
        let wk = bath.omegas[k];
        let ck = thermal.coth[k];
        let dq = rho * wk * ck / (lit::<T>(2.0) * hbar);
        let dp = ck / (lit::<T>(2.0) * hbar * rho * wk);
        let qrow = dmat.row(k);
        let prow = pmat.row(k);
        damping -= qrow.transpose() * qrow * dq + prow.transpose() * prow * dp;
    }
    let quad = DMatrix::from_fn(4, 4, |i, j| cx(damping[(i, j)], phase[(i, j)] / hbar));
    let log_prefactor = (m / (T::two_pi() * hbar * beta.abs())).ln();
    Ok(ReducedKernelForm {
        t,
        tau_b,
        log_prefactor,
        quad,
        q_map: dmat.map(re),
        p_map: pmat.map(re),
    })
}

impl<T: Real> ReducedKernelForm<T> {
    pub fn evaluate(&self, x: T, xp: T, x1: T, x2: T) -> Complex<T> {
        let u = CVector::<T>::from_vec(vec![re(x), re(x1), re(xp), re(x2)]);
        (re(self.log_prefactor) + (u.transpose() * &self.quad * &u)[(0, 0)] * lit::<T>(0.5)).exp()
    }

    pub fn to_json(&self) -> ReducedKernelFormJson {
        let rows = |m: &CMatrix<T>| (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| to_f64(m[(i, j)].re)).collect()).collect();
        ReducedKernelFormJson {
            t: to_f64(self.t),
            tau_b: to_f64(self.tau_b),
            variables: ["x", "x1", "xp", "x2"],
            log_prefactor: to_f64(self.log_prefactor),
            quad: (0..4).map(|i| (0..4).map(|j| pair(self.quad[(i, j)])).collect()).collect(),
            q_map: rows(&self.q_map),
            p_map: rows(&self.p_map),
        }
    }
}

/// JSON shape of a [`ReducedKernelForm`].
#[derive(Debug, Clone, Serialize)]
pub struct ReducedKernelFormJson {
    pub t: f64,
    pub tau_b: f64,
    pub variables: [&'static str; 4],
    pub log_prefactor: f64,
    pub quad: Vec<Vec<[f64; 2]>>,
    pub q_map: Vec<Vec<f64>>,
    pub p_map: Vec<Vec<f64>>,
}

/// Closed-form propagation of a Gaussian state through the reduced kernel.
pub fn propagate_gaussian<T: Real>(kernel: &ReducedKernelForm<T>, state: &GaussianState<T>) -> Result<GaussianState<T>> {
    // z = (x, x′) at time t, y = (x₁, x₂) initial
    let zi = [0usize, 2];
    let yi = [1usize, 3];
    let q = &kernel.quad;
    let qzz = CMatrix::<T>::from_fn(2, 2, |i, j| q[(zi[i], zi[j])]);
    let qzy = CMatrix::<T>::from_fn(2, 2, |i, j| q[(zi[i], yi[j])]);
    let qyy = CMatrix::<T>::from_fn(2, 2, |i, j| q[(yi[i], yi[j])]);
    let cs = CMatrix::<T>::from_row_slice(2, 2, &[state.c11, state.c12, state.c12, state.c22]);
    let a = -(qyy + cs);
    let u0 = CVector::<T>::from_vec(vec![state.u1, state.u2]);
    let base = gaussian_log_integral(&a, &u0)?;
    let ainv = a.clone().try_inverse().ok_or_else(|| Error::Singular("reduced Gaussian integral".into()))?;
    let c = &qzz + &qzy * &ainv * qzy.transpose();
    let u = &qzy * &ainv * &u0;
    let out = GaussianState {
        c11: c[(0, 0)],
        c12: (c[(0, 1)] + c[(1, 0)]) * lit::<T>(0.5),
        c22: c[(1, 1)],
        u1: u[0],
        u2: u[1],
        log_norm: state.log_norm + base + re(kernel.log_prefactor),
    };
    let drift = (out.trace() - re(T::one())).modulus();
    if drift > lit(1e-8) {
        log::warn!("trace drift {:e} after propagation; renormalizing", to_f64(drift));
        return Ok(out.normalized());
    }
    Ok(out)
}

/// Uniform grid on `[x_min, x_max]` with `n` points including both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid<T> {
    pub x_min: T,
    pub x_max: T,
    pub n: usize,
}

/// Grid size above which [`propagate_grid`] warns about its O(n⁴) cost.
pub const GRID_COST_WARNING: usize = 256;

impl<T: Real> Grid<T> {
    pub fn new(x_min: T, x_max: T, n: usize) -> Result<Self> {
        let g = Grid { x_min, x_max, n };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 8 {
            return Err(Error::InvalidParameter("grid needs at least 8 points".into()));
        }
        if !(self.x_max > self.x_min) {
            return Err(Error::InvalidParameter("grid requires x_max > x_min".into()));
        }
        Ok(())
    }

    pub fn spacing(&self) -> T {
        (self.x_max - self.x_min) / lit::<T>((self.n - 1) as f64)
    }

    pub fn points(&self) -> Vec<T> {
        let h = self.spacing();
        (0..self.n).map(|i| self.x_min + h * lit::<T>(i as f64)).collect()
    }

    /// Trapezoidal weights.
    pub fn weights(&self) -> Vec<T> {
        let h = self.spacing();
        (0..self.n).map(|i| if i == 0 || i + 1 == self.n { h * lit(0.5) } else { h }).collect()
    }

    pub fn sample(&self, state: &GaussianState<T>) -> DMatrix<Complex<T>> {
        let x = self.points();
        DMatrix::from_fn(self.n, self.n, |i, j| state.evaluate(x[i], x[j]))
    }

    /// Trapezoidal trace of a sampled density matrix.
    pub fn trace(&self, rho: &DMatrix<Complex<T>>) -> Complex<T> {
        let w = self.weights();
        (0..self.n).fold(re(T::zero()), |s, i| s + rho[(i, i)] * w[i])
    }
}

/// Largest boundary magnitude relative to the largest magnitude on the grid.
pub fn boundary_fraction<T: Real>(rho: &DMatrix<Complex<T>>) -> T {
    let n = rho.nrows();
    let max = rho.iter().fold(T::zero(), |m, z| m.max(z.modulus()));
    let mut edge = T::zero();
    for i in 0..n {
        for &(a, b) in &[(0, i), (n - 1, i), (i, 0), (i, n - 1)] {
            edge = edge.max(rho[(a, b)].modulus());
        }
    }
    if max > T::zero() { edge / max } else { T::zero() }
}

/// Trapezoidal double quadrature of the reduced kernel against a sampled state.
///
/// Each output entry is computed independently with a fixed summation order,
/// and only the upper triangle is evaluated; the lower one is its conjugate.
pub fn propagate_grid<T: Real>(
    kernel: &ReducedKernelForm<T>,
    rho0: &DMatrix<Complex<T>>,
    grid: &Grid<T>,
) -> Result<DMatrix<Complex<T>>> {
    grid.validate()?;
    let n = grid.n;
    if rho0.nrows() != n || rho0.ncols() != n {
        return Err(Error::InvalidParameter(format!("state must be {n}x{n}")));
    }
    if n > GRID_COST_WARNING {
        log::warn!("grid propagation with n = {n} costs O(n^4) = {:e} kernel terms", (n as f64).powi(4));
    }
    let leak = boundary_fraction(rho0);
    if leak > lit(1e-8) {
        log::warn!("initial state reaches the grid boundary at {:e} of its maximum", to_f64(leak));
    }
    let x = grid.points();
    let w = grid.weights();
    let q = &kernel.quad;
    let half = lit::<T>(0.5);
    // initial-variable block, independent of the output point
    let inner = DMatrix::from_fn(n, n, |a, b| {
        let (ya, yb) = (x[a], x[b]);
        let e = q[(1, 1)] * (ya * ya * half) + q[(3, 3)] * (yb * yb * half) + q[(1, 3)] * (ya * yb);
        rho0[(a, b)] * e.exp() * (w[a] * w[b])
    });
    let rows: Vec<Vec<(usize, Complex<T>)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut out = Vec::with_capacity(n - i);
            let mut fb = vec![re(T::zero()); n];
            for j in i..n {
                let (xo, xpo) = (x[i], x[j]);
                let s1 = q[(0, 1)] * xo + q[(2, 1)] * xpo;
                let s2 = q[(0, 3)] * xo + q[(2, 3)] * xpo;
                for (b, f) in fb.iter_mut().enumerate() {
                    *f = (s2 * x[b]).exp();
                }
                let mut total = re(T::zero());
                for a in 0..n {
                    let mut row = re(T::zero());
                    for b in 0..n {
                        row += inner[(a, b)] * fb[b];
                    }
                    total += (s1 * x[a]).exp() * row;
                }
                let outer = q[(0, 0)] * (xo * xo * half) + q[(2, 2)] * (xpo * xpo * half) + q[(0, 2)] * (xo * xpo);
                out.push((j, total * (outer + re(kernel.log_prefactor)).exp()));
            }
            out
        })
        .collect();
    let mut rho = DMatrix::from_element(n, n, re(T::zero()));
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row {
            if i == j {
                rho[(i, i)] = re(v.re);
            } else {
                rho[(i, j)] = v;
                rho[(j, i)] = v.conj();
            }
        }
    }
    Ok(rho)
}

/// Writes a sampled density matrix as `x_i,x_j,Re(rho),Im(rho)` rows.
pub fn write_state_csv<W: std::io::Write>(out: &mut W, grid: &Grid<f64>, rho: &DMatrix<Complex<f64>>) -> std::io::Result<()> {
    writeln!(out, "x_i,x_j,Re(rho),Im(rho)")?;
    let x = grid.points();
    for i in 0..grid.n {
        for j in 0..grid.n {
            let v = rho[(i, j)];
            writeln!(out, "{},{},{},{}", fmt17(x[i]), fmt17(x[j]), fmt17(v.re), fmt17(v.im))?;
        }
    }
    Ok(())
}

/// Reads a density matrix written by [`write_state_csv`] on the given grid.
pub fn read_state_csv<R: std::io::BufRead>(input: R, grid: &Grid<f64>) -> Result<DMatrix<Complex<f64>>> {
    let n = grid.n;
    let mut rho = DMatrix::from_element(n, n, Complex::new(0.0, 0.0));
    let mut seen = 0usize;
    let x = grid.points();
    let tol = 1e-9 * grid.spacing();
    for (line_no, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::Config(format!("state CSV: {e}")))?;
        if line_no == 0 {
            if line.trim() != "x_i,x_j,Re(rho),Im(rho)" {
                return Err(Error::Config("state CSV header must be x_i,x_j,Re(rho),Im(rho)".into()));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("state CSV line {}: {e}", line_no + 1)))?;
        if f.len() != 4 {
            return Err(Error::Config(format!("state CSV line {}: expected 4 fields", line_no + 1)));
        }
        let locate = |v: f64| -> Result<usize> {
            let k = ((v - grid.x_min) / grid.spacing()).round();
            if k < 0.0 || k as usize >= n || (x[k as usize] - v).abs() > tol {
                return Err(Error::Config(format!("state CSV line {}: {v} is not a grid point", line_no + 1)));
            }
            Ok(k as usize)
        };
        rho[(locate(f[0])?, locate(f[1])?)] = Complex::new(f[2], f[3]);
        seen += 1;
    }
    if seen != n * n {
        return Err(Error::Config(format!("state CSV has {seen} entries, expected {}", n * n)));
    }
    Ok(rho)
}
