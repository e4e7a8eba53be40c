//! Gaussian phase-space moments of the full oscillator-plus-bath system.

use nalgebra::{Complex, ComplexField, DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{build_dynamical_matrix, ix_bath, ip_bath, symplectic_form, IP, IX};
use crate::model::{DiscreteBath, SystemParams};
use crate::oracle::ode::ode_flows;
use crate::scalar::{lit, to_f64, Real};

/// Mean vector and covariance matrix in `(x, p, X, P)` ordering.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseCovariance<T: Real> {
    pub mean: DVector<T>,
    pub cov: DMatrix<T>,
}

/// First and second moments of the oscillator alone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SystemMoments<T> {
    pub mean_x: T,
    pub mean_p: T,
    pub var_x: T,
    pub var_p: T,
    pub cov_xp: T,
}

impl<T: Real> PhaseCovariance<T> {
    /// Smallest eigenvalue of `cov + (iħ/2) J`; non-negative for a physical state.
    pub fn uncertainty_margin(&self, hbar: T) -> T {
        let n = (self.cov.nrows() - 2) / 2;
        let j = symplectic_form::<T>(n);
        let m = DMatrix::from_fn(self.cov.nrows(), self.cov.ncols(), |r, c| {
            Complex::new(self.cov[(r, c)], hbar * lit::<T>(0.5) * j[(r, c)])
        });
        let eig = m.symmetric_eigen();
        eig.eigenvalues.iter().fold(T::max_value().unwrap(), |a, &b| a.min(b))
    }

    pub fn validate(&self, hbar: T) -> Result<()> {
        let asym = (&self.cov - self.cov.transpose()).norm();
        if asym > lit::<T>(1e-12) * self.cov.norm().max(T::one()) {
            return Err(Error::InvalidParameter("covariance is not symmetric".into()));
        }
        let margin = self.uncertainty_margin(hbar);
        if margin < lit(-1e-9) {
            return Err(Error::InvalidParameter(format!("uncertainty relation violated by {}", to_f64(margin))));
        }
        Ok(())
    }

    /// Product of an oscillator Gaussian with uncorrelated bath moments `(⟨X²⟩, ⟨P²⟩)`.
    pub fn product(system: &SystemMoments<T>, bath: &[(T, T)]) -> Self {
        let n = bath.len();
        let d = 2 * n + 2;
        let mut mean = DVector::zeros(d);
        mean[IX] = system.mean_x;
        mean[IP] = system.mean_p;
        let mut cov = DMatrix::zeros(d, d);
        cov[(IX, IX)] = system.var_x;
        cov[(IP, IP)] = system.var_p;
        cov[(IX, IP)] = system.cov_xp;
        cov[(IP, IX)] = system.cov_xp;
        for (j, &(vx, vp)) in bath.iter().enumerate() {
            cov[(ix_bath(j), ix_bath(j))] = vx;
            cov[(ip_bath(n, j), ip_bath(n, j))] = vp;
        }
        PhaseCovariance { mean, cov }
    }

    pub fn system(&self) -> SystemMoments<T> {
        SystemMoments {
            mean_x: self.mean[IX],
            mean_p: self.mean[IP],
            var_x: self.cov[(IX, IX)],
            var_p: self.cov[(IP, IP)],
            cov_xp: self.cov[(IX, IP)],
        }
    }

    /// Applies a linear symplectic map.
    pub fn transform(&self, s: &DMatrix<T>) -> Self {
        PhaseCovariance { mean: s * &self.mean, cov: s * &self.cov * s.transpose() }
    }
}

/// Thermal moments `(⟨X_j²⟩, ⟨P_j²⟩)` of free bath oscillators at inverse-temperature time τ_B.
pub fn thermal_bath_moments<T: Real>(params: &SystemParams<T>, bath: &DiscreteBath<T>, tau_b: T) -> Vec<(T, T)> {
    bath.omegas
        .iter()
        .map(|&w| {
            let c = T::one() / (w * tau_b * lit(0.5)).tanh();
            let half_h = params.hbar * lit(0.5);
            (half_h * c / (params.rho * w), half_h * c * params.rho * w)
        })
        .collect()
}

/// Evolves moments under the integrated flow: mean ← S mean, cov ← S cov Sᵀ.
pub fn covariance_evolve<T: Real>(
    params: &SystemParams<T>,
    bath: &DiscreteBath<T>,
    init: &PhaseCovariance<T>,
    t: T,
    tol: f64,
) -> Result<PhaseCovariance<T>> {
    Ok(covariance_evolve_series(params, bath, init, &[t], tol)?.remove(0))
}

pub fn covariance_evolve_series<T: Real>(
    params: &SystemParams<T>,
    bath: &DiscreteBath<T>,
    init: &PhaseCovariance<T>,
    times: &[T],
    tol: f64,
) -> Result<Vec<PhaseCovariance<T>>> {
    let flows = ode_flows(params, bath, times, tol)?;
    Ok(flows.into_iter().map(|(s, _, _)| init.transform(&s)).collect())
}

/// Gibbs covariance of the full quadratic Hamiltonian with its symplectic eigenvalues.
#[derive(Debug, Clone, Serialize)]
pub struct GibbsState<T: Real> {
    pub state: PhaseCovariance<T>,
    pub frequencies: Vec<T>,
}

/// Williamson construction: with `iH^{1/2}JH^{1/2} = U Λ U†`,
/// `Σ = (ħ/2) H^{-1/2} U diag(λ coth(λτ/2)) U† H^{-1/2}`.
pub fn gibbs_covariance<T: Real>(params: &SystemParams<T>, bath: &DiscreteBath<T>, temperature: T) -> Result<GibbsState<T>> {
    if !(temperature > T::zero()) {
        return Err(Error::InvalidParameter("temperature must be positive".into()));
    }
    let tau = params.tau(temperature);
    let h = build_dynamical_matrix(params, bath).hessian;
    let eig = h.clone().symmetric_eigen();
    let hmax = eig.eigenvalues.iter().fold(T::zero(), |a, &b| a.max(b.abs()));
    let hmin = eig.eigenvalues.iter().fold(T::max_value().unwrap(), |a, &b| a.min(b));
    if hmin <= hmax * lit(1e-13) {
        return Err(Error::Indefinite(to_f64(hmin)));
    }
    let v = &eig.eigenvectors;
    let root = DMatrix::from_diagonal(&eig.eigenvalues.map(|x| x.sqrt()));
    let inv_root = DMatrix::from_diagonal(&eig.eigenvalues.map(|x| T::one() / x.sqrt()));
    let hs = v * root * v.transpose();
    let his = v * inv_root * v.transpose();
    let n = bath.len();
    let k = &hs * symplectic_form::<T>(n) * &hs;
    let ik = k.map(|x| Complex::new(T::zero(), x));
    let e = ik.symmetric_eigen();
    let d = 2 * n + 2;
    let mut weights = DVector::<Complex<T>>::zeros(d);
    let mut frequencies = Vec::new();
    for (i, &l) in e.eigenvalues.iter().enumerate() {
        let x = l * tau * lit(0.5);
        weights[i] = Complex::new(l / x.tanh(), T::zero());
        if l > T::zero() {
            frequencies.push(l);
        }
    }
    frequencies.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let u = &e.eigenvectors;
    let middle = u * DMatrix::from_diagonal(&weights) * u.adjoint();
    let his_c = his.map(|x| Complex::new(x, T::zero()));
    let sigma = &his_c * middle * &his_c * Complex::new(params.hbar * lit(0.5), T::zero());
    let cov = sigma.map(|z| z.real());
    let cov = (&cov + cov.transpose()) * lit::<T>(0.5);
    Ok(GibbsState { state: PhaseCovariance { mean: DVector::zeros(d), cov }, frequencies })
}
