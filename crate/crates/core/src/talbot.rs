//! Fixed-contour Talbot inversion of the α and β Laplace images.
//!
//! The contour is `s(θ) = μ(θ cot θ + iνθ)`, θ ∈ (−π, π), sampled at midpoints.
//! `μ t` is held fixed so that roundoff does not grow with the node count, and
//! ν is raised until the contour crosses the imaginary axis above every
//! singularity of the images.

use nalgebra::ComplexField;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::LaplaceKernel;
use crate::scalar::{cx, lit, re, to_f64, Real};

#[derive(Debug, Clone, Copy)]
pub struct TalbotOptions {
    /// Starting node count; doubled until two successive estimates agree.
    pub n_nodes: usize,
    pub max_nodes: usize,
    pub tol: f64,
    /// Differences below this level are accepted as the roundoff plateau.
    pub plateau: f64,
    /// Value of μ t.
    pub contour_scale: f64,
    /// Crossing height of the imaginary axis relative to the oscillation bound.
    pub clearance: f64,
}

impl Default for TalbotOptions {
    fn default() -> Self {
        TalbotOptions { n_nodes: 32, max_nodes: 2048, tol: 1e-9, plateau: 1e-11, contour_scale: 8.0, clearance: 1.5 }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TalbotKernels<T> {
    pub t: T,
    pub alpha: T,
    pub beta: T,
    pub error_estimate: T,
    pub nodes: usize,
}

fn invert<T: Real, K: LaplaceKernel<T>>(kernel: &K, t: T, n: usize, mu: T, nu: T) -> Result<(T, T)> {
    let w2 = kernel.params().omega * kernel.params().omega;
    let (mut alpha, mut beta) = (T::zero(), T::zero());
    let h = T::two_pi() / lit::<T>(n as f64);
    for k in n / 2..n {
        let theta = -T::pi() + h * (lit::<T>(k as f64) + lit(0.5));
        let (sin, cos) = (theta.sin(), theta.cos());
        let cot = cos / sin;
        let s = cx(mu * theta * cot, mu * nu * theta);
        let ds = cx(mu * (cot - theta / (sin * sin)), mu * nu);
        let g = kernel.gamma_tilde(s)?;
        let denom = s * s + re(w2) + s * s * g;
        let weight = (s * t).exp() * ds;
        alpha += (weight * (s + s * g) / denom).im;
        beta += (weight / denom).im;
    }
    let scale = lit::<T>(2.0) / lit::<T>(n as f64);
    Ok((alpha * scale, beta * scale))
}

/// α(t) and β(t) from their Laplace images, with a node-doubling error estimate.
pub fn kernels_talbot<T: Real, K: LaplaceKernel<T>>(kernel: &K, t: T, opts: TalbotOptions) -> Result<TalbotKernels<T>> {
    if !(t > T::zero()) {
        return Err(Error::InvalidParameter("Talbot inversion needs t > 0".into()));
    }
    let bound = kernel.oscillation_bound()?;
    let mu = lit::<T>(opts.contour_scale) / t;
    let nu = (lit::<T>(2.0 * opts.clearance) * bound / (T::pi() * mu)).max(T::one());
    let mut n = opts.n_nodes.max(4);
    let mut coarse = invert(kernel, t, n, mu, nu)?;
    loop {
        let fine = invert(kernel, t, 2 * n, mu, nu)?;
        let diff = (fine.0 - coarse.0).abs().max((fine.1 - coarse.1).abs());
        if diff <= lit(opts.tol.max(opts.plateau)) {
            return Ok(TalbotKernels { t, alpha: fine.0, beta: fine.1, error_estimate: diff, nodes: 2 * n });
        }
        if 2 * n >= opts.max_nodes {
            return Err(Error::Talbot {
                coarse: format!("({}, {})", to_f64(coarse.0), to_f64(coarse.1)),
                fine: format!("({}, {})", to_f64(fine.0), to_f64(fine.1)),
                difference: to_f64(diff),
            });
        }
        coarse = fine;
        n *= 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BathKernel, SpectralDensity, SystemParams};

    #[test]
    fn bare_oscillator_image() {
        let k = BathKernel::new(SpectralDensity::Discrete { omegas: vec![], couplings: vec![] }, SystemParams::default());
        let r = kernels_talbot(&k, 2.0, TalbotOptions::default()).unwrap();
        assert!((r.beta - 2f64.sin()).abs() <= 1e-8);
        assert!((r.alpha - 2f64.cos()).abs() <= 1e-8);
    }
}
