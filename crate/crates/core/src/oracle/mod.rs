//! Independent brute-force verifiers.
//!
//! None of these routines call the engines they check: the flow is integrated
//! with an explicit Runge–Kutta scheme, equilibrium moments come from the
//! Williamson normal form, and the propagator from a normal-mode eigenbasis.

pub mod covariance;
pub mod ode;
pub mod spectral;

pub use covariance::{covariance_evolve, covariance_evolve_series, gibbs_covariance, thermal_bath_moments, PhaseCovariance, SystemMoments};
pub use ode::{ode_kernels, ode_kernels_series};
pub use spectral::{spectral_propagator, spectral_propagator_resummed, SpectralBasis};
