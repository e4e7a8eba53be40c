//! Exact quantum dynamics of a harmonic oscillator velocity-coupled to a bath
//! of harmonic oscillators.
//!
//! The numerical core is generic over [`Real`]; the aliases below fix `f64`,
//! which is the precision every tolerance in the test-suite refers to.

pub mod equilibrium;
pub mod error;
pub mod io;
pub mod kernels;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod propagator;
pub mod quadrature;
pub mod reduced;
pub mod scalar;
pub mod talbot;

pub use error::{Error, ErrorKind, Result};
pub use scalar::Real;

pub type C64 = nalgebra::Complex<f64>;
pub type SystemParams = model::SystemParams<f64>;
pub type DiscreteBath = model::DiscreteBath<f64>;
pub type SpectralDensity = model::SpectralDensity<f64>;
pub type KernelSet = kernels::KernelSet<f64>;
pub type FlowEngine = kernels::FlowEngine<f64>;
pub type PropagatorForm = propagator::PropagatorForm<f64>;
pub type GaussianState = reduced::GaussianState<f64>;
pub type ReducedKernelForm = reduced::ReducedKernelForm<f64>;
pub type Grid = reduced::Grid<f64>;
