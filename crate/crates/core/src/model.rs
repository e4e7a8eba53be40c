//! Physical parameters, bath descriptions, the memory kernel γ(τ) and its
//! Laplace image γ̃(s).
//!
//! γ̃ always denotes the Laplace image `∫₀^∞ γ(τ) e^{-sτ} dτ`. The Fourier image
//! is recovered on the imaginary axis as γ̃(ε − iω) with a small explicit
//! regulator ε > 0.

use nalgebra::{Complex, ComplexField};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_panels, Tolerance};
use crate::scalar::{cx, lit, re, to_f64, Real};

/// Oscillator and bath-mode constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams<T> {
    pub m: T,
    pub omega: T,
    pub rho: T,
    pub hbar: T,
    #[serde(rename = "kB")]
    pub kb: T,
}

impl<T: Real> Default for SystemParams<T> {
    fn default() -> Self {
        SystemParams { m: T::one(), omega: T::one(), rho: T::one(), hbar: T::one(), kb: T::one() }
    }
}

impl<T: Real> SystemParams<T> {
    pub fn new(m: T, omega: T, rho: T, hbar: T, kb: T) -> Result<Self> {
        let p = SystemParams { m, omega, rho, hbar, kb };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("m", self.m), ("rho", self.rho), ("hbar", self.hbar), ("kB", self.kb)];
        for (name, v) in positive {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be positive and finite")));
            }
        }
        if !(self.omega >= T::zero()) || !self.omega.is_finite() {
            return Err(Error::InvalidParameter("omega must be non-negative and finite".into()));
        }
        Ok(())
    }

    /// True for the free-particle limit ω = 0.
    pub fn is_free(&self) -> bool {
        self.omega == T::zero()
    }

    /// Imaginary-time span ħ/(k_B T).
    pub fn tau(&self, temperature: T) -> T {
        self.hbar / (self.kb * temperature)
    }
}

/// Bath of `N` discrete oscillators with frequencies ω_j and couplings f_j.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteBath<T> {
    pub omegas: Vec<T>,
    pub couplings: Vec<T>,
}

impl<T: Real> DiscreteBath<T> {
    pub fn new(omegas: Vec<T>, couplings: Vec<T>) -> Result<Self> {
        let b = DiscreteBath { omegas, couplings };
        b.validate()?;
        Ok(b)
    }

    pub fn empty() -> Self {
        DiscreteBath { omegas: Vec::new(), couplings: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.omegas.len() != self.couplings.len() {
            return Err(Error::InvalidParameter("omegas and couplings differ in length".into()));
        }
        if self.omegas.iter().any(|&w| !(w > T::zero()) || !w.is_finite()) {
            return Err(Error::InvalidParameter("bath frequencies must be positive and finite".into()));
        }
        if self.couplings.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("couplings must be finite".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    /// True when two frequencies coincide within 1e-9 relative.
    pub fn has_degenerate_frequencies(&self) -> bool {
        let tol: T = lit(1e-9);
        for i in 0..self.len() {
            for j in 0..i {
                let (a, b) = (self.omegas[i], self.omegas[j]);
                if (a - b).abs() <= tol * a.max(b) {
                    return true;
                }
            }
        }
        false
    }

    /// The same bath with every coupling multiplied by `s`.
    pub fn scaled(&self, s: T) -> Self {
        DiscreteBath { omegas: self.omegas.clone(), couplings: self.couplings.iter().map(|&f| f * s).collect() }
    }
}

/// Spectral description of the bath.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SpectralDensity<T> {
    Discrete { omegas: Vec<T>, couplings: Vec<T> },
    OhmicDrude { eta: T, omega_c: T },
    Tabulated { omega: Vec<T>, g: Vec<T> },
}

impl<T: Real> SpectralDensity<T> {
    pub fn discrete(bath: &DiscreteBath<T>) -> Self {
        SpectralDensity::Discrete { omegas: bath.omegas.clone(), couplings: bath.couplings.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SpectralDensity::Discrete { omegas, couplings } => {
                DiscreteBath::new(omegas.clone(), couplings.clone()).map(|_| ())
            }
            SpectralDensity::OhmicDrude { eta, omega_c } => {
                if !(*eta >= T::zero()) || !(*omega_c > T::zero()) {
                    return Err(Error::InvalidParameter("ohmic-drude needs eta >= 0 and omega_c > 0".into()));
                }
                Ok(())
            }
            SpectralDensity::Tabulated { omega, g } => {
                if omega.len() != g.len() || omega.len() < 2 {
                    return Err(Error::InvalidParameter("tabulated density needs matching grids of length >= 2".into()));
                }
                if omega.windows(2).any(|w| !(w[1] > w[0])) || !(omega[0] >= T::zero()) {
                    return Err(Error::InvalidParameter("tabulated grid must be non-negative and strictly increasing".into()));
                }
                if g.iter().any(|&v| !(v >= T::zero()) || !v.is_finite()) {
                    return Err(Error::InvalidParameter("tabulated g must be non-negative and finite".into()));
                }
                Ok(())
            }
        }
    }

    pub fn as_discrete(&self) -> Option<DiscreteBath<T>> {
        match self {
            SpectralDensity::Discrete { omegas, couplings } => {
                Some(DiscreteBath { omegas: omegas.clone(), couplings: couplings.clone() })
            }
            _ => None,
        }
    }

    /// Continuum density g(ω); `None` for a discrete bath.
    pub fn density(&self, params: &SystemParams<T>, omega: T) -> Option<T> {
        match self {
            SpectralDensity::Discrete { .. } => None,
            SpectralDensity::OhmicDrude { eta, omega_c } => {
                let amplitude = lit::<T>(2.0) / T::pi() * *eta / params.m;
                Some(amplitude * *omega_c * omega / (*omega_c * *omega_c + omega * omega))
            }
            SpectralDensity::Tabulated { omega: grid, g } => {
                if omega < grid[0] || omega > grid[grid.len() - 1] {
                    return Some(T::zero());
                }
                let k = grid.partition_point(|&w| w <= omega).clamp(1, grid.len() - 1);
                let (w0, w1) = (grid[k - 1], grid[k]);
                let s = (omega - w0) / (w1 - w0);
                Some(g[k - 1] + (g[k] - g[k - 1]) * s)
            }
        }
    }

    /// Parses and validates the JSON bath description.
    pub fn from_json(text: &str) -> Result<Self>
    where
        T: for<'de> Deserialize<'de>,
    {
        let spec: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Retarded bath Green's function sin(ω_j Δt)/ω_j θ(Δt), with θ(0) = 0.
pub fn bath_greens_function<T: Real>(omega_j: T, dt: T) -> T {
    if dt > T::zero() {
        (omega_j * dt).sin() / omega_j
    } else {
        T::zero()
    }
}

/// Memory kernel γ(τ).
pub fn memory_gamma<T: Real>(spectral: &SpectralDensity<T>, params: &SystemParams<T>, tau: T) -> Result<T> {
    if !(tau > T::zero()) {
        return Err(Error::InvalidParameter("tau must be positive".into()));
    }
    match spectral {
        SpectralDensity::Discrete { omegas, couplings } => {
            let mut sum = T::zero();
            for (&w, &f) in omegas.iter().zip(couplings) {
                sum += f * f * (w * tau).sin() / w;
            }
            Ok(sum / (params.m * params.rho))
        }
        SpectralDensity::OhmicDrude { eta, omega_c } => {
            let cutoff = (*omega_c * lit(50.0)).max(lit::<T>(40.0) / tau);
            let body = sine_transform(spectral, params, tau, T::zero(), cutoff)?;
            Ok(body + drude_tail(*eta / params.m * lit::<T>(2.0) / T::pi() * *omega_c, *omega_c, cutoff, tau))
        }
        SpectralDensity::Tabulated { omega, .. } => sine_transform(spectral, params, tau, omega[0], omega[omega.len() - 1]),
    }
}

/// Closed-form Ohmic–Drude kernel (η ω_c / m) e^{-ω_c τ}.
pub fn drude_gamma<T: Real>(eta: T, omega_c: T, params: &SystemParams<T>, tau: T) -> T {
    eta * omega_c / params.m * (-omega_c * tau).exp()
}

fn sine_transform<T: Real>(spectral: &SpectralDensity<T>, params: &SystemParams<T>, tau: T, lo: T, hi: T) -> Result<T> {
    let period = T::pi() / tau;
    let nodes = match spectral {
        SpectralDensity::Tabulated { omega, .. } => omega.clone(),
        _ => vec![lo, hi],
    };
    let mut refined = vec![nodes[0]];
    for w in nodes.windows(2) {
        let pieces = ((w[1] - w[0]) / period).ceil().max(T::one());
        let n = to_f64(pieces) as usize;
        for k in 1..=n {
            refined.push(w[0] + (w[1] - w[0]) * lit::<T>(k as f64) / pieces);
        }
    }
    let tol = Tolerance { abs: 1e-14, rel: 1e-13, max_intervals: 200_000 };
    let mut f = |w: T| re(spectral.density(params, w).unwrap_or(T::zero()) * (w * tau).sin());
    integrate_panels(&mut f, &refined, tol).map(|(v, _)| v.re)
}

/// Asymptotic integration-by-parts series for ∫_Ω^∞ A ω/(ω_c²+ω²) sin(ωτ) dω.
fn drude_tail<T: Real>(amplitude: T, omega_c: T, cutoff: T, tau: T) -> T {
    // g^{(k)}(Ω) = A (-1)^k k! Re[(Ω + i ω_c)^{-k-1}]
    let z = cx(cutoff, omega_c);
    let (s, c) = ((cutoff * tau).sin(), (cutoff * tau).cos());
    let mut sum = T::zero();
    let mut factorial = T::one();
    for k in 0..12 {
        if k > 0 {
            factorial *= lit::<T>(k as f64);
        }
        let sign = if k % 2 == 0 { T::one() } else { -T::one() };
        let deriv = amplitude * sign * factorial * z.powi(-(k + 1)).re;
        let trig = match k % 4 {
            0 => c,
            1 => -s,
            2 => -c,
            _ => s,
        };
        sum += deriv * trig / tau.powi(k + 1);
    }
    sum
}

/// Laplace image γ̃(s).
pub fn gamma_tilde<T: Real>(
    spectral: &SpectralDensity<T>,
    params: &SystemParams<T>,
    s: Complex<T>,
) -> Result<Complex<T>> {
    match spectral {
        SpectralDensity::Discrete { omegas, couplings } => {
            let mut sum = Complex::new(T::zero(), T::zero());
            for (&w, &f) in omegas.iter().zip(couplings) {
                let d1 = (s - cx(T::zero(), w)).modulus();
                let d2 = (s + cx(T::zero(), w)).modulus();
                let distance = d1.min(d2);
                if distance <= lit(1e-12) {
                    return Err(Error::PoleProximity {
                        s: format!("{s}"),
                        omega: to_f64(w),
                        distance: to_f64(distance),
                    });
                }
                if f != T::zero() {
                    sum += re(f * f) / (s * s + re(w * w));
                }
            }
            Ok(sum / re(params.m * params.rho))
        }
        SpectralDensity::OhmicDrude { eta, omega_c } => {
            Ok(re(*eta / params.m) / (re(T::one()) + s / re(*omega_c)))
        }
        SpectralDensity::Tabulated { omega, .. } => {
            let tol = Tolerance { abs: 1e-15, rel: 1e-13, max_intervals: 50_000 };
            let mut f = |w: T| re(spectral.density(params, w).unwrap_or(T::zero()) * w) / (s * s + re(w * w));
            integrate_panels(&mut f, omega, tol).map(|(v, _)| v)
        }
    }
}

/// A γ̃ evaluator together with the oscillator constants it belongs to.
pub trait LaplaceKernel<T: Real>: Sync {
    fn params(&self) -> &SystemParams<T>;
    fn gamma_tilde(&self, s: Complex<T>) -> Result<Complex<T>>;
    /// Upper bound on |Im s| over the singularities of the kernel images.
    fn oscillation_bound(&self) -> Result<T>;
}

/// [`LaplaceKernel`] backed by a [`SpectralDensity`].
#[derive(Debug, Clone)]
pub struct BathKernel<T> {
    pub spectral: SpectralDensity<T>,
    pub params: SystemParams<T>,
}

impl<T: Real> BathKernel<T> {
    pub fn new(spectral: SpectralDensity<T>, params: SystemParams<T>) -> Self {
        BathKernel { spectral, params }
    }
}

impl<T: Real> LaplaceKernel<T> for BathKernel<T> {
    fn params(&self) -> &SystemParams<T> {
        &self.params
    }

    fn gamma_tilde(&self, s: Complex<T>) -> Result<Complex<T>> {
        gamma_tilde(&self.spectral, &self.params, s)
    }

    fn oscillation_bound(&self) -> Result<T> {
        let p = &self.params;
        match &self.spectral {
            SpectralDensity::Discrete { omegas, couplings } => {
                let bath = DiscreteBath::new(omegas.clone(), couplings.clone())?;
                let modes = crate::kernels::normal_mode_frequencies(p, &bath)?;
                Ok(modes.iter().chain(omegas.iter()).fold(p.omega, |m, &w| m.max(w)))
            }
            SpectralDensity::OhmicDrude { eta, omega_c } => {
                // (s + ω_c)(s² + ω²) + s² η ω_c / m
                let c = *omega_c;
                let coeffs = [c * p.omega * p.omega, p.omega * p.omega, c + *eta * c / p.m, T::one()];
                let roots = crate::kernels::polynomial_roots(&coeffs)?;
                Ok(roots.iter().fold(p.omega, |m, r| m.max(r.im.abs())))
            }
            SpectralDensity::Tabulated { omega, .. } => {
                Ok(lit::<T>(2.0) * omega[omega.len() - 1].max(p.omega))
            }
        }
    }
}

/// Spectral density recovered from γ̃ as g(ω) = (2/π) Im γ̃(ε − iω).
pub struct SpectralFromGamma<'a, K> {
    pub kernel: &'a K,
    pub epsilon: f64,
}

impl<'a, K> SpectralFromGamma<'a, K> {
    pub fn eval<T: Real>(&self, omega: T) -> Result<T>
    where
        K: LaplaceKernel<T>,
    {
        let s = cx(lit(self.epsilon), -omega);
        let v = self.kernel.gamma_tilde(s)?;
        Ok(lit::<T>(2.0) / T::pi() * v.im)
    }
}

pub fn spectral_from_gamma<K>(kernel: &K, epsilon: f64) -> SpectralFromGamma<'_, K> {
    SpectralFromGamma { kernel, epsilon }
}

/// Default regulator: 1e-6 times the largest frequency scale of the problem.
pub fn default_regulator<T: Real>(spectral: &SpectralDensity<T>, params: &SystemParams<T>) -> f64 {
    let scale = match spectral {
        SpectralDensity::Discrete { omegas, .. } => omegas.iter().fold(params.omega, |m, &w| m.max(w)),
        SpectralDensity::OhmicDrude { omega_c, .. } => params.omega.max(*omega_c),
        SpectralDensity::Tabulated { omega, .. } => params.omega.max(omega[omega.len() - 1]),
    };
    1e-6 * to_f64(scale).max(1e-300)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Linear,
    Log,
}

/// Discretizes a continuum density into `n_modes` oscillators at bin midpoints,
/// with f_j² = m ρ ω_j g(ω_j) Δω_j.
pub fn discretize_spectral<T: Real>(
    spectral: &SpectralDensity<T>,
    params: &SystemParams<T>,
    n_modes: usize,
    scheme: Scheme,
    omega_max: T,
    omega_min: Option<T>,
) -> Result<DiscreteBath<T>> {
    if n_modes == 0 || !(omega_max > T::zero()) {
        return Err(Error::InvalidParameter("need n_modes >= 1 and omega_max > 0".into()));
    }
    if matches!(spectral, SpectralDensity::Discrete { .. }) {
        return Err(Error::InvalidParameter("bath is already discrete".into()));
    }
    let edges: Vec<T> = match scheme {
        Scheme::Linear => (0..=n_modes).map(|k| omega_max * lit(k as f64 / n_modes as f64)).collect(),
        Scheme::Log => {
            let lo = omega_min.ok_or_else(|| Error::Config("log scheme requires omega_min".into()))?;
            if !(lo > T::zero() && lo < omega_max) {
                return Err(Error::Config("omega_min must lie in (0, omega_max)".into()));
            }
            let ratio = omega_max / lo;
            (0..=n_modes).map(|k| lo * ratio.powf(lit(k as f64 / n_modes as f64))).collect()
        }
    };
    let mut omegas = Vec::with_capacity(n_modes);
    let mut couplings = Vec::with_capacity(n_modes);
    for w in edges.windows(2) {
        let mid = (w[0] + w[1]) * lit(0.5);
        let g = spectral.density(params, mid).unwrap_or(T::zero());
        omegas.push(mid);
        couplings.push((params.m * params.rho * mid * g * (w[1] - w[0])).sqrt());
    }
    DiscreteBath::new(omegas, couplings)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> SystemParams<f64> {
        SystemParams::default()
    }

    #[test]
    fn greens_function_convention() {
        assert!((bath_greens_function(1.0, std::f64::consts::FRAC_PI_2) - 1.0).abs() < 1e-15);
        assert_eq!(bath_greens_function(2.0, -1.0), 0.0);
        assert_eq!(bath_greens_function(2.0, 0.0), 0.0);
        assert!((bath_greens_function(3.0, 0.7) - 0.287_736_455_549_624_57).abs() < 1e-12);
    }

    #[test]
    fn discrete_memory_kernel() {
        let b = SpectralDensity::Discrete { omegas: vec![2.0], couplings: vec![0.3] };
        let v = memory_gamma(&b, &unit(), 1.0).unwrap();
        assert!((v - 0.09 * 2f64.sin() / 2.0).abs() < 1e-15);
        assert!((v - 0.040_918).abs() < 1e-6);
        let zero = SpectralDensity::Discrete { omegas: vec![2.0], couplings: vec![0.0] };
        assert_eq!(memory_gamma(&zero, &unit(), 0.4).unwrap(), 0.0);
    }

    #[test]
    fn drude_quadrature_matches_closed_form() {
        let d = SpectralDensity::OhmicDrude { eta: 0.2, omega_c: 10.0 };
        for &tau in &[0.05, 0.3, 1.0, 2.5] {
            let q = memory_gamma(&d, &unit(), tau).unwrap();
            let c = drude_gamma(0.2, 10.0, &unit(), tau);
            assert!((q - c).abs() <= 1e-8, "tau {tau}: {q} vs {c}");
        }
    }

    #[test]
    fn laplace_images() {
        let b = SpectralDensity::Discrete { omegas: vec![1.0], couplings: vec![1.0] };
        let v = gamma_tilde(&b, &unit(), re(1.0)).unwrap();
        assert!((v - re(0.5)).norm() < 1e-15);
        assert!(gamma_tilde(&b, &unit(), re(1e6)).unwrap().norm() < 1e-11);
        let pole = gamma_tilde(&b, &unit(), cx(0.0, 1.0 + 1e-13));
        assert!(matches!(pole, Err(Error::PoleProximity { .. })));
        let zero = SpectralDensity::Discrete { omegas: vec![1.0, 3.0], couplings: vec![0.0, 0.0] };
        assert_eq!(gamma_tilde(&zero, &unit(), cx(0.3, 0.2)).unwrap(), cx(0.0, 0.0));
    }

    #[test]
    fn tabulated_interpolation() {
        let t = SpectralDensity::Tabulated { omega: vec![0.0, 1.0, 2.0], g: vec![0.0, 1.0, 0.0] };
        assert!((t.density(&unit(), 0.5).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(t.density(&unit(), 3.0).unwrap(), 0.0);
    }

    #[test]
    fn log_scheme_requires_lower_edge() {
        let d = SpectralDensity::OhmicDrude { eta: 0.1, omega_c: 10.0 };
        let r = discretize_spectral(&d, &unit(), 8, Scheme::Log, 100.0, None);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn degenerate_flag() {
        let b = DiscreteBath::new(vec![1.0, 1.0 + 1e-12], vec![0.1, 0.1]).unwrap();
        assert!(b.has_degenerate_frequencies());
        let b = DiscreteBath::new(vec![1.0, 1.1], vec![0.1, 0.1]).unwrap();
        assert!(!b.has_degenerate_frequencies());
    }
}
