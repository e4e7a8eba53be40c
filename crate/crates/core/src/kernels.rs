//! Time-domain response kernels α, β, η_j, δ_j, Q_jk at real or complex time.
//!
//! Phase-space vectors are ordered `(x, p, X_1..X_N, P_1..P_N)`. The kernels
//! multiply the noise-variable initial data `X_j^N(0) = X_j(0)` and
//! `P_j^N(0) = P_j(0) − f_j x(0)`, so the canonical `x(0)` coefficient of `x(t)`
//! is `α − (1/mρ) Σ_j f_j² δ_j` rather than `α` itself.

use nalgebra::{Complex, ComplexField, DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{complexify, eigenvalues, expm, hermitian_eigen, spd_sqrt, CMatrix};
use crate::model::{DiscreteBath, LaplaceKernel, SystemParams};
use crate::scalar::{cx, imag_unit, lit, re, to_f64, Real};

/// Phase-space index of `x`.
pub const IX: usize = 0;
/// Phase-space index of `p`.
pub const IP: usize = 1;

#[inline]
pub fn ix_bath(j: usize) -> usize {
    2 + j
}

#[inline]
pub fn ip_bath(n: usize, j: usize) -> usize {
    2 + n + j
}

/// Hamiltonian flow matrix `A = J H` together with the Hessian `H`.
#[derive(Debug, Clone)]
pub struct DynamicalMatrix<T: Real> {
    pub a: DMatrix<T>,
    pub hessian: DMatrix<T>,
    pub n_modes: usize,
}

/// Standard symplectic form on `(x, p, X, P)`.
pub fn symplectic_form<T: Real>(n_modes: usize) -> DMatrix<T> {
    let d = 2 * n_modes + 2;
    let mut j = DMatrix::zeros(d, d);
    j[(IX, IP)] = T::one();
    j[(IP, IX)] = -T::one();
    for k in 0..n_modes {
        j[(ix_bath(k), ip_bath(n_modes, k))] = T::one();
        j[(ip_bath(n_modes, k), ix_bath(k))] = -T::one();
    }
    j
}

pub fn build_dynamical_matrix<T: Real>(params: &SystemParams<T>, bath: &DiscreteBath<T>) -> DynamicalMatrix<T> {
    let n = bath.len();
    let d = 2 * n + 2;
    let (m, rho) = (params.m, params.rho);
    let mut h = DMatrix::zeros(d, d);
    let sum_f2: T = bath.couplings.iter().fold(T::zero(), |s, &f| s + f * f);
    h[(IX, IX)] = m * params.omega * params.omega + sum_f2 / rho;
    h[(IP, IP)] = T::one() / m;
    for j in 0..n {
        let (w, f) = (bath.omegas[j], bath.couplings[j]);
        h[(ix_bath(j), ix_bath(j))] = rho * w * w;
        h[(ip_bath(n, j), ip_bath(n, j))] = T::one() / rho;
        h[(IX, ip_bath(n, j))] = -f / rho;
        h[(ip_bath(n, j), IX)] = -f / rho;
    }
    let a = symplectic_form::<T>(n) * &h;
    DynamicalMatrix { a, hessian: h, n_modes: n }
}

/// Time-domain kernels at one (possibly complex) time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelSet<T: Real> {
    pub t: Complex<T>,
    pub alpha: Complex<T>,
    pub beta: Complex<T>,
    pub eta: Vec<Complex<T>>,
    pub delta: Vec<Complex<T>>,
    pub q: CMatrix<T>,
    pub qdot: CMatrix<T>,
}

/// Which matrix-exponential route a [`FlowEngine`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EngineKind {
    /// Hermitian eigen-representation of the symmetrized generator.
    Eigen,
    /// Scaling and squaring, used when the Hessian is not positive definite.
    ScalingSquaring,
}

#[derive(Debug, Clone)]
enum Representation<T: Real> {
    Eigen { left: CMatrix<T>, right: CMatrix<T>, lambda: DVector<T> },
    Direct,
}

/// Precomputed propagator of the linear phase-space flow `ż = A z`.
///
/// For a positive-definite Hessian, `exp(At) = H^{-1/2} U e^{-iΛt} U† H^{1/2}`
/// where `i H^{1/2} J H^{1/2} = U Λ U†` is Hermitian.
#[derive(Debug, Clone)]
pub struct FlowEngine<T: Real> {
    pub params: SystemParams<T>,
    pub bath: DiscreteBath<T>,
    pub dynamics: DynamicalMatrix<T>,
    rep: Representation<T>,
}

impl<T: Real> FlowEngine<T> {
    pub fn new(params: &SystemParams<T>, bath: &DiscreteBath<T>) -> Result<Self> {
        params.validate()?;
        bath.validate()?;
        let dynamics = build_dynamical_matrix(params, bath);
        let rep = match spd_sqrt(&dynamics.hessian) {
            Ok((sqrt, inv_sqrt)) => {
                let n = bath.len();
                let k = &sqrt * symplectic_form::<T>(n) * &sqrt;
                let ik = complexify(&k) * imag_unit::<T>();
                let (lambda, u) = hermitian_eigen(&ik);
                let left = complexify(&inv_sqrt) * &u;
                let right = u.adjoint() * complexify(&sqrt);
                Representation::Eigen { left, right, lambda }
            }
            Err(_) => Representation::Direct,
        };
        Ok(FlowEngine { params: *params, bath: bath.clone(), dynamics, rep })
    }

    pub fn kind(&self) -> EngineKind {
        match self.rep {
            Representation::Eigen { .. } => EngineKind::Eigen,
            Representation::Direct => EngineKind::ScalingSquaring,
        }
    }

    /// Normal-mode frequencies Ω_k (ascending), available on the eigen route.
    pub fn normal_modes(&self) -> Option<Vec<T>> {
        match &self.rep {
            Representation::Eigen { lambda, .. } => {
                let mut v: Vec<T> = lambda.iter().filter(|&&l| l > T::zero()).cloned().collect();
                v.sort_by(|a, b| a.partial_cmp(b).unwrap());
                Some(v)
            }
            Representation::Direct => None,
        }
    }

    /// Flow matrix `S(t) = exp(A t)`.
    pub fn flow(&self, t: Complex<T>) -> CMatrix<T> {
        match &self.rep {
            Representation::Eigen { left, right, lambda } => {
                let mut scaled = right.clone();
                for (k, &l) in lambda.iter().enumerate() {
                    let phase = (cx(T::zero(), -l) * t).exp();
                    for c in 0..scaled.ncols() {
                        scaled[(k, c)] *= phase;
                    }
                }
                left * scaled
            }
            Representation::Direct => expm(&(complexify(&self.dynamics.a) * t)),
        }
    }

    /// Flow matrix and the convolutions η_j, δ_j of β with the bath Green's functions.
    fn flow_with_convolutions(&self, t: Complex<T>) -> (CMatrix<T>, Vec<Complex<T>>, Vec<Complex<T>>) {
        let n = self.bath.len();
        let m = self.params.m;
        match &self.rep {
            Representation::Eigen { left, right, lambda } => {
                let s = self.flow(t);
                let mut eta = vec![Complex::new(T::zero(), T::zero()); n];
                let mut delta = eta.clone();
                for (k, &l) in lambda.iter().enumerate() {
                    let b = left[(IX, k)] * right[(k, IP)] * m;
                    let rate = cx(T::zero(), -l);
                    for j in 0..n {
                        let (si, ci) = sine_cosine_convolution(rate, self.bath.omegas[j], t);
                        eta[j] += b * si;
                        delta[j] += b * ci;
                    }
                }
                (s, eta, delta)
            }
            Representation::Direct => {
                let d = 2 * n + 2;
                let mut big = CMatrix::<T>::zeros(d + 2 * n, d + 2 * n);
                let a = complexify(&self.dynamics.a);
                big.view_mut((0, 0), (d, d)).copy_from(&a);
                for j in 0..n {
                    let w = self.bath.omegas[j];
                    let (y, v) = (d + 2 * j, d + 2 * j + 1);
                    big[(y, v)] = re(T::one());
                    big[(v, y)] = re(-w * w);
                    big[(v, IX)] = re(w * m);
                }
                let e = expm(&(big * t));
                let s = e.view((0, 0), (d, d)).into_owned();
                let eta = (0..n).map(|j| e[(d + 2 * j, IP)]).collect();
                let delta = (0..n).map(|j| e[(d + 2 * j + 1, IP)] / re(self.bath.omegas[j])).collect();
                (s, eta, delta)
            }
        }
    }

    pub fn kernels(&self, t: Complex<T>) -> KernelSet<T> {
        let (s, eta, delta) = self.flow_with_convolutions(t);
        extract_kernels(&self.params, &self.bath, t, &s, eta, delta)
    }
}

/// `(∫₀ᵗ sin(ω(t−u)) e^{λu} du, ∫₀ᵗ cos(ω(t−u)) e^{λu} du)`.
fn sine_cosine_convolution<T: Real>(lambda: Complex<T>, omega: T, t: Complex<T>) -> (Complex<T>, Complex<T>) {
    let iw = cx(T::zero(), omega);
    let plus = (iw * t).exp() * t * phi1((lambda - iw) * t);
    let minus = (-iw * t).exp() * t * phi1((lambda + iw) * t);
    let half: T = lit(0.5);
    ((plus - minus) * cx(T::zero(), -half), (plus + minus) * half)
}

/// `(e^z − 1)/z` with a series near the origin.
fn phi1<T: Real>(z: Complex<T>) -> Complex<T> {
    if z.modulus() < lit(0.1) {
        let mut term = re(T::one());
        let mut sum = term;
        for k in 2..20 {
            term = term * z / lit::<T>(k as f64);
            sum += term;
        }
        sum
    } else {
        (z.exp() - re(T::one())) / z
    }
}

/// Converts a canonical flow matrix and the β-convolutions into a [`KernelSet`].
pub fn extract_kernels<T: Real>(
    params: &SystemParams<T>,
    bath: &DiscreteBath<T>,
    t: Complex<T>,
    s: &CMatrix<T>,
    eta: Vec<Complex<T>>,
    delta: Vec<Complex<T>>,
) -> KernelSet<T> {
    let n = bath.len();
    let (m, rho) = (params.m, params.rho);
    let mut alpha = s[(IX, IX)];
    for j in 0..n {
        let f = bath.couplings[j];
        alpha += delta[j] * (f * f / (m * rho));
    }
    let beta = s[(IX, IP)] * m;
    let mut q = CMatrix::<T>::zeros(n, n);
    let mut qdot = CMatrix::<T>::zeros(n, n);
    for j in 0..n {
        let wj = bath.omegas[j];
        for k in 0..n {
            let wk = bath.omegas[k];
            let mut mjk = s[(ix_bath(j), ix_bath(k))];
            let mut sin_term = Complex::new(T::zero(), T::zero());
            if j == k {
                mjk -= (t * wj).cos();
                sin_term = (t * wj).sin() / wj;
            }
            q[(j, k)] = mjk / (wk * wk);
            qdot[(j, k)] = sin_term - s[(ix_bath(j), ip_bath(n, k))] * rho;
        }
    }
    KernelSet { t, alpha, beta, eta, delta, q, qdot }
}

/// Kernels from the exact matrix exponential of the phase-space flow.
pub fn kernels_exact<T: Real>(params: &SystemParams<T>, bath: &DiscreteBath<T>, t: Complex<T>) -> Result<KernelSet<T>> {
    Ok(FlowEngine::new(params, bath)?.kernels(t))
}

/// `D(s) = s² + ω² + s² γ̃(s)`.
pub fn characteristic_denominator<T: Real, K: LaplaceKernel<T>>(kernel: &K, s: Complex<T>) -> Result<Complex<T>> {
    let w = kernel.params().omega;
    let g = kernel.gamma_tilde(s)?;
    Ok(s * s + re(w * w) + s * s * g)
}

/// Coefficients, ascending in `u = s²`, of `D(s) Π_j (s² + ω_j²)`.
pub fn characteristic_polynomial<T: Real>(params: &SystemParams<T>, bath: &DiscreteBath<T>) -> Vec<T> {
    let mul_linear = |p: &[T], c: T| -> Vec<T> {
        let mut out = vec![T::zero(); p.len() + 1];
        for (i, &v) in p.iter().enumerate() {
            out[i] += v * c;
            out[i + 1] += v;
        }
        out
    };
    let n = bath.len();
    let mut total = vec![params.omega * params.omega, T::one()];
    for &w in &bath.omegas {
        total = mul_linear(&total, w * w);
    }
    for j in 0..n {
        let c = bath.couplings[j] * bath.couplings[j] / (params.m * params.rho);
        if c == T::zero() {
            continue;
        }
        let mut p = vec![T::zero(), c];
        for (k, &w) in bath.omegas.iter().enumerate() {
            if k != j {
                p = mul_linear(&p, w * w);
            }
        }
        for (i, v) in p.into_iter().enumerate() {
            total[i] += v;
        }
    }
    total
}

fn horner<T: Real>(coeffs: &[T], z: Complex<T>) -> (Complex<T>, Complex<T>) {
    let mut p = Complex::new(T::zero(), T::zero());
    let mut dp = p;
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + re(c);
    }
    (p, dp)
}

/// Roots of a real polynomial given ascending coefficients (companion matrix, Newton-polished).
pub fn polynomial_roots<T: Real>(coeffs: &[T]) -> Result<Vec<Complex<T>>> {
    let deg = coeffs.len() - 1;
    let lead = coeffs[deg];
    if lead == T::zero() {
        return Err(Error::RootFinding { residual: f64::INFINITY });
    }
    let mut comp = CMatrix::<T>::zeros(deg, deg);
    for i in 1..deg {
        comp[(i, i - 1)] = re(T::one());
    }
    for i in 0..deg {
        comp[(i, deg - 1)] = re(-coeffs[i] / lead);
    }
    let mut roots = eigenvalues(&comp);
    let scale = coeffs.iter().fold(T::zero(), |m, &c| m.max(c.abs()));
    let mut worst = T::zero();
    for r in roots.iter_mut() {
        for _ in 0..4 {
            let (p, dp) = horner(coeffs, *r);
            if dp.modulus() == T::zero() {
                break;
            }
            let step = p / dp;
            if !step.re.is_finite() || !step.im.is_finite() {
                break;
            }
            *r -= step;
        }
        let mag = r.modulus().max(T::one());
        let (p, _) = horner(coeffs, *r);
        worst = worst.max(p.modulus() / (scale * mag.powi(deg as i32)));
    }
    if !(worst <= lit(1e-8)) {
        return Err(Error::RootFinding { residual: to_f64(worst) });
    }
    Ok(roots)
}

/// Normal-mode frequencies Ω_k, the roots `s = ±iΩ_k` of `D(s) Π_j (s² + ω_j²)`, ascending.
pub fn normal_mode_frequencies<T: Real>(params: &SystemParams<T>, bath: &DiscreteBath<T>) -> Result<Vec<T>> {
    let poly = characteristic_polynomial(params, bath);
    let roots = polynomial_roots(&poly)?;
    let mut out: Vec<T> = roots.iter().map(|u| (-u.re).max(T::zero()).sqrt()).collect();
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(out)
}

/// Roots of the characteristic function as complex numbers `±iΩ_k`.
pub fn characteristic_roots<T: Real>(params: &SystemParams<T>, bath: &DiscreteBath<T>) -> Result<Vec<Complex<T>>> {
    let poly = characteristic_polynomial(params, bath);
    let mut out = Vec::new();
    for u in polynomial_roots(&poly)? {
        let s = u.sqrt();
        out.push(s);
        out.push(-s);
    }
    Ok(out)
}

/// Writes kernel sets as CSV with 17 significant digits.
pub fn write_kernel_csv<T: Real, W: std::io::Write>(out: &mut W, sets: &[KernelSet<T>]) -> std::io::Result<()> {
    let n = sets.first().map(|k| k.eta.len()).unwrap_or(0);
    let mut header = vec!["t".to_string(), "Re(alpha)".into(), "Im(alpha)".into(), "Re(beta)".into(), "Im(beta)".into()];
    header.extend((1..=n).map(|j| format!("eta_{j}")));
    header.extend((1..=n).map(|j| format!("delta_{j}")));
    for j in 1..=n {
        for k in 1..=n {
            header.push(format!("Q_{j}_{k}"));
        }
    }
    writeln!(out, "{}", header.join(","))?;
    for ks in sets {
        let mut row = vec![ks.t.re, ks.alpha.re, ks.alpha.im, ks.beta.re, ks.beta.im];
        row.extend(ks.eta.iter().map(|z| z.re));
        row.extend(ks.delta.iter().map(|z| z.re));
        for j in 0..n {
            for k in 0..n {
                row.push(ks.q[(j, k)].re);
            }
        }
        let cells: Vec<String> = row.into_iter().map(|v| crate::io::fmt17(to_f64(v))).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> SystemParams<f64> {
        SystemParams::default()
    }

    #[test]
    fn bare_oscillator_matrix() {
        let d = build_dynamical_matrix(&params(), &DiscreteBath::empty());
        assert_eq!(d.a, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));
    }

    #[test]
    fn coupled_matrix_entries() {
        let bath = DiscreteBath::new(vec![1.0], vec![0.5]).unwrap();
        let d = build_dynamical_matrix(&params(), &bath);
        assert!((d.a[(IP, IX)] + 1.25).abs() < 1e-15);
        assert!((d.a[(IP, ip_bath(1, 0))] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn uncoupled_kernels() {
        let bath = DiscreteBath::new(vec![1.3, 2.1], vec![0.0, 0.0]).unwrap();
        let p = SystemParams { omega: 0.8, ..params() };
        let k = kernels_exact(&p, &bath, re(1.7)).unwrap();
        assert!((k.alpha - re((0.8f64 * 1.7).cos())).norm() < 1e-13);
        assert!((k.beta - re((0.8f64 * 1.7).sin() / 0.8)).norm() < 1e-13);
        assert!(k.q.norm() < 1e-13 && k.qdot.norm() < 1e-13);
    }

    #[test]
    fn wick_rotated_beta() {
        let k = kernels_exact(&params(), &DiscreteBath::empty(), cx(0.0, -0.5)).unwrap();
        assert!((k.beta - cx(0.0, -(0.5f64).sinh())).norm() < 1e-14);
    }

    #[test]
    fn identity_at_zero() {
        let bath = DiscreteBath::new(vec![1.3, 2.1], vec![0.2, 0.4]).unwrap();
        let k = kernels_exact(&params(), &bath, re(0.0)).unwrap();
        assert!((k.alpha - re(1.0)).norm() < 1e-14 && k.beta.norm() < 1e-14);
        assert!(k.eta.iter().chain(&k.delta).all(|z| z.norm() < 1e-14));
        assert!(k.q.norm() < 1e-14 && k.qdot.norm() < 1e-14);
    }

    #[test]
    fn free_particle_uses_fallback() {
        let p = SystemParams { omega: 0.0, ..params() };
        let bath = DiscreteBath::new(vec![1.5], vec![0.3]).unwrap();
        let e = FlowEngine::new(&p, &bath).unwrap();
        assert_eq!(e.kind(), EngineKind::ScalingSquaring);
        let k = e.kernels(re(0.0));
        assert!((k.alpha - re(1.0)).norm() < 1e-14);
    }

    #[test]
    fn roots_uncoupled_and_coupled() {
        let modes = normal_mode_frequencies(&params(), &DiscreteBath::empty()).unwrap();
        assert!((modes[0] - 1.0).abs() < 1e-14);
        let bath = DiscreteBath::new(vec![2.0], vec![0.5]).unwrap();
        let roots = characteristic_roots(&params(), &bath).unwrap();
        assert_eq!(roots.len(), 4);
        assert!(roots.iter().all(|r| r.re.abs() < 1e-10));
        let engine = FlowEngine::new(&params(), &bath).unwrap();
        let ev = engine.normal_modes().unwrap();
        let poly = normal_mode_frequencies(&params(), &bath).unwrap();
        for (a, b) in ev.iter().zip(&poly) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
