//! Propagator from the normal-mode eigenbasis of the full Hamiltonian.
//!
//! Each normal mode has an annihilation operator `b_k = A_k·q + C_k·p` built
//! from the left eigenvectors of the flow generator. The ground state is the
//! Gaussian annihilated by every `b_k`; excited states are `h_n(q) ψ₀(q)` with
//! polynomials `h_n` from the ladder recurrence. Two evaluations are offered:
//! the truncated eigen-sum, and its Bargmann resummation in closed form, which
//! is what makes real times reachable (the eigen-sum itself converges only for
//! `Im t < 0`).

use nalgebra::{Complex, ComplexField};

use crate::error::{Error, Result};
use crate::kernels::{build_dynamical_matrix, ip_bath, ix_bath, symplectic_form, IP, IX};
use crate::linalg::{complexify, hermitian_eigen, solve_refined, spd_sqrt, symmetrize, unwrap_phase, CMatrix, CVector};
use crate::model::{DiscreteBath, SystemParams};
use crate::scalar::{cx, imag_unit, lit, re, to_f64, Real};

/// Largest number of bath modes accepted by the truncated sum.
pub const MAX_SPECTRAL_MODES: usize = 2;
/// Largest per-mode level count accepted by the truncated sum.
pub const MAX_LEVELS: usize = 80;

/// Ladder description of the eigenbasis in lab coordinates `q = (x, X)`.
#[derive(Debug, Clone)]
pub struct SpectralBasis<T: Real> {
    pub hbar: T,
    /// Normal-mode frequencies, one per degree of freedom.
    pub frequencies: Vec<T>,
    /// Ground state `ψ₀ ∝ exp(−½ qᵀ Γ q)`.
    pub gamma: CMatrix<T>,
    pub log_norm: T,
    /// `c(q) = coupling · q` in the generating function `exp(sᵀc(q) − ½ sᵀ 𝒜 s)`.
    pub coupling: CMatrix<T>,
    pub curvature: CMatrix<T>,
}

impl<T: Real> SpectralBasis<T> {
    pub fn new(params: &SystemParams<T>, bath: &DiscreteBath<T>) -> Result<Self> {
        params.validate()?;
        bath.validate()?;
        let nb = bath.len();
        let n = nb + 1;
        let hbar = params.hbar;
        let h = build_dynamical_matrix(params, bath).hessian;
        let (root, _) = spd_sqrt(&h)?;
        let j = symplectic_form::<T>(nb);
        let k = complexify(&(&root * &j * &root)) * imag_unit::<T>();
        let (lambda, u) = hermitian_eigen(&k);
        let root_c = complexify(&root);
        let q = |k: usize| if k == 0 { IX } else { ix_bath(k - 1) };
        let p = |k: usize| if k == 0 { IP } else { ip_bath(nb, k - 1) };
        let mut a = CMatrix::<T>::zeros(n, n);
        let mut c = CMatrix::<T>::zeros(n, n);
        let mut frequencies = Vec::with_capacity(n);
        let mut row = 0;
        for col in 0..2 * n {
            let l = lambda[col];
            if l <= T::zero() {
                continue;
            }
            if row == n {
                return Err(Error::Singular("unexpected number of positive normal modes".into()));
            }
            // ℓᵀ = c u† H^{1/2}, with |c|² = 1/(ħλ) for a unit-normalized u
            let ell = u.column(col).adjoint() * &root_c;
            let scale = re(T::one() / (hbar * l).sqrt());
            for i in 0..n {
                a[(row, i)] = ell[q(i)] * scale;
                c[(row, i)] = ell[p(i)] * scale;
            }
            frequencies.push(l);
            row += 1;
        }
        if row != n {
            return Err(Error::Singular("missing normal modes".into()));
        }
        let gamma = symmetrize(&(solve_refined(&c, &a)? * (imag_unit::<T>() / hbar)));
        let real_gamma = gamma.map(|z| z.re);
        let det = real_gamma.determinant();
        if !(det > T::zero()) {
            return Err(Error::Indefinite(to_f64(det)));
        }
        let log_norm = (det.ln() - lit::<T>(n as f64) * T::pi().ln()) * lit(0.25);
        let cbar = c.map(|z| z.conj());
        let abar = a.map(|z| z.conj());
        let ihbar = imag_unit::<T>() * hbar;
        let coupling = &abar + &cbar * &gamma * ihbar;
        let cross = &abar * cbar.transpose();
        let curvature = symmetrize(&(-(&cbar * &gamma * cbar.transpose()) * re(hbar * hbar) + &cross * ihbar));
        Ok(SpectralBasis { hbar, frequencies, gamma, log_norm, coupling, curvature })
    }

    pub fn dim(&self) -> usize {
        self.frequencies.len()
    }

    pub fn zero_point_energy(&self) -> T {
        self.frequencies.iter().fold(T::zero(), |s, &w| s + w) * self.hbar * lit(0.5)
    }

    /// `ln ψ₀(q)`.
    pub fn log_ground(&self, q: &CVector<T>) -> Complex<T> {
        re(self.log_norm) - (q.transpose() * &self.gamma * q)[(0, 0)] * lit::<T>(0.5)
    }

    /// Polynomials `h_n(q)` on the box `0 ≤ n_k < levels`, flat index `Σ n_k levels^k`.
    pub fn polynomials(&self, q: &CVector<T>, levels: usize) -> Vec<Complex<T>> {
        let n = self.dim();
        let total = levels.pow(n as u32);
        let c = &self.coupling * q;
        let mut h = vec![Complex::new(T::zero(), T::zero()); total];
        h[0] = re(T::one());
        let stride: Vec<usize> = (0..n).map(|k| levels.pow(k as u32)).collect();
        let mut idx = vec![0usize; n];
        for flat in 1..total {
            let mut r = flat;
            for k in 0..n {
                idx[k] = r % levels;
                r /= levels;
            }
            let k = (0..n).find(|&k| idx[k] > 0).unwrap();
            let prev = flat - stride[k];
            let nk = idx[k] - 1;
            let mut v = c[k] * h[prev];
            for j in 0..n {
                let nj = if j == k { nk } else { idx[j] };
                if nj > 0 {
                    v -= self.curvature[(k, j)] * h[prev - stride[j]] * lit::<T>((nj as f64).sqrt());
                }
            }
            h[flat] = v / lit::<T>(((nk + 1) as f64).sqrt());
        }
        h
    }
}

fn lab_vector<T: Real>(x: T, big_x: &[T]) -> CVector<T> {
    CVector::<T>::from_fn(big_x.len() + 1, |i, _| if i == 0 { re(x) } else { re(big_x[i - 1]) })
}

fn check_points<T: Real>(bath: &DiscreteBath<T>, big_x: &[T], big_xp: &[T]) -> Result<()> {
    if big_x.len() != bath.len() || big_xp.len() != bath.len() {
        return Err(Error::InvalidParameter(format!("expected {} bath coordinates", bath.len())));
    }
    Ok(())
}

/// Truncated eigen-sum `Σ_n e^{−iE_n t/ħ} ψ_n(q) ψ_n*(q′)` with `0 ≤ n_k < levels`.
///
/// Fails with a truncation error when the outermost shell (some `n_k = levels − 1`)
/// contributes more than `1e-6` relative to the result.
#[allow(clippy::too_many_arguments)]
pub fn spectral_propagator<T: Real>(
    params: &SystemParams<T>,
    bath: &DiscreteBath<T>,
    levels: usize,
    x: T,
    big_x: &[T],
    xp: T,
    big_xp: &[T],
    t: Complex<T>,
) -> Result<Complex<T>> {
    if bath.len() > MAX_SPECTRAL_MODES {
        return Err(Error::InvalidParameter(format!("spectral sum supports at most {MAX_SPECTRAL_MODES} bath modes")));
    }
    if levels == 0 || levels > MAX_LEVELS {
        return Err(Error::InvalidParameter(format!("levels must lie in 1..={MAX_LEVELS}")));
    }
    check_points(bath, big_x, big_xp)?;
    let basis = SpectralBasis::new(params, bath)?;
    let (value, shell) = truncated_sum(&basis, levels, &lab_vector(x, big_x), &lab_vector(xp, big_xp), t);
    let estimate = to_f64(shell / value.modulus().max(lit(1e-300)));
    if !(estimate <= 1e-6) {
        return Err(Error::Truncation { estimate, limit: 1e-6 });
    }
    Ok(value)
}

/// Returns the truncated sum and the summed moduli of its outermost shell.
pub fn truncated_sum<T: Real>(
    basis: &SpectralBasis<T>,
    levels: usize,
    q: &CVector<T>,
    qp: &CVector<T>,
    t: Complex<T>,
) -> (Complex<T>, T) {
    let n = basis.dim();
    let hq = basis.polynomials(q, levels);
    let hqp = basis.polynomials(qp, levels);
    let phases: Vec<Complex<T>> = basis.frequencies.iter().map(|&w| (-imag_unit::<T>() * t * w).exp()).collect();
    let mut sum = Complex::new(T::zero(), T::zero());
    let mut shell = T::zero();
    let mut idx = vec![0usize; n];
    for flat in 0..hq.len() {
        let mut r = flat;
        let mut w = re(T::one());
        let mut outer = false;
        for k in 0..n {
            idx[k] = r % levels;
            r /= levels;
            w *= phases[k].powu(idx[k] as u32);
            outer |= idx[k] == levels - 1;
        }
        let term = w * hq[flat] * hqp[flat].conj();
        sum += term;
        if outer {
            shell += term.modulus();
        }
    }
    let prefactor = (basis.log_ground(q) + basis.log_ground(qp).conj()
        - imag_unit::<T>() * t * (basis.zero_point_energy() / basis.hbar))
        .exp();
    (sum * prefactor, shell * prefactor.modulus())
}

/// Closed-form resummation of the eigen-sum, valid for `Im t ≤ 0` away from caustics.
///
/// With `w_k = e^{−iλ_k t}` and `W = diag(w)`, the Bargmann integral of the
/// generating functions gives `[(−1)ⁿ det M]^{−1/2} exp(½ gᵀ M⁻¹ g)` with
/// `M = [[W𝒜W, I], [I, 𝒜̄]]` and `g = (W c(q), c̄(q′))`. The square root is
/// continued along `w → r w`, `r ∈ [0, 1]`, where the sum converges.
#[allow(clippy::too_many_arguments)]
pub fn spectral_propagator_resummed<T: Real>(
    params: &SystemParams<T>,
    bath: &DiscreteBath<T>,
    x: T,
    big_x: &[T],
    xp: T,
    big_xp: &[T],
    t: Complex<T>,
) -> Result<Complex<T>> {
    check_points(bath, big_x, big_xp)?;
    let basis = SpectralBasis::new(params, bath)?;
    let kernel = ResummedKernel::new(&basis, t)?;
    Ok(kernel.evaluate(&basis, &lab_vector(x, big_x), &lab_vector(xp, big_xp)))
}

/// Point-independent part of the resummed eigen-sum at one time.
#[derive(Debug, Clone)]
pub struct ResummedKernel<T: Real> {
    pub t: Complex<T>,
    weights: Vec<Complex<T>>,
    minv: CMatrix<T>,
    log_prefactor: Complex<T>,
}

impl<T: Real> ResummedKernel<T> {
    pub fn new(basis: &SpectralBasis<T>, t: Complex<T>) -> Result<Self> {
        if t.im > T::zero() {
            return Err(Error::InvalidParameter("resummation requires Im t ≤ 0".into()));
        }
        let n = basis.dim();
        let weights: Vec<Complex<T>> = basis.frequencies.iter().map(|&w| (-imag_unit::<T>() * t * w).exp()).collect();
        let sign = if n % 2 == 0 { T::one() } else { -T::one() };
        let det_at = |r: T| -> (Complex<T>, CMatrix<T>) {
            let m = block_matrix(basis, &weights, r);
            (m.clone().determinant() * sign, m)
        };
        let mut r = T::zero();
        let mut phase = T::zero();
        let mut step: T = lit(1.0 / 64.0);
        while r < T::one() {
            let next = (r + step).min(T::one());
            let (d, _) = det_at(next);
            if d.modulus() == T::zero() {
                return Err(Error::Singular("eigen-sum resummation hit a caustic".into()));
            }
            let candidate = unwrap_phase(phase, d.argument());
            if (candidate - phase).abs() > T::frac_pi_4() && step > lit(1e-9) {
                step *= lit(0.5);
                continue;
            }
            phase = candidate;
            r = next;
            step = (step * lit(1.5)).min(lit(1.0 / 64.0));
        }
        let (d, m) = det_at(T::one());
        let minv = solve_refined(&m, &CMatrix::<T>::identity(2 * n, 2 * n))?;
        let log_sqrt_det = cx(d.modulus().ln(), phase) * lit::<T>(0.5);
        let log_prefactor = -log_sqrt_det - imag_unit::<T>() * t * (basis.zero_point_energy() / basis.hbar);
        Ok(ResummedKernel { t, weights, minv, log_prefactor })
    }

    pub fn evaluate(&self, basis: &SpectralBasis<T>, q: &CVector<T>, qp: &CVector<T>) -> Complex<T> {
        let n = basis.dim();
        let cq = &basis.coupling * q;
        let cqp = (&basis.coupling * qp).map(|z| z.conj());
        let g = CVector::<T>::from_fn(2 * n, |i, _| if i < n { self.weights[i] * cq[i] } else { cqp[i - n] });
        let quad = (g.transpose() * &self.minv * &g)[(0, 0)] * lit::<T>(0.5);
        (self.log_prefactor + quad + basis.log_ground(q) + basis.log_ground(qp).conj()).exp()
    }
}

fn block_matrix<T: Real>(basis: &SpectralBasis<T>, weights: &[Complex<T>], r: T) -> CMatrix<T> {
    let n = basis.dim();
    let mut m = CMatrix::<T>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = basis.curvature[(i, j)] * weights[i] * weights[j] * (r * r);
            m[(n + i, n + j)] = basis.curvature[(i, j)].conj();
        }
        m[(i, n + i)] = re(T::one());
        m[(n + i, i)] = re(T::one());
    }
    m
}

/// `∫ φ*(q) K(q, q′) φ(q′)` for the truncated sum at `t = 0` and a Gaussian `φ`
/// on one degree of freedom, by trapezoidal quadrature; used for completeness checks.
pub fn projected_weight<T: Real>(
    params: &SystemParams<T>,
    levels: usize,
    phi: impl Fn(T) -> Complex<T>,
    lo: T,
    hi: T,
    points: usize,
) -> Result<T> {
    let basis = SpectralBasis::new(params, &DiscreteBath::empty())?;
    let h = (hi - lo) / lit::<T>((points - 1) as f64);
    let xs: Vec<T> = (0..points).map(|i| lo + h * lit::<T>(i as f64)).collect();
    let mut overlaps = vec![Complex::new(T::zero(), T::zero()); levels];
    for (i, &x) in xs.iter().enumerate() {
        let q = CVector::<T>::from_element(1, re(x));
        let hq = basis.polynomials(&q, levels);
        let g = basis.log_ground(&q).exp();
        let w = if i == 0 || i + 1 == points { h * lit(0.5) } else { h };
        let f = phi(x);
        for k in 0..levels {
            overlaps[k] += (hq[k] * g).conj() * f * w;
        }
    }
    Ok(overlaps.iter().fold(T::zero(), |s, z| s + z.modulus_squared()))
}
