//! Dense linear-algebra helpers on complex matrices.

use nalgebra::{Complex, ComplexField, DMatrix, DVector, Schur};

use crate::error::{Error, Result};
use crate::scalar::{lit, re, Real};

pub type CMatrix<T> = DMatrix<Complex<T>>;
pub type CVector<T> = DVector<Complex<T>>;

pub fn complexify<T: Real>(a: &DMatrix<T>) -> CMatrix<T> {
    a.map(re)
}

/// Largest absolute row sum.
pub fn norm_inf<T: Real>(a: &CMatrix<T>) -> T {
    let mut best = T::zero();
    for i in 0..a.nrows() {
        let mut s = T::zero();
        for j in 0..a.ncols() {
            s += a[(i, j)].modulus();
        }
        best = best.max(s);
    }
    best
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
pub fn expm<T: Real>(a: &CMatrix<T>) -> CMatrix<T> {
    let n = a.nrows();
    let norm = norm_inf(a);
    let half: T = lit(0.5);
    let mut squarings = 0u32;
    let mut scale = T::one();
    while norm * scale > half {
        scale *= half;
        squarings += 1;
    }
    let scaled = a * re(scale);
    let mut term = CMatrix::<T>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=24 {
        term = &term * &scaled * re(T::one() / lit::<T>(k as f64));
        sum += &term;
        if norm_inf(&term) <= T::default_epsilon() * lit(1e-3) * norm_inf(&sum) {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Eigen-decomposition `a = U diag(λ) U†` of a Hermitian matrix.
pub fn hermitian_eigen<T: Real>(a: &CMatrix<T>) -> (DVector<T>, CMatrix<T>) {
    let sym = (a + a.adjoint()) * re(lit::<T>(0.5));
    let eig = sym.symmetric_eigen();
    (eig.eigenvalues, eig.eigenvectors)
}

/// Square root and inverse square root of a real symmetric positive-definite matrix.
pub fn spd_sqrt<T: Real>(h: &DMatrix<T>) -> Result<(DMatrix<T>, DMatrix<T>)> {
    let eig = h.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
    let min = eig.eigenvalues.iter().fold(T::max_value().unwrap(), |m, &v| m.min(v));
    if min <= max * T::default_epsilon() * lit(1e3) {
        return Err(Error::Indefinite(crate::scalar::to_f64(min)));
    }
    let u = &eig.eigenvectors;
    let root = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|v| v.sqrt()));
    let sqrt = u * DMatrix::from_diagonal(&root) * u.transpose();
    let inv = u * DMatrix::from_diagonal(&root.map(|v| T::one() / v)) * u.transpose();
    Ok((sqrt, inv))
}

/// Solves `a x = b` by LU with one step of iterative refinement.
pub fn solve_refined<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> Result<CMatrix<T>> {
    if a.nrows() == 0 {
        return Ok(CMatrix::<T>::zeros(0, b.ncols()));
    }
    let lu = a.clone().lu();
    let mut x = lu
        .solve(b)
        .ok_or_else(|| Error::Singular("LU factorization failed".into()))?;
    let residual = b - a * &x;
    if let Some(dx) = lu.solve(&residual) {
        x += dx;
    }
    Ok(x)
}

pub fn solve_vec<T: Real>(a: &CMatrix<T>, b: &CVector<T>) -> Result<CVector<T>> {
    let m = CMatrix::<T>::from_column_slice(b.len(), 1, b.as_slice());
    let x = solve_refined(a, &m)?;
    Ok(CVector::<T>::from_column_slice(x.as_slice()))
}

/// 2-norm condition number from singular values.
pub fn condition_number<T: Real>(a: &CMatrix<T>) -> T {
    if a.nrows() == 0 {
        return T::one();
    }
    let sv = a.clone().singular_values();
    let max = sv.iter().fold(T::zero(), |m, &v| m.max(v));
    let min = sv.iter().fold(T::max_value().unwrap(), |m, &v| m.min(v));
    if min == T::zero() {
        T::max_value().unwrap()
    } else {
        max / min
    }
}

/// Eigenvalues of a general complex matrix via the Schur form.
pub fn eigenvalues<T: Real>(a: &CMatrix<T>) -> Vec<Complex<T>> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let (_, t) = Schur::new(a.clone()).unpack();
    (0..t.nrows()).map(|i| t[(i, i)]).collect()
}

pub fn symmetrize<T: Real>(a: &CMatrix<T>) -> CMatrix<T> {
    (a + a.transpose()) * re(lit::<T>(0.5))
}

/// `ln ∫ exp(-½ yᵀ A y + bᵀ y) dⁿy` for complex symmetric `A` with positive-definite real part.
///
/// The square root of `det A` is the product of principal roots of the
/// eigenvalues, which stays on the branch continuous with the real part.
pub fn gaussian_log_integral<T: Real>(a: &CMatrix<T>, b: &CVector<T>) -> Result<Complex<T>> {
    let n = a.nrows();
    let real_part = a.map(|z| z.re);
    let real_part = (&real_part + real_part.transpose()) * lit::<T>(0.5);
    let eig = real_part.symmetric_eigen();
    if eig.eigenvalues.iter().any(|&v| v <= T::zero()) {
        return Err(Error::Definiteness {
            eigenvalues: eig.eigenvalues.iter().map(|&v| crate::scalar::to_f64(v)).collect(),
        });
    }
    let mut log_sqrt_det = Complex::new(T::zero(), T::zero());
    for lambda in eigenvalues(a) {
        log_sqrt_det += lambda.ln() * lit::<T>(0.5);
    }
    let x = solve_vec(a, b)?;
    let quad = b.transpose() * &x;
    let two_pi: T = lit(2.0 * std::f64::consts::PI);
    Ok(re(two_pi.ln() * lit::<T>(n as f64 * 0.5)) - log_sqrt_det + quad[(0, 0)] * lit::<T>(0.5))
}

/// Unwraps `next` onto the branch of the argument closest to `prev`.
pub fn unwrap_phase<T: Real>(prev: T, next: T) -> T {
    let two_pi = T::two_pi();
    let mut v = next;
    while v - prev > T::pi() {
        v -= two_pi;
    }
    while v - prev < -T::pi() {
        v += two_pi;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_rotation_generator() {
        let a = CMatrix::<f64>::from_row_slice(2, 2, &[re(0.0), re(3.0), re(-3.0), re(0.0)]);
        let e = expm(&a);
        assert!((e[(0, 0)].re - 3.0f64.cos()).abs() < 1e-14);
        assert!((e[(0, 1)].re - 3.0f64.sin()).abs() < 1e-14);
    }

    #[test]
    fn gaussian_integral_one_dimensional() {
        let a = CMatrix::<f64>::from_element(1, 1, Complex::new(2.0, 1.0));
        let b = CVector::<f64>::from_element(1, Complex::new(0.3, -0.2));
        let got = gaussian_log_integral(&a, &b).unwrap().exp();
        let a0 = Complex::new(2.0, 1.0);
        let want = (Complex::new(2.0 * std::f64::consts::PI, 0.0) / a0).sqrt()
            * (b[0] * b[0] / (a0 * 2.0)).exp();
        assert!((got - want).norm() < 1e-14);
    }

    #[test]
    fn refined_solve() {
        let a = CMatrix::<f64>::from_row_slice(2, 2, &[re(4.0), Complex::new(1.0, 1.0), Complex::new(1.0, 1.0), re(3.0)]);
        let b = CVector::<f64>::from_vec(vec![re(1.0), re(2.0)]);
        let x = solve_vec(&a, &b).unwrap();
        assert!((&a * &x - &b).norm() < 1e-15);
    }
}
