//! Globally adaptive Gauss–Kronrod (7/15) quadrature.

use nalgebra::{Complex, ComplexField};

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { abs: 1e-13, rel: 1e-12, max_intervals: 20_000 }
    }
}

struct Panel<T: Real> {
    a: T,
    b: T,
    value: Complex<T>,
    error: T,
}

fn kronrod<T: Real, F: FnMut(T) -> Complex<T>>(f: &mut F, a: T, b: T) -> Panel<T> {
    let half: T = lit(0.5);
    let c = (a + b) * half;
    let h = (b - a) * half;
    let mut gauss = Complex::new(T::zero(), T::zero());
    let fc = f(c);
    let mut kron = fc * lit::<T>(WGK[7]);
    gauss += fc * lit::<T>(WG[3]);
    for i in 0..7 {
        let dx = h * lit::<T>(XGK[i]);
        let s = f(c - dx) + f(c + dx);
        kron += s * lit::<T>(WGK[i]);
        if i % 2 == 1 {
            gauss += s * lit::<T>(WG[i / 2]);
        }
    }
    let value = kron * h;
    let error = ((kron - gauss) * h).modulus();
    Panel { a, b, value, error }
}

/// Integrates `f` over `[a, b]`, returning the value and an error estimate.
pub fn integrate<T: Real, F: FnMut(T) -> Complex<T>>(
    mut f: F,
    a: T,
    b: T,
    tol: Tolerance,
) -> Result<(Complex<T>, T)> {
    integrate_panels(&mut f, &[a, b], tol)
}

/// As [`integrate`], starting from the given breakpoints.
pub fn integrate_panels<T: Real, F: FnMut(T) -> Complex<T>>(
    f: &mut F,
    breaks: &[T],
    tol: Tolerance,
) -> Result<(Complex<T>, T)> {
    let mut panels: Vec<Panel<T>> = breaks.windows(2).map(|w| kronrod(f, w[0], w[1])).collect();
    loop {
        let total = panels.iter().fold(Complex::new(T::zero(), T::zero()), |s, p| s + p.value);
        let err = panels.iter().fold(T::zero(), |s, p| s + p.error);
        let target = lit::<T>(tol.abs).max(lit::<T>(tol.rel) * total.modulus());
        if err <= target {
            return Ok((total, err));
        }
        if panels.len() >= tol.max_intervals {
            return Err(Error::Quadrature { achieved: to_f64(err), requested: to_f64(target) });
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .fold((0, T::zero()), |(bi, be), (i, p)| if p.error > be { (i, p.error) } else { (bi, be) });
        let p = panels.swap_remove(worst);
        let mid = (p.a + p.b) * lit::<T>(0.5);
        if mid <= p.a || mid >= p.b {
            return Err(Error::Quadrature { achieved: to_f64(err), requested: to_f64(target) });
        }
        panels.push(kronrod(f, p.a, mid));
        panels.push(kronrod(f, mid, p.b));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_and_oscillatory() {
        let (v, _) = integrate(|x: f64| Complex::new(x * x, 0.0), 0.0, 3.0, Tolerance::default()).unwrap();
        assert!((v.re - 9.0).abs() < 1e-13);
        let (v, _) = integrate(|x: f64| Complex::new((20.0 * x).sin(), 0.0), 0.0, 5.0, Tolerance::default()).unwrap();
        assert!((v.re - (1.0 - 100f64.cos()) / 20.0).abs() < 1e-12);
    }
}
