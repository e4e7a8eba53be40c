//! Dormand–Prince 5(4) integration of the phase-space flow.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::kernels::{build_dynamical_matrix, extract_kernels, KernelSet, IP, IX};
use crate::model::{DiscreteBath, SystemParams};
use crate::scalar::{lit, re, to_f64, Real};

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates `y' = f(t, y)` from `t0` through each of `outputs` in order,
/// returning the state at every output time. Steps are accepted at a local
/// error of `tol / 10` so that accumulated error stays near `tol`.
pub fn dopri5<T: Real, F>(f: F, y0: &[T], t0: T, outputs: &[T], tol: f64) -> Result<Vec<Vec<T>>>
where
    F: Fn(T, &[T], &mut [T]),
{
    let n = y0.len();
    let tol_t: T = lit(tol * 0.1);
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut k: Vec<Vec<T>> = vec![vec![T::zero(); n]; 7];
    let mut stage = vec![T::zero(); n];
    let mut results = Vec::with_capacity(outputs.len());
    let span = outputs.iter().fold(T::one(), |m, &o| m.max((o - t0).abs()));
    let mut h = span * lit(1e-3);
    for &target in outputs {
        let dir = if target >= t { T::one() } else { -T::one() };
        while (target - t).abs() > T::zero() {
            let remaining = (target - t).abs();
            let mut step = h.abs().min(remaining) * dir;
            let last = step.abs() >= remaining;
            if last {
                step = target - t;
            }
            f(t, &y, &mut k[0]);
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = y[i];
                    for (j, kj) in k.iter().enumerate().take(s) {
                        let a = A[s][j];
                        if a != 0.0 {
                            acc += step * lit::<T>(a) * kj[i];
                        }
                    }
                    stage[i] = acc;
                }
                f(t + step * lit::<T>(C[s]), &stage, &mut k[s]);
            }
            // stage now holds the fifth-order solution (row 7 of A)
            let mut err = T::zero();
            for i in 0..n {
                let mut e = T::zero();
                for (j, kj) in k.iter().enumerate() {
                    e += lit::<T>(E[j]) * kj[i];
                }
                let scale = tol_t + tol_t * y[i].abs().max(stage[i].abs());
                let r = step * e / scale;
                err += r * r;
            }
            err = (err / lit::<T>(n as f64)).sqrt();
            if err <= T::one() {
                t = if last { target } else { t + step };
                y.copy_from_slice(&stage);
            }
            let factor = if err == T::zero() {
                lit(5.0)
            } else {
                (lit::<T>(0.9) * err.powf(lit(-0.2))).min(lit(5.0)).max(lit(0.2))
            };
            h = step.abs() * factor;
            if h <= span * lit(1e-14) {
                return Err(Error::Stiffness { t: to_f64(t) });
            }
        }
        results.push(y.clone());
    }
    Ok(results)
}

/// Flow matrices `exp(A t)` at each output time (in order) by column-wise integration.
pub fn ode_flows<T: Real>(params: &SystemParams<T>, bath: &DiscreteBath<T>, times: &[T], tol: f64) -> Result<Vec<(DMatrix<T>, Vec<T>, Vec<T>)>> {
    let n = bath.len();
    let a = build_dynamical_matrix(params, bath).a;
    let d = 2 * n + 2;
    let m = params.m;
    let omegas = bath.omegas.clone();
    let mut y0 = vec![T::zero(); d * d + 2 * n];
    for i in 0..d {
        y0[i * d + i] = T::one();
    }
    let rhs = |_t: T, y: &[T], dy: &mut [T]| {
        let s = DMatrix::from_column_slice(d, d, &y[..d * d]);
        let ds = &a * s;
        dy[..d * d].copy_from_slice(ds.as_slice());
        // β-convolutions: y_j'' = −ω_j² y_j + ω_j m x, driven by the p(0) column
        let x = y[IP * d + IX];
        for j in 0..n {
            let (yy, vv) = (d * d + 2 * j, d * d + 2 * j + 1);
            dy[yy] = y[vv];
            dy[vv] = -omegas[j] * omegas[j] * y[yy] + omegas[j] * m * x;
        }
    };
    let states = dopri5(rhs, &y0, T::zero(), times, tol)?;
    Ok(states
        .into_iter()
        .map(|y| {
            let s = DMatrix::from_column_slice(d, d, &y[..d * d]);
            let eta = (0..n).map(|j| y[d * d + 2 * j]).collect();
            let delta = (0..n).map(|j| y[d * d + 2 * j + 1] / omegas[j]).collect();
            (s, eta, delta)
        })
        .collect())
}

/// Kernel set at real time `t` from the integrated flow.
pub fn ode_kernels<T: Real>(params: &SystemParams<T>, bath: &DiscreteBath<T>, t: T, tol: f64) -> Result<KernelSet<T>> {
    Ok(ode_kernels_series(params, bath, &[t], tol)?.remove(0))
}

/// As [`ode_kernels`] at several times, integrating once through them in order.
pub fn ode_kernels_series<T: Real>(params: &SystemParams<T>, bath: &DiscreteBath<T>, times: &[T], tol: f64) -> Result<Vec<KernelSet<T>>> {
    if tol < 1e-13 {
        return Err(Error::InvalidParameter("ODE tolerance must be at least 1e-13".into()));
    }
    let flows = ode_flows(params, bath, times, tol)?;
    Ok(flows
        .into_iter()
        .zip(times)
        .map(|((s, eta, delta), &t)| {
            let sc = s.map(re);
            let eta: Vec<Complex<T>> = eta.into_iter().map(re).collect();
            let delta: Vec<Complex<T>> = delta.into_iter().map(re).collect();
            extract_kernels(params, bath, re(t), &sc, eta, delta)
        })
        .collect())
}
