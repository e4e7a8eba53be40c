//! Text formatting shared by the CSV and JSON emitters.

/// Scientific notation with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// `[re, im]` pair used by the JSON encodings of complex numbers.
pub fn pair<T: crate::Real>(z: nalgebra::Complex<T>) -> [f64; 2] {
    [crate::scalar::to_f64(z.re), crate::scalar::to_f64(z.im)]
}
