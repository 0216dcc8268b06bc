//! Fixed-precision number formatting shared by every CSV writer.

/// Twelve significant digits in scientific notation with a `.` separator.
/// The output depends only on the bit pattern of `x`, so reruns are
/// byte-identical.
pub fn num(x: f64) -> String {
    if x == 0.0 {
        // Normalizes −0.0 as well.
        return "0.00000000000e0".to_string();
    }
    format!("{x:.11e}")
}

pub fn row(values: &[f64]) -> String {
    values.iter().map(|&v| num(v)).collect::<Vec<_>>().join(",")
}
