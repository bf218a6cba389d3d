//! Number formatting shared by every text output.

/// Formats `x` with 12 significant digits, dot decimal, no locale, using
/// the shortest representation of the rounded value. Magnitudes below
/// `1e-5` switch to exponent notation.
pub fn fmt_num(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("valid float literal");
    if rounded == 0.0 {
        return "0".to_string();
    }
    if rounded.abs() < 1e-5 {
        format!("{rounded:e}")
    } else {
        format!("{rounded}")
    }
}
