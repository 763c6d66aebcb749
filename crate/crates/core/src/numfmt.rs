//! Text output of floating-point values with 12 significant digits.

/// Rounds to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// Formats with at most 12 significant digits, switching to exponent form for tiny or huge values.
pub fn fmt12(x: f64) -> String {
    let r = round12(x);
    if r == 0.0 || !r.is_finite() || (1e-5..1e15).contains(&r.abs()) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(fmt12(0.1 + 0.2), "0.3");
        assert_eq!(fmt12(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt12(2.5e-9), "2.5e-9");
        assert_eq!(fmt12(0.0), "0");
    }
}
