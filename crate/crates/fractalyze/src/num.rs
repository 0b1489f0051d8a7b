//! Deterministic float formatting: shortest round-trip of the value rounded
//! to 12 significant digits.

/// `x` rounded to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

pub fn fmt12(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let y = round12(x);
    if y == 0.0 {
        return "0".into();
    }
    let a = y.abs();
    if (1e-5..1e15).contains(&a) {
        format!("{y}")
    } else {
        format!("{y:e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(fmt12(2.0 / 3.0), "0.666666666667");
        assert_eq!(fmt12(0.5), "0.5");
        assert_eq!(fmt12(-1e-20), "-1e-20");
        assert_eq!(fmt12(1.0 / 3.0 * 1e-7), "3.33333333333e-8");
    }
}
