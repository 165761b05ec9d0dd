//! Number formatting for CSV output.

/// Shortest `%g`-style rendering with at most `digits` significant digits.
pub fn sig(v: f64, digits: usize) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        let m = trim_zeros(mantissa);
        return format!("{m}e{exp}");
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, v)).to_string()
}

/// Nine significant digits.
pub fn sig9(v: f64) -> String {
    sig(v, 9)
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(sig9(0.0), "0");
        assert_eq!(sig9(1.0), "1");
        assert_eq!(sig9(-2.5), "-2.5");
        assert_eq!(sig9(1234.56789012), "1234.56789");
        assert_eq!(sig9(123456789.4), "123456789");
        assert_eq!(sig9(1234567890.0), "1.23456789e9");
        assert_eq!(sig9(0.000123456789123), "0.000123456789");
        assert_eq!(sig9(1.5e-7), "1.5e-7");
        assert_eq!(sig9(1.0 / 3.0), "0.333333333");
    }

    #[test]
    fn round_trips_to_nine_digits() {
        for v in [1.23456789012345, -2.718281828459045e12, 6.02214076e-23, 99999.99999] {
            let back: f64 = sig9(v).parse().unwrap();
            assert!((back - v).abs() <= 5e-9 * v.abs());
        }
    }
}
