//! Extended-real text encoding shared by the CSV reports.
//!
//! Finite values use Rust's shortest round-trip representation, so writing
//! and re-reading a value is exact. Infinities are `+inf` / `-inf`.

pub fn format_ext(x: f64) -> String {
    if x == f64::INFINITY {
        "+inf".to_string()
    } else if x == f64::NEG_INFINITY {
        "-inf".to_string()
    } else if x.is_nan() {
        "nan".to_string()
    } else if x == 0.0 {
        // collapse -0
        "0".to_string()
    } else {
        format!("{x}")
    }
}

pub fn parse_ext(s: &str) -> Option<f64> {
    match s.trim() {
        "+inf" | "inf" | "+Inf" | "Inf" => Some(f64::INFINITY),
        "-inf" | "-Inf" => Some(f64::NEG_INFINITY),
        t => t.parse::<f64>().ok(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn infinities() {
        assert_eq!(format_ext(f64::INFINITY), "+inf");
        assert_eq!(format_ext(f64::NEG_INFINITY), "-inf");
        assert_eq!(parse_ext("+inf"), Some(f64::INFINITY));
        assert_eq!(parse_ext("-inf"), Some(f64::NEG_INFINITY));
        assert_eq!(format_ext(-0.0), "0");
    }

    proptest! {
        #[test]
        fn finite_round_trip(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            let back = parse_ext(&format_ext(x)).unwrap();
            prop_assert!(back == x);
        }
    }
}
