/// Plain decimal rendering of `x` that parses back to the identical `f64`
/// and carries at least 9 significant digits (zero-padded when the shortest
/// round-trip form is shorter).
pub fn decimal(x: f64) -> String {
    const MIN_SIG: usize = 9;
    let mut s = format!("{x}");
    if !x.is_finite() {
        return s;
    }
    let digits: String = s.chars().filter(|c| c.is_ascii_digit()).collect();
    let sig = digits.trim_start_matches('0').len();
    if sig < MIN_SIG {
        if !s.contains('.') {
            s.push('.');
        }
        let pad = if x == 0.0 { MIN_SIG } else { MIN_SIG - sig };
        s.extend(std::iter::repeat_n('0', pad));
    }
    s
}

/// Decimal rendering for an optional value; `None` becomes an empty cell.
pub fn decimal_opt(x: Option<f64>) -> String {
    x.map(decimal).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pads_short_values() {
        assert_eq!(decimal(0.5), "0.500000000");
        assert_eq!(decimal(3.0), "3.00000000");
        assert_eq!(decimal(-2.25), "-2.25000000");
        assert_eq!(decimal(0.0), "0.000000000");
        assert_eq!(decimal(1e-13), "0.000000000000100000000");
    }

    proptest! {
        #[test]
        fn round_trips_exactly(bits in any::<u64>()) {
            let x = f64::from_bits(bits);
            prop_assume!(x.is_finite());
            let s = decimal(x);
            prop_assert!(!s.contains('e'));
            prop_assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }
}
