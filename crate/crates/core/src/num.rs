//! Small numeric helpers shared across modules: missing-value formatting,
//! significant-digit rendering for prompts, and basic sample statistics.

/// Render a value at a fixed number of significant digits, or the literal
/// `NaN` when missing. Prompt rendering is pinned to 4 significant digits so
/// identical inputs always produce byte-identical prompts.
pub fn fmt_opt(value: Option<f64>, sig: u32) -> String {
    match value {
        Some(v) => fmt_sig(v, sig),
        None => "NaN".to_string(),
    }
}

/// Decimal formatting at `sig` significant digits, without scientific
/// notation. `fmt_sig(1234.56, 4)` is `"1235"`, `fmt_sig(0.012345, 4)` is
/// `"0.01234"` (banker-free round-half-away via `format!` rounding).
pub fn fmt_sig(value: f64, sig: u32) -> String {
    assert!(sig >= 1);
    if value == 0.0 {
        return format!("{:.*}", (sig - 1) as usize, 0.0);
    }
    if !value.is_finite() {
        return "NaN".to_string();
    }
    let mut exponent = value.abs().log10().floor() as i32;
    // Rounding can carry into the next power of ten (e.g. 0.9999 -> 1.000).
    let scale = 10f64.powi(sig as i32 - 1 - exponent);
    let rounded = (value * scale).round() / scale;
    if rounded != 0.0 {
        exponent = rounded.abs().log10().floor() as i32;
    }
    let decimals = (sig as i32 - 1 - exponent).max(0) as usize;
    format!("{rounded:.decimals$}")
}

/// Arithmetic mean; `None` for an empty slice.
pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    Some(values.iter().sum::<f64>() / values.len() as f64)
}

/// Sample standard deviation (n-1 denominator); `None` below 2 observations.
pub fn sample_std(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values)?;
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64;
    Some(var.sqrt())
}

/// Population standard deviation (n denominator); `None` for an empty slice.
pub fn population_std(values: &[f64]) -> Option<f64> {
    let m = mean(values)?;
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64;
    Some(var.sqrt())
}

/// Median with the even-count rule (mean of the two central values).
/// `None` for an empty slice.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("no NaN in median input"));
    let n = sorted.len();
    if n % 2 == 1 {
        Some(sorted[n / 2])
    } else {
        Some((sorted[n / 2 - 1] + sorted[n / 2]) / 2.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt_sig_spans_magnitudes() {
        assert_eq!(fmt_sig(1234.56, 4), "1235");
        assert_eq!(fmt_sig(123456.0, 4), "123500");
        assert_eq!(fmt_sig(1.23456, 4), "1.235");
        assert_eq!(fmt_sig(0.0123456, 4), "0.01235");
        assert_eq!(fmt_sig(-9.8765, 4), "-9.877");
        assert_eq!(fmt_sig(0.0, 4), "0.000");
    }

    #[test]
    fn fmt_sig_rounding_carries() {
        assert_eq!(fmt_sig(0.99999, 4), "1.000");
        assert_eq!(fmt_sig(999.99, 4), "1000");
    }

    #[test]
    fn fmt_opt_renders_nan_marker() {
        assert_eq!(fmt_opt(None, 4), "NaN");
        assert_eq!(fmt_opt(Some(2.5), 4), "2.500");
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[40.0, 50.0, 60.0]), Some(50.0));
        assert_eq!(median(&[40.0, 60.0]), Some(50.0));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn std_denominators() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let s = sample_std(&xs).unwrap();
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
        let p = population_std(&xs).unwrap();
        assert!((p - (1.25f64).sqrt()).abs() < 1e-12);
    }

    proptest::proptest! {
        // 4 significant digits: the rendered string parses back within a
        // relative error of 10^-3 and never uses scientific notation.
        #[test]
        fn fmt_sig_round_trips_within_precision(mantissa in 1.0f64..10.0, exp in -8i32..9, neg in proptest::bool::ANY) {
            let value = mantissa * 10f64.powi(exp) * if neg { -1.0 } else { 1.0 };
            let rendered = fmt_sig(value, 4);
            proptest::prop_assert!(!rendered.contains('e') && !rendered.contains('E'));
            let parsed: f64 = rendered.parse().unwrap();
            let rel = ((parsed - value) / value).abs();
            proptest::prop_assert!(rel <= 5.001e-4, "{value} -> {rendered} (rel {rel})");
        }
    }
}
