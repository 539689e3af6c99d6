/// Formats `x` rounded to nine significant digits, using the shortest
/// representation that parses back to the rounded value.
pub(crate) fn sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{}", if x == 0.0 { 0.0 } else { x });
    }
    let rounded: f64 = format!("{:.8e}", x).parse().unwrap_or(x);
    format!("{}", rounded)
}

#[cfg(test)]
mod tests {
    use super::sig9;

    #[test]
    fn rounds_to_nine_digits() {
        assert_eq!(sig9(0.123456789123), "0.123456789");
        assert_eq!(sig9(1.0), "1");
        assert_eq!(sig9(0.0), "0");
        assert_eq!(sig9(-0.0), "0");
        assert_eq!(sig9(12345678912.0), "12345678900");
        assert_eq!(sig9(1.5e-7), "0.00000015");
    }
}
