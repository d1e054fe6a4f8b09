//! SPICE-style engineering notation.

/// Parses a number with an optional scale suffix (`f p n u m k meg g t`,
/// case-insensitive). Trailing unit letters after the suffix are ignored,
/// so `25ns` and `1Meg` are accepted.
pub fn parse_value(text: &str) -> Result<f64, String> {
    let lower = text.trim().to_ascii_lowercase();
    let split = lower
        .char_indices()
        .find(|&(i, c)| {
            c.is_ascii_alphabetic()
                && !(c == 'e'
                    && lower[i + 1..]
                        .starts_with(|n: char| n.is_ascii_digit() || n == '-' || n == '+'))
        })
        .map(|(i, _)| i)
        .unwrap_or(lower.len());
    let (num, suffix) = lower.split_at(split);
    let base: f64 = num
        .parse()
        .map_err(|_| format!("invalid number `{text}`"))?;
    let exponent = if suffix.starts_with("meg") {
        6
    } else {
        match suffix.chars().next() {
            None => 0,
            Some('f') => -15,
            Some('p') => -12,
            Some('n') => -9,
            Some('u') => -6,
            Some('m') => -3,
            Some('k') => 3,
            Some('g') => 9,
            Some('t') => 12,
            // bare unit such as `v` or `s`
            Some(_) => 0,
        }
    };
    if !base.is_finite() {
        return Err(format!("invalid number `{text}`"));
    }
    // `25n` parses as the literal 25e-9 rather than 25 * 1e-9
    if exponent != 0 && !num.contains('e') {
        if let Ok(v) = format!("{num}e{exponent}").parse::<f64>() {
            return Ok(v);
        }
    }
    Ok(base * 10f64.powi(exponent))
}

/// Shortest text that parses back to exactly `v`.
pub fn format_value(v: f64) -> String {
    format!("{v:e}")
}
