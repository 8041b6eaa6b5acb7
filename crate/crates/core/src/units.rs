//! Engineering-notation numerics shared by the netlist grammar and the CLI.

/// Parses a SPICE-style number: a decimal literal with optional exponent,
/// followed by an optional scale suffix (`f p n u m k meg g t`, any case)
/// and optional trailing unit letters, which are ignored (`0.8v`, `1ff`).
pub fn parse_eng(token: &str) -> Option<f64> {
    let s = token.trim();
    let bytes = s.as_bytes();
    let mut end = 0;
    if end < bytes.len() && (bytes[end] == b'+' || bytes[end] == b'-') {
        end += 1;
    }
    let digits_start = end;
    while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
        end += 1;
    }
    if !bytes[digits_start..end].iter().any(u8::is_ascii_digit) {
        return None;
    }
    // Exponent only when followed by a digit.
    if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
        let mut k = end + 1;
        if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
            k += 1;
        }
        if k < bytes.len() && bytes[k].is_ascii_digit() {
            while k < bytes.len() && bytes[k].is_ascii_digit() {
                k += 1;
            }
            end = k;
        }
    }
    let mantissa: f64 = s[..end].parse().ok()?;
    let rest = s[end..].to_ascii_lowercase();
    if !rest.chars().all(|c| c.is_ascii_alphabetic()) {
        return None;
    }
    let scale = if rest.starts_with("meg") {
        1e6
    } else {
        match rest.chars().next() {
            None => 1.0,
            Some('f') => 1e-15,
            Some('p') => 1e-12,
            Some('n') => 1e-9,
            Some('u') => 1e-6,
            Some('m') => 1e-3,
            Some('k') => 1e3,
            Some('g') => 1e9,
            Some('t') => 1e12,
            // Bare unit letters ("v", "s", "a") carry no scale.
            Some(_) => 1.0,
        }
    };
    let value = mantissa * scale;
    value.is_finite().then_some(value)
}

/// Formats a value so that [`parse_eng`] recovers it bit-exactly.
pub fn format_exact(value: f64) -> String {
    format!("{value:e}")
}
