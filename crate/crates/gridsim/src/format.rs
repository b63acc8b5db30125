//! Numeric output formatting: 6 significant digits for printed tables,
//! 12 for CSV files.

/// Format with `digits` significant digits, plain decimal or scientific
/// as Rust's default float formatting decides after rounding.
pub fn sig(value: f64, digits: usize) -> String {
    if value == 0.0 {
        return "0".to_string();
    }
    if !value.is_finite() {
        return format!("{value}");
    }
    let magnitude = value.abs().log10().floor() as i32;
    let decimals = (digits as i32 - 1 - magnitude).max(0) as usize;
    let rounded = format!("{value:.decimals$}");
    // strip trailing zeros after the decimal point
    if rounded.contains('.') {
        rounded.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        rounded
    }
}

/// 12-significant-digit formatting for CSV output.
pub fn csv(value: f64) -> String {
    sig(value, 12)
}
