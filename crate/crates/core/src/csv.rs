//! Small CSV helpers for the emitted artifacts.

use std::fmt::Write as _;

/// Significant digits used for every emitted real.
pub const SIG_DIGITS: usize = 9;

/// Format like C's `%.{sig}g`: shortest of fixed or exponent notation,
/// trailing zeros removed.
pub fn fmt_g(v: f64, sig: usize) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sig = sig.max(1);
    let sci = format!("{:.*e}", sig - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent notation");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= sig as i32 {
        let mut out = trim_zeros(mantissa).to_string();
        let _ = write!(out, "e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs());
        out
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, v)).to_string()
    }
}

/// [`fmt_g`] with [`SIG_DIGITS`].
pub fn num(v: f64) -> String {
    fmt_g(v, SIG_DIGITS)
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// One CSV line from already formatted fields.
pub fn line<I, S>(fields: I) -> String
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut out = String::new();
    for (i, f) in fields.into_iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(f.as_ref());
    }
    out.push('\n');
    out
}

/// Parse a numeric CSV with a header line into `(header, rows)`.
pub fn parse_numeric(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>), String> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or("empty CSV")?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (i, l) in lines.enumerate() {
        let row = l
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| format!("row {}: {e}", i + 2))?;
        if row.len() != header.len() {
            return Err(format!("row {}: {} fields, header has {}", i + 2, row.len(), header.len()));
        }
        rows.push(row);
    }
    Ok((header, rows))
}
