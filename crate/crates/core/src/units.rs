//! Unit-labelled quantities.
//!
//! Everything inside the crate is expressed in bytes and bytes/second with
//! decimal prefixes (1 GB = 1e9 bytes). Documents may label rates in either
//! bytes or bits per second; the case of the `B`/`b` decides which.

use thiserror::Error;

pub const KB: f64 = 1e3;
pub const MB: f64 = 1e6;
pub const GB: f64 = 1e9;

#[derive(Debug, Error, PartialEq)]
pub enum UnitError {
    #[error("cannot parse quantity `{0}`")]
    Malformed(String),
    #[error("unknown unit `{unit}` in `{input}`")]
    UnknownUnit { input: String, unit: String },
}

fn split_number(input: &str) -> Result<(f64, &str), UnitError> {
    let s = input.trim();
    let bytes = s.as_bytes();
    let mut end = 0;
    while end < bytes.len() {
        let c = bytes[end];
        let exponent = (c == b'e' || c == b'E')
            && end > 0
            && bytes
                .get(end + 1)
                .is_some_and(|d| d.is_ascii_digit() || *d == b'-' || *d == b'+');
        if c.is_ascii_digit() || c == b'.' || c == b'+' || c == b'-' || exponent {
            end += 1;
        } else {
            break;
        }
    }
    let value: f64 = s[..end]
        .parse()
        .map_err(|_| UnitError::Malformed(input.to_string()))?;
    if !value.is_finite() {
        return Err(UnitError::Malformed(input.to_string()));
    }
    Ok((value, s[end..].trim()))
}

fn prefix(p: &str) -> Option<f64> {
    match p {
        "" => Some(1.0),
        "k" | "K" => Some(1e3),
        "M" => Some(1e6),
        "G" => Some(1e9),
        "T" => Some(1e12),
        _ => None,
    }
}

/// Parses a labelled rate such as `"100 MBps"`, `"8 Gbps"`, `"1e8 B/s"` or
/// `"800 Mbit/s"` into bytes per second.
pub fn parse_rate(input: &str) -> Result<f64, UnitError> {
    let (value, unit) = split_number(input)?;
    let unknown = || UnitError::UnknownUnit {
        input: input.to_string(),
        unit: unit.to_string(),
    };
    let (stem, bits) = if let Some(p) = unit.strip_suffix("bit/s") {
        (p, true)
    } else if let Some(p) = unit.strip_suffix("B/s") {
        (p, false)
    } else if let Some(p) = unit.strip_suffix("Bps") {
        (p, false)
    } else if let Some(p) = unit.strip_suffix("bps") {
        (p, true)
    } else {
        return Err(unknown());
    };
    let scale = prefix(stem).ok_or_else(unknown)?;
    let bytes = value * scale;
    Ok(if bits { bytes / 8.0 } else { bytes })
}

/// Parses a labelled size such as `"500 MB"` or `"10GB"` into bytes.
pub fn parse_size(input: &str) -> Result<f64, UnitError> {
    let (value, unit) = split_number(input)?;
    let stem = unit
        .strip_suffix('B')
        .ok_or_else(|| UnitError::UnknownUnit {
            input: input.to_string(),
            unit: unit.to_string(),
        })?;
    let scale = prefix(stem).ok_or_else(|| UnitError::UnknownUnit {
        input: input.to_string(),
        unit: unit.to_string(),
    })?;
    Ok(value * scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn byte_rates() {
        assert_eq!(parse_rate("100 MBps").unwrap(), 1e8);
        assert_eq!(parse_rate("1GBps").unwrap(), 1e9);
        assert_eq!(parse_rate("1.5e8 B/s").unwrap(), 1.5e8);
        assert_eq!(parse_rate("250 kB/s").unwrap(), 2.5e5);
    }

    #[test]
    fn bit_rates_are_divided_by_eight() {
        assert_eq!(parse_rate("8 Gbps").unwrap(), 1e9);
        assert_eq!(parse_rate("800 Mbit/s").unwrap(), 1e8);
    }

    #[test]
    fn unlabelled_rate_is_rejected() {
        assert!(matches!(
            parse_rate("100"),
            Err(UnitError::UnknownUnit { .. })
        ));
        assert!(matches!(
            parse_rate("100 MB"),
            Err(UnitError::UnknownUnit { .. })
        ));
        assert!(matches!(parse_rate("fast"), Err(UnitError::Malformed(_))));
    }

    #[test]
    fn sizes() {
        assert_eq!(parse_size("500 MB").unwrap(), 5e8);
        assert_eq!(parse_size("10GB").unwrap(), 1e10);
        assert_eq!(parse_size("42 B").unwrap(), 42.0);
        assert!(parse_size("10 GiB").is_err());
    }
}
