//! C99 hexadecimal floating-point literals (`0x1.8p+49`).

use crate::fpbits::{round_to_format, unpack_f64, Format, RoundingMode};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HexFloatError {
    #[error("malformed hex-float literal `{0}`")]
    Malformed(String),
    #[error("hex-float literal `{0}` is not exactly representable")]
    Inexact(String),
}

/// Parses a literal exactly into a binary64 bit pattern.
///
/// Accepts optional sign, `0x` prefix, hex digits with an optional point,
/// a `p` exponent, plus `inf`/`infinity`/`nan`. Inexact literals are
/// rejected rather than rounded.
pub fn parse_f64(s: &str) -> Result<f64, HexFloatError> {
    parse(s, Format::BINARY64).map(f64::from_bits)
}

pub fn parse_f32(s: &str) -> Result<f32, HexFloatError> {
    parse(s, Format::BINARY32).map(|b| f32::from_bits(b as u32))
}

fn parse(s: &str, fmt: Format) -> Result<u64, HexFloatError> {
    let bad = || HexFloatError::Malformed(s.to_string());
    let t = s.trim();
    let (neg, body) = match t.as_bytes().first() {
        Some(b'-') => (true, &t[1..]),
        Some(b'+') => (false, &t[1..]),
        _ => (false, t),
    };
    let sign = if neg { fmt.sign_bit() } else { 0 };
    let lower = body.to_ascii_lowercase();
    if lower == "inf" || lower == "infinity" {
        return Ok(sign | fmt.inf_bits());
    }
    if lower == "nan" {
        return Ok(sign | fmt.inf_bits() | fmt.quiet_bit());
    }
    let rest = lower.strip_prefix("0x").ok_or_else(bad)?;
    let (digits, exp) = match rest.split_once('p') {
        Some((d, e)) => (d, e.parse::<i64>().map_err(|_| bad())?),
        None => (rest, 0),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    let mut sig: u128 = 0;
    let mut e2 = exp;
    let mut dropped = false;
    for (i, c) in int_part.chars().chain(frac_part.chars()).enumerate() {
        let d = c.to_digit(16).ok_or_else(bad)? as u128;
        if i >= int_part.len() {
            e2 -= 4;
        }
        if sig >> 120 != 0 {
            // keep magnitude, remember nonzero tail
            dropped |= d != 0;
            e2 += 4;
            continue;
        }
        sig = (sig << 4) | d;
    }
    if sig == 0 {
        if dropped {
            return Err(HexFloatError::Inexact(s.to_string()));
        }
        return Ok(sign);
    }
    let up = round_to_format(neg, sig, e2, dropped, fmt, RoundingMode::TowardPositive);
    let down = round_to_format(neg, sig, e2, dropped, fmt, RoundingMode::TowardNegative);
    if up != down || (up & !fmt.sign_bit()) == fmt.inf_bits() {
        return Err(HexFloatError::Inexact(s.to_string()));
    }
    Ok(up)
}

/// Formats a binary64 as a normalized C99 hex-float (`-0x1.8p+49`).
pub fn format_f64(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v < 0.0 { "-inf".into() } else { "inf".into() };
    }
    let sign = if v.is_sign_negative() { "-" } else { "" };
    if v == 0.0 {
        return format!("{sign}0x0p+0");
    }
    let (_, sig, exp) = unpack_f64(v.to_bits());
    format_sig(sign, sig, exp)
}

pub fn format_f32(v: f32) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    format_f64(v as f64)
}

fn format_sig(sign: &str, sig: u64, exp: i64) -> String {
    // normalize to 1.xxxx with 52 fraction bits
    let lz = sig.leading_zeros() as i64 - 11;
    let m = sig << lz;
    let e = exp - lz + 52;
    let frac = m & ((1 << 52) - 1);
    let mut hex = format!("{frac:013x}");
    while hex.ends_with('0') {
        hex.pop();
    }
    if hex.is_empty() {
        format!("{sign}0x1p{e:+}")
    } else {
        format!("{sign}0x1.{hex}p{e:+}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_examples() {
        assert_eq!(parse_f64("0x1.8p+49").unwrap(), 1.5 * 2f64.powi(49));
        assert_eq!(parse_f64("0x1p+0").unwrap(), 1.0);
        assert_eq!(parse_f64("-0x1p-1074").unwrap(), -f64::from_bits(1));
        assert_eq!(parse_f64("0x0.0000000000001p-1022").unwrap(), f64::from_bits(1));
        assert_eq!(parse_f64("0x10p0").unwrap(), 16.0);
        assert!(parse_f64("0x1p-1075").is_err());
        assert!(parse_f64("0x1.00000000000001p0").is_err());
        assert!(parse_f32("0x1.000001p0").is_err());
        assert!(parse_f64("1.5").is_err());
        assert!(parse_f64("0x1p+1024").is_err());
        assert_eq!(parse_f64("-0x0p+0").unwrap().to_bits(), 1 << 63);
    }

    #[test]
    fn round_trips() {
        let mut x = 0x1234_5678_9abc_def1u64;
        for _ in 0..10_000 {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let v = f64::from_bits(x);
            if v.is_nan() {
                continue;
            }
            let s = format_f64(v);
            assert_eq!(parse_f64(&s).unwrap().to_bits(), x, "{s}");
        }
    }
}
