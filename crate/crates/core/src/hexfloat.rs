//! Exact text encoding of `f64` as C99-style hexadecimal floats
//! (`-0x1.8p+1` for `-3.0`).

use crate::error::{FnmError, Result};

pub fn format(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let bits = v.to_bits();
    let sign = if bits >> 63 == 1 { "-" } else { "" };
    let exp_bits = ((bits >> 52) & 0x7ff) as i64;
    let mantissa = bits & 0x000f_ffff_ffff_ffff;
    if exp_bits == 0 && mantissa == 0 {
        return format!("{sign}0x0p+0");
    }
    let (lead, exp) = if exp_bits == 0 { (0, -1022) } else { (1, exp_bits - 1023) };
    let mut digits = format!("{mantissa:013x}");
    while digits.ends_with('0') {
        digits.pop();
    }
    let esign = if exp < 0 { '-' } else { '+' };
    if digits.is_empty() {
        format!("{sign}0x{lead}p{esign}{}", exp.abs())
    } else {
        format!("{sign}0x{lead}.{digits}p{esign}{}", exp.abs())
    }
}

pub fn parse(s: &str) -> Result<f64> {
    let err = || FnmError::Parse(format!("bad hex float '{s}'"));
    let t = s.trim();
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let signed = |v: f64| if neg { -v } else { v };
    match body {
        "nan" => return Ok(f64::NAN),
        "inf" => return Ok(signed(f64::INFINITY)),
        _ => {}
    }
    let body = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")).ok_or_else(err)?;
    let (mant, exp) = body.split_once(['p', 'P']).ok_or_else(err)?;
    let exp: i64 = exp.parse().map_err(|_| err())?;
    let (int_part, frac_part) = mant.split_once('.').unwrap_or((mant, ""));
    if frac_part.len() > 13 || int_part.is_empty() {
        return Err(err());
    }
    let lead = u64::from_str_radix(int_part, 16).map_err(|_| err())?;
    let frac = if frac_part.is_empty() {
        0
    } else {
        u64::from_str_radix(frac_part, 16).map_err(|_| err())? << (4 * (13 - frac_part.len()))
    };
    let bits = match lead {
        0 if frac == 0 => 0,
        0 if exp == -1022 => frac,
        1 if (-1022..=1023).contains(&exp) => (((exp + 1023) as u64) << 52) | frac,
        _ => {
            // non-canonical spelling: fall back to arithmetic, which is exact
            // whenever the value is representable
            let v = (lead as f64 + frac as f64 / (1u64 << 52) as f64) * 2f64.powi(exp as i32);
            return Ok(signed(v));
        }
    };
    Ok(signed(f64::from_bits(bits)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_spellings() {
        assert_eq!(format(1.0), "0x1p+0");
        assert_eq!(format(-3.0), "-0x1.8p+1");
        assert_eq!(format(0.1), "0x1.999999999999ap-4");
        assert_eq!(format(-0.0), "-0x0p+0");
        assert_eq!(parse("0x1.8p+1").unwrap(), 3.0);
        assert!(parse("1.5").is_err());
    }

    proptest! {
        #[test]
        fn roundtrip_bits(bits in any::<u64>()) {
            let v = f64::from_bits(bits);
            let back = parse(&format(v)).unwrap();
            if v.is_nan() {
                prop_assert!(back.is_nan());
            } else {
                prop_assert_eq!(back.to_bits(), v.to_bits());
            }
        }
    }
}
