//! Exact rational numbers and their textual forms.
//!
//! Every rating, price and discount factor in the crate is a [`Rational`].
//! Config files may spell a value as a JSON number (`0.75`), a decimal
//! string (`"0.75"`) or a fraction string (`"3/4"`); all three parse to the
//! same exact value. Values are written back as canonical fraction strings.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Arbitrary-precision rational.
pub type Rational = BigRational;

/// Largest decimal exponent accepted by [`parse_rational`].
pub const MAX_DECIMAL_EXPONENT: u32 = 64;

/// Builds `numer / denom`. Panics if `denom == 0`.
pub fn ratio(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

/// Builds the integer `value` as a rational.
pub fn int(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

/// `base^exp` for a non-negative exponent.
pub fn pow(base: &Rational, exp: usize) -> Rational {
    num_traits::pow(base.clone(), exp)
}

/// True iff `lo < x < hi`.
pub fn in_open(x: &Rational, lo: &Rational, hi: &Rational) -> bool {
    lo < x && x < hi
}

/// True iff `0 <= x <= 1`.
pub fn in_unit(x: &Rational) -> bool {
    !x.is_negative() && x <= &Rational::one()
}

/// Lossy conversion for display and plotting only.
pub fn to_f64(x: &Rational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Canonical text: `"n"` for integers, `"n/d"` otherwise.
pub fn to_canonical(x: &Rational) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseRationalError {
    #[error("empty number")]
    Empty,
    #[error("malformed number `{0}`")]
    Malformed(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
    #[error("exponent out of range in `{0}`")]
    ExponentRange(String),
}

/// Parses a decimal (`-1.25`, `3e-2`) or fraction (`5/4`) literal exactly.
pub fn parse_rational(text: &str) -> Result<Rational, ParseRationalError> {
    let s = text.trim();
    if s.is_empty() {
        return Err(ParseRationalError::Empty);
    }
    if let Some((n, d)) = s.split_once('/') {
        let numer = parse_integer(n.trim()).ok_or_else(|| malformed(s))?;
        let denom = parse_integer(d.trim()).ok_or_else(|| malformed(s))?;
        if denom.is_zero() {
            return Err(ParseRationalError::ZeroDenominator(s.to_string()));
        }
        return Ok(Rational::new(numer, denom));
    }
    parse_decimal(s)
}

fn malformed(s: &str) -> ParseRationalError {
    ParseRationalError::Malformed(s.to_string())
}

fn parse_integer(s: &str) -> Option<BigInt> {
    let digits = s.strip_prefix(['-', '+']).unwrap_or(s);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

fn parse_decimal(s: &str) -> Result<Rational, ParseRationalError> {
    let (negative, body) = match s.as_bytes()[0] {
        b'-' => (true, &s[1..]),
        b'+' => (false, &s[1..]),
        _ => (false, s),
    };
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(pos) => {
            let exp_text = &body[pos + 1..];
            let exp_digits = exp_text.strip_prefix(['-', '+']).unwrap_or(exp_text);
            if exp_digits.is_empty() || !exp_digits.bytes().all(|b| b.is_ascii_digit()) {
                return Err(malformed(s));
            }
            let exp: i64 = exp_text
                .parse()
                .map_err(|_| ParseRationalError::ExponentRange(s.to_string()))?;
            (&body[..pos], exp)
        }
        None => (body, 0),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(malformed(s));
    }
    if !int_part
        .bytes()
        .chain(frac_part.bytes())
        .all(|b| b.is_ascii_digit())
    {
        return Err(malformed(s));
    }
    if exponent.unsigned_abs() > MAX_DECIMAL_EXPONENT as u64 {
        return Err(ParseRationalError::ExponentRange(s.to_string()));
    }
    let scale = exponent - frac_part.len() as i64;
    let digits = format!("{int_part}{frac_part}");
    let mut numer: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().map_err(|_| malformed(s))?
    };
    if negative {
        numer = -numer;
    }
    let ten = BigInt::from(10);
    let value = if scale >= 0 {
        Rational::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        Rational::new(numer, num_traits::pow(ten, scale.unsigned_abs() as usize))
    };
    Ok(value)
}

/// Serde adapter: write canonical strings, read numbers or strings exactly.
pub mod serde_rational {
    use super::{parse_rational, to_canonical, Rational};
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &Rational, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&to_canonical(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Rational, D::Error> {
        let raw = serde_json::Value::deserialize(de)?;
        from_value(&raw).map_err(D::Error::custom)
    }

    pub(crate) fn from_value(raw: &serde_json::Value) -> Result<Rational, String> {
        match raw {
            serde_json::Value::Number(n) => {
                parse_rational(&n.to_string()).map_err(|e| e.to_string())
            }
            serde_json::Value::String(s) => parse_rational(s).map_err(|e| e.to_string()),
            other => Err(format!(
                "expected a number or numeric string, found {other}"
            )),
        }
    }

    /// Same adapter for `Vec<Rational>`.
    pub mod vec {
        use super::Rational;
        use serde::de::Error as _;
        use serde::ser::SerializeSeq;
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(values: &[Rational], ser: S) -> Result<S::Ok, S::Error> {
            let mut seq = ser.serialize_seq(Some(values.len()))?;
            for v in values {
                seq.serialize_element(&super::super::to_canonical(v))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<Rational>, D::Error> {
            let raw = Vec::<serde_json::Value>::deserialize(de)?;
            raw.iter()
                .map(|v| super::from_value(v).map_err(D::Error::custom))
                .collect()
        }
    }

    /// Same adapter for `Option<Rational>`.
    pub mod option {
        use super::Rational;
        use serde::de::Error as _;
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(
            value: &Option<Rational>,
            ser: S,
        ) -> Result<S::Ok, S::Error> {
            match value {
                Some(v) => ser.serialize_some(&super::super::to_canonical(v)),
                None => ser.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Option<Rational>, D::Error> {
            let raw = Option::<serde_json::Value>::deserialize(de)?;
            match raw {
                None | Some(serde_json::Value::Null) => Ok(None),
                Some(v) => super::from_value(&v).map(Some).map_err(D::Error::custom),
            }
        }
    }
}
