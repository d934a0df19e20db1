//! Exact rational numbers for factors, fractions and timer values.
//!
//! Values parse from integers (`"4"`), terminating decimals (`"0.54"`) and
//! quotients of either (`"0.8/750"`, `"3/2"`). Arithmetic never rounds.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("invalid rational `{input}`: {reason}")]
pub struct ParseRationalError {
    pub input: String,
    pub reason: &'static str,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rational(Ratio<i128>);

impl Rational {
    pub const ZERO: Rational = Rational(Ratio::new_raw(0, 1));
    pub const ONE: Rational = Rational(Ratio::new_raw(1, 1));

    pub fn new(numer: i128, denom: i128) -> Self {
        assert!(denom != 0, "zero denominator");
        Rational(Ratio::new(numer, denom))
    }

    pub fn from_integer(v: i128) -> Self {
        Rational(Ratio::from_integer(v))
    }

    pub fn numer(&self) -> i128 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i128 {
        *self.0.denom()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn recip(&self) -> Self {
        Rational(self.0.recip())
    }

    /// Largest integer not greater than the value.
    pub fn floor(&self) -> i128 {
        num_integer::Integer::div_floor(&self.numer(), &self.denom())
    }

    pub fn ceil(&self) -> i128 {
        -num_integer::Integer::div_floor(&(-self.numer()), &self.denom())
    }

    /// Nearest integer, ties rounded towards positive infinity.
    pub fn round_half_up(&self) -> i128 {
        (*self + Rational::new(1, 2)).floor()
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Decimal rendering with at most `places` fractional digits (half-up).
    pub fn to_decimal_string(&self, places: u32) -> String {
        let scale = 10i128.pow(places);
        let scaled = (*self * Rational::from_integer(scale)).round_half_up();
        let neg = scaled < 0;
        let abs = scaled.abs();
        let int = abs / scale;
        let frac = abs % scale;
        let mut out = if neg { String::from("-") } else { String::new() };
        out.push_str(&int.to_string());
        if places > 0 && frac != 0 {
            let digits = format!("{:0width$}", frac, width = places as usize);
            out.push('.');
            out.push_str(digits.trim_end_matches('0'));
        }
        out
    }

    fn parse_decimal(s: &str) -> Option<Ratio<i128>> {
        let s = s.trim();
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s.strip_prefix('+').unwrap_or(s)),
        };
        if body.is_empty() {
            return None;
        }
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return None;
        }
        if !int_part.chars().all(|c| c.is_ascii_digit())
            || !frac_part.chars().all(|c| c.is_ascii_digit())
            || frac_part.len() > 30
        {
            return None;
        }
        let digits = format!("{int_part}{frac_part}");
        let mantissa: i128 = if digits.is_empty() { 0 } else { digits.parse().ok()? };
        let denom = 10i128.checked_pow(frac_part.len() as u32)?;
        let r = Ratio::new(mantissa, denom);
        Some(if neg { -r } else { r })
    }
}

impl FromStr for Rational {
    type Err = ParseRationalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |reason| ParseRationalError {
            input: s.to_string(),
            reason,
        };
        match s.split_once('/') {
            Some((n, d)) => {
                let n = Self::parse_decimal(n).ok_or_else(|| err("bad numerator"))?;
                let d = Self::parse_decimal(d).ok_or_else(|| err("bad denominator"))?;
                if d.is_zero() {
                    return Err(err("zero denominator"));
                }
                Ok(Rational(n / d))
            }
            None => Self::parse_decimal(s)
                .map(Rational)
                .ok_or_else(|| err("not a decimal number")),
        }
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Terminating decimals print as decimals, everything else as n/d.
        let mut d = self.denom();
        let (mut twos, mut fives) = (0u32, 0u32);
        while d % 2 == 0 {
            d /= 2;
            twos += 1;
        }
        while d % 5 == 0 {
            d /= 5;
            fives += 1;
        }
        if d == 1 {
            f.write_str(&self.to_decimal_string(twos.max(fives)))
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Rational({self})")
    }
}

impl From<u32> for Rational {
    fn from(v: u32) -> Self {
        Rational::from_integer(v as i128)
    }
}

impl From<u64> for Rational {
    fn from(v: u64) -> Self {
        Rational::from_integer(v as i128)
    }
}

impl From<usize> for Rational {
    fn from(v: usize) -> Self {
        Rational::from_integer(v as i128)
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl std::ops::$trait for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational(self.0 $op rhs.0)
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);
binop!(Div, div, /);

impl std::iter::Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Rational {
        iter.fold(Rational::ZERO, |a, b| a + b)
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(i64),
            Float(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Int(v) => Ok(Rational::from_integer(v as i128)),
            // Shortest round-trip repr is the decimal the user typed.
            Repr::Float(v) => v.to_string().parse().map_err(serde::de::Error::custom),
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}
