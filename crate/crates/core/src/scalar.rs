//! Scalar abstraction shared by the float and exact-rational code paths.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, One, Signed, ToPrimitive, Zero};

/// Ordered field element used by every numeric routine of the crate.
///
/// Implemented for `f32`, `f64` and [`BigRational`]. Routines that only add,
/// multiply, divide and compare are written once against this trait, so the
/// exact certificate runs the same code as the float computation.
pub trait Scalar:
    Clone + Debug + PartialOrd + Num + Signed + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
}

impl<T> Scalar for T where
    T: Clone
        + Debug
        + PartialOrd
        + Num
        + Signed
        + FromPrimitive
        + ToPrimitive
        + Send
        + Sync
        + 'static
{
}

/// `num / den` in the scalar type.
pub fn ratio<T: Scalar>(num: i64, den: i64) -> T {
    T::from_i64(num).expect("integer fits scalar") / T::from_i64(den).expect("integer fits scalar")
}

pub fn int<T: Scalar>(v: i64) -> T {
    T::from_i64(v).expect("integer fits scalar")
}

/// Converts an `f64` into the scalar type. For rationals the conversion is
/// exact (every finite double is a dyadic rational).
pub fn from_f64<T: Scalar>(x: f64) -> T {
    T::from_f64(x).unwrap_or_else(|| panic!("non-finite value {x} cannot become a scalar"))
}

pub fn to_f64<T: Scalar>(x: &T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

pub fn max<T: Scalar>(a: T, b: T) -> T {
    if b > a {
        b
    } else {
        a
    }
}

pub fn min<T: Scalar>(a: T, b: T) -> T {
    if b < a {
        b
    } else {
        a
    }
}

/// Exact rational of the decimal rounding of `x` to `digits` fractional digits.
pub fn round_decimal(x: f64, digits: u32) -> BigRational {
    let text = format!("{:.*}", digits as usize, x);
    parse_decimal(&text).expect("formatted float parses")
}

/// Parses a plain decimal literal such as `-12.5e-3` or `0.3333` exactly.
pub fn parse_decimal(text: &str) -> Option<BigRational> {
    let text = text.trim();
    let (mantissa, exp) = match text.find(['e', 'E']) {
        Some(pos) => (&text[..pos], text[pos + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (neg, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    if !digits.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let mut value = BigRational::from_integer(digits.parse::<BigInt>().ok()?);
    let scale = exp - frac_part.len() as i32;
    let ten = BigRational::from_integer(BigInt::from(10));
    if scale >= 0 {
        value *= num_traits::pow(ten, scale as usize);
    } else {
        value /= num_traits::pow(ten, (-scale) as usize);
    }
    Some(if neg { -value } else { value })
}

/// Parses `p/q`, an integer, or a decimal literal into an exact rational.
pub fn parse_rational(text: &str) -> Option<BigRational> {
    match text.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().ok()?;
            let q: BigInt = q.trim().parse().ok()?;
            if q.is_zero() {
                return None;
            }
            Some(BigRational::new(p, q))
        }
        None => parse_decimal(text),
    }
}

/// Smallest decimal with `digits` fractional digits that is `>= r`.
pub fn decimal_ceil(r: &BigRational, digits: u32) -> String {
    let scale = num_traits::pow(BigInt::from(10), digits as usize);
    let scaled = r * BigRational::from_integer(scale.clone());
    let up = scaled.ceil().to_integer();
    format_scaled(&up, digits)
}

fn format_scaled(v: &BigInt, digits: u32) -> String {
    let neg = v.is_negative();
    let s = v.abs().to_string();
    let d = digits as usize;
    let padded = if s.len() <= d { format!("{}{}", "0".repeat(d + 1 - s.len()), s) } else { s };
    let (i, f) = padded.split_at(padded.len() - d);
    let sign = if neg { "-" } else { "" };
    if d == 0 {
        format!("{sign}{i}")
    } else {
        format!("{sign}{i}.{f}")
    }
}

pub fn rational_string(r: &BigRational) -> String {
    if r.denom().is_one() {
        format!("{}/1", r.numer())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}
