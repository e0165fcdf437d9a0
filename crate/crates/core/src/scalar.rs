//! Numeric backends shared by every geometric routine.
//!
//! Two scalars are supported: `f64` for the general solver and
//! [`Rational`] (arbitrary precision) for anything that must be exact.

use std::fmt::{Debug, Display};
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Arbitrary precision rational number.
pub type Rational = BigRational;

/// Field operations plus the handful of conversions the grid code needs.
pub trait Scalar:
    Clone
    + Debug
    + Display
    + PartialOrd
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
{
    /// `true` when arithmetic is exact.
    const EXACT: bool;

    fn from_ratio(num: i64, den: i64) -> Self;

    fn from_int(v: i64) -> Self {
        Self::from_ratio(v, 1)
    }

    fn to_f64(&self) -> f64;

    /// Largest integer not greater than `self`.
    fn floor_i64(&self) -> i64;

    fn abs(&self) -> Self {
        if *self < Self::zero() {
            -self.clone()
        } else {
            self.clone()
        }
    }

    fn max_of(a: Self, b: Self) -> Self {
        if b > a {
            b
        } else {
            a
        }
    }

    fn min_of(a: Self, b: Self) -> Self {
        if b < a {
            b
        } else {
            a
        }
    }

    /// Slack tolerated when checking a coordinate sum; zero for exact types.
    fn sum_slack() -> Self;

    /// Most negative entry tolerated (and clamped) by [`crate::make_point`].
    fn negative_slack() -> Self;
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn floor_i64(&self) -> i64 {
        self.floor() as i64
    }

    fn sum_slack() -> Self {
        1e-9
    }

    fn negative_slack() -> Self {
        1e-9
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn floor_i64(&self) -> i64 {
        self.floor()
            .to_integer()
            .to_i64()
            .expect("floor out of i64 range")
    }

    fn abs(&self) -> Self {
        Signed::abs(self)
    }

    fn sum_slack() -> Self {
        Self::zero()
    }

    fn negative_slack() -> Self {
        Self::zero()
    }
}

/// Formats a rational as `p/q` (or `p` when the denominator is one).
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses `p/q`, an integer, or a finite decimal such as `0.125`.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let text = text.trim();
    if let Some((p, q)) = text.split_once('/') {
        let p: BigInt = p.trim().parse().ok()?;
        let q: BigInt = q.trim().parse().ok()?;
        if q.is_zero() {
            return None;
        }
        return Some(BigRational::new(p, q));
    }
    if let Some((int, frac)) = text.split_once('.') {
        let negative = int.starts_with('-');
        let digits = format!("{}{}", int.trim_start_matches(['-', '+']), frac);
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let num: BigInt = digits.parse().ok()?;
        let den = num_traits::pow(BigInt::from(10), frac.len());
        let r = BigRational::new(num, den);
        return Some(if negative { -r } else { r });
    }
    let v: BigInt = text.parse().ok()?;
    Some(BigRational::from_integer(v))
}

/// Max-norm distance between two coordinate slices.
pub fn max_norm_dist<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter()
        .zip(b)
        .fold(S::zero(), |acc, (x, y)| S::max_of(acc, (x.clone() - y.clone()).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_round_trip_text() {
        let r = Rational::from_ratio(-6, 16);
        assert_eq!(format_rational(&r), "-3/8");
        assert_eq!(parse_rational("-3/8"), Some(r));
        assert_eq!(parse_rational("0.125"), Some(Rational::from_ratio(1, 8)));
        assert_eq!(parse_rational("-0.5"), Some(Rational::from_ratio(-1, 2)));
        assert_eq!(parse_rational("4"), Some(Rational::from_int(4)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("abc"), None);
    }

    #[test]
    fn floors() {
        assert_eq!(Rational::from_ratio(-1, 3).floor_i64(), -1);
        assert_eq!(Rational::from_ratio(7, 2).floor_i64(), 3);
        assert_eq!(2.9f64.floor_i64(), 2);
    }

    #[test]
    fn distance() {
        let a = [0.5, 0.25, 0.25];
        let b = [0.25, 0.5, 0.25];
        assert_eq!(max_norm_dist(&a, &b), 0.25);
    }
}
