//! Scalar abstraction shared by the simulation and the exact lattice world.
//!
//! Everything that only needs ordered-field arithmetic (gains, stopping rules,
//! events, the lattice oracle) is written against [`Scalar`], so it runs on
//! `f32`, `f64` and exact rationals alike. Path simulation needs square roots
//! and logarithms and is written against [`Real`].

use std::fmt::{Debug, Display};

use num_rational::Rational64;
use num_traits::{Float, FloatConst, FromPrimitive, Num, Signed, ToPrimitive};

/// Ordered field element usable for path values, times and weights.
pub trait Scalar:
    Copy + Debug + Display + PartialOrd + Num + Signed + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// `true` when arithmetic is exact (no rounding).
    const EXACT: bool;

    /// Slack allowed when checking that probabilities sum to one.
    fn sum_tolerance() -> Self;

    /// Slack used when locating a time on a grid.
    fn grid_tolerance() -> Self;

    fn try_exp(self) -> Option<Self>;

    fn try_ln(self) -> Option<Self>;

    fn try_powf(self, exponent: Self) -> Option<Self>;

    /// Lossy conversion used by statistics and reports.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_usize_exact(n: usize) -> Self {
        Self::from_usize(n).expect("integer representable in scalar type")
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }
}

/// Floating-point scalar with the transcendental functions simulation needs.
pub trait Real: Scalar + Float + FloatConst {
    fn from_f64_lossy(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("finite float converts")
    }
}

macro_rules! impl_float_scalar {
    ($t:ty, $sum_tol:expr, $grid_tol:expr) => {
        impl Scalar for $t {
            const EXACT: bool = false;

            fn sum_tolerance() -> Self {
                $sum_tol
            }

            fn grid_tolerance() -> Self {
                $grid_tol
            }

            fn try_exp(self) -> Option<Self> {
                let y = self.exp();
                y.is_finite().then_some(y)
            }

            fn try_ln(self) -> Option<Self> {
                (self > 0.0).then(|| self.ln())
            }

            fn try_powf(self, exponent: Self) -> Option<Self> {
                let y = self.powf(exponent);
                y.is_finite().then_some(y)
            }
        }

        impl Real for $t {}
    };
}

impl_float_scalar!(f64, 1e-12, 1e-9);
impl_float_scalar!(f32, 1e-5, 1e-5);

impl Scalar for Rational64 {
    const EXACT: bool = true;

    fn sum_tolerance() -> Self {
        Rational64::from_integer(0)
    }

    fn grid_tolerance() -> Self {
        Rational64::from_integer(0)
    }

    fn try_exp(self) -> Option<Self> {
        None
    }

    fn try_ln(self) -> Option<Self> {
        None
    }

    /// Only integer exponents are exact.
    fn try_powf(self, exponent: Self) -> Option<Self> {
        if !exponent.is_integer() {
            return None;
        }
        let e = i32::try_from(*exponent.numer()).ok()?;
        if self == Rational64::from_integer(0) && e < 0 {
            return None;
        }
        Some(num_traits::pow::Pow::pow(self, e))
    }
}

/// Parses a decimal (`0.25`, `-3`, `1e-3`) or ratio (`1/3`) literal.
pub fn parse_scalar<T: Scalar>(text: &str) -> Option<T> {
    let text = text.trim();
    if let Some((num, den)) = text.split_once('/') {
        let n: i64 = num.trim().parse().ok()?;
        let d: i64 = den.trim().parse().ok()?;
        if d == 0 {
            return None;
        }
        return Some(T::from_i64(n)? / T::from_i64(d)?);
    }
    if T::EXACT {
        parse_decimal_exact(text)
    } else {
        let x: f64 = text.parse().ok()?;
        x.is_finite().then(|| T::from_f64(x)).flatten()
    }
}

fn parse_decimal_exact<T: Scalar>(text: &str) -> Option<T> {
    let (negative, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.strip_prefix('+').unwrap_or(text)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: i64 = if digits.is_empty() { 0 } else { digits.parse().ok()? };
    let denom = 10_i64.checked_pow(u32::try_from(frac_part.len()).ok()?)?;
    let value = T::from_i64(numer)? / T::from_i64(denom)?;
    Some(if negative { -value } else { value })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_ratios_and_decimals_exactly() {
        let r: Rational64 = parse_scalar("1/3").unwrap();
        assert_eq!(r, Rational64::new(1, 3));
        let d: Rational64 = parse_scalar("-0.25").unwrap();
        assert_eq!(d, Rational64::new(-1, 4));
        let f: f64 = parse_scalar("1e-3").unwrap();
        assert_eq!(f, 1e-3);
        assert!(parse_scalar::<Rational64>("1e-3").is_none());
        assert!(parse_scalar::<f64>("x").is_none());
        assert!(parse_scalar::<f64>("1/0").is_none());
    }

    #[test]
    fn rational_power_is_exact_for_integer_exponents() {
        let x = Rational64::new(2, 3);
        assert_eq!(x.try_powf(Rational64::from_integer(-2)), Some(Rational64::new(9, 4)));
        assert_eq!(x.try_powf(Rational64::new(1, 2)), None);
        assert_eq!(x.try_exp(), None);
    }

    #[test]
    fn float_transcendentals_reject_non_finite() {
        assert_eq!(1000.0_f64.try_exp(), None);
        assert_eq!(0.0_f64.try_ln(), None);
        assert_eq!(4.0_f64.try_powf(0.5), Some(2.0));
    }
}
