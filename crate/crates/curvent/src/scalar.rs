//! Scalar abstraction so the measure, transport and certifier layers run
//! either in floating point or in exact rational arithmetic.
//!
//! The float instantiation is the workhorse. The rational ones exist
//! because several certified constants are exact algebraic identities
//! (the product-model constant equals the minimal marginal weight, for
//! instance) and the tests pin them with `==`, not with a tolerance.
//!
//! [`Rat`] keeps numerators and denominators in `i128`; it is fast and
//! enough for small certified instances, and debug builds trap on
//! overflow. [`BigRat`] never overflows and is the safe choice for
//! untrusted input at the cost of allocation per operation.

use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::{Num, Signed, ToPrimitive};
use std::fmt::{Debug, Display};

/// Exact rationals over `i128`.
pub type Rat = Ratio<i128>;

/// Arbitrary-precision rationals.
pub type BigRat = Ratio<BigInt>;

/// Field operations plus the conversions the numeric layers need.
///
/// `default_tol` is the comparison slack: zero for exact types, a small
/// float for `f64`. Code that branches on feasibility or equality always
/// goes through it, so the same algorithm is a decision procedure over
/// rationals and a tolerance-based solver over floats.
pub trait Scalar:
    Num + Signed + PartialOrd + Clone + Debug + Display + Send + Sync + 'static
{
    fn from_int(n: i64) -> Self;

    /// Exact embedding of `num/den`; `den` must be positive.
    fn from_ratio(num: i64, den: i64) -> Self;

    fn to_f64(&self) -> f64;

    /// Whether comparisons on this type are exact.
    fn exact() -> bool;

    /// Comparison slack used by feasibility checks.
    fn default_tol() -> Self;
}

impl Scalar for f64 {
    fn from_int(n: i64) -> Self {
        n as f64
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        assert!(den > 0, "denominator must be positive");
        num as f64 / den as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn exact() -> bool {
        false
    }

    fn default_tol() -> Self {
        1e-12
    }
}

impl Scalar for Rat {
    fn from_int(n: i64) -> Self {
        Ratio::from_integer(n as i128)
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        assert!(den > 0, "denominator must be positive");
        Ratio::new(num as i128, den as i128)
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn exact() -> bool {
        true
    }

    fn default_tol() -> Self {
        Ratio::from_integer(0)
    }
}

impl Scalar for BigRat {
    fn from_int(n: i64) -> Self {
        Ratio::from_integer(BigInt::from(n))
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        assert!(den > 0, "denominator must be positive");
        Ratio::new(BigInt::from(num), BigInt::from(den))
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn exact() -> bool {
        true
    }

    fn default_tol() -> Self {
        Ratio::from_integer(BigInt::from(0))
    }
}

/// Parses `"3/10"`, `"0.3"` or `"3"` into a scalar, exactly for rational
/// types (decimal strings become tenth-power fractions, never floats).
pub fn parse_number<S: Scalar>(s: &str) -> Result<S> {
    let s = s.trim();
    if let Some((num, den)) = s.split_once('/') {
        let num: i64 = num
            .trim()
            .parse()
            .map_err(|_| Error::usage(format!("bad numerator in {s:?}")))?;
        let den: i64 = den
            .trim()
            .parse()
            .map_err(|_| Error::usage(format!("bad denominator in {s:?}")))?;
        if den == 0 {
            return Err(Error::usage(format!("zero denominator in {s:?}")));
        }
        let (num, den) = if den < 0 { (-num, -den) } else { (num, den) };
        return Ok(S::from_ratio(num, den));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        let sign = if whole.trim_start().starts_with('-') { -1 } else { 1 };
        let whole: i64 = if whole.is_empty() || whole == "-" {
            0
        } else {
            whole
                .parse()
                .map_err(|_| Error::usage(format!("bad number {s:?}")))?
        };
        let digits: i64 = if frac.is_empty() {
            0
        } else {
            frac.parse()
                .map_err(|_| Error::usage(format!("bad number {s:?}")))?
        };
        if digits < 0 {
            return Err(Error::usage(format!("bad number {s:?}")));
        }
        let den = 10i64
            .checked_pow(frac.len() as u32)
            .ok_or_else(|| Error::usage(format!("too many decimal places in {s:?}")))?;
        return Ok(S::from_ratio(whole * den + sign * digits, den));
    }
    let n: i64 = s
        .parse()
        .map_err(|_| Error::usage(format!("bad number {s:?}")))?;
    Ok(S::from_int(n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_embedding_is_exact() {
        let third: Rat = Scalar::from_ratio(1, 3);
        assert_eq!(third + third + third, Rat::from_int(1));
        let third: BigRat = Scalar::from_ratio(1, 3);
        let one = BigRat::from_int(1);
        assert_eq!(third.clone() + third.clone() + third, one);
    }

    #[test]
    fn parse_number_handles_fractions_and_decimals() {
        let x: Rat = parse_number("3/10").unwrap();
        assert_eq!(x, Rat::from_ratio(3, 10));
        let y: Rat = parse_number("0.3").unwrap();
        assert_eq!(y, x);
        let z: Rat = parse_number("-1.25").unwrap();
        assert_eq!(z, Rat::from_ratio(-5, 4));
        let w: f64 = parse_number("7").unwrap();
        assert_eq!(w, 7.0);
        assert!(parse_number::<f64>("1/0").is_err());
    }

    #[test]
    fn float_tolerance_is_small_but_nonzero() {
        assert!(f64::default_tol() > 0.0);
        assert!(f64::default_tol() < 1e-9);
        assert_eq!(Rat::default_tol(), Rat::from_int(0));
    }
}
