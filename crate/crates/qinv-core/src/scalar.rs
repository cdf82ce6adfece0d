//! Scalar abstraction for the exact numeric kernels.
//!
//! Everything user-facing runs over arbitrary precision rationals, but the
//! linear algebra and value iteration kernels only need a field with
//! comparisons, so they are written against the [`Scalar`] trait.

use num::{BigInt, BigRational};
use num_traits::{One, Signed, Zero};

/// Exact rational number, the concrete scalar used throughout.
pub type Rat = BigRational;

/// An ordered field of exact scalars.
pub trait Scalar:
    Clone
    + PartialEq
    + PartialOrd
    + Zero
    + One
    + Signed
    + std::ops::Div<Output = Self>
    + std::fmt::Debug
{
    fn from_u64(n: u64) -> Self;

    /// Exact quotient of two integers; `d` must be nonzero.
    fn ratio(n: i64, d: i64) -> Self;
}

impl Scalar for Rat {
    fn from_u64(n: u64) -> Self {
        Rat::from_integer(BigInt::from(n))
    }

    fn ratio(n: i64, d: i64) -> Self {
        Rat::new(BigInt::from(n), BigInt::from(d))
    }
}

/// Renders a rational as `p/q`, or just `p` for integers.
pub fn display_rat(r: &Rat) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses `p/q`, a plain integer, or a decimal literal such as `0.999`
/// into an exact rational.
pub fn parse_rat(text: &str) -> Result<Rat, String> {
    let text = text.trim();
    if let Some((n, d)) = text.split_once('/') {
        let numer: BigInt = n.trim().parse().map_err(|_| format!("bad numerator: {n}"))?;
        let denom: BigInt = d.trim().parse().map_err(|_| format!("bad denominator: {d}"))?;
        if denom.is_zero() {
            return Err(format!("zero denominator: {text}"));
        }
        return Ok(Rat::new(numer, denom));
    }
    if let Some((whole, frac)) = text.split_once('.') {
        let negative = whole.trim_start().starts_with('-');
        let whole_part: BigInt = if whole == "-" || whole.is_empty() {
            BigInt::from(0)
        } else {
            whole.parse().map_err(|_| format!("bad number: {text}"))?
        };
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(format!("bad number: {text}"));
        }
        let frac_num: BigInt = frac.parse().map_err(|_| format!("bad number: {text}"))?;
        let scale = BigInt::from(10u32).pow(frac.len() as u32);
        let abs = Rat::from_integer(whole_part.abs()) + Rat::new(frac_num, scale);
        return Ok(if negative { -abs } else { abs });
    }
    let n: BigInt = text.parse().map_err(|_| format!("bad number: {text}"))?;
    Ok(Rat::from_integer(n))
}
