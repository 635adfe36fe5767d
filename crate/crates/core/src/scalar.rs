//! Scalar types the closed-form analytics can be evaluated over.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, Signed, ToPrimitive};

/// Real-valued scalar: `f32`, `f64`, or an exact rational.
pub trait Scalar: Num + Signed + Clone + PartialOrd + Debug {
    /// Value of a decimal as written. For rationals the shortest decimal
    /// representation of `x` is taken exactly, so `0.95` becomes `19/20`.
    fn from_decimal(x: f64) -> Self;

    fn from_u64(n: u64) -> Self;

    fn to_f64(&self) -> f64;
}

impl Scalar for f64 {
    fn from_decimal(x: f64) -> Self {
        x
    }

    fn from_u64(n: u64) -> Self {
        n as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for f32 {
    fn from_decimal(x: f64) -> Self {
        x as f32
    }

    fn from_u64(n: u64) -> Self {
        n as f32
    }

    fn to_f64(&self) -> f64 {
        f64::from(*self)
    }
}

impl Scalar for BigRational {
    fn from_decimal(x: f64) -> Self {
        assert!(x.is_finite(), "non-finite value {x}");
        // `{:e}` prints the shortest round-tripping mantissa and exponent.
        let text = format!("{x:e}");
        let (mantissa, exp) = text.split_once('e').expect("exponent form");
        let exp: i32 = exp.parse().expect("integer exponent");
        let (neg, mantissa) = match mantissa.strip_prefix('-') {
            Some(m) => (true, m),
            None => (false, mantissa),
        };
        let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
        let digits: BigInt = format!("{int}{frac}").parse().expect("decimal digits");
        let scale = exp - frac.len() as i32;
        let ten = BigInt::from(10);
        let mut r = if scale >= 0 {
            BigRational::from_integer(digits * num_traits::pow(ten, scale as usize))
        } else {
            BigRational::new(digits, num_traits::pow(ten, (-scale) as usize))
        };
        if neg {
            r = -r;
        }
        r
    }

    fn from_u64(n: u64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}
