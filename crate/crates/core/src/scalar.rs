use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, One, ToPrimitive};

pub type Rational = BigRational;

/// Arithmetic backend for branch sums: `f64` or exact `BigRational`.
pub trait Scalar: Num + Clone + Debug + PartialOrd + Send + Sync + 'static {
    fn from_ratio(num: i64, den: i64) -> Self;
    fn to_f64(&self) -> f64;
    fn is_negative(&self) -> bool {
        *self < Self::zero()
    }
    fn from_u64(n: u64) -> Self {
        Self::from_ratio(n as i64, 1)
    }
    fn half() -> Self {
        Self::from_ratio(1, 2)
    }
    fn pow2(exp: u32) -> Self {
        let mut acc = Self::one();
        let two = Self::from_ratio(2, 1);
        for _ in 0..exp {
            acc = acc * two.clone();
        }
        acc
    }
}

impl Scalar for f64 {
    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn pow2(exp: u32) -> Self {
        2f64.powi(exp as i32)
    }
}

impl Scalar for BigRational {
    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn pow2(exp: u32) -> Self {
        BigRational::from_integer(BigInt::one() << exp)
    }
}

/// `num/den` as an exact rational.
pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::from_ratio(num, den)
}

/// Exact rational value of a finite float.
pub fn rational_from_f64(x: f64) -> Option<Rational> {
    BigRational::from_f64(x)
}
