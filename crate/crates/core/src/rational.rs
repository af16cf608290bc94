//! Exact rational numbers used for every time and work quantity.
//!
//! Values are always kept in lowest terms with a positive denominator, so
//! equality and ordering are structural. The textual form is `"a"` or
//! `"a/b"`, which is also the serde representation.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Rational(BigRational);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed rational {0:?}: expected \"a\" or \"a/b\" with b > 0")]
pub struct ParseRationalError(pub String);

impl Rational {
    pub fn new(numer: i64, denom: i64) -> Self {
        assert!(denom != 0, "zero denominator");
        Rational(BigRational::new(numer.into(), denom.into()))
    }

    pub fn from_int(v: i64) -> Self {
        Rational(BigRational::from_integer(v.into()))
    }

    pub fn zero() -> Self {
        Rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Rational(BigRational::one())
    }

    /// `2^exp`, exponent may be negative.
    pub fn pow2(exp: i32) -> Self {
        let two = BigInt::from(2u32);
        if exp >= 0 {
            Rational(BigRational::from_integer(num_traits::pow(two, exp as usize)))
        } else {
            Rational(BigRational::new(
                BigInt::one(),
                num_traits::pow(two, (-exp) as usize),
            ))
        }
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn recip(&self) -> Self {
        Rational(self.0.recip())
    }

    pub fn abs(&self) -> Self {
        Rational(self.0.abs())
    }

    pub fn floor(&self) -> Self {
        Rational(self.0.floor())
    }

    pub fn ceil(&self) -> Self {
        Rational(self.0.ceil())
    }

    pub fn min(self, other: Self) -> Self {
        std::cmp::min(self, other)
    }

    pub fn max(self, other: Self) -> Self {
        std::cmp::max(self, other)
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Integer value when the number is an integer that fits in `i64`.
    pub fn to_i64(&self) -> Option<i64> {
        if self.0.is_integer() {
            self.0.numer().to_i64()
        } else {
            None
        }
    }

    /// Exponent `e` with `self == 2^e`, if `self` is a power of two.
    pub fn log2_exact(&self) -> Option<i32> {
        if !self.is_positive() {
            return None;
        }
        let n = self.0.numer();
        let d = self.0.denom();
        let is_pow2 = |x: &BigInt| {
            let m = x.magnitude();
            m.count_ones() == 1
        };
        if d.is_one() && is_pow2(n) {
            Some(n.bits() as i32 - 1)
        } else if n.is_one() && is_pow2(d) {
            Some(-(d.bits() as i32 - 1))
        } else {
            None
        }
    }

    /// Smallest power of two `>= self`; `self` must be positive.
    pub fn ceil_pow2(&self) -> (Self, i32) {
        assert!(self.is_positive(), "ceil_pow2 of non-positive value");
        let mut e: i32 = {
            // bits(n) - bits(d) is within one of log2(n/d)
            let nb = self.0.numer().bits() as i32;
            let db = self.0.denom().bits() as i32;
            nb - db - 1
        };
        while Rational::pow2(e) < *self {
            e += 1;
        }
        while Rational::pow2(e - 1) >= *self {
            e -= 1;
        }
        (Rational::pow2(e), e)
    }

    /// Largest power of two `<= self`; `self` must be positive.
    pub fn floor_pow2(&self) -> (Self, i32) {
        let (c, e) = self.ceil_pow2();
        if c == *self {
            (c, e)
        } else {
            (Rational::pow2(e - 1), e - 1)
        }
    }

    /// Exact integer square root when `self` is a perfect square of a rational.
    pub fn sqrt_exact(&self) -> Option<Self> {
        if self.is_negative() {
            return None;
        }
        let n = self.0.numer().sqrt();
        let d = self.0.denom().sqrt();
        if &(&n * &n) == self.0.numer() && &(&d * &d) == self.0.denom() {
            Some(Rational(BigRational::new(n, d)))
        } else {
            None
        }
    }

    pub fn lcm_denom(values: &[Rational]) -> BigInt {
        values
            .iter()
            .fold(BigInt::one(), |acc, v| acc.lcm(v.0.denom()))
    }
}

impl From<i64> for Rational {
    fn from(v: i64) -> Self {
        Rational::from_int(v)
    }
}

impl From<i32> for Rational {
    fn from(v: i32) -> Self {
        Rational::from_int(v as i64)
    }
}

impl From<usize> for Rational {
    fn from(v: usize) -> Self {
        Rational(BigRational::from_integer(BigInt::from(v)))
    }
}

impl From<BigInt> for Rational {
    fn from(v: BigInt) -> Self {
        Rational(BigRational::from_integer(v))
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Rational {
    type Err = ParseRationalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseRationalError(s.to_string());
        let valid_int = |t: &str| {
            let digits = t.strip_prefix('-').unwrap_or(t);
            !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit())
        };
        match s.split_once('/') {
            None => {
                if !valid_int(s) {
                    return Err(err());
                }
                let n: BigInt = s.parse().map_err(|_| err())?;
                Ok(Rational::from(n))
            }
            Some((a, b)) => {
                if !valid_int(a) || !b.bytes().all(|c| c.is_ascii_digit()) || b.is_empty() {
                    return Err(err());
                }
                let n: BigInt = a.parse().map_err(|_| err())?;
                let d: BigInt = b.parse().map_err(|_| err())?;
                if d.is_zero() {
                    return Err(err());
                }
                Ok(Rational(BigRational::new(n, d)))
            }
        }
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

macro_rules! forward_binop {
    ($tr:ident, $method:ident) => {
        impl $tr<Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational(self.0.$method(rhs.0))
            }
        }
        impl<'a> $tr<&'a Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: &'a Rational) -> Rational {
                Rational(self.0.$method(&rhs.0))
            }
        }
        impl<'a> $tr<Rational> for &'a Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational((&self.0).$method(rhs.0))
            }
        }
        impl<'a, 'b> $tr<&'b Rational> for &'a Rational {
            type Output = Rational;
            fn $method(self, rhs: &'b Rational) -> Rational {
                Rational((&self.0).$method(&rhs.0))
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
forward_binop!(Div, div);

impl AddAssign<&Rational> for Rational {
    fn add_assign(&mut self, rhs: &Rational) {
        self.0 += &rhs.0;
    }
}

impl AddAssign<Rational> for Rational {
    fn add_assign(&mut self, rhs: Rational) {
        self.0 += rhs.0;
    }
}

impl SubAssign<&Rational> for Rational {
    fn sub_assign(&mut self, rhs: &Rational) {
        self.0 -= &rhs.0;
    }
}

impl SubAssign<Rational> for Rational {
    fn sub_assign(&mut self, rhs: Rational) {
        self.0 -= rhs.0;
    }
}

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}

impl Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), |a, b| a + b)
    }
}

impl<'a> Sum<&'a Rational> for Rational {
    fn sum<I: Iterator<Item = &'a Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), |a, b| a + b)
    }
}

/// Shorthand for building rationals in code and tests: `q(3, 2)` is 3/2.
pub fn q(numer: i64, denom: i64) -> Rational {
    Rational::new(numer, denom)
}

/// Rational stand-in for the golden ratio (Fibonacci convergent 987/610).
/// Separation used for "infinitesimally later" arrivals: 2^-20.
pub fn eps() -> Rational {
    Rational::pow2(-20)
}

pub fn phi_hat() -> Rational {
    q(987, 610)
}

/// Rational stand-in for sqrt(3).
pub fn sqrt3_hat() -> Rational {
    q(26, 15)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parse_and_display_lowest_terms() {
        let r: Rational = "6/4".parse().unwrap();
        assert_eq!(r.to_string(), "3/2");
        assert_eq!("4/2".parse::<Rational>().unwrap().to_string(), "2");
        assert_eq!("-3".parse::<Rational>().unwrap(), Rational::from_int(-3));
        assert!("1/0".parse::<Rational>().is_err());
        assert!("1.5".parse::<Rational>().is_err());
        assert!("".parse::<Rational>().is_err());
        assert!("1/-2".parse::<Rational>().is_err());
    }

    #[test]
    fn powers_of_two() {
        assert_eq!(q(3, 1).ceil_pow2(), (q(4, 1), 2));
        assert_eq!(q(4, 1).ceil_pow2(), (q(4, 1), 2));
        assert_eq!(q(1, 3).ceil_pow2(), (q(1, 2), -1));
        assert_eq!(q(5, 1).floor_pow2(), (q(4, 1), 2));
        assert_eq!(q(1, 2).log2_exact(), Some(-1));
        assert_eq!(q(16, 1).log2_exact(), Some(4));
        assert_eq!(q(3, 4).log2_exact(), None);
        assert_eq!(Rational::pow2(-3), q(1, 8));
    }

    #[test]
    fn exact_square_roots() {
        assert_eq!(q(16, 1).sqrt_exact(), Some(q(4, 1)));
        assert_eq!(q(9, 4).sqrt_exact(), Some(q(3, 2)));
        assert_eq!(q(8, 1).sqrt_exact(), None);
    }

    #[test]
    fn convergents_are_close() {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((phi_hat().to_f64() - phi).abs() < 3e-6);
        // 26/15 is off by about 1.28e-3
        assert!((sqrt3_hat().to_f64() - 3f64.sqrt()).abs() < 1.3e-3);
    }

    proptest! {
        #[test]
        fn product_with_reciprocal_is_one(a in -1000i64..1000, b in 1i64..1000) {
            prop_assume!(a != 0);
            let x = q(a, b);
            prop_assert_eq!(&x * &x.recip(), Rational::one());
        }

        #[test]
        fn text_round_trip(a in -100000i64..100000, b in 1i64..100000) {
            let x = q(a, b);
            let back: Rational = x.to_string().parse().unwrap();
            prop_assert_eq!(back, x);
        }
    }
}
