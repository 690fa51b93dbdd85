//! Exact arithmetic on dyadic rationals `m / 2^e`.
//!
//! Norms, thresholds, quantization grids and witness gaps in the real-valued
//! pipeline are all dyadic, and correctness hinges on comparing them for
//! exact equality or order. Floating point would make the boundary cases
//! unfalsifiable, so everything boundary-sensitive runs on this type;
//! `f64` appears only in reports and statistics.

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DyadicError {
    #[error("empty dyadic literal")]
    Empty,
    #[error("bad dyadic literal {0:?}")]
    BadLiteral(String),
    #[error("denominator of {0:?} is not a power of two")]
    NotDyadic(String),
    #[error("{0:?} is not finite")]
    NotFinite(String),
}

/// A dyadic rational `mantissa / 2^exponent`, kept canonical: the fraction is
/// fully reduced (the mantissa is odd whenever the exponent is positive) and
/// zero is always `0 / 2^0`. Canonical form makes the derived
/// `PartialEq`/`Hash` agree with numeric equality, and so with `Ord`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Dyadic {
    mantissa: BigInt,
    exponent: u32,
}

impl Dyadic {
    pub fn new(mantissa: BigInt, exponent: u32) -> Self {
        let mut d = Dyadic { mantissa, exponent };
        d.normalize();
        d
    }

    fn normalize(&mut self) {
        if self.mantissa.is_zero() {
            self.exponent = 0;
            return;
        }
        let tz = self.mantissa.trailing_zeros().unwrap_or(0);
        let drop = tz.min(u64::from(self.exponent)) as u32;
        if drop > 0 {
            self.mantissa = &self.mantissa >> drop;
            self.exponent -= drop;
        }
    }

    pub fn zero() -> Self {
        Dyadic { mantissa: BigInt::zero(), exponent: 0 }
    }

    pub fn one() -> Self {
        Dyadic::from_int(1)
    }

    pub fn from_int(n: i64) -> Self {
        Dyadic::new(BigInt::from(n), 0)
    }

    /// `num / 2^pow`.
    pub fn ratio(num: i64, pow: u32) -> Self {
        Dyadic::new(BigInt::from(num), pow)
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.mantissa.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.mantissa.is_positive()
    }

    pub fn abs(&self) -> Self {
        Dyadic { mantissa: self.mantissa.abs(), exponent: self.exponent }
    }

    /// `self / 2^k` (exact).
    pub fn div_pow2(&self, k: u32) -> Self {
        Dyadic::new(
            self.mantissa.clone(),
            self.exponent.checked_add(k).expect("dyadic exponent overflow"),
        )
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Dyadic::one();
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    pub fn mantissa(&self) -> &BigInt {
        &self.mantissa
    }

    pub fn exponent(&self) -> u32 {
        self.exponent
    }

    /// Exact conversion; every finite double is a dyadic rational.
    pub fn from_f64(v: f64) -> Option<Self> {
        if !v.is_finite() {
            return None;
        }
        let bits = v.to_bits();
        let negative = bits >> 63 == 1;
        let biased = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (mant, exp2) = if biased == 0 {
            (frac, -1074i64) // subnormal (covers 0.0)
        } else {
            ((1u64 << 52) | frac, biased - 1075)
        };
        let mut m = BigInt::from(mant);
        if negative {
            m = -m;
        }
        Some(if exp2 >= 0 {
            Dyadic::new(m << (exp2 as u64), 0)
        } else {
            Dyadic::new(m, (-exp2) as u32)
        })
    }

    /// Nearest-ish double; good to a few ulps, for reports only.
    pub fn to_f64(&self) -> f64 {
        if self.mantissa.is_zero() {
            return 0.0;
        }
        let bits = self.mantissa.bits();
        let shift = bits.saturating_sub(63);
        let head = (&self.mantissa >> shift).to_i64().unwrap_or(i64::MAX) as f64;
        let e = shift as i64 - i64::from(self.exponent);
        head * 2f64.powi(e.clamp(-1200, 1100) as i32)
    }

    /// `floor(self / rhs)` for `self >= 0`, `rhs > 0`.
    pub fn floor_div(&self, rhs: &Dyadic) -> BigInt {
        debug_assert!(!self.is_negative() && rhs.is_positive());
        let num: BigInt = &self.mantissa << u64::from(rhs.exponent);
        let den: BigInt = &rhs.mantissa << u64::from(self.exponent);
        num / den // truncation = floor for nonnegative operands
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exponent == 0 {
            write!(f, "{}", self.mantissa)
        } else {
            write!(f, "{}/2^{}", self.mantissa, self.exponent)
        }
    }
}

impl fmt::Debug for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dyadic({self})")
    }
}

impl FromStr for Dyadic {
    type Err = DyadicError;

    /// Accepts integers (`3`, `-1`), dyadic fractions (`5/2^7`, `1/2`,
    /// `-3/8`; the denominator must be a power of two), and decimal
    /// literals (`0.25`, `0.3`). Decimals are read at double precision and
    /// converted exactly, so `0.3` denotes the double nearest 3/10.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err(DyadicError::Empty);
        }
        if let Some((num, den)) = s.split_once('/') {
            let mantissa = BigInt::from_str(num.trim())
                .map_err(|_| DyadicError::BadLiteral(s.to_string()))?;
            let den = den.trim();
            let exponent = if let Some(e) = den.strip_prefix("2^") {
                u32::from_str(e).map_err(|_| DyadicError::BadLiteral(s.to_string()))?
            } else {
                let d = u128::from_str(den).map_err(|_| DyadicError::BadLiteral(s.to_string()))?;
                if d == 0 || !d.is_power_of_two() {
                    return Err(DyadicError::NotDyadic(s.to_string()));
                }
                d.trailing_zeros()
            };
            return Ok(Dyadic::new(mantissa, exponent));
        }
        if s.contains('.') {
            let v = f64::from_str(s).map_err(|_| DyadicError::BadLiteral(s.to_string()))?;
            return Dyadic::from_f64(v).ok_or_else(|| DyadicError::NotFinite(s.to_string()));
        }
        let mantissa = BigInt::from_str(s).map_err(|_| DyadicError::BadLiteral(s.to_string()))?;
        Ok(Dyadic::new(mantissa, 0))
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let e = self.exponent.max(other.exponent);
        let lhs: BigInt = &self.mantissa << u64::from(e - self.exponent);
        let rhs: BigInt = &other.mantissa << u64::from(e - other.exponent);
        lhs.cmp(&rhs)
    }
}

impl Add for &Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: &Dyadic) -> Dyadic {
        let e = self.exponent.max(rhs.exponent);
        let lhs: BigInt = &self.mantissa << u64::from(e - self.exponent);
        let rhs: BigInt = &rhs.mantissa << u64::from(e - rhs.exponent);
        Dyadic::new(lhs + rhs, e)
    }
}

impl Sub for &Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: &Dyadic) -> Dyadic {
        self + &(-rhs)
    }
}

impl Mul for &Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: &Dyadic) -> Dyadic {
        Dyadic::new(
            &self.mantissa * &rhs.mantissa,
            self.exponent.checked_add(rhs.exponent).expect("dyadic exponent overflow"),
        )
    }
}

impl Neg for &Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        Dyadic { mantissa: -&self.mantissa, exponent: self.exponent }
    }
}

macro_rules! forward_owned {
    ($($trait:ident :: $method:ident),*) => {$(
        impl $trait for Dyadic {
            type Output = Dyadic;
            fn $method(self, rhs: Dyadic) -> Dyadic {
                (&self).$method(&rhs)
            }
        }
    )*};
}
forward_owned!(Add::add, Sub::sub, Mul::mul);

impl Neg for Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        -&self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> Dyadic {
        s.parse().unwrap()
    }

    #[test]
    fn canonical_form() {
        assert_eq!(Dyadic::new(BigInt::from(4), 3), Dyadic::ratio(1, 1));
        assert_eq!(Dyadic::new(BigInt::from(-6), 1), Dyadic::from_int(-3));
        assert_eq!(Dyadic::new(BigInt::zero(), 17), Dyadic::zero());
        assert_eq!(d("8/2^2"), Dyadic::from_int(2));
    }

    #[test]
    fn halving_an_even_integer_stays_canonical() {
        // 2 / 2^3 must come out as 1/4, or equality and order disagree
        let quarter = Dyadic::from_int(2).div_pow2(3);
        assert_eq!(quarter, Dyadic::ratio(1, 2));
        assert_eq!(quarter.cmp(&Dyadic::ratio(1, 2)), std::cmp::Ordering::Equal);
        assert_eq!(Dyadic::from_int(12).div_pow2(1), Dyadic::from_int(6));
    }

    #[test]
    fn parse_and_display_round_trip() {
        for s in ["0", "7", "-3", "5/2^7", "-9/2^3", "1/2^1"] {
            assert_eq!(d(s).to_string(), s);
            assert_eq!(d(&d(s).to_string()), d(s));
        }
        assert_eq!(d("1/2"), Dyadic::ratio(1, 1));
        assert_eq!(d("-3/8"), Dyadic::ratio(-3, 3));
        assert_eq!(d("0.25"), Dyadic::ratio(1, 2));
        assert_eq!(d("1/2").to_string(), "1/2^1");
        assert!("1/3".parse::<Dyadic>().is_err());
        assert!("".parse::<Dyadic>().is_err());
        assert!("x/2^2".parse::<Dyadic>().is_err());
    }

    #[test]
    fn decimal_literals_are_exact_doubles() {
        assert_eq!(d("0.3"), Dyadic::from_f64(0.3).unwrap());
        assert_eq!(d("0.3").to_string(), "5404319552844595/2^54");
        assert_eq!(Dyadic::from_f64(0.25).unwrap(), Dyadic::ratio(1, 2));
        assert_eq!(Dyadic::from_f64(-1.5).unwrap(), Dyadic::ratio(-3, 1));
        assert_eq!(Dyadic::from_f64(0.0).unwrap(), Dyadic::zero());
        assert!(Dyadic::from_f64(f64::INFINITY).is_none());
    }

    #[test]
    fn arithmetic() {
        assert_eq!(&d("1/2") + &d("1/2^2"), d("3/2^2"));
        assert_eq!(&d("1/2") - &d("1/2"), Dyadic::zero());
        assert_eq!(&d("3/2^2") * &d("1/2"), d("3/2^3"));
        assert_eq!(-&d("1/2"), d("-1/2"));
        assert_eq!(d("5/2^4").div_pow2(3), d("5/2^7"));
        assert_eq!(d("1/2").pow(3), d("1/2^3"));
        assert_eq!(d("-3/2^2").abs(), d("3/2^2"));
    }

    #[test]
    fn ordering() {
        assert!(d("1/2") < d("3/2^2"));
        assert!(d("-1/2") < Dyadic::zero());
        assert!(d("1/2^10") > Dyadic::zero());
        assert_eq!(d("1/2").cmp(&d("2/2^2")), Ordering::Equal);
    }

    #[test]
    fn floor_division() {
        // 0.3 / 0.25 -> 1, 0.9 / 0.25 -> 3 (quantization example pairs)
        assert_eq!(d("0.3").floor_div(&d("0.25")), BigInt::from(1));
        assert_eq!(d("0.9").floor_div(&d("0.25")), BigInt::from(3));
        assert_eq!(d("1").floor_div(&d("1/2^3")), BigInt::from(8));
        assert_eq!(d("7/2^3").floor_div(&d("7/2^3")), BigInt::from(1));
        assert_eq!(Dyadic::zero().floor_div(&d("1/2")), BigInt::zero());
    }

    #[test]
    fn to_f64_reporting() {
        assert_eq!(d("3/2^2").to_f64(), 0.75);
        assert_eq!(d("-1/2^1").to_f64(), -0.5);
        assert_eq!(Dyadic::zero().to_f64(), 0.0);
        // huge exponents underflow to zero instead of panicking
        let tiny = Dyadic::ratio(1, 0).div_pow2(100_000);
        assert_eq!(tiny.to_f64(), 0.0);
        let exact = Dyadic::from_f64(0.3).unwrap();
        assert_eq!(exact.to_f64(), 0.3);
    }
}
