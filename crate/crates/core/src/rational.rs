//! Exact rational numbers over `i64`.
//!
//! Values are always kept in lowest terms with a positive denominator, so
//! structural equality is numeric equality and the derived hash/ordering
//! helpers can be trusted. Every arithmetic operation is checked; overflow
//! surfaces as [`Error::Overflow`] instead of wrapping.

use core::cmp::Ordering;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "(i64, i64)", into = "(i64, i64)")]
pub struct Rational {
    num: i64,
    den: i64,
}

fn gcd(mut a: i64, mut b: i64) -> i64 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl Rational {
    pub const ZERO: Rational = Rational { num: 0, den: 1 };
    pub const ONE: Rational = Rational { num: 1, den: 1 };

    pub const fn from_int(n: i64) -> Self {
        Rational { num: n, den: 1 }
    }

    /// Builds `num / den` reduced to lowest terms.
    pub fn new(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(Error::DivisionByZero);
        }
        if num == i64::MIN || den == i64::MIN {
            return Err(Error::Overflow);
        }
        let g = gcd(num, den);
        let (mut n, mut d) = (num / g.max(1), den / g.max(1));
        if d < 0 {
            n = -n;
            d = -d;
        }
        Ok(Rational { num: n, den: d })
    }

    pub fn numerator(self) -> i64 {
        self.num
    }

    pub fn denominator(self) -> i64 {
        self.den
    }

    pub fn is_integer(self) -> bool {
        self.den == 1
    }

    pub fn is_zero(self) -> bool {
        self.num == 0
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn checked_add(self, rhs: Self) -> Result<Self> {
        let g = gcd(self.den, rhs.den);
        let l = self.den / g;
        let r = rhs.den / g;
        let a = self.num.checked_mul(r).ok_or(Error::Overflow)?;
        let b = rhs.num.checked_mul(l).ok_or(Error::Overflow)?;
        let num = a.checked_add(b).ok_or(Error::Overflow)?;
        let den = self.den.checked_mul(r).ok_or(Error::Overflow)?;
        Rational::new(num, den)
    }

    pub fn checked_sub(self, rhs: Self) -> Result<Self> {
        let neg = Rational {
            num: rhs.num.checked_neg().ok_or(Error::Overflow)?,
            den: rhs.den,
        };
        self.checked_add(neg)
    }

    pub fn checked_mul(self, rhs: Self) -> Result<Self> {
        // cross-reduce first to keep intermediates small
        let g1 = gcd(self.num, rhs.den).max(1);
        let g2 = gcd(rhs.num, self.den).max(1);
        let num = (self.num / g1)
            .checked_mul(rhs.num / g2)
            .ok_or(Error::Overflow)?;
        let den = (self.den / g2)
            .checked_mul(rhs.den / g1)
            .ok_or(Error::Overflow)?;
        Rational::new(num, den)
    }

    pub fn checked_div(self, rhs: Self) -> Result<Self> {
        if rhs.num == 0 {
            return Err(Error::DivisionByZero);
        }
        let recip = Rational::new(rhs.den, rhs.num)?;
        self.checked_mul(recip)
    }
}

impl From<i64> for Rational {
    fn from(n: i64) -> Self {
        Rational::from_int(n)
    }
}

impl TryFrom<(i64, i64)> for Rational {
    type Error = Error;

    fn try_from((n, d): (i64, i64)) -> Result<Self> {
        Rational::new(n, d)
    }
}

impl From<Rational> for (i64, i64) {
    fn from(r: Rational) -> Self {
        (r.num, r.den)
    }
}

impl Ord for Rational {
    fn cmp(&self, other: &Self) -> Ordering {
        // denominators are positive, so cross multiplication preserves order
        let l = self.num as i128 * other.den as i128;
        let r = other.num as i128 * self.den as i128;
        l.cmp(&r)
    }
}

impl PartialOrd for Rational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d).unwrap()
    }

    #[test]
    fn reduces_to_lowest_terms() {
        assert_eq!(r(6, 4), r(3, 2));
        assert_eq!(r(3, -6).numerator(), -1);
        assert_eq!(r(3, -6).denominator(), 2);
        assert_eq!(r(0, -5), Rational::ZERO);
    }

    #[test]
    fn zero_denominator_rejected() {
        assert_eq!(Rational::new(1, 0), Err(Error::DivisionByZero));
        assert_eq!(
            Rational::ONE.checked_div(Rational::ZERO),
            Err(Error::DivisionByZero)
        );
    }

    #[test]
    fn arithmetic_is_exact() {
        let half = r(1, 2);
        let third = r(1, 3);
        assert_eq!(half.checked_add(third).unwrap(), r(5, 6));
        assert_eq!(half.checked_sub(third).unwrap(), r(1, 6));
        assert_eq!(half.checked_mul(third).unwrap(), r(1, 6));
        assert_eq!(half.checked_div(third).unwrap(), r(3, 2));
        assert_eq!(r(96, 1).checked_div(r(4, 1)).unwrap(), Rational::from(24));
    }

    #[test]
    fn overflow_is_reported() {
        let big = Rational::from(i64::MAX);
        assert_eq!(big.checked_add(Rational::ONE), Err(Error::Overflow));
        assert_eq!(big.checked_mul(Rational::from(2)), Err(Error::Overflow));
    }

    #[test]
    fn display_omits_unit_denominator() {
        assert_eq!(alloc::format!("{}", r(24, 1)), "24");
        assert_eq!(alloc::format!("{}", r(5, 2)), "5/2");
        assert_eq!(alloc::format!("{}", r(-5, 2)), "-5/2");
    }

    #[test]
    fn ordering_matches_value() {
        assert!(r(1, 3) < r(1, 2));
        assert!(r(-1, 2) < Rational::ZERO);
        assert_eq!(r(2, 4).cmp(&r(1, 2)), Ordering::Equal);
    }
}
