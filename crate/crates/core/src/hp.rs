//! High-precision binary floats and the scalar abstraction shared by the
//! exact and floating-point code paths.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use dashu::base::Abs;
use dashu::float::FBig;
use dashu::rational::RBig;

use crate::field::FieldElement;

/// Default working precision in bits for floating-point fallbacks.
pub const HP_BITS: usize = 320;

/// Arithmetic needed by the perturbation and Padé engines.
pub trait Scalar: Clone + fmt::Debug + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self> {
    fn zero() -> Self;
    fn one() -> Self;
    fn from_rational(r: &RBig) -> Self;
    fn is_zero(&self) -> bool;
    fn to_f64(&self) -> f64;
}

impl Scalar for RBig {
    fn zero() -> Self {
        RBig::ZERO
    }
    fn one() -> Self {
        RBig::ONE
    }
    fn from_rational(r: &RBig) -> Self {
        r.clone()
    }
    fn is_zero(&self) -> bool {
        *self == RBig::ZERO
    }
    fn to_f64(&self) -> f64 {
        self.to_f64_fast()
    }
}

impl Scalar for FieldElement {
    fn zero() -> Self {
        FieldElement::zero()
    }
    fn one() -> Self {
        FieldElement::one()
    }
    fn from_rational(r: &RBig) -> Self {
        FieldElement::rational(r.clone())
    }
    fn is_zero(&self) -> bool {
        FieldElement::is_zero(self)
    }
    fn to_f64(&self) -> f64 {
        FieldElement::to_f64(self)
    }
}

/// Binary floating-point number with a fixed number of significant bits.
///
/// Results of arithmetic carry the larger precision of the two operands.
#[derive(Clone, PartialEq, Eq)]
pub struct Hp(FBig);

impl Hp {
    pub fn from_rational(r: &RBig, precision: usize) -> Self {
        Hp(r.to_float(precision).value())
    }

    pub fn from_f64(v: f64, precision: usize) -> Self {
        let f: FBig = FBig::try_from(v).expect("finite f64");
        Hp(f.with_precision(precision).value())
    }

    pub fn from_i64(v: i64, precision: usize) -> Self {
        Hp(FBig::from(v).with_precision(precision).value())
    }

    pub(crate) fn from_fbig(f: FBig, precision: usize) -> Self {
        Hp(f.with_precision(precision).value())
    }

    pub fn precision(&self) -> usize {
        self.0.precision()
    }

    pub fn sqrt(&self) -> Self {
        Hp(self.0.sqrt())
    }

    pub fn abs(&self) -> Self {
        Hp(self.0.clone().abs())
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().value()
    }

    pub fn is_zero(&self) -> bool {
        self.0 == FBig::<dashu::float::round::mode::Zero, 2>::ZERO
    }

    /// Decimal rendering with `digits` significant digits.
    pub fn to_decimal_string(&self, digits: usize) -> String {
        let d = self.0.to_decimal().value().with_precision(digits).value();
        d.to_string()
    }
}

impl fmt::Debug for Hp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Hp({})", self.to_decimal_string(30))
    }
}

impl fmt::Display for Hp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_decimal_string(30))
    }
}

impl PartialOrd for Hp {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.0.cmp(&other.0))
    }
}

impl Add for Hp {
    type Output = Hp;
    fn add(self, rhs: Hp) -> Hp {
        Hp(self.0 + rhs.0)
    }
}

impl Sub for Hp {
    type Output = Hp;
    fn sub(self, rhs: Hp) -> Hp {
        Hp(self.0 - rhs.0)
    }
}

impl Mul for Hp {
    type Output = Hp;
    fn mul(self, rhs: Hp) -> Hp {
        Hp(self.0 * rhs.0)
    }
}

impl Div for Hp {
    type Output = Hp;
    fn div(self, rhs: Hp) -> Hp {
        Hp(self.0 / rhs.0)
    }
}

impl Neg for Hp {
    type Output = Hp;
    fn neg(self) -> Hp {
        Hp(-self.0)
    }
}

impl Scalar for Hp {
    fn zero() -> Self {
        Hp::from_i64(0, HP_BITS)
    }
    fn one() -> Self {
        Hp::from_i64(1, HP_BITS)
    }
    fn from_rational(r: &RBig) -> Self {
        Hp::from_rational(r, HP_BITS)
    }
    fn is_zero(&self) -> bool {
        Hp::is_zero(self)
    }
    fn to_f64(&self) -> f64 {
        Hp::to_f64(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_precision() {
        let third = Hp::one() / Hp::from_i64(3, HP_BITS);
        assert_eq!(third.precision(), HP_BITS);
        let back = third * Hp::from_i64(3, HP_BITS);
        assert!((back - Hp::one()).abs() < Hp::from_f64(1e-90, HP_BITS));
    }

    #[test]
    fn sqrt_two() {
        let r = Hp::from_i64(2, 200).sqrt();
        assert_eq!(r.to_decimal_string(20), "1.4142135623730950488");
    }
}
