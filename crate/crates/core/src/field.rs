//! Exact scalars in ℚ and in real quadratic fields ℚ(√D).

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use dashu::base::{Sign, SquareRootRem, UnsignedAbs};
use dashu::float::FBig;
use dashu::integer::{IBig, UBig};
use dashu::rational::RBig;
use thiserror::Error;

use crate::hp::Hp;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("cannot parse field element from {0:?}")]
    Parse(String),
    #[error("radicand {0} does not fit in 64 bits")]
    RadicandTooLarge(String),
    #[error("elements from different fields: sqrt({0}) and sqrt({1})")]
    Conflict(u64, u64),
}

/// A number `rat + surd·√radicand` with exact rational parts.
///
/// `radicand` is square-free and greater than one, or zero for a plain
/// rational (in which case `surd` is zero). Elements whose surd part cancels
/// are stored as plain rationals, so equality is structural.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FieldElement {
    rat: RBig,
    surd: RBig,
    radicand: u64,
}

impl FieldElement {
    pub fn zero() -> Self {
        Self::rational(RBig::ZERO)
    }

    pub fn one() -> Self {
        Self::rational(RBig::ONE)
    }

    pub fn rational(rat: RBig) -> Self {
        FieldElement { rat, surd: RBig::ZERO, radicand: 0 }
    }

    pub fn from_i64(v: i64) -> Self {
        Self::rational(RBig::from(v))
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        Self::rational(RBig::from_parts_signed(IBig::from(num), IBig::from(den)))
    }

    /// `rat + surd·√radicand`; `radicand` must already be square-free.
    pub fn new(rat: RBig, surd: RBig, radicand: u64) -> Self {
        if radicand == 0 || surd == RBig::ZERO {
            return Self::rational(rat);
        }
        debug_assert!(radicand > 1, "radicand must be square-free and > 1");
        FieldElement { rat, surd, radicand }
    }

    /// `√(q)` for a non-negative rational `q`, placed in its canonical field.
    pub fn sqrt_of(q: &RBig) -> Result<Self, FieldError> {
        assert!(q.sign() != Sign::Negative, "sqrt of a negative rational");
        if *q == RBig::ZERO {
            return Ok(Self::zero());
        }
        // √(p/d) = √(p·d) / d
        let p = q.numerator().clone().unsigned_abs();
        let d = q.denominator().clone();
        let prod = &p * &d;
        let (root, free) = square_free_split(&prod);
        let scale = RBig::from_parts(IBig::from(root), d);
        if free == UBig::ONE {
            return Ok(Self::rational(scale));
        }
        let radicand: u64 = free
            .clone()
            .try_into()
            .map_err(|_| FieldError::RadicandTooLarge(free.to_string()))?;
        Ok(Self::new(RBig::ZERO, scale, radicand))
    }

    pub fn rat(&self) -> &RBig {
        &self.rat
    }

    pub fn surd(&self) -> &RBig {
        &self.surd
    }

    pub fn radicand(&self) -> u64 {
        self.radicand
    }

    pub fn is_rational(&self) -> bool {
        self.radicand == 0
    }

    pub fn is_zero(&self) -> bool {
        self.radicand == 0 && self.rat == RBig::ZERO
    }

    /// Galois conjugate `rat − surd·√D`.
    pub fn conj(&self) -> Self {
        FieldElement { rat: self.rat.clone(), surd: -self.surd.clone(), radicand: self.radicand }
    }

    /// Field norm `rat² − surd²·D`.
    pub fn norm(&self) -> RBig {
        let d = RBig::from(self.radicand);
        &self.rat * &self.rat - &self.surd * &self.surd * d
    }

    pub fn sign(&self) -> Ordering {
        let a = rsign(&self.rat);
        let b = rsign(&self.surd);
        if self.radicand == 0 || b == Ordering::Equal {
            return a;
        }
        if a == Ordering::Equal || a == b {
            return b;
        }
        // opposite signs: compare rat² with surd²·D
        let lhs = &self.rat * &self.rat;
        let rhs = &self.surd * &self.surd * RBig::from(self.radicand);
        match lhs.cmp(&rhs) {
            Ordering::Greater => a,
            Ordering::Less => b,
            Ordering::Equal => Ordering::Equal,
        }
    }

    pub fn checked_radicand(&self, other: &Self) -> Result<u64, FieldError> {
        match (self.radicand, other.radicand) {
            (0, d) | (d, 0) => Ok(d),
            (a, b) if a == b => Ok(a),
            (a, b) => Err(FieldError::Conflict(a, b)),
        }
    }

    fn common(&self, other: &Self) -> u64 {
        match self.checked_radicand(other) {
            Ok(d) => d,
            Err(e) => panic!("{e}"),
        }
    }

    pub fn inv(&self) -> Self {
        assert!(!self.is_zero(), "division by zero field element");
        if self.radicand == 0 {
            return Self::rational(RBig::ONE / &self.rat);
        }
        let n = self.norm();
        Self::new(&self.rat / &n, -(&self.surd / &n), self.radicand)
    }

    pub fn to_f64(&self) -> f64 {
        let r = self.rat.to_f64_fast();
        if self.radicand == 0 {
            r
        } else {
            r + self.surd.to_f64_fast() * (self.radicand as f64).sqrt()
        }
    }

    /// Value rounded to a binary float of `precision` bits.
    pub fn to_hp(&self, precision: usize) -> Hp {
        let rat = Hp::from_rational(&self.rat, precision);
        if self.radicand == 0 {
            return rat;
        }
        let surd = Hp::from_rational(&self.surd, precision);
        let root = Hp::from_fbig(FBig::from(self.radicand), precision).sqrt();
        rat + surd * root
    }
}

fn rsign(r: &RBig) -> Ordering {
    match r.sign() {
        Sign::Negative => Ordering::Less,
        Sign::Positive if *r == RBig::ZERO => Ordering::Equal,
        Sign::Positive => Ordering::Greater,
    }
}

impl PartialOrd for FieldElement {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Numeric order. Panics when the two elements live in different fields.
impl Ord for FieldElement {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.clone() - other.clone()).sign()
    }
}

impl From<RBig> for FieldElement {
    fn from(r: RBig) -> Self {
        Self::rational(r)
    }
}

impl From<i64> for FieldElement {
    fn from(v: i64) -> Self {
        Self::from_i64(v)
    }
}

impl Add for FieldElement {
    type Output = FieldElement;
    fn add(self, rhs: Self) -> Self {
        if rhs.radicand == 0 && self.radicand == 0 {
            return Self::rational(self.rat + rhs.rat);
        }
        let d = self.common(&rhs);
        Self::new(self.rat + rhs.rat, self.surd + rhs.surd, d)
    }
}

impl Sub for FieldElement {
    type Output = FieldElement;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Neg for FieldElement {
    type Output = FieldElement;
    fn neg(self) -> Self {
        FieldElement { rat: -self.rat, surd: -self.surd, radicand: self.radicand }
    }
}

impl Mul for FieldElement {
    type Output = FieldElement;
    fn mul(self, rhs: Self) -> Self {
        if self.radicand == 0 && rhs.radicand == 0 {
            return Self::rational(self.rat * rhs.rat);
        }
        let d = self.common(&rhs);
        let dd = RBig::from(d);
        let rat = &self.rat * &rhs.rat + &self.surd * &rhs.surd * dd;
        let surd = &self.rat * &rhs.surd + &self.surd * &rhs.rat;
        Self::new(rat, surd, d)
    }
}

impl Div for FieldElement {
    type Output = FieldElement;
    fn div(self, rhs: Self) -> Self {
        if self.radicand == 0 && rhs.radicand == 0 {
            return Self::rational(self.rat / rhs.rat);
        }
        self * rhs.inv()
    }
}

/// Formats as `p/q`, `p/q + r/s*sqrt(D)` or `p/q - r/s*sqrt(D)`.
impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.radicand == 0 {
            return write!(f, "{}", self.rat);
        }
        let neg = self.surd.sign() == Sign::Negative;
        let mag = if neg { -self.surd.clone() } else { self.surd.clone() };
        if self.rat == RBig::ZERO {
            let s = if neg { "-" } else { "" };
            return write!(f, "{s}{mag}*sqrt({})", self.radicand);
        }
        let op = if neg { '-' } else { '+' };
        write!(f, "{} {op} {mag}*sqrt({})", self.rat, self.radicand)
    }
}

impl FromStr for FieldElement {
    type Err = FieldError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || FieldError::Parse(s.to_string());
        let t = s.trim();
        let Some(open) = t.find("*sqrt(") else {
            return RBig::from_str(t).map(Self::rational).map_err(|_| err());
        };
        let close = t.rfind(')').ok_or_else(err)?;
        let radicand: u64 = t[open + 6..close].trim().parse().map_err(|_| err())?;
        let head = &t[..open];
        // split "rat ± coeff" at the last separator with spaces around it
        let (rat, coeff) = match head.rfind(" + ").or_else(|| head.rfind(" - ")) {
            Some(pos) => {
                let rat = RBig::from_str(head[..pos].trim()).map_err(|_| err())?;
                let mut c = RBig::from_str(head[pos + 3..].trim()).map_err(|_| err())?;
                if &head[pos..pos + 3] == " - " {
                    c = -c;
                }
                (rat, c)
            }
            None => (RBig::ZERO, RBig::from_str(head.trim()).map_err(|_| err())?),
        };
        let (root, free) = square_free_split(&UBig::from(radicand));
        let free: u64 = free.try_into().map_err(|_| err())?;
        let coeff = coeff * RBig::from(root);
        if free == 1 {
            return Ok(Self::rational(rat + coeff));
        }
        Ok(Self::new(rat, coeff, free))
    }
}

/// Writes `n = root² · free` with `free` square-free (as far as trial
/// division up to 2^20 and a final perfect-square test can tell).
pub fn square_free_split(n: &UBig) -> (UBig, UBig) {
    if *n == UBig::ZERO {
        return (UBig::ZERO, UBig::ONE);
    }
    let mut rest = n.clone();
    let mut root = UBig::ONE;
    let mut free = UBig::ONE;
    let mut p: u64 = 2;
    while p < (1 << 20) {
        let pb = UBig::from(p);
        if &pb * &pb > rest {
            break;
        }
        let mut count = 0u32;
        while (&rest % &pb) == UBig::ZERO {
            rest /= &pb;
            count += 1;
        }
        for _ in 0..count / 2 {
            root *= &pb;
        }
        if count % 2 == 1 {
            free *= &pb;
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if rest != UBig::ONE {
        let (s, r) = rest.sqrt_rem();
        if r == UBig::ZERO {
            root *= s;
        } else {
            free *= rest;
        }
    }
    (root, free)
}
