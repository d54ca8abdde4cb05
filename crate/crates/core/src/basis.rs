//! Truncated two-dimensional oscillator basis, y-parity sectors and exact
//! ladder-operator matrix elements.
//!
//! Each mode has `H₀ = p² + q²` with levels `2n + 1`, so the coordinate is
//! `q = (a + a†)/√2`. A product state `|nx, ny⟩` has unperturbed energy
//! `2(nx + ny) + 2`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use dashu::integer::{IBig, UBig};
use dashu::rational::RBig;
use serde::{Deserialize, Serialize};

use crate::field::square_free_split;
use crate::hp::Hp;

/// Which of the two complex cubic potentials `V = x² + y² + ig·W` is used.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Model {
    /// `W = x y²`
    #[serde(rename = "cubic12")]
    Cubic12,
    /// `W = x y² − x³/3`
    #[serde(rename = "henonHeiles")]
    HenonHeiles,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Cubic12 => "cubic12",
            Model::HenonHeiles => "henonHeiles",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Model {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cubic12" | "cubic" => Ok(Model::Cubic12),
            "henonHeiles" | "henon-heiles" | "hh" => Ok(Model::HenonHeiles),
            other => Err(format!("unknown model {other:?} (expected cubic12 or henonHeiles)")),
        }
    }
}

/// Eigenvalue of the reflection `y → −y`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Parity {
    #[serde(rename = "even")]
    Even,
    #[serde(rename = "odd")]
    Odd,
}

impl Parity {
    pub const BOTH: [Parity; 2] = [Parity::Even, Parity::Odd];

    pub fn sign(self) -> i32 {
        match self {
            Parity::Even => 1,
            Parity::Odd => -1,
        }
    }

    pub fn from_sign(s: i32) -> Option<Parity> {
        match s {
            1 => Some(Parity::Even),
            -1 => Some(Parity::Odd),
            _ => None,
        }
    }

    pub fn of_quanta(ny: u32) -> Parity {
        if ny % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Parity::Even => "+1",
            Parity::Odd => "-1",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BasisState {
    pub nx: u32,
    pub ny: u32,
}

impl BasisState {
    pub fn new(nx: u32, ny: u32) -> Self {
        BasisState { nx, ny }
    }

    pub fn total(self) -> u32 {
        self.nx + self.ny
    }

    pub fn parity(self) -> Parity {
        Parity::of_quanta(self.ny)
    }

    /// `2(nx + ny) + 2`
    pub fn unperturbed_energy(self) -> i64 {
        2 * self.total() as i64 + 2
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncationScheme {
    pub max_total_quanta: u32,
}

impl TruncationScheme {
    pub fn new(max_total_quanta: u32) -> Self {
        TruncationScheme { max_total_quanta }
    }

    /// Number of product states with `nx + ny ≤ N` and the given parity.
    pub fn sector_size(self, parity: Parity) -> usize {
        let n = self.max_total_quanta as usize;
        let first = match parity {
            Parity::Even => 0,
            Parity::Odd => 1,
        };
        (first..=n).step_by(2).map(|ny| n - ny + 1).sum()
    }
}

/// Basis states of one y-parity, ordered by total quanta then by ascending
/// `ny` (descending `nx`).
#[derive(Clone, Debug)]
pub struct ParitySector {
    parity: Parity,
    states: Vec<BasisState>,
    index: HashMap<BasisState, usize>,
}

impl ParitySector {
    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn states(&self) -> &[BasisState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn position(&self, s: BasisState) -> Option<usize> {
        self.index.get(&s).copied()
    }
}

pub fn enumerate_sector(parity: Parity, trunc: TruncationScheme) -> ParitySector {
    let mut states = Vec::with_capacity(trunc.sector_size(parity));
    for total in 0..=trunc.max_total_quanta {
        for ny in 0..=total {
            let s = BasisState::new(total - ny, ny);
            if s.parity() == parity {
                states.push(s);
            }
        }
    }
    let index = states.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    ParitySector { parity, states, index }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Ladder {
    RaiseX,
    LowerX,
    RaiseY,
    LowerY,
}

impl Ladder {
    fn delta(self) -> (i32, i32) {
        match self {
            Ladder::RaiseX => (1, 0),
            Ladder::LowerX => (-1, 0),
            Ladder::RaiseY => (0, 1),
            Ladder::LowerY => (0, -1),
        }
    }
}

/// Product of ladder operators with prefactor `coefficient · 2^(half_powers_of_two/2)`.
///
/// The word is stored in operator order: the last letter acts first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OperatorMonomial {
    pub word: Vec<Ladder>,
    pub coefficient: RBig,
    pub half_powers_of_two: i32,
}

impl OperatorMonomial {
    /// Net change of `(nx, ny)` produced by the word.
    pub fn shift(&self) -> (i32, i32) {
        self.word.iter().fold((0, 0), |(a, b), l| {
            let (dx, dy) = l.delta();
            (a + dx, b + dy)
        })
    }

    /// Applies the word to a normalized state: returns the target state and
    /// the integer `P` such that the amplitude is `√P` (prefactor excluded).
    pub fn apply(&self, ket: BasisState) -> Option<(BasisState, u64)> {
        let (mut nx, mut ny) = (ket.nx as u64, ket.ny as u64);
        let mut product = 1u64;
        for l in self.word.iter().rev() {
            match l {
                Ladder::RaiseX => {
                    nx += 1;
                    product *= nx;
                }
                Ladder::RaiseY => {
                    ny += 1;
                    product *= ny;
                }
                Ladder::LowerX => {
                    if nx == 0 {
                        return None;
                    }
                    product *= nx;
                    nx -= 1;
                }
                Ladder::LowerY => {
                    if ny == 0 {
                        return None;
                    }
                    product *= ny;
                    ny -= 1;
                }
            }
        }
        Some((BasisState::new(nx as u32, ny as u32), product))
    }

    /// Applies the word in the unnormalized basis `|n) = (a†)ⁿ|0⟩`, where
    /// `a†|n) = |n+1)` and `a|n) = n|n−1)`. Amplitudes are integers there.
    pub fn apply_unnormalized(&self, ket: BasisState) -> Option<(BasisState, u64)> {
        let (mut nx, mut ny) = (ket.nx as u64, ket.ny as u64);
        let mut coeff = 1u64;
        for l in self.word.iter().rev() {
            match l {
                Ladder::RaiseX => nx += 1,
                Ladder::RaiseY => ny += 1,
                Ladder::LowerX => {
                    if nx == 0 {
                        return None;
                    }
                    coeff *= nx;
                    nx -= 1;
                }
                Ladder::LowerY => {
                    if ny == 0 {
                        return None;
                    }
                    coeff *= ny;
                    ny -= 1;
                }
            }
        }
        Some((BasisState::new(nx as u32, ny as u32), coeff))
    }
}

/// Exact number `coefficient · 2^(half_powers_of_two/2) · √radicand`.
#[derive(Clone, Debug)]
pub struct Amplitude {
    pub coefficient: RBig,
    pub half_powers_of_two: i32,
    pub radicand: u64,
}

impl Amplitude {
    pub fn zero() -> Self {
        Amplitude { coefficient: RBig::ZERO, half_powers_of_two: 0, radicand: 1 }
    }

    pub fn is_zero(&self) -> bool {
        self.coefficient == RBig::ZERO
    }

    /// Same value with an odd square-free radicand and `2^(e/2)` reduced to
    /// `e ∈ {0, 1}`.
    pub fn canonical(&self) -> (RBig, i32, u64) {
        if self.is_zero() {
            return (RBig::ZERO, 0, 1);
        }
        let (root, free) = square_free_split(&UBig::from(self.radicand));
        let mut free: u64 = free.try_into().expect("radicand fits u64");
        let mut coeff = &self.coefficient * RBig::from(root);
        let mut e = self.half_powers_of_two;
        if free % 2 == 0 {
            free /= 2;
            e += 1;
        }
        let whole = e.div_euclid(2);
        e = e.rem_euclid(2);
        let two = RBig::from(2u8);
        for _ in 0..whole.unsigned_abs() {
            coeff = if whole > 0 { coeff * &two } else { coeff / &two };
        }
        (coeff, e, free)
    }

    pub fn to_f64(&self) -> f64 {
        self.coefficient.to_f64_fast()
            * 2f64.powf(self.half_powers_of_two as f64 / 2.0)
            * (self.radicand as f64).sqrt()
    }

    pub fn to_hp(&self, precision: usize) -> Hp {
        let (coeff, e, free) = self.canonical();
        let mut v = Hp::from_rational(&coeff, precision);
        let r = free * if e == 1 { 2 } else { 1 };
        if r != 1 {
            v = v * Hp::from_i64(r as i64, precision).sqrt();
        }
        v
    }

    /// Sum of two amplitudes of one matrix element; both must share the
    /// irrational factor.
    fn accumulate(self, other: Amplitude) -> Amplitude {
        if self.is_zero() {
            return other;
        }
        if other.is_zero() {
            return self;
        }
        if self.half_powers_of_two == other.half_powers_of_two && self.radicand == other.radicand {
            let coefficient = self.coefficient + other.coefficient;
            if coefficient == RBig::ZERO {
                return Amplitude::zero();
            }
            return Amplitude { coefficient, ..self };
        }
        let (a, ea, ra) = self.canonical();
        let (b, eb, rb) = other.canonical();
        assert!(ea == eb && ra == rb, "amplitudes with different surds");
        Amplitude { coefficient: a + b, half_powers_of_two: ea, radicand: ra }
    }
}

impl PartialEq for Amplitude {
    fn eq(&self, other: &Self) -> bool {
        self.canonical() == other.canonical()
    }
}

/// `⟨bra| Σ ops |ket⟩` in the normalized oscillator basis.
pub fn matrix_element(ops: &[OperatorMonomial], bra: BasisState, ket: BasisState) -> Amplitude {
    let mut acc = Amplitude::zero();
    for op in ops {
        let Some((target, product)) = op.apply(ket) else { continue };
        if target != bra {
            continue;
        }
        let (root, free) = square_free_split(&UBig::from(product));
        let term = Amplitude {
            coefficient: &op.coefficient * RBig::from(root),
            half_powers_of_two: op.half_powers_of_two,
            radicand: free.try_into().expect("radicand fits u64"),
        };
        acc = acc.accumulate(term);
    }
    acc
}

fn expand(factors: &[[Ladder; 2]], coefficient: &RBig, half: i32) -> Vec<OperatorMonomial> {
    let mut words: Vec<Vec<Ladder>> = vec![Vec::new()];
    for pair in factors {
        words = words
            .into_iter()
            .flat_map(|w| {
                pair.iter().map(move |l| {
                    let mut w = w.clone();
                    w.push(*l);
                    w
                })
            })
            .collect();
    }
    words
        .into_iter()
        .map(|word| OperatorMonomial { word, coefficient: coefficient.clone(), half_powers_of_two: half })
        .collect()
}

/// Ladder expansion of `W` where the interaction is `V_int = ig·W`.
pub fn decompose_potential(model: Model) -> Vec<OperatorMonomial> {
    const X: [Ladder; 2] = [Ladder::LowerX, Ladder::RaiseX];
    const Y: [Ladder; 2] = [Ladder::LowerY, Ladder::RaiseY];
    // x y² = 2^(-3/2) (a + a†)(b + b†)²
    let mut ops = expand(&[X, Y, Y], &RBig::ONE, -3);
    if model == Model::HenonHeiles {
        let third = RBig::from_parts(IBig::from(-1), UBig::from(3u8));
        ops.extend(expand(&[X, X, X], &third, -3));
    }
    ops
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(nx: u32, ny: u32) -> BasisState {
        BasisState::new(nx, ny)
    }

    #[test]
    fn sectors_small() {
        let even = enumerate_sector(Parity::Even, TruncationScheme::new(2));
        assert_eq!(even.states(), &[st(0, 0), st(1, 0), st(2, 0), st(0, 2)]);
        let odd = enumerate_sector(Parity::Odd, TruncationScheme::new(2));
        assert_eq!(odd.states(), &[st(0, 1), st(1, 1)]);
        let zero = enumerate_sector(Parity::Even, TruncationScheme::new(0));
        assert_eq!(zero.states(), &[st(0, 0)]);
        assert_eq!(even.position(st(0, 2)), Some(3));
        assert_eq!(even.position(st(0, 1)), None);
    }

    #[test]
    fn sector_counts() {
        for n in 0..30 {
            let t = TruncationScheme::new(n);
            let e = enumerate_sector(Parity::Even, t);
            let o = enumerate_sector(Parity::Odd, t);
            assert_eq!(e.len() + o.len(), ((n + 1) * (n + 2) / 2) as usize);
            assert_eq!(e.len(), t.sector_size(Parity::Even));
            assert_eq!(o.len(), t.sector_size(Parity::Odd));
            assert!(e.states().iter().all(|s| s.parity() == Parity::Even));
            assert!(o.states().iter().all(|s| s.parity() == Parity::Odd));
        }
    }

    fn position_x() -> Vec<OperatorMonomial> {
        expand(&[[Ladder::LowerX, Ladder::RaiseX]], &RBig::ONE, -1)
    }

    #[test]
    fn ladder_examples() {
        let half = RBig::from_parts(IBig::ONE, UBig::from(2u8));
        let x = position_x();
        let a = matrix_element(&x, st(1, 0), st(0, 0));
        assert!((a.to_f64() - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(a, Amplitude { coefficient: half.clone(), half_powers_of_two: 1, radicand: 1 });

        let w = decompose_potential(Model::Cubic12);
        let a = matrix_element(&w, st(1, 0), st(0, 0));
        assert_eq!(a, Amplitude { coefficient: RBig::ONE, half_powers_of_two: -3, radicand: 1 });
        assert!((a.to_f64() - 1.0 / (2.0 * 2f64.sqrt())).abs() < 1e-15);
        assert!(matrix_element(&w, st(0, 1), st(0, 0)).is_zero());
    }

    #[test]
    fn monomial_counts_and_shifts() {
        let w = decompose_potential(Model::Cubic12);
        assert_eq!(w.len(), 8);
        for m in &w {
            let (dx, dy) = m.shift();
            assert_eq!(dx.abs(), 1);
            assert!(dy == 0 || dy.abs() == 2);
            assert_eq!(m.half_powers_of_two, -3);
        }
        let hh = decompose_potential(Model::HenonHeiles);
        assert_eq!(hh.len(), 16);
        let third = RBig::from_parts(IBig::from(-1), UBig::from(3u8));
        assert_eq!(hh.iter().filter(|m| m.coefficient == third).count(), 8);
    }

    #[test]
    fn henon_heiles_cubic_term() {
        let w = decompose_potential(Model::HenonHeiles);
        let a = matrix_element(&w, st(3, 0), st(0, 0));
        let expected = Amplitude {
            coefficient: RBig::from_parts(IBig::from(-1), UBig::from(3u8)),
            half_powers_of_two: -3,
            radicand: 6,
        };
        assert_eq!(a, expected);
        assert!((a.to_f64() + 6f64.sqrt() / (2.0 * 2f64.sqrt()) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn unnormalized_action_relates_to_normalized() {
        // ⟨m|op|k⟩ = c_m · √(m!/k!) per mode
        let w = decompose_potential(Model::HenonHeiles);
        for m in &w {
            for ket in [st(0, 0), st(2, 3), st(4, 1)] {
                let (Some((t1, p)), Some((t2, c))) = (m.apply(ket), m.apply_unnormalized(ket)) else {
                    continue;
                };
                assert_eq!(t1, t2);
                let fact = |a: u32, b: u32| -> f64 { ((b + 1)..=a).map(|v| v as f64).product::<f64>() };
                let ratio = (fact(t1.nx, ket.nx) / fact(ket.nx, t1.nx)) * (fact(t1.ny, ket.ny) / fact(ket.ny, t1.ny));
                assert!(((p as f64).sqrt() - c as f64 * ratio.sqrt()).abs() < 1e-9);
            }
        }
    }
}
