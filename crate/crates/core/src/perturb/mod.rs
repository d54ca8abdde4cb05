//! Degenerate Rayleigh–Schrödinger series for the energy levels.
//!
//! Works in the unnormalized oscillator basis `|nx, ny) = a†^nx b†^ny |0⟩`,
//! where `2^{3/2}·W` has rational matrix elements. With `λ = ig·2^{-3/2}`
//! the Hamiltonian is `H₀ + λR`, and since only even powers survive, the
//! effective operator on a degenerate level is `α + μB(μ)` with
//! `μ = λ² = −g²/8`. Its eigenvalue series are then resolved exactly.

mod algebra;
mod bloch;
pub mod reference;
mod resolve;

use std::cmp::Ordering;
use std::collections::BTreeMap;

use dashu::rational::RBig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::{decompose_potential, enumerate_sector, Model, Parity, TruncationScheme};
use crate::field::FieldElement;
use crate::hp::{Hp, Scalar};

pub use reference::{label_mapping, LabelMapping};

/// Default order for the exact verification series.
pub const DEFAULT_CHECK_ORDER: u32 = 8;
/// Default order for Padé input.
pub const DEFAULT_DEEP_ORDER: u32 = 40;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PerturbError {
    #[error("order must be a positive even number, got {0}")]
    InvalidOrder(u32),
    #[error("a branch needs two different quadratic fields: sqrt({0}) and sqrt({1})")]
    RadicandConflict(u64, u64),
    #[error("unsupported degenerate structure: {0}")]
    Unsupported(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
}

/// Label `E_{nk}` of a branch together with its y-parity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LevelLabel {
    pub n: u32,
    pub k: u32,
    pub parity: Parity,
}

impl std::fmt::Display for LevelLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "E{}{}", self.n, self.k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Coefficient {
    Exact(FieldElement),
    /// Computed in high-precision floating point.
    Approx(Hp),
}

impl Coefficient {
    pub fn to_hp(&self, precision: usize) -> Hp {
        match self {
            Coefficient::Exact(f) => f.to_hp(precision),
            Coefficient::Approx(h) => h.clone(),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Coefficient::Exact(f) => f.to_f64(),
            Coefficient::Approx(h) => h.to_f64(),
        }
    }

    pub fn exact(&self) -> Option<&FieldElement> {
        match self {
            Coefficient::Exact(f) => Some(f),
            Coefficient::Approx(_) => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Coefficient::Exact(f) => f.is_zero(),
            Coefficient::Approx(h) => h.is_zero(),
        }
    }

    fn sign(&self) -> Ordering {
        match self {
            Coefficient::Exact(f) => f.sign(),
            Coefficient::Approx(h) => h.partial_cmp(&Hp::from_i64(0, 64)).unwrap_or(Ordering::Equal),
        }
    }
}

/// Energy series of one branch; `coeffs[j]` multiplies `g^{2j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergySeries {
    pub model: Model,
    pub label: LevelLabel,
    /// Radicand of the quadratic field of the exact coefficients (0 for ℚ).
    pub radicand: u64,
    pub coeffs: Vec<Coefficient>,
    pub max_order: u32,
    /// Highest order computed exactly; above it coefficients are approximate.
    pub exact_order: u32,
    /// Set when the branch never separated from a degenerate partner in
    /// its parity sector within `max_order`.
    pub shared_tail: bool,
}

impl EnergySeries {
    /// Coefficient of `g^order` (zero for odd orders).
    pub fn coefficient(&self, order: u32) -> Option<&Coefficient> {
        if order % 2 == 1 {
            return None;
        }
        self.coeffs.get(order as usize / 2)
    }

    /// Exact coefficients of `g⁰ … g^order`, if available.
    pub fn exact_prefix(&self, order: u32) -> Option<Vec<FieldElement>> {
        self.coeffs.iter().take(order as usize / 2 + 1).map(|c| c.exact().cloned()).collect()
    }

    pub fn to_record(&self) -> SeriesRecord {
        SeriesRecord {
            model: self.model,
            n: self.label.n,
            k: self.label.k,
            parity: self.label.parity,
            radicand: self.radicand,
            max_order: self.max_order,
            exact_order: self.exact_order,
            shared_tail: self.shared_tail,
            coefficients: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(j, c)| CoefficientRecord {
                    order: 2 * j as u32,
                    exact: c.exact().map(|f| f.to_string()),
                    value: c.to_hp(crate::hp::HP_BITS).to_decimal_string(40),
                })
                .collect(),
        }
    }
}

/// Serializable form of a series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesRecord {
    pub model: Model,
    pub n: u32,
    pub k: u32,
    pub parity: Parity,
    pub radicand: u64,
    pub max_order: u32,
    pub exact_order: u32,
    pub shared_tail: bool,
    pub coefficients: Vec<CoefficientRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefficientRecord {
    pub order: u32,
    /// `p/q` or `p/q ± r/s*sqrt(D)`; absent for approximate coefficients.
    pub exact: Option<String>,
    pub value: String,
}

/// Controls how deep orders are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeriesOptions {
    pub max_order: u32,
    /// Orders above this are computed with 320-bit floats.
    pub exact_order: u32,
}

impl SeriesOptions {
    pub fn exact(max_order: u32) -> Self {
        SeriesOptions { max_order, exact_order: max_order }
    }
}

struct SectorProblem {
    energies: Vec<i64>,
    p: Vec<usize>,
    alpha: i64,
    cols: Vec<Vec<(usize, RBig)>>,
}

/// `R = 2^{3/2} W` on the y-parity sector with at most `n + 3·half_order`
/// quanta; no state beyond that can feed back into level `n` by order
/// `2·half_order` in `λ`.
fn sector_problem(model: Model, n: u32, parity: Parity, half_order: u32) -> Option<SectorProblem> {
    let qmax = n + 3 * half_order;
    let sector = enumerate_sector(parity, TruncationScheme::new(qmax));
    let p: Vec<usize> = sector.states().iter().enumerate().filter(|(_, s)| s.total() == n).map(|(i, _)| i).collect();
    if p.is_empty() {
        return None;
    }
    let ops = decompose_potential(model);
    let cols = sector
        .states()
        .iter()
        .map(|&s| {
            let mut acc: BTreeMap<usize, RBig> = BTreeMap::new();
            for op in &ops {
                if let Some((t, c)) = op.apply_unnormalized(s) {
                    if t.total() > qmax {
                        continue;
                    }
                    let idx = sector.position(t).expect("target in sector");
                    let v = acc.entry(idx).or_insert(RBig::ZERO);
                    *v = &*v + &op.coefficient * RBig::from(c);
                }
            }
            acc.into_iter().filter(|(_, v)| *v != RBig::ZERO).collect()
        })
        .collect();
    let energies = sector.states().iter().map(|s| s.unperturbed_energy()).collect();
    Some(SectorProblem { energies, p, alpha: 2 * n as i64 + 2, cols })
}

/// Even-order effective matrices `B_i = h_{2i+2}`, checking that odd
/// orders vanish.
fn effective_terms<S: Scalar>(prob: &SectorProblem, cols: &bloch::SparseColumns<S>, half_order: u32) -> Result<Vec<algebra::Mat<S>>, PerturbError> {
    let hs = bloch::sparse(cols, &prob.energies, &prob.p, prob.alpha, 2 * half_order as usize);
    let mut out = Vec::new();
    for (k, h) in hs.into_iter().enumerate() {
        if k % 2 == 0 {
            if h.iter().flatten().any(|x| !x.is_zero()) {
                return Err(PerturbError::Numeric(format!("odd order {} does not vanish", k + 1)));
            }
        } else {
            out.push(h);
        }
    }
    Ok(out)
}

struct RawBranch {
    parity: Parity,
    coeffs: Vec<Coefficient>,
    shared: bool,
}

fn energy_coeffs<S: Clone>(alpha: i64, terms: &[S], scale: impl Fn(&S, u32) -> Coefficient) -> Vec<Coefficient> {
    let mut out = vec![Coefficient::Exact(FieldElement::from_i64(alpha))];
    for (i, t) in terms.iter().enumerate() {
        out.push(scale(t, i as u32 + 1));
    }
    out
}

/// `(−1/8)^j`
fn mu_power(j: u32) -> RBig {
    let mut r = RBig::ONE;
    let step = RBig::from_parts_signed((-1).into(), 8u8.into());
    for _ in 0..j {
        r = r * &step;
    }
    r
}

fn sector_branches(model: Model, n: u32, parity: Parity, opts: SeriesOptions) -> Result<Vec<RawBranch>, PerturbError> {
    let half_exact = opts.exact_order.min(opts.max_order) / 2;
    let half_total = opts.max_order / 2;
    let Some(prob) = sector_problem(model, n, parity, half_exact) else {
        return Ok(Vec::new());
    };
    let terms = effective_terms(&prob, &prob.cols, half_exact)?;
    let terms: Vec<algebra::Mat<FieldElement>> =
        terms.into_iter().map(|m| m.into_iter().map(|r| r.into_iter().map(FieldElement::from).collect()).collect()).collect();
    let (exact, plan) = resolve::exact(&terms)?;
    let mut branches: Vec<RawBranch> = exact
        .iter()
        .map(|b| RawBranch {
            parity,
            coeffs: energy_coeffs(prob.alpha, &b.terms, |t, j| Coefficient::Exact(t.clone() * FieldElement::rational(mu_power(j)))),
            shared: b.shared,
        })
        .collect();
    if half_total > half_exact {
        let deep = sector_problem(model, n, parity, half_total).expect("same level");
        let cols: bloch::SparseColumns<Hp> =
            deep.cols.iter().map(|c| c.iter().map(|(t, v)| (*t, <Hp as Scalar>::from_rational(v))).collect()).collect();
        let terms = effective_terms(&deep, &cols, half_total)?;
        let approx = resolve::replay(&terms, &plan)?;
        for (b, a) in branches.iter_mut().zip(approx) {
            for (j, t) in a.terms.iter().enumerate().skip(half_exact as usize) {
                let c = t.clone() * <Hp as Scalar>::from_rational(&mu_power(j as u32 + 1));
                b.coeffs.push(Coefficient::Approx(c));
            }
            b.shared |= a.shared;
        }
    }
    Ok(branches)
}

/// Descending comparison of two coefficients, exactly when both live in a
/// common field.
fn cmp_coeff(a: &Coefficient, b: &Coefficient) -> Ordering {
    if let (Coefficient::Exact(x), Coefficient::Exact(y)) = (a, b) {
        if x.checked_radicand(y).is_ok() {
            return y.cmp(x);
        }
        if x == y {
            return Ordering::Equal;
        }
    }
    let (x, y) = (a.to_hp(256), b.to_hp(256));
    y.partial_cmp(&x).unwrap_or(Ordering::Equal)
}

fn cmp_branch(a: &RawBranch, b: &RawBranch) -> Ordering {
    for (x, y) in a.coeffs.iter().zip(&b.coeffs).skip(1) {
        match cmp_coeff(x, y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.parity.cmp(&b.parity)
}

/// All `n+1` branch series of level `n`, exact through `max_order`.
pub fn effective_series(model: Model, n: u32, max_order: u32) -> Result<Vec<EnergySeries>, PerturbError> {
    effective_series_with(model, n, SeriesOptions::exact(max_order))
}

/// As [`effective_series`], with orders above `opts.exact_order` taken
/// from a 320-bit floating-point run that reuses the exact decomposition.
pub fn effective_series_with(model: Model, n: u32, opts: SeriesOptions) -> Result<Vec<EnergySeries>, PerturbError> {
    if opts.max_order == 0 || opts.max_order % 2 == 1 {
        return Err(PerturbError::InvalidOrder(opts.max_order));
    }
    if opts.exact_order == 0 || opts.exact_order % 2 == 1 {
        return Err(PerturbError::InvalidOrder(opts.exact_order));
    }
    let mut raw = Vec::new();
    for parity in Parity::BOTH {
        raw.extend(sector_branches(model, n, parity, opts)?);
    }
    raw.sort_by(cmp_branch);
    Ok(raw
        .into_iter()
        .enumerate()
        .map(|(k, b)| {
            let radicand = b.coeffs.iter().filter_map(|c| c.exact()).map(|c| c.radicand()).max().unwrap_or(0);
            EnergySeries {
                model,
                label: LevelLabel { n, k: k as u32, parity: b.parity },
                radicand,
                coeffs: b.coeffs,
                max_order: opts.max_order,
                exact_order: opts.exact_order.min(opts.max_order),
                shared_tail: b.shared,
            }
        })
        .collect())
}

/// Partial sum through `g^order_cap` in floating point of `precision` bits.
pub fn evaluate_series_hp(s: &EnergySeries, g: f64, order_cap: u32, precision: usize) -> Hp {
    let g2 = Hp::from_f64(g, precision) * Hp::from_f64(g, precision);
    let terms = (order_cap.min(s.max_order) / 2) as usize;
    s.coeffs.iter().take(terms + 1).rev().fold(Hp::from_i64(0, precision), |acc, c| acc * g2.clone() + c.to_hp(precision))
}

/// Partial sum through `g^order_cap`, evaluated with 128-bit floats.
pub fn evaluate_series(s: &EnergySeries, g: f64, order_cap: u32) -> f64 {
    evaluate_series_hp(s, g, order_cap, 128).to_f64()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CoefficientSign {
    Positive,
    Negative,
}

/// Signs of the nonzero coefficients of `g²`, `g⁴`, ….
pub fn sign_pattern(s: &EnergySeries) -> Vec<CoefficientSign> {
    s.coeffs
        .iter()
        .skip(1)
        .filter_map(|c| match c.sign() {
            Ordering::Greater => Some(CoefficientSign::Positive),
            Ordering::Less => Some(CoefficientSign::Negative),
            Ordering::Equal => None,
        })
        .collect()
}

/// True when the signs strictly alternate.
pub fn is_alternating(signs: &[CoefficientSign]) -> bool {
    signs.windows(2).all(|w| w[0] != w[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fe(s: &str) -> FieldElement {
        s.parse().unwrap()
    }

    #[test]
    fn ground_state_cubic() {
        let s = effective_series(Model::Cubic12, 0, 8).unwrap();
        assert_eq!(s.len(), 1);
        let got = s[0].exact_prefix(8).unwrap();
        let want: Vec<FieldElement> = ["2", "5/48", "-223/6912", "114407/4976640", "-346266143/14332723200"].iter().map(|x| fe(x)).collect();
        assert_eq!(got, want);
        assert_eq!(s[0].label.parity, Parity::Even);
    }

    #[test]
    fn level_two_surds() {
        let s = effective_series(Model::Cubic12, 2, 2).unwrap();
        let g2: Vec<String> = s.iter().map(|b| b.coeffs[1].exact().unwrap().to_string()).collect();
        assert_eq!(g2, vec!["17/16 + 1/8*sqrt(41)", "19/16", "17/16 - 1/8*sqrt(41)"]);
        assert_eq!(s[0].radicand, 41);
    }

    #[test]
    fn constant_term_and_odd_orders() {
        for model in [Model::Cubic12, Model::HenonHeiles] {
            for n in 0..4 {
                let s = effective_series(model, n, 2).unwrap();
                assert_eq!(s.len(), n as usize + 1);
                for b in &s {
                    assert_eq!(b.coeffs[0], Coefficient::Exact(FieldElement::from_i64(2 * n as i64 + 2)));
                    assert!(b.coefficient(3).is_none());
                }
            }
        }
    }

    #[test]
    fn rejects_odd_order() {
        assert_eq!(effective_series(Model::Cubic12, 0, 3), Err(PerturbError::InvalidOrder(3)));
    }

    #[test]
    fn evaluation_and_signs() {
        let s = effective_series(Model::Cubic12, 0, 8).unwrap().remove(0);
        assert_eq!(evaluate_series(&s, 0.0, 8), 2.0);
        let want = 2.0 + 5.0 / 48.0 * 1e-2 - 223.0 / 6912.0 * 1e-4 + 114407.0 / 4976640.0 * 1e-6 - 346266143.0 / 14332723200.0 * 1e-8;
        assert!((evaluate_series(&s, 0.1, 8) - want).abs() < 1e-15);
        let signs = sign_pattern(&s);
        assert_eq!(signs.len(), 4);
        assert!(is_alternating(&signs));
        assert_eq!(signs[0], CoefficientSign::Positive);
    }

    #[test]
    fn float_tail_matches_exact() {
        let exact = effective_series(Model::HenonHeiles, 3, 10).unwrap();
        let mixed = effective_series_with(Model::HenonHeiles, 3, SeriesOptions { max_order: 10, exact_order: 4 }).unwrap();
        for (e, m) in exact.iter().zip(&mixed) {
            assert_eq!(e.label, m.label);
            for (a, b) in e.coeffs.iter().zip(&m.coeffs) {
                let (x, y) = (a.to_f64(), b.to_f64());
                assert!((x - y).abs() <= 1e-14 * x.abs().max(1.0), "{x} {y}");
            }
            assert!(matches!(m.coeffs[3], Coefficient::Approx(_)));
        }
    }
}
