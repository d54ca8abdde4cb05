//! Padé approximants of the energy series in the variable `g`.
//!
//! For even series with even degrees the system is solved in `u = g²`
//! with half the degrees; the result is the same approximant by
//! uniqueness. Exact series of modest order are solved exactly, the rest
//! in 320-bit floating point with full pivoting.

use serde::Serialize;
use thiserror::Error;

use crate::field::FieldElement;
use crate::hp::{Hp, Scalar, HP_BITS};
use crate::perturb::{Coefficient, EnergySeries};

/// Largest `L + M` handled with exact arithmetic.
pub const EXACT_LIMIT: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PadeError {
    #[error("series known through g^{have}, approximant needs g^{need}")]
    InsufficientOrder { need: usize, have: usize },
    #[error("denominator system is singular (rank defect {rank_defect})")]
    Singular { rank_defect: usize },
}

/// `num(g)/den(g)` with `den[0] = 1`; coefficients are in powers of `g`.
#[derive(Debug, Clone)]
pub struct PadeApprox {
    pub l: usize,
    pub m: usize,
    pub num: Vec<Hp>,
    pub den: Vec<Hp>,
    /// Whether the coefficients were obtained in exact arithmetic.
    pub exact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PadeValue {
    pub value: f64,
    pub near_pole: bool,
}

/// Pole flag threshold relative to `Σ|b_j||g|^j`.
pub const POLE_TOL: f64 = 1e-6;

fn series_in_g(coeffs: &[Coefficient], len: usize) -> Vec<Option<&Coefficient>> {
    (0..len).map(|i| if i % 2 == 1 { None } else { coeffs.get(i / 2) }).collect()
}

/// Solves `Σ_{j=1..M} c_{i−j} b_j = −c_i` for `i = L+1..L+M`, returning
/// numerator and denominator (in the reduced variable).
fn solve_generic<S: Scalar>(c: &[S], l: usize, m: usize, pick: impl Fn(&[Vec<S>], usize, usize) -> Option<(usize, usize)>) -> Result<(Vec<S>, Vec<S>), PadeError> {
    let at = |i: isize| if i < 0 { S::zero() } else { c[i as usize].clone() };
    // augmented matrix [A | rhs]
    let mut a: Vec<Vec<S>> = (0..m)
        .map(|r| {
            let i = (l + 1 + r) as isize;
            let mut row: Vec<S> = (1..=m).map(|j| at(i - j as isize)).collect();
            row.push(-at(i));
            row
        })
        .collect();
    let mut perm: Vec<usize> = (0..m).collect();
    let mut rank = 0;
    for k in 0..m {
        let Some((pr, pc)) = pick(&a, k, m) else { break };
        a.swap(k, pr);
        for row in a.iter_mut() {
            row.swap(k, pc);
        }
        perm.swap(k, pc);
        let p = a[k][k].clone();
        for r in k + 1..m {
            if a[r][k].is_zero() {
                continue;
            }
            let f = a[r][k].clone() / p.clone();
            for j in k..=m {
                let t = a[k][j].clone();
                a[r][j] = a[r][j].clone() - f.clone() * t;
            }
        }
        rank += 1;
    }
    if rank < m {
        return Err(PadeError::Singular { rank_defect: m - rank });
    }
    let mut x: Vec<S> = (0..m).map(|_| S::zero()).collect();
    for k in (0..m).rev() {
        let mut acc = a[k][m].clone();
        for j in k + 1..m {
            acc = acc - a[k][j].clone() * x[j].clone();
        }
        x[k] = acc / a[k][k].clone();
    }
    let mut b: Vec<S> = (0..=m).map(|_| S::zero()).collect();
    b[0] = S::one();
    for k in 0..m {
        b[perm[k] + 1] = x[k].clone();
    }
    let num = (0..=l)
        .map(|i| (0..=i.min(m)).fold(S::zero(), |acc, j| acc + b[j].clone() * c[i - j].clone()))
        .collect();
    Ok((num, b))
}

fn first_nonzero<S: Scalar>(a: &[Vec<S>], k: usize, m: usize) -> Option<(usize, usize)> {
    (k..m).flat_map(|c| (k..m).map(move |r| (r, c))).find(|&(r, c)| !a[r][c].is_zero())
}

fn largest(a: &[Vec<Hp>], k: usize, m: usize) -> Option<(usize, usize)> {
    let scale = a.iter().flat_map(|r| r[..m].iter()).map(|x| x.abs().to_f64()).fold(0.0, f64::max);
    let mut best: Option<(usize, usize, Hp)> = None;
    for r in k..m {
        for c in k..m {
            let v = a[r][c].abs();
            if best.as_ref().is_none_or(|b| v > b.2) {
                best = Some((r, c, v));
            }
        }
    }
    let (r, c, v) = best?;
    // entries at the level of accumulated rounding count as zero
    (v.to_f64() > scale * 1e-80 && !v.is_zero()).then_some((r, c))
}

fn expand_even(v: Vec<Hp>) -> Vec<Hp> {
    let mut out = Vec::with_capacity(2 * v.len());
    for (i, x) in v.into_iter().enumerate() {
        if i > 0 {
            out.push(Hp::from_i64(0, HP_BITS));
        }
        out.push(x);
    }
    out
}

/// Builds the `(L, M)` approximant from coefficients of `g⁰, g¹, …`; `None`
/// entries are zero.
pub fn build_from_coefficients(coeffs: &[Coefficient], max_order: usize, l: usize, m: usize) -> Result<PadeApprox, PadeError> {
    if l + m > max_order {
        return Err(PadeError::InsufficientOrder { need: l + m, have: max_order });
    }
    let c = series_in_g(coeffs, l + m + 1);
    if c.iter().step_by(2).any(|x| x.is_none()) {
        return Err(PadeError::InsufficientOrder { need: l + m, have: 2 * coeffs.len().saturating_sub(1) });
    }
    // reduced variable u = g² when both degrees are even
    let even = l % 2 == 0 && m % 2 == 0;
    let (rl, rm) = if even { (l / 2, m / 2) } else { (l, m) };
    let picked: Vec<&Coefficient> = if even {
        c.iter().step_by(2).map(|x| x.expect("checked")).collect()
    } else {
        Vec::new()
    };
    let all_exact = coeffs.iter().take((l + m) / 2 + 1).all(|x| x.exact().is_some());
    let (num, den, exact) = if all_exact && l + m <= EXACT_LIMIT {
        let vals: Vec<FieldElement> = if even {
            picked.iter().map(|x| x.exact().unwrap().clone()).collect()
        } else {
            c.iter().map(|x| x.map_or(FieldElement::zero(), |v| v.exact().unwrap().clone())).collect()
        };
        let (n, d) = solve_generic(&vals, rl, rm, first_nonzero)?;
        (n.iter().map(|x| x.to_hp(HP_BITS)).collect::<Vec<_>>(), d.iter().map(|x| x.to_hp(HP_BITS)).collect::<Vec<_>>(), true)
    } else {
        let vals: Vec<Hp> = if even {
            picked.iter().map(|x| x.to_hp(HP_BITS)).collect()
        } else {
            c.iter().map(|x| x.map_or(Hp::from_i64(0, HP_BITS), |v| v.to_hp(HP_BITS))).collect()
        };
        let (n, d) = solve_generic(&vals, rl, rm, largest)?;
        (n, d, false)
    };
    let (num, den) = if even { (expand_even(num), expand_even(den)) } else { (num, den) };
    Ok(PadeApprox { l, m, num, den, exact })
}

/// `(L, M)` approximant of an energy series.
pub fn build_pade(s: &EnergySeries, l: usize, m: usize) -> Result<PadeApprox, PadeError> {
    build_from_coefficients(&s.coeffs, s.max_order as usize, l, m)
}

fn horner(p: &[Hp], x: &Hp) -> Hp {
    p.iter().rev().fold(Hp::from_i64(0, HP_BITS), |acc, c| acc * x.clone() + c.clone())
}

impl PadeApprox {
    pub fn numerator_at(&self, g: f64) -> Hp {
        horner(&self.num, &Hp::from_f64(g, HP_BITS))
    }

    pub fn denominator_at(&self, g: f64) -> Hp {
        horner(&self.den, &Hp::from_f64(g, HP_BITS))
    }

    /// Taylor coefficients of `num/den` through `g^order`.
    pub fn taylor(&self, order: usize) -> Vec<Hp> {
        let zero = Hp::from_i64(0, HP_BITS);
        let mut t: Vec<Hp> = Vec::with_capacity(order + 1);
        for i in 0..=order {
            let mut acc = self.num.get(i).cloned().unwrap_or_else(|| zero.clone());
            for j in 1..=i.min(self.m) {
                acc = acc - self.den[j].clone() * t[i - j].clone();
            }
            t.push(acc);
        }
        t
    }
}

/// Value at `g`, flagged when the denominator nearly vanishes.
pub fn evaluate(p: &PadeApprox, g: f64) -> PadeValue {
    let den = p.denominator_at(g);
    let scale: f64 = p.den.iter().enumerate().map(|(j, b)| b.to_f64().abs() * g.abs().powi(j as i32)).sum();
    let near_pole = den.abs().to_f64() < POLE_TOL * scale;
    let value = if den.is_zero() { f64::NAN } else { (p.numerator_at(g) / den).to_f64() };
    PadeValue { value, near_pole }
}

/// Real zeros of the denominator in `[a, b]`, located by sign changes on
/// a fine grid and refined by bisection to `1e-10`.
pub fn real_poles(p: &PadeApprox, a: f64, b: f64) -> Vec<f64> {
    assert!(b > a, "empty interval");
    if p.m == 0 {
        return Vec::new();
    }
    let steps = 4000;
    let h = (b - a) / steps as f64;
    let sign = |x: f64| p.denominator_at(x).partial_cmp(&Hp::from_i64(0, 64)).unwrap_or(std::cmp::Ordering::Equal);
    let mut out = Vec::new();
    let mut x0 = a;
    let mut s0 = sign(x0);
    for i in 1..=steps {
        let x1 = if i == steps { b } else { a + h * i as f64 };
        let s1 = sign(x1);
        if s1 == std::cmp::Ordering::Equal {
            out.push(x1);
        } else if s0 != std::cmp::Ordering::Equal && s1 != s0 {
            let (mut lo, mut hi) = (x0, x1);
            while hi - lo > 1e-10 {
                let mid = 0.5 * (lo + hi);
                if sign(mid) == s0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            out.push(0.5 * (lo + hi));
        }
        x0 = x1;
        s0 = s1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geometric_in_g(n: usize) -> Vec<Coefficient> {
        // 1 + g² + g⁴ + … as a series in g with coefficient list per g^{2j}
        (0..=n).map(|_| Coefficient::Exact(FieldElement::one())).collect()
    }

    fn plain(coeffs: &[i64]) -> Vec<Coefficient> {
        coeffs.iter().map(|&c| Coefficient::Exact(FieldElement::from_i64(c))).collect()
    }

    #[test]
    fn geometric_series() {
        // in u = g²: 1/(1 − u) is the (0, 2) approximant in g
        let p = build_from_coefficients(&geometric_in_g(4), 8, 0, 2).unwrap();
        assert!(p.exact);
        assert!((p.den[2].to_f64() + 1.0).abs() < 1e-30);
        let v = evaluate(&p, 0.5f64.sqrt());
        assert!((v.value - 2.0).abs() < 1e-14);
        let poles = real_poles(&p, 0.0, 2.0);
        assert_eq!(poles.len(), 1);
        assert!((poles[0] - 1.0).abs() < 1e-10);
        assert!(evaluate(&p, 1.0 - 1e-9).near_pole);
    }

    #[test]
    fn polynomial_case() {
        let c = plain(&[3, -2, 5]);
        let p = build_from_coefficients(&c, 4, 4, 0).unwrap();
        assert!(real_poles(&p, 0.0, 5.0).is_empty());
        let v = evaluate(&p, 0.3).value;
        assert!((v - (3.0 - 2.0 * 0.09 + 5.0 * 0.0081)).abs() < 1e-14);
        assert_eq!(evaluate(&p, 0.0).value, 3.0);
    }

    #[test]
    fn odd_degrees_use_general_system() {
        let p = build_from_coefficients(&geometric_in_g(4), 8, 1, 1);
        // g-series 1 + 0g + g² ...: the (1,1) system has c₁ = 0 as its only entry
        assert_eq!(p.unwrap_err(), PadeError::Singular { rank_defect: 1 });
        let p = build_from_coefficients(&geometric_in_g(4), 8, 2, 1).unwrap();
        assert!(p.den[1].is_zero());
    }

    #[test]
    fn rank_defect_fallback() {
        // 1/(1−u) in u, (1, 2): both equations read 1 + b₁ + b₂ = 0
        let p = build_from_coefficients(&geometric_in_g(4), 8, 2, 4);
        assert_eq!(p.unwrap_err(), PadeError::Singular { rank_defect: 1 });
        assert!(build_from_coefficients(&geometric_in_g(4), 8, 2, 2).is_ok());
    }

    #[test]
    fn float_path_matches_exact() {
        let c = plain(&[2, 1, -3, 7, -20, 61, -200]);
        let e = build_from_coefficients(&c, 12, 6, 6).unwrap();
        let approx: Vec<Coefficient> = c.iter().map(|x| Coefficient::Approx(x.to_hp(HP_BITS))).collect();
        let f = build_from_coefficients(&approx, 12, 6, 6).unwrap();
        assert!(!f.exact);
        for (a, b) in e.den.iter().zip(&f.den) {
            assert!((a.clone() - b.clone()).abs().to_f64() < 1e-60);
        }
        let t = f.taylor(12);
        for (j, x) in c.iter().enumerate() {
            assert!((t[2 * j].clone() - x.to_hp(HP_BITS)).abs().to_f64() < 1e-60);
            if j < 6 {
                assert!(t[2 * j + 1].abs().to_f64() < 1e-60);
            }
        }
    }

    #[test]
    fn too_short() {
        assert!(matches!(build_from_coefficients(&plain(&[1, 1]), 2, 2, 2), Err(PadeError::InsufficientOrder { .. })));
    }
}
