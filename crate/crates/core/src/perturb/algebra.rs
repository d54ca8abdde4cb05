//! Exact polynomials and small dense linear algebra over ℚ or ℚ(√D), and
//! an exact eigendecomposition for matrices whose eigenvalues live in a
//! single quadratic field.

use dashu::base::Sign;
use dashu::integer::IBig;
use dashu::rational::RBig;
use num_complex::Complex64;

use super::PerturbError;
use crate::eigen;
use crate::field::FieldElement;
use crate::hp::Scalar;

pub(crate) type Mat<S> = Vec<Vec<S>>;

pub(crate) fn zeros<S: Scalar>(r: usize, c: usize) -> Mat<S> {
    (0..r).map(|_| (0..c).map(|_| S::zero()).collect()).collect()
}

pub(crate) fn identity<S: Scalar>(n: usize) -> Mat<S> {
    let mut m = zeros(n, n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = S::one();
    }
    m
}

pub(crate) fn matmul<S: Scalar>(a: &Mat<S>, b: &Mat<S>) -> Mat<S> {
    let inner = b.len();
    let cols = b.first().map_or(0, |r| r.len());
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| {
                    let mut acc = S::zero();
                    for k in 0..inner {
                        if !row[k].is_zero() && !b[k][j].is_zero() {
                            acc = acc + row[k].clone() * b[k][j].clone();
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

/// Inverse by Gauss–Jordan elimination; `None` when singular.
pub(crate) fn inverse<S: Scalar>(a: &Mat<S>) -> Option<Mat<S>> {
    let n = a.len();
    let mut m: Mat<S> = a.clone();
    let mut inv = identity::<S>(n);
    for col in 0..n {
        let piv = (col..n).find(|&r| !m[r][col].is_zero())?;
        m.swap(col, piv);
        inv.swap(col, piv);
        let p = m[col][col].clone();
        for j in 0..n {
            m[col][j] = m[col][j].clone() / p.clone();
            inv[col][j] = inv[col][j].clone() / p.clone();
        }
        for r in 0..n {
            if r == col || m[r][col].is_zero() {
                continue;
            }
            let f = m[r][col].clone();
            for j in 0..n {
                m[r][j] = m[r][j].clone() - f.clone() * m[col][j].clone();
                inv[r][j] = inv[r][j].clone() - f.clone() * inv[col][j].clone();
            }
        }
    }
    Some(inv)
}

/// Basis of the right null space.
pub(crate) fn null_space<S: Scalar>(a: &Mat<S>) -> Vec<Vec<S>> {
    let rows = a.len();
    let cols = a.first().map_or(0, |r| r.len());
    let mut m = a.clone();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let pv = m[r][c].clone();
        for j in 0..cols {
            m[r][j] = m[r][j].clone() / pv.clone();
        }
        for i in 0..rows {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for j in 0..cols {
                    m[i][j] = m[i][j].clone() - f.clone() * m[r][j].clone();
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v: Vec<S> = (0..cols).map(|_| S::zero()).collect();
            v[f] = S::one();
            for (i, &pc) in pivots.iter().enumerate() {
                v[pc] = -m[i][f].clone();
            }
            v
        })
        .collect()
}

/// Polynomial with coefficients from low to high degree, no trailing zeros.
pub(crate) type Poly<S> = Vec<S>;

fn trim<S: Scalar>(mut p: Poly<S>) -> Poly<S> {
    while p.last().is_some_and(|c| c.is_zero()) {
        p.pop();
    }
    p
}

pub(crate) fn eval<S: Scalar>(p: &Poly<S>, x: &S) -> S {
    p.iter().rev().fold(S::zero(), |acc, c| acc * x.clone() + c.clone())
}

fn derivative<S: Scalar>(p: &Poly<S>) -> Poly<S> {
    let mut out = Vec::new();
    for (k, c) in p.iter().enumerate().skip(1) {
        out.push(c.clone() * S::from_rational(&RBig::from(k as u64)));
    }
    trim(out)
}

fn monic<S: Scalar>(p: Poly<S>) -> Poly<S> {
    let lead = p.last().expect("nonzero polynomial").clone();
    p.into_iter().map(|c| c / lead.clone()).collect()
}

/// Quotient and remainder.
fn divmod<S: Scalar>(a: &Poly<S>, b: &Poly<S>) -> (Poly<S>, Poly<S>) {
    let mut rem = a.clone();
    let db = b.len() - 1;
    let lead = b[db].clone();
    if rem.len() < b.len() {
        return (Vec::new(), trim(rem));
    }
    let mut quot: Poly<S> = (0..rem.len() - db).map(|_| S::zero()).collect();
    for k in (0..quot.len()).rev() {
        let f = rem[k + db].clone() / lead.clone();
        if f.is_zero() {
            continue;
        }
        for (i, bc) in b.iter().enumerate() {
            rem[k + i] = rem[k + i].clone() - f.clone() * bc.clone();
        }
        quot[k] = f;
    }
    rem.truncate(db);
    (trim(quot), trim(rem))
}

fn gcd<S: Scalar>(a: &Poly<S>, b: &Poly<S>) -> Poly<S> {
    let (mut x, mut y) = (a.clone(), b.clone());
    while !y.is_empty() {
        let (_, r) = divmod(&x, &y);
        x = y;
        y = r;
    }
    monic(x)
}

/// Characteristic polynomial `det(xI − A)` by Faddeev–LeVerrier.
pub(crate) fn char_poly<S: Scalar>(a: &Mat<S>) -> Poly<S> {
    let n = a.len();
    let mut coeffs: Vec<S> = (0..=n).map(|_| S::zero()).collect();
    coeffs[n] = S::one();
    let mut m = zeros::<S>(n, n);
    for k in 1..=n {
        // M_k = A M_{k-1} + c_{n-k+1} I
        let mut next = matmul(a, &m);
        for (i, row) in next.iter_mut().enumerate() {
            row[i] = row[i].clone() + coeffs[n - k + 1].clone();
        }
        let am = matmul(a, &next);
        let tr = (0..n).fold(S::zero(), |acc, i| acc + am[i][i].clone());
        coeffs[n - k] = -(tr / S::from_rational(&RBig::from(k as u64)));
        m = next;
    }
    trim(coeffs)
}

/// Best rational approximations of `x` by continued fractions.
fn convergents(x: f64) -> Vec<RBig> {
    let mut out = Vec::new();
    if !x.is_finite() {
        return out;
    }
    let (mut h0, mut h1) = (IBig::from(1), IBig::from(0));
    let (mut k0, mut k1) = (IBig::from(0), IBig::from(1));
    let mut r = x;
    for _ in 0..40 {
        let a = r.floor();
        if a.abs() > 1e15 {
            break;
        }
        let ai = IBig::from(a as i64);
        let h = &ai * &h0 + &h1;
        let k = &ai * &k0 + &k1;
        h1 = std::mem::replace(&mut h0, h);
        k1 = std::mem::replace(&mut k0, k);
        out.push(RBig::from_parts_signed(h0.clone(), k0.clone()));
        let frac = r - a;
        if frac.abs() < 1e-13 {
            break;
        }
        r = 1.0 / frac;
    }
    out
}

fn lift_poly(p: &Poly<FieldElement>) -> (Poly<FieldElement>, u64) {
    let d = p.iter().map(|c| c.radicand()).find(|&d| d != 0).unwrap_or(0);
    (p.clone(), d)
}

fn galois(p: &Poly<FieldElement>) -> Poly<FieldElement> {
    p.iter().map(|c| c.conj()).collect()
}

fn numeric_roots(p: &Poly<FieldElement>) -> Result<Vec<Complex64>, PerturbError> {
    let deg = p.len() - 1;
    if deg == 0 {
        return Ok(Vec::new());
    }
    let lead = p[deg].to_f64();
    let mut a = vec![Complex64::new(0.0, 0.0); deg * deg];
    for j in 0..deg {
        a[j] = Complex64::new(-p[deg - 1 - j].to_f64() / lead, 0.0);
    }
    for i in 1..deg {
        a[i * deg + i - 1] = Complex64::new(1.0, 0.0);
    }
    Ok(eigen::dense_eigenvalues(&a, deg, false).map_err(|e| PerturbError::Numeric(e.to_string()))?.values)
}

/// Distinct roots of `p` in ℚ or the quadratic field of its coefficients,
/// extended by at most one new radicand for an irreducible quadratic.
pub(crate) fn exact_roots(p: &Poly<FieldElement>) -> Result<Vec<FieldElement>, PerturbError> {
    let p = trim(p.clone());
    let sf = {
        let g = gcd(&p, &derivative(&p));
        monic(divmod(&p, &g).0)
    };
    let (mut rest, radicand) = lift_poly(&sf);
    let mut roots = Vec::new();
    let sqrt_d = (radicand as f64).sqrt();
    loop {
        let deg = rest.len() - 1;
        if deg == 0 {
            break;
        }
        if deg <= 2 && radicand == 0 || deg == 1 {
            roots.extend(small_roots(&rest, radicand)?);
            break;
        }
        let mine = numeric_roots(&rest)?;
        let theirs = if radicand == 0 { mine.clone() } else { numeric_roots(&galois(&rest))? };
        let mut found = None;
        'search: for r in &mine {
            for s in &theirs {
                let a_approx = 0.5 * (r.re + s.re);
                let b_approx = if radicand == 0 { 0.0 } else { 0.5 * (r.re - s.re) / sqrt_d };
                if (r.im + s.im).abs() > 1e-6 * r.norm().max(1.0) || r.im.abs() > 1e-6 * r.norm().max(1.0) {
                    continue;
                }
                let b_cands = if radicand == 0 { vec![RBig::ZERO] } else { convergents(b_approx) };
                for a in convergents(a_approx) {
                    for b in &b_cands {
                        let x = FieldElement::new(a.clone(), b.clone(), radicand);
                        if eval(&rest, &x).is_zero() {
                            found = Some(x);
                            break 'search;
                        }
                    }
                }
            }
        }
        match found {
            Some(x) => {
                let (q, r) = divmod(&rest, &vec![-x.clone(), FieldElement::one()]);
                debug_assert!(r.is_empty());
                rest = q;
                roots.push(x);
            }
            None if deg == 2 => {
                roots.extend(small_roots(&rest, radicand)?);
                break;
            }
            None => return Err(PerturbError::Unsupported(format!("no exact root found for a degree-{deg} factor"))),
        }
    }
    Ok(roots)
}

/// Roots of a monic polynomial of degree 1 or 2.
fn small_roots(p: &Poly<FieldElement>, radicand: u64) -> Result<Vec<FieldElement>, PerturbError> {
    if p.len() == 2 {
        return Ok(vec![-p[0].clone()]);
    }
    let b = p[1].clone();
    let c = p[0].clone();
    let disc = b.clone() * b.clone() - FieldElement::from_i64(4) * c;
    if !disc.is_rational() {
        return Err(PerturbError::Unsupported(format!("discriminant {disc} is not rational")));
    }
    if disc.rat().sign() == Sign::Negative {
        return Err(PerturbError::Unsupported(format!("complex roots (discriminant {disc})")));
    }
    let root = FieldElement::sqrt_of(disc.rat()).map_err(|e| PerturbError::Unsupported(e.to_string()))?;
    if radicand != 0 && root.radicand() != 0 && root.radicand() != radicand {
        return Err(PerturbError::RadicandConflict(radicand, root.radicand()));
    }
    let half = FieldElement::ratio(1, 2);
    let r1 = (-b.clone() + root.clone()) * half.clone();
    let r2 = (-b - root) * half;
    Ok(vec![r1, r2])
}

/// Exact eigendecomposition `A = V diag(λ) V⁻¹`: returns the distinct
/// eigenvalues with their column indices in `V`.
pub(crate) struct Decomposition {
    pub values: Vec<FieldElement>,
    pub groups: Vec<Vec<usize>>,
    pub v: Mat<FieldElement>,
    pub vinv: Mat<FieldElement>,
}

pub(crate) fn decompose(a: &Mat<FieldElement>) -> Result<Decomposition, PerturbError> {
    let n = a.len();
    let roots = exact_roots(&char_poly(a))?;
    let field = roots.iter().chain(a.iter().flatten()).map(|x| x.radicand()).filter(|&d| d != 0).collect::<Vec<_>>();
    if let Some(&d) = field.first() {
        if let Some(&e) = field.iter().find(|&&e| e != d) {
            return Err(PerturbError::RadicandConflict(d, e));
        }
    }
    let mut cols: Vec<Vec<FieldElement>> = Vec::new();
    let mut groups = Vec::new();
    for r in &roots {
        let shifted: Mat<FieldElement> = a
            .iter()
            .enumerate()
            .map(|(i, row)| row.iter().enumerate().map(|(j, x)| if i == j { x.clone() - r.clone() } else { x.clone() }).collect())
            .collect();
        let ns = null_space(&shifted);
        groups.push((cols.len()..cols.len() + ns.len()).collect());
        cols.extend(ns);
    }
    if cols.len() != n {
        return Err(PerturbError::Unsupported("effective matrix is not diagonalizable".into()));
    }
    let v: Mat<FieldElement> = (0..n).map(|i| cols.iter().map(|c| c[i].clone()).collect()).collect();
    let vinv = inverse(&v).ok_or_else(|| PerturbError::Unsupported("singular eigenvector matrix".into()))?;
    Ok(Decomposition { values: roots, groups, v, vinv })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fe(n: i64, d: i64) -> FieldElement {
        FieldElement::ratio(n, d)
    }

    #[test]
    fn char_poly_of_small_matrix() {
        let a = vec![vec![fe(2, 1), fe(1, 1)], vec![fe(1, 1), fe(3, 1)]];
        let p = char_poly(&a);
        assert_eq!(p, vec![fe(5, 1), fe(-5, 1), fe(1, 1)]);
    }

    #[test]
    fn roots_rational_and_surd() {
        // (x − 1/3)(x² − 2x − 1) → 1/3, 1 ± √2
        let p = vec![fe(1, 3), fe(-1, 3), fe(-7, 3), fe(1, 1)];
        let mut r: Vec<String> = exact_roots(&p).unwrap().iter().map(|x| x.to_string()).collect();
        r.sort();
        assert_eq!(r, vec!["1 + 1*sqrt(2)", "1 - 1*sqrt(2)", "1/3"]);
    }

    #[test]
    fn roots_over_extension() {
        let s2 = FieldElement::new(RBig::ZERO, RBig::ONE, 2);
        // (x − √2)(x − 1 − √2)
        let a = -s2.clone();
        let b = -(FieldElement::one() + s2.clone());
        let p = vec![a.clone() * b.clone(), a + b, FieldElement::one()];
        let mut r = exact_roots(&p).unwrap();
        r.sort();
        assert_eq!(r, vec![s2.clone(), FieldElement::one() + s2]);
    }

    #[test]
    fn repeated_roots_collapse() {
        // (x − 2)² (x + 1)
        let p = vec![fe(4, 1), fe(0, 1), fe(-3, 1), fe(1, 1)];
        let mut r = exact_roots(&p).unwrap();
        r.sort();
        assert_eq!(r, vec![fe(-1, 1), fe(2, 1)]);
    }

    #[test]
    fn decomposition_diagonalizes() {
        let a = vec![vec![fe(1, 2), fe(1, 1), fe(0, 1)], vec![fe(1, 1), fe(0, 1), fe(0, 1)], vec![fe(0, 1), fe(0, 1), fe(1, 2)]];
        let d = decompose(&a).unwrap();
        let t = matmul(&d.vinv, &matmul(&a, &d.v));
        for (gi, g) in d.groups.iter().enumerate() {
            for &i in g {
                assert_eq!(t[i][i], d.values[gi]);
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!(t[i][j].is_zero());
                }
            }
        }
    }

    #[test]
    fn defective_rejected() {
        let a = vec![vec![fe(1, 1), fe(1, 1)], vec![fe(0, 1), fe(1, 1)]];
        assert!(matches!(decompose(&a), Err(PerturbError::Unsupported(_))));
    }
}
