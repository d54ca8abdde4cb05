//! Dense non-Hermitian eigensolvers and real/conjugate-pair classification.
//!
//! Blocks carrying a real gauge are solved with the real Francis QR path,
//! which returns exact conjugate pairs; everything else goes through the
//! complex single-shift QR.

mod complex;
mod krylov;
mod real;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::hamiltonian::SparseComplexMatrix;

pub use real::RealHessenberg;

/// Default relative tolerance for calling an eigenvalue real.
pub const REALITY_TOL: f64 = 1e-9;

/// Absolute tolerance for matching conjugate partners.
pub const PAIR_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EigenError {
    #[error("empty matrix")]
    Empty,
    #[error("non-finite matrix entry at ({0}, {1})")]
    NonFinite(usize, usize),
    #[error("QR iteration did not converge at index {index} ({} eigenvalues deflated)", converged.len())]
    NoConvergence { converged: Vec<Complex64>, index: usize },
    #[error("eigenvalue {0} has no conjugate partner")]
    Unpaired(Complex64),
}

#[derive(Debug, Clone, Serialize)]
pub struct Spectrum {
    pub values: Vec<Complex64>,
    pub vectors: Option<Vec<Vec<Complex64>>>,
    pub reality_tol: f64,
}

/// Real eigenvalues and conjugate pairs `(λ, λ̄)` with `Im λ > 0`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Classification {
    pub reals: Vec<f64>,
    pub pairs: Vec<(Complex64, Complex64)>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn classify(&self) -> Result<Classification, EigenError> {
        classify_pairs(self)
    }
}

fn check_finite(m: &SparseComplexMatrix) -> Result<(), EigenError> {
    if m.dim() == 0 {
        return Err(EigenError::Empty);
    }
    for &(r, c, v) in m.entries() {
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(EigenError::NonFinite(r, c));
        }
    }
    Ok(())
}

/// Relative Arnoldi residual accepted by [`lowest_eigenpairs`].
pub const KRYLOV_TOL: f64 = 1e-13;

/// Sparse entries of `S⁻¹ M S` when `m` carries a real gauge.
fn gauged_real_sparse(m: &SparseComplexMatrix) -> Option<(Vec<(usize, usize, f64)>, Vec<u8>)> {
    let gauge = m.real_gauge()?.to_vec();
    let mut out = Vec::with_capacity(m.entries().len());
    for &(r, c, v) in m.entries() {
        let w = v * i_pow((4 + gauge[c] as i32 - gauge[r] as i32) as u32);
        if w.im != 0.0 {
            return None;
        }
        out.push((r, c, w.re));
    }
    Some((out, gauge))
}

/// Dense real matrix `S⁻¹ M S` when `m` carries a real gauge and the
/// transformed entries are exactly real.
fn gauged_real(m: &SparseComplexMatrix) -> Option<(Vec<f64>, Vec<u8>)> {
    let gauge = m.real_gauge()?.to_vec();
    let n = m.dim();
    let mut a = vec![0.0; n * n];
    for &(r, c, v) in m.entries() {
        let w = v * i_pow((4 + gauge[c] as i32 - gauge[r] as i32) as u32);
        if w.im != 0.0 {
            return None;
        }
        a[r * n + c] = w.re;
    }
    Some((a, gauge))
}

fn i_pow(k: u32) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

fn ungauge(v: &mut [Complex64], gauge: &[u8]) {
    for (x, &k) in v.iter_mut().zip(gauge) {
        *x *= i_pow(k as u32);
    }
}

/// Unit Euclidean norm, with the first component above a small relative
/// threshold rotated onto the positive real axis.
pub fn normalize(v: &mut [Complex64]) {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return;
    }
    let big = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let lead = v.iter().copied().find(|z| z.norm() > 1e-8 * big).unwrap_or(Complex64::new(1.0, 0.0));
    let phase = lead.conj() / (lead.norm() * norm);
    for z in v.iter_mut() {
        *z *= phase;
    }
}

fn sort_spectrum(values: &mut Vec<Complex64>, vectors: &mut Option<Vec<Vec<Complex64>>>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].re.total_cmp(&values[b].re).then(values[b].im.total_cmp(&values[a].im)));
    *values = order.iter().map(|&i| values[i]).collect();
    if let Some(vs) = vectors.as_mut() {
        let mut taken: Vec<Option<Vec<Complex64>>> = vs.drain(..).map(Some).collect();
        *vs = order.iter().map(|&i| taken[i].take().expect("permutation")).collect();
    }
}

/// All eigenvalues (and optionally unit eigenvectors) of `m`, sorted by
/// ascending real part, then descending imaginary part.
pub fn eigenvalues(m: &SparseComplexMatrix, want_vectors: bool) -> Result<Spectrum, EigenError> {
    check_finite(m)?;
    let n = m.dim();
    let (mut values, mut vectors) = if let Some((a, gauge)) = gauged_real(m) {
        let hs = RealHessenberg::reduce(a, n);
        if want_vectors {
            let (vals, mut vecs) = hs.eigen()?;
            for v in vecs.iter_mut() {
                ungauge(v, &gauge);
            }
            (vals, Some(vecs))
        } else {
            (hs.eigenvalues()?, None)
        }
    } else {
        complex::eigen(m.to_dense(), n, want_vectors)?
    };
    if let Some(vs) = vectors.as_mut() {
        for v in vs.iter_mut() {
            normalize(v);
        }
    }
    sort_spectrum(&mut values, &mut vectors);
    Ok(Spectrum { values, vectors, reality_tol: REALITY_TOL * m.frobenius_norm().max(1.0) })
}

/// Eigenvalues of a dense row-major complex matrix.
pub fn dense_eigenvalues(a: &[Complex64], n: usize, want_vectors: bool) -> Result<Spectrum, EigenError> {
    let m = SparseComplexMatrix::from_dense(n, a);
    eigenvalues(&m, want_vectors)
}

/// Splits a spectrum into real values and conjugate pairs.
pub fn classify_pairs(spec: &Spectrum) -> Result<Classification, EigenError> {
    classify_values(&spec.values, spec.reality_tol)
}

/// As [`classify_pairs`] with an explicit reality tolerance.
pub fn classify_values(values: &[Complex64], reality_tol: f64) -> Result<Classification, EigenError> {
    let mut out = Classification::default();
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    for &v in values {
        if v.im.abs() <= reality_tol {
            out.reals.push(v.re);
        } else if v.im > 0.0 {
            upper.push(v);
        } else {
            lower.push(v);
        }
    }
    let mut used = vec![false; lower.len()];
    for u in upper {
        let best = lower
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, w)| (i, (u - w.conj()).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match best {
            Some((i, d)) if d <= PAIR_TOL * u.norm().max(1.0) => {
                used[i] = true;
                out.pairs.push((u, lower[i]));
            }
            _ => return Err(EigenError::Unpaired(u)),
        }
    }
    if let Some(i) = used.iter().position(|u| !u) {
        return Err(EigenError::Unpaired(lower[i]));
    }
    out.reals.sort_by(f64::total_cmp);
    out.pairs.sort_by(|a, b| a.0.re.total_cmp(&b.0.re));
    Ok(out)
}

/// All eigenvalues plus eigenvectors for the `count` eigenvalues with the
/// smallest real part; vectors come from inverse iteration when the real
/// path applies, otherwise from the full decomposition.
pub fn lowest_with_vectors(m: &SparseComplexMatrix, count: usize) -> Result<(Vec<Complex64>, Vec<Vec<Complex64>>), EigenError> {
    check_finite(m)?;
    let n = m.dim();
    if let Some((a, gauge)) = gauged_real(m) {
        let hs = RealHessenberg::reduce(a, n);
        let mut values = hs.eigenvalues()?;
        let mut none = None;
        sort_spectrum(&mut values, &mut none);
        let vectors = values
            .iter()
            .take(count)
            .map(|&l| {
                let mut v = hs.eigenvector(l);
                ungauge(&mut v, &gauge);
                normalize(&mut v);
                v
            })
            .collect();
        Ok((values, vectors))
    } else {
        let spec = eigenvalues(m, true)?;
        let vectors = spec.vectors.expect("requested").into_iter().take(count).collect();
        Ok((spec.values, vectors))
    }
}

/// The `count` eigenvalues with smallest real part and their unit
/// eigenvectors. Gauged banded blocks use shift-invert Arnoldi below the
/// lowest diagonal entry; anything else, or a Krylov run that fails to
/// converge, falls back to the dense solver.
pub fn lowest_eigenpairs(m: &SparseComplexMatrix, count: usize) -> Result<(Vec<Complex64>, Vec<Vec<Complex64>>), EigenError> {
    check_finite(m)?;
    let count = count.min(m.dim());
    if m.entries().iter().all(|&(r, c, v)| r == c || v == Complex64::new(0.0, 0.0)) {
        let mut diag: Vec<(usize, Complex64)> = (0..m.dim()).map(|i| (i, m.get(i, i))).collect();
        diag.sort_by(|a, b| a.1.re.total_cmp(&b.1.re).then(b.1.im.total_cmp(&a.1.im)).then(a.0.cmp(&b.0)));
        return Ok(diag
            .into_iter()
            .take(count)
            .map(|(i, v)| {
                let mut e = vec![Complex64::new(0.0, 0.0); m.dim()];
                e[i] = Complex64::new(1.0, 0.0);
                (v, e)
            })
            .unzip());
    }
    if let Some((entries, gauge)) = gauged_real_sparse(m) {
        let sigma = (0..m.dim()).map(|i| m.get(i, i).re).fold(f64::INFINITY, f64::min) - 1.0;
        if let Some(pairs) = krylov::lowest_pairs(m.dim(), &entries, sigma, count, KRYLOV_TOL)? {
            let (values, vectors) = pairs
                .into_iter()
                .map(|(l, mut v)| {
                    ungauge(&mut v, &gauge);
                    normalize(&mut v);
                    (l, v)
                })
                .unzip();
            return Ok((values, vectors));
        }
    }
    let (mut values, vectors) = lowest_with_vectors(m, count)?;
    values.truncate(count);
    Ok((values, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{Model, Parity, TruncationScheme};
    use crate::hamiltonian::{build_block, ModelSpec, SymmetryTag};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn rotation_generator() {
        let m = SparseComplexMatrix::from_dense(2, &[c(0.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0)]);
        let s = eigenvalues(&m, false).unwrap();
        assert!((s.values[0] - c(0.0, 1.0)).norm() < 1e-14);
        assert!((s.values[1] - c(0.0, -1.0)).norm() < 1e-14);
    }

    #[test]
    fn diagonal_block() {
        let spec = ModelSpec { model: Model::Cubic12, g: 0.0, parity: Parity::Even, trunc: TruncationScheme::new(2) };
        let s = eigenvalues(&build_block(&spec).unwrap(), false).unwrap();
        let re: Vec<f64> = s.values.iter().map(|v| v.re).collect();
        assert_eq!(re, vec![2.0, 4.0, 6.0, 6.0]);
    }

    #[test]
    fn classify_examples() {
        let cl = classify_values(&[c(2.0, 0.0), c(3.1, 0.4), c(3.1, -0.4)], 1e-12).unwrap();
        assert_eq!(cl.reals, vec![2.0]);
        assert_eq!(cl.pairs, vec![(c(3.1, 0.4), c(3.1, -0.4))]);
        let cl = classify_values(&[c(2.0, 1e-14)], 1e-12).unwrap();
        assert_eq!(cl.reals, vec![2.0]);
        assert!(matches!(classify_values(&[c(1.0, 0.5)], 1e-12), Err(EigenError::Unpaired(_))));
    }

    #[test]
    fn non_finite_rejected() {
        let m = SparseComplexMatrix::new(2, vec![(0, 1, c(f64::NAN, 0.0))], SymmetryTag::General);
        assert_eq!(eigenvalues(&m, false).unwrap_err(), EigenError::NonFinite(0, 1));
    }

    #[test]
    fn gauged_and_complex_paths_agree() {
        let spec = ModelSpec { model: Model::HenonHeiles, g: 0.7, parity: Parity::Odd, trunc: TruncationScheme::new(12) };
        let m = build_block(&spec).unwrap();
        let fast = eigenvalues(&m, true).unwrap();
        let plain = SparseComplexMatrix::from_dense(m.dim(), &m.to_dense());
        assert!(plain.real_gauge().is_none());
        let slow = eigenvalues(&plain, true).unwrap();
        for a in &fast.values {
            let d = slow.values.iter().map(|b| (a - b).norm()).fold(f64::INFINITY, f64::min);
            assert!(d < 1e-9, "{a}");
        }
        let dense = m.to_dense();
        let n = m.dim();
        for s in [&fast, &slow] {
            for (l, v) in s.values.iter().zip(s.vectors.as_ref().unwrap()) {
                let res: f64 = (0..n)
                    .map(|i| ((0..n).map(|j| dense[i * n + j] * v[j]).sum::<Complex64>() - v[i] * l).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                assert!(res < 1e-10 * m.frobenius_norm());
            }
        }
    }

    #[test]
    fn inverse_iteration_vectors() {
        let spec = ModelSpec { model: Model::Cubic12, g: 1.5, parity: Parity::Even, trunc: TruncationScheme::new(14) };
        let m = build_block(&spec).unwrap();
        let (vals, vecs) = lowest_with_vectors(&m, 6).unwrap();
        let full = eigenvalues(&m, true).unwrap();
        for k in 0..6 {
            assert!((vals[k] - full.values[k]).norm() < 1e-12);
            if full.values[k].im.abs() < 1e-6 {
                let overlap: Complex64 = vecs[k].iter().zip(&full.vectors.as_ref().unwrap()[k]).map(|(a, b)| a.conj() * b).sum();
                assert!((overlap.norm() - 1.0).abs() < 1e-8);
            }
        }
    }
}
