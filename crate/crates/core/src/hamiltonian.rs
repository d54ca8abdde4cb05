//! Parity-blocked matrices of `H = H₀ + ig·W` in the truncated oscillator basis.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::{
    decompose_potential, enumerate_sector, matrix_element, Amplitude, Model, Parity, ParitySector,
    TruncationScheme,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HamiltonianError {
    #[error("coupling must be finite, got {0}")]
    NonFiniteCoupling(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SymmetryTag {
    ComplexSymmetric,
    General,
}

/// Coordinate-form complex matrix.
///
/// `real_gauge`, when present, holds exponents `k_a` (mod 4) such that
/// `S⁻¹ M S` is real for `S = diag(i^k_a)`. Solvers may use it to work in
/// real arithmetic.
#[derive(Clone, Debug)]
pub struct SparseComplexMatrix {
    dim: usize,
    entries: Vec<(usize, usize, Complex64)>,
    symmetry: SymmetryTag,
    real_gauge: Option<Vec<u8>>,
}

impl SparseComplexMatrix {
    /// Entries are merged per `(row, col)` and kept sorted.
    pub fn new(dim: usize, mut entries: Vec<(usize, usize, Complex64)>, symmetry: SymmetryTag) -> Self {
        assert!(dim > 0, "matrix dimension must be positive");
        entries.sort_by_key(|e| (e.0, e.1));
        let mut merged: Vec<(usize, usize, Complex64)> = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            assert!(r < dim && c < dim, "entry ({r}, {c}) outside {dim}x{dim}");
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        SparseComplexMatrix { dim, entries: merged, symmetry, real_gauge: None }
    }

    pub fn from_dense(dim: usize, values: &[Complex64]) -> Self {
        assert_eq!(values.len(), dim * dim);
        let entries = (0..dim)
            .flat_map(|r| (0..dim).map(move |c| (r, c)))
            .filter_map(|(r, c)| {
                let v = values[r * dim + c];
                (v != Complex64::new(0.0, 0.0)).then_some((r, c, v))
            })
            .collect();
        Self::new(dim, entries, SymmetryTag::General)
    }

    pub fn with_real_gauge(mut self, gauge: Vec<u8>) -> Self {
        assert_eq!(gauge.len(), self.dim);
        self.real_gauge = Some(gauge);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, usize, Complex64)] {
        &self.entries
    }

    pub fn symmetry(&self) -> SymmetryTag {
        self.symmetry
    }

    pub fn real_gauge(&self) -> Option<&[u8]> {
        self.real_gauge.as_deref()
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries
            .binary_search_by_key(&(row, col), |e| (e.0, e.1))
            .map(|i| self.entries[i].2)
            .unwrap_or_default()
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim * self.dim];
        for &(r, c, v) in &self.entries {
            out[r * self.dim + c] = v;
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.iter().filter(|e| e.0 == e.1).map(|e| e.2).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|e| e.2.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_transpose_symmetric(&self) -> bool {
        self.entries.iter().all(|&(r, c, v)| self.get(c, r) == v)
    }

    /// `"row col re im"` per entry, 17 significant digits.
    pub fn dump_coordinate(&self) -> String {
        let mut s = String::new();
        for &(r, c, v) in &self.entries {
            writeln!(s, "{r} {c} {:.16e} {:.16e}", v.re, v.im).unwrap();
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub model: Model,
    pub g: f64,
    pub parity: Parity,
    pub trunc: TruncationScheme,
}

/// Exact matrix of `W` on one parity sector.
#[derive(Clone, Debug)]
pub struct ExactMatrix {
    pub dim: usize,
    /// Nonzero entries sorted by `(row, col)`.
    pub entries: Vec<(usize, usize, Amplitude)>,
}

impl ExactMatrix {
    pub fn get(&self, row: usize, col: usize) -> Amplitude {
        self.entries
            .binary_search_by_key(&(row, col), |e| (e.0, e.1))
            .map(|i| self.entries[i].2.clone())
            .unwrap_or_else(|_| Amplitude::zero())
    }
}

pub fn build_exact_w(model: Model, parity: Parity, trunc: TruncationScheme) -> ExactMatrix {
    let sector = enumerate_sector(parity, trunc);
    let ops = decompose_potential(model);
    let mut entries = Vec::new();
    for (col, &ket) in sector.states().iter().enumerate() {
        let mut targets: Vec<usize> = ops
            .iter()
            .filter_map(|op| op.apply(ket))
            .filter_map(|(t, _)| sector.position(t))
            .collect();
        targets.sort_unstable();
        targets.dedup();
        for row in targets {
            let a = matrix_element(&ops, sector.states()[row], ket);
            if !a.is_zero() {
                entries.push((row, col, a));
            }
        }
    }
    entries.sort_by_key(|e| (e.0, e.1));
    ExactMatrix { dim: sector.len(), entries }
}

/// Coupling-independent data of one parity block; `at(g)` assembles the
/// matrix for a given coupling.
#[derive(Clone, Debug)]
pub struct BlockTemplate {
    model: Model,
    parity: Parity,
    trunc: TruncationScheme,
    sector: ParitySector,
    diagonal: Vec<f64>,
    w: Vec<(usize, usize, f64)>,
}

impl BlockTemplate {
    pub fn new(model: Model, parity: Parity, trunc: TruncationScheme) -> Self {
        let sector = enumerate_sector(parity, trunc);
        let exact = build_exact_w(model, parity, trunc);
        let diagonal = sector.states().iter().map(|s| s.unperturbed_energy() as f64).collect();
        let w = exact.entries.iter().map(|(r, c, a)| (*r, *c, a.to_f64())).collect();
        BlockTemplate { model, parity, trunc, sector, diagonal, w }
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn trunc(&self) -> TruncationScheme {
        self.trunc
    }

    pub fn sector(&self) -> &ParitySector {
        &self.sector
    }

    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    /// Gauge exponents `nx mod 4` that make the block real.
    pub fn gauge(&self) -> Vec<u8> {
        self.sector.states().iter().map(|s| (s.nx % 4) as u8).collect()
    }

    pub fn at(&self, g: f64) -> Result<SparseComplexMatrix, HamiltonianError> {
        if !g.is_finite() {
            return Err(HamiltonianError::NonFiniteCoupling(g));
        }
        let mut entries: Vec<(usize, usize, Complex64)> = self
            .diagonal
            .iter()
            .enumerate()
            .map(|(i, &d)| (i, i, Complex64::new(d, 0.0)))
            .collect();
        if g != 0.0 {
            entries.extend(self.w.iter().map(|&(r, c, w)| (r, c, Complex64::new(0.0, g * w))));
        }
        Ok(SparseComplexMatrix::new(self.dim(), entries, SymmetryTag::ComplexSymmetric).with_real_gauge(self.gauge()))
    }

    /// Row-major dense real matrix `S⁻¹ H S` with `S = diag(i^nx)`.
    ///
    /// Since every term of `W` changes `nx` by an odd amount, the gauged
    /// interaction `ig·W·i^(nx_col − nx_row)` is real and antisymmetric.
    pub fn real_dense(&self, g: f64) -> Result<Vec<f64>, HamiltonianError> {
        if !g.is_finite() {
            return Err(HamiltonianError::NonFiniteCoupling(g));
        }
        let n = self.dim();
        let states = self.sector.states();
        let mut m = vec![0.0; n * n];
        for (i, &d) in self.diagonal.iter().enumerate() {
            m[i * n + i] = d;
        }
        for &(r, c, w) in &self.w {
            let delta = states[c].nx as i64 - states[r].nx as i64;
            // i · i^delta with delta odd is ±1
            let sign = if (1 + delta).rem_euclid(4) == 0 { 1.0 } else { -1.0 };
            m[r * n + c] = sign * g * w;
        }
        Ok(m)
    }
}

pub fn build_block(spec: &ModelSpec) -> Result<SparseComplexMatrix, HamiltonianError> {
    if !spec.g.is_finite() {
        return Err(HamiltonianError::NonFiniteCoupling(spec.g));
    }
    BlockTemplate::new(spec.model, spec.parity, spec.trunc).at(spec.g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisState;
    use dashu::rational::RBig;

    fn spec(model: Model, g: f64, parity: Parity, n: u32) -> ModelSpec {
        ModelSpec { model, g, parity, trunc: TruncationScheme::new(n) }
    }

    #[test]
    fn unperturbed_block_is_diagonal() {
        let m = build_block(&spec(Model::Cubic12, 0.0, Parity::Even, 2)).unwrap();
        let d = m.to_dense();
        let expected = [2.0, 4.0, 6.0, 6.0];
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { expected[i] } else { 0.0 };
                assert_eq!(d[i * 4 + j], Complex64::new(want, 0.0));
            }
        }
    }

    #[test]
    fn first_off_diagonal_entry() {
        let m = build_block(&spec(Model::Cubic12, 1.0, Parity::Even, 1)).unwrap();
        let v = m.get(1, 0);
        assert_eq!(v.re, 0.0);
        assert!((v.im - 1.0 / (2.0 * 2f64.sqrt())).abs() < 1e-15);
        assert_eq!(m.get(0, 1), v);
    }

    #[test]
    fn henon_heiles_block_structure() {
        for parity in Parity::BOTH {
            let m = build_block(&spec(Model::HenonHeiles, 0.7, parity, 9)).unwrap();
            assert!(m.is_transpose_symmetric());
            for &(r, c, v) in m.entries() {
                if r != c {
                    assert_eq!(v.re, 0.0);
                }
            }
        }
    }

    #[test]
    fn selection_rules() {
        let t = TruncationScheme::new(12);
        for parity in Parity::BOTH {
            let sector = enumerate_sector(parity, t);
            let w = build_exact_w(Model::Cubic12, parity, t);
            for (r, c, _) in &w.entries {
                let (a, b) = (sector.states()[*r], sector.states()[*c]);
                assert_eq!((a.nx as i32 - b.nx as i32).abs(), 1);
                assert!([0, 2].contains(&(a.ny as i32 - b.ny as i32).abs()));
            }
            let hh = build_exact_w(Model::HenonHeiles, parity, t);
            for (r, c, v) in &hh.entries {
                assert_ne!(r, c);
                let (a, b) = (sector.states()[*r], sector.states()[*c]);
                assert_eq!((a.ny as i32 - b.ny as i32) % 2, 0);
                assert_eq!(hh.get(*c, *r), *v);
            }
        }
    }

    #[test]
    fn exact_w_examples() {
        let t = TruncationScheme::new(3);
        let sector = enumerate_sector(Parity::Even, t);
        let p = |s| sector.position(s).unwrap();
        let w = build_exact_w(Model::Cubic12, Parity::Even, t);
        assert_eq!(
            w.get(p(BasisState::new(1, 0)), p(BasisState::new(0, 0))),
            Amplitude { coefficient: RBig::ONE, half_powers_of_two: -3, radicand: 1 }
        );
        let hh = build_exact_w(Model::HenonHeiles, Parity::Even, t);
        let v = hh.get(p(BasisState::new(3, 0)), p(BasisState::new(0, 0)));
        assert!((v.to_f64() + 6f64.sqrt() * 2f64.powf(-1.5) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn float_image_matches_exact() {
        let t = TruncationScheme::new(10);
        let g = 0.37;
        let block = build_block(&spec(Model::HenonHeiles, g, Parity::Odd, 10)).unwrap();
        let w = build_exact_w(Model::HenonHeiles, Parity::Odd, t);
        for (r, c, a) in &w.entries {
            let want = g * a.to_hp(200).to_f64();
            let got = block.get(*r, *c).im;
            assert!((got - want).abs() <= 1e-15 * want.abs());
        }
    }

    #[test]
    fn real_gauge_is_real_and_similar() {
        let tmpl = BlockTemplate::new(Model::HenonHeiles, Parity::Even, TruncationScheme::new(6));
        let g = 0.9;
        let h = tmpl.at(g).unwrap();
        let real = tmpl.real_dense(g).unwrap();
        let gauge = tmpl.gauge();
        let n = tmpl.dim();
        let ipow = |k: i64| match k.rem_euclid(4) {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        for r in 0..n {
            for c in 0..n {
                let v = h.get(r, c) * ipow(gauge[c] as i64 - gauge[r] as i64);
                assert!((v.re - real[r * n + c]).abs() < 1e-15);
                assert!(v.im.abs() < 1e-15);
                if r != c {
                    assert_eq!(real[r * n + c], -real[c * n + r]);
                }
            }
        }
    }

    #[test]
    fn rejects_non_finite_coupling() {
        assert!(build_block(&spec(Model::Cubic12, f64::NAN, Parity::Even, 2)).is_err());
        assert!(build_block(&spec(Model::Cubic12, f64::INFINITY, Parity::Even, 2)).is_err());
    }

    #[test]
    fn coordinate_dump_format() {
        let m = build_block(&spec(Model::Cubic12, 1.0, Parity::Even, 1)).unwrap();
        let dump = m.dump_coordinate();
        let first = dump.lines().next().unwrap();
        assert_eq!(first, "0 0 2.0000000000000000e0 0.0000000000000000e0");
        assert_eq!(dump.lines().count(), m.entries().len());
    }

    #[test]
    fn sparsity_grows_linearly() {
        let a = build_exact_w(Model::HenonHeiles, Parity::Even, TruncationScheme::new(20));
        let b = build_exact_w(Model::HenonHeiles, Parity::Even, TruncationScheme::new(40));
        let ra = a.entries.len() as f64 / a.dim as f64;
        let rb = b.entries.len() as f64 / b.dim as f64;
        assert!(ra <= 12.0 && rb <= 12.0);
    }
}
