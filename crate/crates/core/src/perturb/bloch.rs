//! Bloch wave-operator recursion. With `H = H₀ + Σ_j λʲ V_j` and a
//! degenerate subspace `P` of `H₀` at energy `α`, the effective operator
//! `α + Σ_k λᵏ h_k` on `P` has the exact perturbed eigenvalues:
//!
//! ```text
//! h_k = Σ_{j=1..k} P V_j Ω_{k−j}
//! Ω_k = (α − H₀)⁻¹ Q [ Σ_{j=1..k} V_j Ω_{k−j} − Σ_{j=1..k−1} Ω_{k−j} h_j ]
//! ```
//!
//! with `Ω₀ = P`.

use super::algebra::{zeros, Mat};
use crate::hp::Scalar;

/// Sparse operator stored by columns: `cols[s]` lists `(t, value)` with
/// `V|s⟩ = Σ value·|t⟩`.
pub(crate) type SparseColumns<S> = Vec<Vec<(usize, S)>>;

/// Single perturbation `V`, sparse, in a working basis with diagonal `H₀`
/// given by `energies`; `p` lists the indices of the degenerate subspace.
/// Returns `h_1..h_kmax` as `|p|×|p|` matrices.
pub(crate) fn sparse<S: Scalar>(v: &SparseColumns<S>, energies: &[i64], p: &[usize], alpha: i64, kmax: usize) -> Vec<Mat<S>> {
    let n = energies.len();
    let d = p.len();
    let inv_gap: Vec<Option<S>> = energies
        .iter()
        .map(|&e| (e != alpha).then(|| S::one() / S::from_rational(&dashu::rational::RBig::from(alpha - e))))
        .collect();
    // omegas[k][s] is row s of Ω_k (None when zero)
    let mut omegas: Vec<Vec<Option<Vec<S>>>> = Vec::with_capacity(kmax);
    let mut omega0: Vec<Option<Vec<S>>> = vec![None; n];
    for (a, &i) in p.iter().enumerate() {
        let mut row: Vec<S> = (0..d).map(|_| S::zero()).collect();
        row[a] = S::one();
        omega0[i] = Some(row);
    }
    omegas.push(omega0);
    let mut hs: Vec<Mat<S>> = Vec::with_capacity(kmax);
    for k in 1..=kmax {
        let prev = &omegas[k - 1];
        let mut y: Vec<Option<Vec<S>>> = vec![None; n];
        for (s, row) in prev.iter().enumerate() {
            let Some(row) = row else { continue };
            for (t, c) in &v[s] {
                let target = y[*t].get_or_insert_with(|| (0..d).map(|_| S::zero()).collect());
                for (x, r) in target.iter_mut().zip(row) {
                    if !r.is_zero() {
                        *x = x.clone() + c.clone() * r.clone();
                    }
                }
            }
        }
        let mut h = zeros::<S>(d, d);
        for (a, &i) in p.iter().enumerate() {
            if let Some(row) = &y[i] {
                h[a] = row.clone();
            }
        }
        hs.push(h);
        let mut next: Vec<Option<Vec<S>>> = vec![None; n];
        for s in 0..n {
            let Some(gap) = &inv_gap[s] else { continue };
            let mut acc = y[s].take();
            for j in 1..k {
                if hs[j - 1].iter().flatten().all(|x| x.is_zero()) {
                    continue;
                }
                let Some(om) = &omegas[k - j][s] else { continue };
                let acc = acc.get_or_insert_with(|| (0..d).map(|_| S::zero()).collect());
                for (b, ob) in om.iter().enumerate() {
                    if ob.is_zero() {
                        continue;
                    }
                    for (c, x) in acc.iter_mut().enumerate() {
                        let hv = &hs[j - 1][b][c];
                        if !hv.is_zero() {
                            *x = x.clone() - ob.clone() * hv.clone();
                        }
                    }
                }
            }
            if let Some(mut acc) = acc {
                if acc.iter().all(|x| x.is_zero()) {
                    continue;
                }
                for x in acc.iter_mut() {
                    if !x.is_zero() {
                        *x = x.clone() * gap.clone();
                    }
                }
                next[s] = Some(acc);
            }
        }
        omegas.push(next);
    }
    hs
}

/// Dense variant for a diagonal `H₀ = diag(h0)` and a series of
/// perturbations `vs[j−1] = V_j`. Returns `h_1..h_kmax`.
pub(crate) fn dense<S: Scalar>(h0: &[S], vs: &[Mat<S>], p: &[usize], alpha: &S, kmax: usize) -> Vec<Mat<S>> {
    let n = h0.len();
    let d = p.len();
    let in_p: Vec<bool> = (0..n).map(|i| p.contains(&i)).collect();
    let inv_gap: Vec<Option<S>> = (0..n).map(|i| (!in_p[i]).then(|| S::one() / (alpha.clone() - h0[i].clone()))).collect();
    let mut omegas: Vec<Mat<S>> = Vec::with_capacity(kmax + 1);
    let mut o0 = zeros::<S>(n, d);
    for (a, &i) in p.iter().enumerate() {
        o0[i][a] = S::one();
    }
    omegas.push(o0);
    let mut hs: Vec<Mat<S>> = Vec::with_capacity(kmax);
    for k in 1..=kmax {
        // y = Σ_j V_j Ω_{k−j}
        let mut y = zeros::<S>(n, d);
        for j in 1..=k.min(vs.len()) {
            let vj = &vs[j - 1];
            let om = &omegas[k - j];
            for (r, yr) in y.iter_mut().enumerate() {
                for (s, os) in om.iter().enumerate() {
                    let m = &vj[r][s];
                    if m.is_zero() {
                        continue;
                    }
                    for (x, o) in yr.iter_mut().zip(os) {
                        if !o.is_zero() {
                            *x = x.clone() + m.clone() * o.clone();
                        }
                    }
                }
            }
        }
        let h: Mat<S> = p.iter().map(|&i| y[i].clone()).collect();
        hs.push(h);
        let mut next = zeros::<S>(n, d);
        for s in 0..n {
            let Some(gap) = &inv_gap[s] else { continue };
            let mut acc = y[s].clone();
            for j in 1..k {
                let om = &omegas[k - j][s];
                for (b, ob) in om.iter().enumerate() {
                    if ob.is_zero() {
                        continue;
                    }
                    for (c, x) in acc.iter_mut().enumerate() {
                        let hv = &hs[j - 1][b][c];
                        if !hv.is_zero() {
                            *x = x.clone() - ob.clone() * hv.clone();
                        }
                    }
                }
            }
            next[s] = acc.into_iter().map(|x| x * gap.clone()).collect();
        }
        omegas.push(next);
    }
    hs
}

#[cfg(test)]
mod tests {
    use super::*;
    use dashu::rational::RBig;

    fn r(n: i64, d: i64) -> RBig {
        RBig::from_parts_signed(n.into(), d.into())
    }

    // H = diag(0, 1) + λ [[0, 1], [1, 0]]: E₀(λ) = (1 − √(1 + 4λ²))/2 = −λ² + λ⁴ − 2λ⁶ + …
    #[test]
    fn two_level_series() {
        let v: SparseColumns<RBig> = vec![vec![(1, r(1, 1))], vec![(0, r(1, 1))]];
        let hs = sparse(&v, &[0, 1], &[0], 0, 6);
        let got: Vec<RBig> = hs.iter().map(|h| h[0][0].clone()).collect();
        assert_eq!(got, vec![r(0, 1), r(-1, 1), r(0, 1), r(1, 1), r(0, 1), r(-2, 1)]);
        let dense_hs = dense(&[r(0, 1), r(1, 1)], &[vec![vec![r(0, 1), r(1, 1)], vec![r(1, 1), r(0, 1)]]], &[0], &r(0, 1), 6);
        assert_eq!(dense_hs, hs);
    }

    // second-order perturbation given directly: H = diag(0,1) + μ diag(a, b) + μ² ...
    #[test]
    fn dense_with_series_terms() {
        let v1 = vec![vec![r(2, 1), r(1, 1)], vec![r(1, 1), r(0, 1)]];
        let v2 = vec![vec![r(1, 1), r(0, 1)], vec![r(0, 1), r(0, 1)]];
        let hs = dense(&[r(0, 1), r(1, 1)], &[v1, v2], &[0], &r(0, 1), 3);
        // E = 2μ + μ²(1 − 1) + μ³(...): h2 = P V2 P + P V1 Q V1 P/(0 − 1) = 1 − 1 = 0
        assert_eq!(hs[0][0][0], r(2, 1));
        assert_eq!(hs[1][0][0], r(0, 1));
    }
}
