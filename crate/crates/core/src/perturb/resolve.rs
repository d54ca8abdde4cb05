//! Eigenvalue series of a matrix power series `A(μ) = Σ μʲ A_j`.
//!
//! `A₀` is diagonalized exactly; each eigenvalue group is reduced with the
//! dense Bloch recursion, and groups that remain degenerate recurse on the
//! reduced series divided by `μ`. The decompositions are kept as a plan so
//! that a floating-point run at higher order can reuse them.

use super::algebra::{decompose, matmul, Mat};
use super::bloch;
use super::PerturbError;
use crate::field::FieldElement;
use crate::hp::{Hp, Scalar};

/// Scalars that exact field elements can be mapped into.
pub(crate) trait Lift: Scalar {
    fn lift(f: &FieldElement) -> Self;
}

impl Lift for FieldElement {
    fn lift(f: &FieldElement) -> Self {
        f.clone()
    }
}

impl Lift for Hp {
    fn lift(f: &FieldElement) -> Self {
        f.to_hp(crate::hp::HP_BITS)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Plan {
    values: Vec<FieldElement>,
    groups: Vec<Vec<usize>>,
    v: Mat<FieldElement>,
    vinv: Mat<FieldElement>,
    children: Vec<Option<Plan>>,
}

/// One eigenvalue branch: its series and the number of leading terms that
/// are resolved (the rest is shared with degenerate partners).
#[derive(Debug, Clone)]
pub(crate) struct BranchSeries<S> {
    pub terms: Vec<S>,
    pub shared: bool,
}

fn transform<S: Lift>(terms: &[Mat<S>], v: &Mat<FieldElement>, vinv: &Mat<FieldElement>) -> Vec<Mat<S>> {
    let lv: Mat<S> = v.iter().map(|r| r.iter().map(S::lift).collect()).collect();
    let lvi: Mat<S> = vinv.iter().map(|r| r.iter().map(S::lift).collect()).collect();
    terms.iter().map(|a| matmul(&lvi, &matmul(a, &lv))).collect()
}

/// Group reduction: `[α, C₁, C₂, …]` as `m×m` matrices.
fn reduce_group<S: Lift>(t: &[Mat<S>], group: &[usize], alpha: &FieldElement) -> Vec<Mat<S>> {
    let h0: Vec<S> = (0..t[0].len()).map(|i| t[0][i][i].clone()).collect();
    bloch::dense(&h0, &t[1..], group, &S::lift(alpha), t.len() - 1)
}

fn expand<S: Lift>(
    terms: &[Mat<S>],
    plan: &Plan,
    mut child: impl FnMut(usize, &[Mat<S>]) -> Result<Vec<BranchSeries<S>>, PerturbError>,
) -> Result<Vec<BranchSeries<S>>, PerturbError> {
    let t = transform(terms, &plan.v, &plan.vinv);
    let mut out = Vec::new();
    for (gi, group) in plan.groups.iter().enumerate() {
        let alpha = S::lift(&plan.values[gi]);
        let cs = reduce_group(&t, group, &plan.values[gi]);
        if group.len() == 1 {
            let mut terms = vec![alpha];
            terms.extend(cs.iter().map(|c| c[0][0].clone()));
            out.push(BranchSeries { terms, shared: false });
        } else if cs.is_empty() {
            for _ in group {
                out.push(BranchSeries { terms: vec![alpha.clone()], shared: true });
            }
        } else {
            for b in child(gi, &cs)? {
                let mut terms = vec![alpha.clone()];
                terms.extend(b.terms);
                out.push(BranchSeries { terms, shared: b.shared });
            }
        }
    }
    Ok(out)
}

/// Exact resolution, returning the branch series and the plan used.
pub(crate) fn exact(terms: &[Mat<FieldElement>]) -> Result<(Vec<BranchSeries<FieldElement>>, Plan), PerturbError> {
    let d = decompose(&terms[0])?;
    let mut plan = Plan { values: d.values, groups: d.groups, v: d.v, vinv: d.vinv, children: Vec::new() };
    plan.children = vec![None; plan.groups.len()];
    let mut children = vec![None; plan.groups.len()];
    let series = expand(terms, &plan, |gi, cs| {
        let (s, p) = exact(cs)?;
        children[gi] = Some(p);
        Ok(s)
    })?;
    plan.children = children;
    Ok((series, plan))
}

/// Resolution reusing an exact plan. Groups the plan never split are
/// returned with their averaged series and marked shared.
pub(crate) fn replay<S: Lift>(terms: &[Mat<S>], plan: &Plan) -> Result<Vec<BranchSeries<S>>, PerturbError> {
    expand(terms, plan, |gi, cs| match &plan.children[gi] {
        Some(p) => replay(cs, p),
        None => {
            let m = cs[0].len();
            let inv_m = S::one() / S::from_rational(&dashu::rational::RBig::from(m as u64));
            let avg: Vec<S> = cs.iter().map(|c| (0..m).fold(S::zero(), |a, i| a + c[i][i].clone()) * inv_m.clone()).collect();
            Ok((0..m).map(|_| BranchSeries { terms: avg.clone(), shared: true }).collect())
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fe(n: i64) -> FieldElement {
        FieldElement::from_i64(n)
    }

    fn diag(v: &[i64]) -> Mat<FieldElement> {
        (0..v.len()).map(|i| (0..v.len()).map(|j| if i == j { fe(v[i]) } else { fe(0) }).collect()).collect()
    }

    #[test]
    fn nested_degeneracy() {
        // A(μ) = 0 + μ·diag(1,1,2) + μ²·[[0,1,0],[1,0,0],[0,0,0]] → eigenvalues μ ± μ², 2μ
        let a0 = diag(&[0, 0, 0]);
        let a1 = diag(&[1, 1, 2]);
        let mut a2 = diag(&[0, 0, 0]);
        a2[0][1] = fe(1);
        a2[1][0] = fe(1);
        let (series, _) = exact(&[a0, a1, a2]).unwrap();
        let mut got: Vec<Vec<String>> = series.iter().map(|b| b.terms.iter().map(|x| x.to_string()).collect()).collect();
        got.sort();
        assert_eq!(got, vec![vec!["0", "1", "-1"], vec!["0", "1", "1"], vec!["0", "2", "0"]]);
        assert!(series.iter().all(|b| !b.shared));
    }

    #[test]
    fn unresolved_group_is_shared() {
        let (series, plan) = exact(&[diag(&[3, 3]), diag(&[1, 1])]).unwrap();
        assert!(series.iter().all(|b| b.shared && b.terms.len() == 2));
        let hp: Vec<Mat<Hp>> = [diag(&[3, 3]), diag(&[1, 1])].iter().map(|m| m.iter().map(|r| r.iter().map(Hp::lift).collect()).collect()).collect();
        let again = replay(&hp, &plan).unwrap();
        assert!((again[0].terms[1].to_f64() - 1.0).abs() < 1e-30);
    }
}
