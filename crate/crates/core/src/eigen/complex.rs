//! Dense complex eigensolver: Householder reduction to upper Hessenberg form,
//! single-shift QR with Givens rotations, and eigenvectors by back
//! substitution on the Schur form. Matrices are row-major.

use num_complex::Complex64 as C;

use super::EigenError;

const ZERO: C = C::new(0.0, 0.0);

fn abs1(z: C) -> f64 {
    z.re.abs() + z.im.abs()
}

/// Reduces `a` in place to upper Hessenberg form; returns the unitary `Q`
/// with `A = Q H Qᴴ` when `want_q` is set.
pub(crate) fn hessenberg(a: &mut [C], n: usize, want_q: bool) -> Option<Vec<C>> {
    let mut q = want_q.then(|| {
        let mut q = vec![ZERO; n * n];
        for i in 0..n {
            q[i * n + i] = C::new(1.0, 0.0);
        }
        q
    });
    if n < 3 {
        return q;
    }
    let mut v = vec![ZERO; n];
    let mut s = vec![ZERO; n];
    for k in 0..n - 2 {
        let len = n - k - 1;
        let mut norm2 = 0.0;
        for i in 0..len {
            v[i] = a[(k + 1 + i) * n + k];
            norm2 += v[i].norm_sqr();
        }
        let tail: f64 = (1..len).map(|i| v[i].norm_sqr()).sum();
        if tail == 0.0 {
            continue;
        }
        let xnorm = norm2.sqrt();
        let phase = if v[0] == ZERO { C::new(1.0, 0.0) } else { v[0] / v[0].norm() };
        let alpha = -phase * xnorm;
        v[0] -= alpha;
        let vnorm = (0..len).map(|i| v[i].norm_sqr()).sum::<f64>().sqrt();
        for x in v.iter_mut().take(len) {
            *x /= vnorm;
        }
        // left: A ← (I − 2vvᴴ) A on rows k+1.., columns k..
        for x in s.iter_mut() {
            *x = ZERO;
        }
        for i in 0..len {
            let vi = v[i].conj();
            let row = &a[(k + 1 + i) * n..(k + 2 + i) * n];
            for j in k..n {
                s[j] += vi * row[j];
            }
        }
        for i in 0..len {
            let f = v[i] * 2.0;
            let row = &mut a[(k + 1 + i) * n..(k + 2 + i) * n];
            for j in k..n {
                row[j] -= f * s[j];
            }
        }
        // right: A ← A (I − 2vvᴴ) on all rows, columns k+1..
        for r in 0..n {
            let row = &mut a[r * n + k + 1..r * n + n];
            let mut dot = ZERO;
            for j in 0..len {
                dot += row[j] * v[j];
            }
            let f = dot * 2.0;
            for j in 0..len {
                row[j] -= f * v[j].conj();
            }
        }
        a[(k + 1) * n + k] = alpha;
        for i in k + 2..n {
            a[i * n + k] = ZERO;
        }
        if let Some(q) = q.as_mut() {
            for r in 0..n {
                let row = &mut q[r * n + k + 1..r * n + n];
                let mut dot = ZERO;
                for j in 0..len {
                    dot += row[j] * v[j];
                }
                let f = dot * 2.0;
                for j in 0..len {
                    row[j] -= f * v[j].conj();
                }
            }
        }
    }
    q
}

/// Rotation `G = [[c, s], [−s̄, c]]` with `G·[a; b] = [r; 0]`.
fn givens(a: C, b: C) -> (f64, C, C) {
    if b == ZERO {
        return (1.0, ZERO, a);
    }
    if a == ZERO {
        let nb = b.norm();
        return (0.0, b.conj() / nb, C::new(nb, 0.0));
    }
    let na = a.norm();
    let norm = na.hypot(b.norm());
    let phase = a / na;
    (na / norm, phase * b.conj() / norm, phase * norm)
}

/// Eigenvalue of the trailing 2×2 block `[[a, b], [c, d]]` closest to `d`.
fn wilkinson(a: C, b: C, c: C, d: C) -> C {
    let p = (a - d) * 0.5;
    let bc = b * c;
    let disc = (p * p + bc).sqrt();
    let den1 = p + disc;
    let den2 = p - disc;
    let den = if den1.norm() >= den2.norm() { den1 } else { den2 };
    if den == ZERO {
        d
    } else {
        d - bc / den
    }
}

/// Shifted QR on an upper Hessenberg matrix. With `want_t` the full Schur
/// form is produced and `z` (if given) accumulates the Schur vectors.
pub(crate) fn hqr(h: &mut [C], n: usize, mut z: Option<&mut [C]>, want_t: bool) -> Result<Vec<C>, EigenError> {
    let eps = f64::EPSILON;
    let mut w = vec![ZERO; n];
    let mut done = vec![false; n];
    let mut ihi = n as isize - 1;
    let max_its = 60;
    while ihi >= 0 {
        let hi = ihi as usize;
        let mut its = 0;
        loop {
            let mut l = hi;
            while l > 0 {
                let mut s = abs1(h[(l - 1) * n + l - 1]) + abs1(h[l * n + l]);
                if s == 0.0 {
                    s = (l.saturating_sub(1)..=hi).map(|i| abs1(h[i * n + i])).sum::<f64>().max(f64::MIN_POSITIVE);
                }
                if abs1(h[l * n + l - 1]) <= eps * s {
                    h[l * n + l - 1] = ZERO;
                    break;
                }
                l -= 1;
            }
            if l == hi {
                w[hi] = h[hi * n + hi];
                done[hi] = true;
                ihi -= 1;
                break;
            }
            if its == max_its {
                let converged = (0..n).filter(|&i| done[i]).map(|i| w[i]).collect();
                return Err(EigenError::NoConvergence { converged, index: hi });
            }
            let shift = if its == 10 || its == 20 {
                let s = 0.75 * h[hi * n + hi - 1].re.abs()
                    + if hi >= 2 { h[(hi - 1) * n + hi - 2].re.abs() } else { 0.0 };
                h[hi * n + hi] + C::new(s, 0.0)
            } else {
                wilkinson(h[(hi - 1) * n + hi - 1], h[(hi - 1) * n + hi], h[hi * n + hi - 1], h[hi * n + hi])
            };
            let (row_lo, col_hi) = if want_t { (0, n - 1) } else { (l, hi) };
            for k in l..hi {
                let (a, b) = if k == l {
                    (h[l * n + l] - shift, h[(l + 1) * n + l])
                } else {
                    (h[k * n + k - 1], h[(k + 1) * n + k - 1])
                };
                let (c, s, r) = givens(a, b);
                let start = if k > l {
                    h[k * n + k - 1] = r;
                    h[(k + 1) * n + k - 1] = ZERO;
                    k
                } else {
                    l
                };
                let sc = s.conj();
                let (top, bottom) = h.split_at_mut((k + 1) * n);
                let rk = &mut top[k * n..k * n + n];
                let rk1 = &mut bottom[..n];
                for j in start..=col_hi {
                    let x = rk[j];
                    let y = rk1[j];
                    rk[j] = x * c + s * y;
                    rk1[j] = y * c - sc * x;
                }
                let last = (k + 2).min(hi);
                for i in row_lo..=last {
                    let x = h[i * n + k];
                    let y = h[i * n + k + 1];
                    h[i * n + k] = x * c + sc * y;
                    h[i * n + k + 1] = y * c - s * x;
                }
                if let Some(z) = z.as_deref_mut() {
                    for i in 0..n {
                        let x = z[i * n + k];
                        let y = z[i * n + k + 1];
                        z[i * n + k] = x * c + sc * y;
                        z[i * n + k + 1] = y * c - s * x;
                    }
                }
            }
            its += 1;
        }
    }
    Ok(w)
}

/// Eigenvectors of the upper triangular `t`, mapped through `z`; column
/// `k` of the result (returned as a list of vectors) belongs to `t[k][k]`.
pub(crate) fn triangular_eigenvectors(t: &[C], z: &[C], n: usize) -> Vec<Vec<C>> {
    let norm: f64 = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).map(|(i, j)| t[i * n + j].norm()).fold(0.0, f64::max);
    let smin = (f64::EPSILON * norm).max(f64::MIN_POSITIVE * 1e10);
    let mut out = Vec::with_capacity(n);
    let mut y = vec![ZERO; n];
    for k in 0..n {
        let lambda = t[k * n + k];
        for v in y.iter_mut() {
            *v = ZERO;
        }
        y[k] = C::new(1.0, 0.0);
        for j in (0..k).rev() {
            let mut acc = ZERO;
            for i in j + 1..=k {
                acc += t[j * n + i] * y[i];
            }
            let mut d = t[j * n + j] - lambda;
            if d.norm() < smin {
                d = C::new(smin, 0.0);
            }
            y[j] = -acc / d;
            let big = y[j].norm();
            if big > 1e100 {
                for v in y.iter_mut().take(k + 1).skip(j) {
                    *v /= big;
                }
            }
        }
        let mut v = vec![ZERO; n];
        for (r, vr) in v.iter_mut().enumerate() {
            let row = &z[r * n..r * n + k + 1];
            let mut acc = ZERO;
            for (zi, yi) in row.iter().zip(&y[..=k]) {
                acc += zi * yi;
            }
            *vr = acc;
        }
        out.push(v);
    }
    out
}

/// Eigenvalues (and optionally right eigenvectors) of a dense row-major matrix.
pub(crate) fn eigen(mut a: Vec<C>, n: usize, want_vectors: bool) -> Result<(Vec<C>, Option<Vec<Vec<C>>>), EigenError> {
    let mut q = hessenberg(&mut a, n, want_vectors);
    let values = hqr(&mut a, n, q.as_deref_mut(), want_vectors)?;
    let vectors = q.map(|q| triangular_eigenvectors(&a, &q, n));
    Ok((values, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    #[test]
    fn rotation_annihilates() {
        for (a, b) in [(c(1.0, 2.0), c(-0.5, 0.3)), (ZERO, c(0.0, 1.0)), (c(3.0, 0.0), ZERO)] {
            let (cc, s, r) = givens(a, b);
            assert!((a * cc + s * b - r).norm() < 1e-14);
            assert!((b * cc - s.conj() * a).norm() < 1e-14);
            assert!((cc * cc + s.norm_sqr() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn hessenberg_similarity() {
        let n = 6;
        let a: Vec<C> = (0..n * n).map(|k| c(((k * 7) % 11) as f64 - 5.0, ((k * 3) % 5) as f64 - 2.0)).collect();
        let mut h = a.clone();
        let q = hessenberg(&mut h, n, true).unwrap();
        for i in 0..n {
            for j in 0..i.saturating_sub(1) {
                assert_eq!(h[i * n + j], ZERO);
            }
        }
        // Q H Qᴴ = A
        for i in 0..n {
            for j in 0..n {
                let mut acc = ZERO;
                for k in 0..n {
                    for l in 0..n {
                        acc += q[i * n + k] * h[k * n + l] * q[j * n + l].conj();
                    }
                }
                assert!((acc - a[i * n + j]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn rotation_matrix_two_by_two() {
        let (vals, vecs) = eigen(vec![c(0.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0)], 2, true).unwrap();
        let mut ims: Vec<f64> = vals.iter().map(|v| v.im).collect();
        ims.sort_by(f64::total_cmp);
        assert!((ims[0] + 1.0).abs() < 1e-14 && (ims[1] - 1.0).abs() < 1e-14);
        assert!(vals.iter().all(|v| v.re.abs() < 1e-14));
        let vecs = vecs.unwrap();
        for (lambda, v) in vals.iter().zip(&vecs) {
            // [[0,1],[-1,0]] v = λ v
            assert!((v[1] - lambda * v[0]).norm() < 1e-13);
            assert!((-v[0] - lambda * v[1]).norm() < 1e-13);
        }
    }
}
