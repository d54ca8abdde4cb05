//! Shift-invert Arnoldi for the few eigenvalues of a large sparse real
//! matrix closest to a real shift. `A − σI` is factored once with a banded
//! LU; the oscillator blocks are banded because states are ordered by
//! total quanta and the interaction moves at most three shells.

use num_complex::Complex64 as C;

use super::real::RealHessenberg;
use super::EigenError;

/// LU of a banded matrix with partial pivoting, stored densely but only
/// touched inside the band (the upper band widens by `kl` through pivoting).
struct BandLu {
    n: usize,
    kl: usize,
    uw: usize,
    a: Vec<f64>,
    piv: Vec<usize>,
}

impl BandLu {
    fn factor(n: usize, entries: &[(usize, usize, f64)], sigma: f64) -> Option<Self> {
        let mut kl = 0;
        let mut ku = 0;
        let mut a = vec![0.0; n * n];
        for &(r, c, v) in entries {
            kl = kl.max(r.saturating_sub(c));
            ku = ku.max(c.saturating_sub(r));
            a[r * n + c] += v;
        }
        for i in 0..n {
            a[i * n + i] -= sigma;
        }
        let uw = kl + ku;
        let mut piv = vec![0; n];
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let right = (k + uw).min(n - 1);
            let p = (k..=last).max_by(|&i, &j| a[i * n + k].abs().total_cmp(&a[j * n + k].abs())).unwrap_or(k);
            if a[p * n + k] == 0.0 {
                return None;
            }
            piv[k] = p;
            if p != k {
                for j in k..=right {
                    a.swap(k * n + j, p * n + j);
                }
            }
            let d = a[k * n + k];
            for i in k + 1..=last {
                let l = a[i * n + k] / d;
                if l == 0.0 {
                    continue;
                }
                a[i * n + k] = l;
                for j in k + 1..=right {
                    a[i * n + j] -= l * a[k * n + j];
                }
            }
        }
        Some(BandLu { n, kl, uw, a, piv })
    }

    fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        for k in 0..n {
            b.swap(k, self.piv[k]);
            let t = b[k];
            if t != 0.0 {
                for i in k + 1..=(k + self.kl).min(n - 1) {
                    b[i] -= self.a[i * n + k] * t;
                }
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..=(i + self.uw).min(n - 1) {
                s -= self.a[i * n + j] * b[j];
            }
            b[i] = s / self.a[i * n + i];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Arnoldi basis `V` (up to `m + 1` vectors) and Hessenberg `H`
/// (`(m + 1) × m`, row-major with stride `m`). Returns the achieved size,
/// which is smaller than `m` on breakdown.
fn arnoldi(lu: &BandLu, m: usize) -> (Vec<Vec<f64>>, Vec<f64>, usize) {
    let n = lu.n;
    let mut v0: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 2654435761) % 1009) as f64 / 1009.0).collect();
    let s = dot(&v0, &v0).sqrt();
    v0.iter_mut().for_each(|x| *x /= s);
    let mut basis = vec![v0];
    let mut h = vec![0.0; (m + 1) * m];
    for j in 0..m {
        let mut w = basis[j].clone();
        lu.solve(&mut w);
        let scale = dot(&w, &w).sqrt();
        // two passes of classical Gram-Schmidt
        for _ in 0..2 {
            for (i, v) in basis.iter().enumerate() {
                let c = dot(v, &w);
                h[i * m + j] += c;
                w.iter_mut().zip(v).for_each(|(x, y)| *x -= c * y);
            }
        }
        let beta = dot(&w, &w).sqrt();
        h[(j + 1) * m + j] = beta;
        if beta <= 1e-14 * scale {
            return (basis, h, j + 1);
        }
        w.iter_mut().for_each(|x| *x /= beta);
        basis.push(w);
    }
    (basis, h, m)
}

/// Eigenpairs `(λ, x)` of the sparse real matrix with the `count` smallest
/// real parts, computed by shift-invert about `sigma`. `None` when the
/// shifted matrix is singular or the wanted pairs fail to converge before
/// the Krylov space would reach the full dimension.
pub(super) fn lowest_pairs(
    n: usize,
    entries: &[(usize, usize, f64)],
    sigma: f64,
    count: usize,
    tol: f64,
) -> Result<Option<Vec<(C, Vec<C>)>>, EigenError> {
    if count == 0 {
        return Ok(Some(Vec::new()));
    }
    let Some(lu) = BandLu::factor(n, entries, sigma) else {
        return Ok(None);
    };
    let mut m = (3 * count + 20).min(n);
    loop {
        if m >= n / 2 {
            return Ok(None);
        }
        let (basis, h, size) = arnoldi(&lu, m);
        let small: Vec<f64> = (0..size).flat_map(|i| (0..size).map(move |j| (i, j))).map(|(i, j)| h[i * m + j]).collect();
        let beta = h[size * m + size - 1];
        let (thetas, ys) = RealHessenberg::reduce(small, size).eigen()?;
        let mut ritz: Vec<(C, Vec<C>, bool)> = Vec::with_capacity(size);
        for (theta, y) in thetas.into_iter().zip(ys) {
            if theta.norm() == 0.0 {
                continue;
            }
            let ynorm = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            // ‖(A − σ)⁻¹x − θx‖ = β |y_m| for unit x
            let converged = beta * y[size - 1].norm() <= tol * theta.norm() * ynorm;
            let lambda = C::new(sigma, 0.0) + theta.inv();
            ritz.push((lambda, y, converged));
        }
        ritz.sort_by(|a, b| a.0.re.total_cmp(&b.0.re).then(b.0.im.total_cmp(&a.0.im)));
        // on breakdown the Krylov space is invariant and every Ritz pair is exact
        let ok = ritz.len() >= count && (size < m || ritz[..count].iter().all(|r| r.2));
        if ok {
            let out = ritz
                .into_iter()
                .take(count)
                .map(|(lambda, y, _)| {
                    let mut x = vec![C::new(0.0, 0.0); n];
                    for (v, c) in basis.iter().zip(&y) {
                        for (xi, vi) in x.iter_mut().zip(v) {
                            *xi += c * vi;
                        }
                    }
                    (lambda, x)
                })
                .collect();
            return Ok(Some(out));
        }
        m = (m * 3 / 2 + 10).min(n);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn banded(n: usize, w: usize, seed: u64) -> Vec<(usize, usize, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut e = Vec::new();
        for i in 0..n {
            e.push((i, i, 2.0 * i as f64 + 1.0));
            for j in i + 1..(i + w + 1).min(n) {
                let x: f64 = rng.gen_range(-1.0..1.0);
                e.push((i, j, x));
                e.push((j, i, -0.5 * x));
            }
        }
        e
    }

    #[test]
    fn band_lu_solves() {
        let n = 40;
        let e = banded(n, 5, 3);
        let lu = BandLu::factor(n, &e, 0.5).unwrap();
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut b = vec![0.0; n];
        for &(r, c, v) in &e {
            b[r] += v * x[c];
        }
        for i in 0..n {
            b[i] -= 0.5 * x[i];
        }
        lu.solve(&mut b);
        for i in 0..n {
            assert!((b[i] - x[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn lowest_pairs_match_dense() {
        let n = 200;
        let e = banded(n, 6, 11);
        let mut a = vec![0.0; n * n];
        for &(r, c, v) in &e {
            a[r * n + c] += v;
        }
        let mut dense = RealHessenberg::reduce(a, n).eigenvalues().unwrap();
        dense.sort_by(|a, b| a.re.total_cmp(&b.re).then(b.im.total_cmp(&a.im)));
        let got = lowest_pairs(n, &e, 0.0, 10, 1e-13).unwrap().unwrap();
        for (k, (lambda, x)) in got.iter().enumerate() {
            assert!((lambda - dense[k]).norm() < 1e-9, "{k}: {lambda} vs {}", dense[k]);
            let mut r: Vec<C> = x.iter().map(|xi| -lambda * xi).collect();
            for &(i, j, v) in &e {
                r[i] += v * x[j];
            }
            let rn = r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let xn = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!(rn < 1e-8 * xn, "{rn}");
        }
    }
}
