//! Dense real nonsymmetric eigensolver: orthogonal reduction to Hessenberg
//! form, Francis double-shift QR, and eigenvectors either from the full
//! real Schur form or by inverse iteration on the Hessenberg matrix.
//! Matrices are row-major.

use num_complex::Complex64 as C;

use super::EigenError;

/// Hessenberg form of a real matrix together with the reflectors that
/// produced it, so selected eigenvectors can be mapped back.
#[derive(Debug, Clone)]
pub struct RealHessenberg {
    n: usize,
    h: Vec<f64>,
    // (m, u, h) with P = I − u uᵀ / h acting on indices m..n
    reflectors: Vec<(usize, Vec<f64>, f64)>,
}

impl RealHessenberg {
    pub fn reduce(mut a: Vec<f64>, n: usize) -> Self {
        assert_eq!(a.len(), n * n);
        let mut reflectors = Vec::new();
        let mut f = vec![0.0; n];
        for m in 1..n.saturating_sub(1) {
            let scale: f64 = (m..n).map(|i| a[i * n + m - 1].abs()).sum();
            if scale == 0.0 {
                continue;
            }
            let mut ort: Vec<f64> = (m..n).map(|i| a[i * n + m - 1] / scale).collect();
            let mut h: f64 = ort.iter().map(|x| x * x).sum();
            let mut g = h.sqrt();
            if ort[0] > 0.0 {
                g = -g;
            }
            h -= ort[0] * g;
            ort[0] -= g;
            // left: rows m.., columns m-1..
            for x in f.iter_mut() {
                *x = 0.0;
            }
            for (k, i) in (m..n).enumerate() {
                let o = ort[k];
                let row = &a[i * n..i * n + n];
                for j in m - 1..n {
                    f[j] += o * row[j];
                }
            }
            for (k, i) in (m..n).enumerate() {
                let o = ort[k] / h;
                let row = &mut a[i * n..i * n + n];
                for j in m - 1..n {
                    row[j] -= f[j] * o;
                }
            }
            // right: all rows, columns m..
            for i in 0..n {
                let row = &mut a[i * n + m..i * n + n];
                let dot: f64 = row.iter().zip(&ort).map(|(x, o)| x * o).sum::<f64>() / h;
                for (x, o) in row.iter_mut().zip(&ort) {
                    *x -= dot * o;
                }
            }
            a[m * n + m - 1] = scale * g;
            for i in m + 1..n {
                a[i * n + m - 1] = 0.0;
            }
            reflectors.push((m, ort, h));
        }
        RealHessenberg { n, h: a, reflectors }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn hessenberg(&self) -> &[f64] {
        &self.h
    }

    /// Orthogonal factor `Q` with `A = Q H Qᵀ`.
    fn q_matrix(&self) -> Vec<f64> {
        let n = self.n;
        let mut q = vec![0.0; n * n];
        for i in 0..n {
            q[i * n + i] = 1.0;
        }
        // Q = P1 P2 ... ; build by applying reflectors on the right of I
        for (m, u, h) in &self.reflectors {
            for i in 0..n {
                let row = &mut q[i * n + m..i * n + n];
                let dot: f64 = row.iter().zip(u).map(|(x, o)| x * o).sum::<f64>() / h;
                for (x, o) in row.iter_mut().zip(u) {
                    *x -= dot * o;
                }
            }
        }
        q
    }

    /// Applies `Q` to a vector.
    fn apply_q(&self, x: &mut [C]) {
        for (m, u, h) in self.reflectors.iter().rev() {
            let mut dot = C::new(0.0, 0.0);
            for (k, o) in u.iter().enumerate() {
                dot += x[m + k] * o;
            }
            dot /= *h;
            for (k, o) in u.iter().enumerate() {
                x[m + k] -= dot * o;
            }
        }
    }

    /// All eigenvalues, without vectors.
    pub fn eigenvalues(&self) -> Result<Vec<C>, EigenError> {
        let mut h = self.h.clone();
        hqr2(&mut h, self.n, None)
    }

    /// All eigenvalues and right eigenvectors of the original matrix.
    pub fn eigen(&self) -> Result<(Vec<C>, Vec<Vec<C>>), EigenError> {
        let n = self.n;
        let mut h = self.h.clone();
        let mut v = self.q_matrix();
        let values = hqr2(&mut h, n, Some(&mut v))?;
        let mut vectors = Vec::with_capacity(n);
        let mut j = 0;
        while j < n {
            if values[j].im == 0.0 {
                vectors.push((0..n).map(|i| C::new(v[i * n + j], 0.0)).collect());
                j += 1;
            } else {
                let x: Vec<C> = (0..n).map(|i| C::new(v[i * n + j], v[i * n + j + 1])).collect();
                vectors.push(x.clone());
                vectors.push(x.into_iter().map(|z| z.conj()).collect());
                j += 2;
            }
        }
        Ok((values, vectors))
    }

    /// Right eigenvector for an approximate eigenvalue `lambda`, by inverse
    /// iteration on the Hessenberg matrix.
    pub fn eigenvector(&self, lambda: C) -> Vec<C> {
        let n = self.n;
        let norm = self.h.iter().map(|x| x.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let tiny = f64::EPSILON * norm;
        // LU of (H − λI) with partial pivoting between adjacent rows.
        let mut u: Vec<C> = self.h.iter().map(|&x| C::new(x, 0.0)).collect();
        for i in 0..n {
            u[i * n + i] -= lambda;
        }
        let mut mult = vec![C::new(0.0, 0.0); n];
        let mut swapped = vec![false; n];
        for k in 0..n.saturating_sub(1) {
            let a = u[k * n + k];
            let b = u[(k + 1) * n + k];
            if b.norm() > a.norm() {
                for j in k..n {
                    u.swap(k * n + j, (k + 1) * n + j);
                }
                swapped[k] = true;
            }
            let mut piv = u[k * n + k];
            if piv.norm() < tiny {
                piv = C::new(tiny, 0.0);
                u[k * n + k] = piv;
            }
            let l = u[(k + 1) * n + k] / piv;
            mult[k] = l;
            u[(k + 1) * n + k] = C::new(0.0, 0.0);
            for j in k + 1..n {
                let t = u[k * n + j];
                u[(k + 1) * n + j] -= l * t;
            }
        }
        if n > 0 && u[(n - 1) * n + n - 1].norm() < tiny {
            u[(n - 1) * n + n - 1] = C::new(tiny, 0.0);
        }
        let solve = |b: &mut [C]| {
            for k in 0..n.saturating_sub(1) {
                if swapped[k] {
                    b.swap(k, k + 1);
                }
                let t = b[k];
                b[k + 1] -= mult[k] * t;
            }
            for i in (0..n).rev() {
                let mut acc = b[i];
                for j in i + 1..n {
                    acc -= u[i * n + j] * b[j];
                }
                b[i] = acc / u[i * n + i];
            }
        };
        let mut x: Vec<C> = (0..n).map(|i| C::new(1.0 + 0.37 * ((i * 7919) % 13) as f64 / 13.0, 0.0)).collect();
        for _ in 0..3 {
            solve(&mut x);
            let s = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if s == 0.0 || !s.is_finite() {
                break;
            }
            for z in x.iter_mut() {
                *z /= s;
            }
        }
        self.apply_q(&mut x);
        x
    }
}

fn cdiv(xr: f64, xi: f64, yr: f64, yi: f64) -> (f64, f64) {
    let z = C::new(xr, xi) / C::new(yr, yi);
    (z.re, z.im)
}

/// Francis double-shift QR on a Hessenberg matrix. With `v` present the
/// full Schur form is computed and `v` (initially `Q`) is overwritten with
/// eigenvector columns: a real eigenvalue owns one column, a complex pair
/// `λ, λ̄` owns two holding the real and imaginary parts for `λ`, which is
/// stored first and has positive imaginary part.
#[allow(unused_assignments)]
fn hqr2(h: &mut [f64], nn: usize, mut v: Option<&mut [f64]>) -> Result<Vec<C>, EigenError> {
    let want = v.is_some();
    let eps = f64::EPSILON;
    let mut d = vec![0.0; nn];
    let mut e = vec![0.0; nn];
    let mut done = vec![false; nn];
    if nn == 0 {
        return Ok(Vec::new());
    }
    let idx = |i: usize, j: usize| i * nn + j;
    let mut norm = 0.0;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h[idx(i, j)].abs();
        }
    }
    let mut n = nn as isize - 1;
    let mut exshift = 0.0;
    let (mut p, mut q, mut r, mut s, mut z) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut iter = 0;
    let max_iter = 60;
    while n >= 0 {
        let nu = n as usize;
        let mut l = nu;
        while l > 0 {
            s = h[idx(l - 1, l - 1)].abs() + h[idx(l, l)].abs();
            if s == 0.0 {
                s = norm;
            }
            if h[idx(l, l - 1)].abs() < eps * s {
                break;
            }
            l -= 1;
        }
        let col_end = if want { nn } else { nu + 1 };
        let row_start = if want { 0 } else { l };
        if l == nu {
            h[idx(nu, nu)] += exshift;
            d[nu] = h[idx(nu, nu)];
            e[nu] = 0.0;
            done[nu] = true;
            n -= 1;
            iter = 0;
        } else if l == nu - 1 {
            let w = h[idx(nu, nu - 1)] * h[idx(nu - 1, nu)];
            p = (h[idx(nu - 1, nu - 1)] - h[idx(nu, nu)]) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            h[idx(nu, nu)] += exshift;
            h[idx(nu - 1, nu - 1)] += exshift;
            let x = h[idx(nu, nu)];
            if q >= 0.0 {
                z = if p >= 0.0 { p + z } else { p - z };
                d[nu - 1] = x + z;
                d[nu] = d[nu - 1];
                if z != 0.0 {
                    d[nu] = x - w / z;
                }
                e[nu - 1] = 0.0;
                e[nu] = 0.0;
                if want {
                    let x = h[idx(nu, nu - 1)];
                    s = x.abs() + z.abs();
                    p = x / s;
                    q = z / s;
                    r = (p * p + q * q).sqrt();
                    p /= r;
                    q /= r;
                    for j in nu - 1..nn {
                        z = h[idx(nu - 1, j)];
                        h[idx(nu - 1, j)] = q * z + p * h[idx(nu, j)];
                        h[idx(nu, j)] = q * h[idx(nu, j)] - p * z;
                    }
                    for i in 0..=nu {
                        z = h[idx(i, nu - 1)];
                        h[idx(i, nu - 1)] = q * z + p * h[idx(i, nu)];
                        h[idx(i, nu)] = q * h[idx(i, nu)] - p * z;
                    }
                    if let Some(v) = v.as_deref_mut() {
                        for i in 0..nn {
                            z = v[idx(i, nu - 1)];
                            v[idx(i, nu - 1)] = q * z + p * v[idx(i, nu)];
                            v[idx(i, nu)] = q * v[idx(i, nu)] - p * z;
                        }
                    }
                }
            } else {
                d[nu - 1] = x + p;
                d[nu] = x + p;
                e[nu - 1] = z;
                e[nu] = -z;
            }
            done[nu] = true;
            done[nu - 1] = true;
            n -= 2;
            iter = 0;
        } else {
            let mut x = h[idx(nu, nu)];
            let mut y = h[idx(nu - 1, nu - 1)];
            let mut w = h[idx(nu, nu - 1)] * h[idx(nu - 1, nu)];
            if iter == 10 {
                exshift += x;
                for i in 0..=nu {
                    h[idx(i, i)] -= x;
                }
                s = h[idx(nu, nu - 1)].abs() + h[idx(nu - 1, nu - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in 0..=nu {
                        h[idx(i, i)] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }
            if iter == max_iter {
                let converged = (0..nn).filter(|&i| done[i]).map(|i| C::new(d[i], e[i])).collect();
                return Err(EigenError::NoConvergence { converged, index: nu });
            }
            iter += 1;
            let mut m = nu - 2;
            loop {
                z = h[idx(m, m)];
                r = x - z;
                s = y - z;
                p = (r * s - w) / h[idx(m + 1, m)] + h[idx(m, m + 1)];
                q = h[idx(m + 1, m + 1)] - z - r - s;
                r = h[idx(m + 2, m + 1)];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if h[idx(m, m - 1)].abs() * (q.abs() + r.abs())
                    < eps * (p.abs() * (h[idx(m - 1, m - 1)].abs() + z.abs() + h[idx(m + 1, m + 1)].abs()))
                {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nu {
                h[idx(i, i - 2)] = 0.0;
                if i > m + 2 {
                    h[idx(i, i - 3)] = 0.0;
                }
            }
            let mut k = m;
            while k < nu {
                let notlast = k != nu - 1;
                if k != m {
                    p = h[idx(k, k - 1)];
                    q = h[idx(k + 1, k - 1)];
                    r = if notlast { h[idx(k + 2, k - 1)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        k += 1;
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != m {
                        h[idx(k, k - 1)] = -s * x;
                    } else if l != m {
                        h[idx(k, k - 1)] = -h[idx(k, k - 1)];
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..col_end {
                        p = h[idx(k, j)] + q * h[idx(k + 1, j)];
                        if notlast {
                            p += r * h[idx(k + 2, j)];
                            h[idx(k + 2, j)] -= p * z;
                        }
                        h[idx(k, j)] -= p * x;
                        h[idx(k + 1, j)] -= p * y;
                    }
                    for i in row_start..=nu.min(k + 3) {
                        p = x * h[idx(i, k)] + y * h[idx(i, k + 1)];
                        if notlast {
                            p += z * h[idx(i, k + 2)];
                            h[idx(i, k + 2)] -= p * r;
                        }
                        h[idx(i, k)] -= p;
                        h[idx(i, k + 1)] -= p * q;
                    }
                    if let Some(v) = v.as_deref_mut() {
                        for i in 0..nn {
                            p = x * v[idx(i, k)] + y * v[idx(i, k + 1)];
                            if notlast {
                                p += z * v[idx(i, k + 2)];
                                v[idx(i, k + 2)] -= p * r;
                            }
                            v[idx(i, k)] -= p;
                            v[idx(i, k + 1)] -= p * q;
                        }
                    }
                }
                k += 1;
            }
        }
    }
    let values: Vec<C> = (0..nn).map(|i| C::new(d[i], e[i])).collect();
    let Some(v) = v else {
        return Ok(values);
    };
    if norm == 0.0 {
        return Ok(values);
    }
    // back substitution on the quasi-triangular form
    for nb in (0..nn).rev() {
        p = d[nb];
        q = e[nb];
        if q == 0.0 {
            let mut l = nb;
            h[idx(nb, nb)] = 1.0;
            for i in (0..nb).rev() {
                let w = h[idx(i, i)] - p;
                r = 0.0;
                for j in l..=nb {
                    r += h[idx(i, j)] * h[idx(j, nb)];
                }
                if e[i] < 0.0 {
                    z = w;
                    s = r;
                } else {
                    l = i;
                    if e[i] == 0.0 {
                        h[idx(i, nb)] = if w != 0.0 { -r / w } else { -r / (eps * norm) };
                    } else {
                        let x = h[idx(i, i + 1)];
                        let y = h[idx(i + 1, i)];
                        let qq = (d[i] - p) * (d[i] - p) + e[i] * e[i];
                        let t = (x * s - z * r) / qq;
                        h[idx(i, nb)] = t;
                        h[idx(i + 1, nb)] = if x.abs() > z.abs() { (-r - w * t) / x } else { (-s - y * t) / z };
                    }
                    let t = h[idx(i, nb)].abs();
                    if (eps * t) * t > 1.0 {
                        for j in i..=nb {
                            h[idx(j, nb)] /= t;
                        }
                    }
                }
            }
        } else if q < 0.0 {
            let mut l = nb - 1;
            if h[idx(nb, nb - 1)].abs() > h[idx(nb - 1, nb)].abs() {
                h[idx(nb - 1, nb - 1)] = q / h[idx(nb, nb - 1)];
                h[idx(nb - 1, nb)] = -(h[idx(nb, nb)] - p) / h[idx(nb, nb - 1)];
            } else {
                let (cr, ci) = cdiv(0.0, -h[idx(nb - 1, nb)], h[idx(nb - 1, nb - 1)] - p, q);
                h[idx(nb - 1, nb - 1)] = cr;
                h[idx(nb - 1, nb)] = ci;
            }
            h[idx(nb, nb - 1)] = 0.0;
            h[idx(nb, nb)] = 1.0;
            for i in (0..nb.saturating_sub(1)).rev() {
                let mut ra = 0.0;
                let mut sa = 0.0;
                for j in l..=nb {
                    ra += h[idx(i, j)] * h[idx(j, nb - 1)];
                    sa += h[idx(i, j)] * h[idx(j, nb)];
                }
                let w = h[idx(i, i)] - p;
                if e[i] < 0.0 {
                    z = w;
                    r = ra;
                    s = sa;
                } else {
                    l = i;
                    if e[i] == 0.0 {
                        let (cr, ci) = cdiv(-ra, -sa, w, q);
                        h[idx(i, nb - 1)] = cr;
                        h[idx(i, nb)] = ci;
                    } else {
                        let x = h[idx(i, i + 1)];
                        let y = h[idx(i + 1, i)];
                        let mut vr = (d[i] - p) * (d[i] - p) + e[i] * e[i] - q * q;
                        let vi = (d[i] - p) * 2.0 * q;
                        if vr == 0.0 && vi == 0.0 {
                            vr = eps * norm * (w.abs() + q.abs() + x.abs() + y.abs() + z.abs());
                        }
                        let (cr, ci) = cdiv(x * r - z * ra + q * sa, x * s - z * sa - q * ra, vr, vi);
                        h[idx(i, nb - 1)] = cr;
                        h[idx(i, nb)] = ci;
                        if x.abs() > z.abs() + q.abs() {
                            h[idx(i + 1, nb - 1)] = (-ra - w * h[idx(i, nb - 1)] + q * h[idx(i, nb)]) / x;
                            h[idx(i + 1, nb)] = (-sa - w * h[idx(i, nb)] - q * h[idx(i, nb - 1)]) / x;
                        } else {
                            let (cr, ci) = cdiv(-r - y * h[idx(i, nb - 1)], -s - y * h[idx(i, nb)], z, q);
                            h[idx(i + 1, nb - 1)] = cr;
                            h[idx(i + 1, nb)] = ci;
                        }
                    }
                    let t = h[idx(i, nb - 1)].abs().max(h[idx(i, nb)].abs());
                    if (eps * t) * t > 1.0 {
                        for j in i..=nb {
                            h[idx(j, nb - 1)] /= t;
                            h[idx(j, nb)] /= t;
                        }
                    }
                }
            }
        }
    }
    // back transformation
    let mut col = vec![0.0; nn];
    for i in 0..nn {
        for j in (0..nn).rev() {
            let mut acc = 0.0;
            for k in 0..=j {
                acc += v[idx(i, k)] * h[idx(k, j)];
            }
            col[j] = acc;
        }
        v[i * nn..i * nn + nn].copy_from_slice(&col);
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matvec(a: &[f64], n: usize, x: &[C]) -> Vec<C> {
        (0..n).map(|i| (0..n).map(|j| x[j] * a[i * n + j]).sum()).collect()
    }

    fn sample(n: usize) -> Vec<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(n as u64);
        (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn reduction_is_similarity() {
        let n = 7;
        let a = sample(n);
        let hs = RealHessenberg::reduce(a.clone(), n);
        let q = hs.q_matrix();
        for i in 0..n {
            for j in 0..n {
                if i > j + 1 {
                    assert_eq!(hs.h[i * n + j], 0.0);
                }
                let mut acc = 0.0;
                for k in 0..n {
                    for l in 0..n {
                        acc += q[i * n + k] * hs.h[k * n + l] * q[j * n + l];
                    }
                }
                assert!((acc - a[i * n + j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn full_vectors_have_small_residuals() {
        for n in [1, 2, 3, 8, 25] {
            let a = sample(n);
            let hs = RealHessenberg::reduce(a.clone(), n);
            let (vals, vecs) = hs.eigen().unwrap();
            let only = hs.eigenvalues().unwrap();
            for (x, y) in vals.iter().zip(&only) {
                assert!((x - y).norm() < 1e-9, "{x} {y}");
            }
            for (lambda, v) in vals.iter().zip(&vecs) {
                let av = matvec(&a, n, v);
                let vn = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                let res = av.iter().zip(v).map(|(p, q)| (p - q * lambda).norm_sqr()).sum::<f64>().sqrt();
                assert!(res < 1e-10 * vn.max(1e-300) * 10.0, "n={n} λ={lambda} res={res}");
            }
        }
    }

    #[test]
    fn inverse_iteration_matches() {
        let n = 20;
        let a = sample(n);
        let hs = RealHessenberg::reduce(a.clone(), n);
        for lambda in hs.eigenvalues().unwrap() {
            let v = hs.eigenvector(lambda);
            let av = matvec(&a, n, &v);
            let res = av.iter().zip(&v).map(|(p, q)| (p - q * lambda).norm_sqr()).sum::<f64>().sqrt();
            assert!(res < 1e-9, "λ={lambda} res={res}");
        }
    }
}
