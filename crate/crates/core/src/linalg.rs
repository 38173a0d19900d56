//! Small dense helpers over `f64` slices. Matrices are row-major `d x d`.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(norm_sq(a))
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `y += s * x`
pub fn axpy(s: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

pub fn mat_vec(m: &[f64], x: &[f64]) -> Vec<f64> {
    let d = x.len();
    m.chunks_exact(d).map(|row| dot(row, x)).collect()
}

pub fn quad_form(m: &[f64], x: &[f64]) -> f64 {
    dot(x, &mat_vec(m, x))
}

/// Random orthogonal matrix, returned column-major as `d` columns of
/// length `d`. Gram-Schmidt on a Gaussian matrix, orthogonalised twice.
pub fn random_orthogonal<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(d);
    while cols.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        for _ in 0..2 {
            for q in &cols {
                let p = dot(q, &v);
                axpy(-p, q, &mut v);
            }
        }
        let n = norm(&v);
        if n > 1e-8 {
            v.iter_mut().for_each(|x| *x /= n);
            cols.push(v);
        }
    }
    cols
}

/// `Q diag(lambda) Q^T` from columns of `Q`.
pub fn compose_spectral(cols: &[Vec<f64>], eig: &[f64]) -> Vec<f64> {
    let d = eig.len();
    let mut m = vec![0.0; d * d];
    for (q, &l) in cols.iter().zip(eig) {
        for i in 0..d {
            let s = l * q[i];
            for j in 0..d {
                m[i * d + j] += s * q[j];
            }
        }
    }
    // exact symmetry
    for i in 0..d {
        for j in 0..i {
            let avg = 0.5 * (m[i * d + j] + m[j * d + i]);
            m[i * d + j] = avg;
            m[j * d + i] = avg;
        }
    }
    m
}

/// Solves `m x = b` for symmetric positive definite `m` by Cholesky.
/// Returns `None` if `m` is not numerically positive definite.
pub fn cholesky_solve(m: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let d = b.len();
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = m[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i * d + i] = libm::sqrt(s);
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    let mut y = vec![0.0; d];
    for i in 0..d {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * d + k] * y[k];
        }
        y[i] = s / l[i * d + i];
    }
    let mut x = vec![0.0; d];
    for i in (0..d).rev() {
        let mut s = y[i];
        for k in i + 1..d {
            s -= l[k * d + i] * x[k];
        }
        x[i] = s / l[i * d + i];
    }
    Some(x)
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration.
pub fn max_eigenvalue_psd(m: &[f64], d: usize) -> f64 {
    let mut v = vec![1.0 / libm::sqrt(d as f64); d];
    let mut lambda = 0.0;
    for _ in 0..10_000 {
        let w = mat_vec(m, &v);
        let n = norm(&w);
        if n == 0.0 {
            return 0.0;
        }
        let next = dot(&v, &w);
        v = w.into_iter().map(|x| x / n).collect();
        if (next - lambda).abs() <= 1e-15 * next.abs() {
            return next.max(n);
        }
        lambda = next;
    }
    lambda
}
