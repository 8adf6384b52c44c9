//! Dense kernels for the tiny (d ≤ 3, row-major) matrices that show up in
//! ellipticity checks and the excess normal equations.

use crate::scalar::{cast, Real};

/// Solves `m x = b` by Gaussian elimination with partial pivoting.
/// Returns `None` for an exactly singular pivot.
pub fn solve<T: Real>(m: &[T], b: &[T]) -> Option<Vec<T>> {
    let n = b.len();
    debug_assert_eq!(m.len(), n * n);
    let mut a = m.to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().partial_cmp(&a[j * n + col].abs()).unwrap())
            .unwrap();
        if a[pivot * n + col] == T::zero() {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            x.swap(col, pivot);
        }
        for row in col + 1..n {
            let f = a[row * n + col] / a[col * n + col];
            for k in col..n {
                a[row * n + k] = a[row * n + k] - f * a[col * n + k];
            }
            x[row] = x[row] - f * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = x[col];
        for k in col + 1..n {
            s = s - a[col * n + k] * x[k];
        }
        x[col] = s / a[col * n + col];
    }
    Some(x)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues<T: Real>(m: &[T], n: usize) -> Vec<T> {
    let mut a = m.to_vec();
    for _sweep in 0..64 {
        let mut off = T::zero();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off = off + a[i * n + j] * a[i * n + j];
                }
            }
        }
        if off <= T::epsilon() * T::epsilon() * frobenius_sq(&a) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == T::zero() {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (cast::<T>(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<T> = (0..n).map(|i| a[i * n + i]).collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ev
}

fn frobenius_sq<T: Real>(a: &[T]) -> T {
    a.iter().map(|&v| v * v).sum()
}

/// Symmetric part `(m + mᵀ)/2`.
pub fn symmetric_part<T: Real>(m: &[T], n: usize) -> Vec<T> {
    let half = cast::<T>(0.5);
    let mut s = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            s[i * n + j] = half * (m[i * n + j] + m[j * n + i]);
        }
    }
    s
}

/// Largest singular value (operator 2-norm).
pub fn spectral_norm<T: Real>(m: &[T], n: usize) -> T {
    let mut mtm = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            mtm[i * n + j] = (0..n).map(|k| m[k * n + i] * m[k * n + j]).sum();
        }
    }
    let ev = symmetric_eigenvalues(&mtm, n);
    ev[n - 1].max(T::zero()).sqrt()
}

/// Condition number of a symmetric matrix (ratio of extreme eigenvalue moduli).
pub fn symmetric_condition<T: Real>(m: &[T], n: usize) -> T {
    let ev = symmetric_eigenvalues(m, n);
    let lo = ev.iter().fold(T::infinity(), |acc, v| acc.min(v.abs()));
    let hi = ev.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
    if lo == T::zero() {
        T::infinity()
    } else {
        hi / lo
    }
}

pub fn mat_vec<T: Real>(m: &[T], v: &[T]) -> Vec<T> {
    let n = v.len();
    (0..n).map(|i| (0..n).map(|j| m[i * n + j] * v[j]).sum()).collect()
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}
