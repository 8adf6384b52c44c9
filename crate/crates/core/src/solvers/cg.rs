//! Preconditioned conjugate gradients on flat vectors.

use crate::scalar::Real;

#[derive(Clone, Debug, Default)]
pub(crate) struct CgWork<T> {
    r: Vec<T>,
    z: Vec<T>,
    p: Vec<T>,
    ap: Vec<T>,
}

impl<T: Real> CgWork<T> {
    pub(crate) fn new(len: usize) -> Self {
        Self { r: vec![T::zero(); len], z: vec![T::zero(); len], p: vec![T::zero(); len], ap: vec![T::zero(); len] }
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct CgOutcome<T> {
    pub iterations: usize,
    /// `|b - Ax| / |b|` at exit.
    pub relative_residual: T,
    pub converged: bool,
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Solves `A x = b` for symmetric positive definite `A`, starting from `x`.
pub(crate) fn pcg<T: Real>(
    work: &mut CgWork<T>,
    mut apply: impl FnMut(&[T], &mut [T]),
    mut precond: impl FnMut(&[T], &mut [T]),
    b: &[T],
    x: &mut [T],
    tol: T,
    max_iter: usize,
) -> CgOutcome<T> {
    let bnorm = dot(b, b).sqrt();
    if bnorm == T::zero() {
        x.iter_mut().for_each(|v| *v = T::zero());
        return CgOutcome { iterations: 0, relative_residual: T::zero(), converged: true };
    }
    let CgWork { r, z, p, ap } = work;
    apply(x, ap);
    for i in 0..b.len() {
        r[i] = b[i] - ap[i];
    }
    let mut rnorm = dot(r, r).sqrt();
    if rnorm <= tol * bnorm {
        return CgOutcome { iterations: 0, relative_residual: rnorm / bnorm, converged: true };
    }
    precond(r, z);
    p.copy_from_slice(z);
    let mut rz = dot(r, z);
    for it in 1..=max_iter {
        apply(p, ap);
        let pap = dot(p, ap);
        if !(pap > T::zero()) {
            return CgOutcome { iterations: it, relative_residual: rnorm / bnorm, converged: false };
        }
        let alpha = rz / pap;
        for i in 0..b.len() {
            x[i] = x[i] + alpha * p[i];
            r[i] = r[i] - alpha * ap[i];
        }
        rnorm = dot(r, r).sqrt();
        if rnorm <= tol * bnorm {
            return CgOutcome { iterations: it, relative_residual: rnorm / bnorm, converged: true };
        }
        precond(r, z);
        let rz_new = dot(r, z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..b.len() {
            p[i] = z[i] + beta * p[i];
        }
    }
    CgOutcome { iterations: max_iter, relative_residual: rnorm / bnorm, converged: false }
}
