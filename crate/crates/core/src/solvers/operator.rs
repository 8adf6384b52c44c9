//! The flux-form operator `u ↦ div(C(grad u + ξ))` on one slice.

use crate::grid::{CoefficientField, Neighbors};
use crate::scalar::{cast, count, Real};

/// Coefficients of one slice, either diagonal (`d` entries per node) or full
/// (`d²` row-major entries per node).
#[derive(Clone, Debug)]
pub(crate) enum SliceCoeffs<T> {
    Diagonal(Vec<T>),
    Full(Vec<T>),
}

impl<T: Real> SliceCoeffs<T> {
    /// Symmetric part of a slice of `a`, plus its skew part when nonzero.
    pub(crate) fn split(a: &CoefficientField<T>, m: usize) -> (Self, Option<Self>) {
        Self::split_matrices(a.slice(m), a.grid().d(), a.is_diagonal())
    }

    /// As [`SliceCoeffs::split`] for raw row-major matrices.
    pub(crate) fn split_matrices(s: &[T], d: usize, diagonal: bool) -> (Self, Option<Self>) {
        if diagonal {
            let diag = s.chunks_exact(d * d).flat_map(|mat| (0..d).map(move |j| mat[j * d + j])).collect();
            return (SliceCoeffs::Diagonal(diag), None);
        }
        let half = cast::<T>(0.5);
        let mut sym = Vec::with_capacity(s.len());
        let mut skew = Vec::with_capacity(s.len());
        let mut any_skew = false;
        for mat in s.chunks_exact(d * d) {
            for i in 0..d {
                for j in 0..d {
                    let (aij, aji) = (mat[i * d + j], mat[j * d + i]);
                    sym.push(half * (aij + aji));
                    let k = half * (aij - aji);
                    any_skew |= k != T::zero();
                    skew.push(k);
                }
            }
        }
        (SliceCoeffs::Full(sym), any_skew.then_some(SliceCoeffs::Full(skew)))
    }

    /// The full (unsplit) coefficients of a slice.
    pub(crate) fn full(a: &CoefficientField<T>, m: usize) -> Self {
        if a.is_diagonal() {
            Self::split(a, m).0
        } else {
            SliceCoeffs::Full(a.slice(m).to_vec())
        }
    }

    /// Mean of the diagonal entries over the slice, per axis.
    pub(crate) fn diagonal_means(&self, d: usize) -> Vec<T> {
        let mut acc = vec![T::zero(); d];
        let nodes = match self {
            SliceCoeffs::Diagonal(v) => {
                for c in v.chunks_exact(d) {
                    for j in 0..d {
                        acc[j] = acc[j] + c[j];
                    }
                }
                v.len() / d
            }
            SliceCoeffs::Full(v) => {
                for c in v.chunks_exact(d * d) {
                    for j in 0..d {
                        acc[j] = acc[j] + c[j * d + j];
                    }
                }
                v.len() / (d * d)
            }
        };
        acc.into_iter().map(|a| a / count::<T>(nodes)).collect()
    }

    /// Diagonal of `−div(C grad ·)` at every node (meaningful on interior nodes).
    pub(crate) fn operator_diagonal(&self, nb: &Neighbors, inv_h: T, out: &mut [T]) {
        let d = nb.next.len();
        let s = inv_h * inv_h;
        for (idx, o) in out.iter_mut().enumerate() {
            let mut acc = T::zero();
            for j in 0..d {
                let pv = nb.prev[j][idx];
                match self {
                    SliceCoeffs::Diagonal(c) => {
                        acc = acc + c[idx * d + j];
                        if pv != usize::MAX {
                            acc = acc + c[pv * d + j];
                        }
                    }
                    SliceCoeffs::Full(c) => {
                        for k in 0..d {
                            acc = acc + c[(idx * d + j) * d + k];
                        }
                        if pv != usize::MAX {
                            acc = acc + c[(pv * d + j) * d + j];
                        }
                    }
                }
            }
            *o = acc * s;
        }
    }
}

/// Flux `C(grad u + ξ)` into `flux` (interleaved), then its divergence into `out`.
/// Either term may be absent. `out` is zero off the interior nodes.
pub(crate) fn div_flux<T: Real>(
    nb: &Neighbors,
    inv_h: T,
    coeffs: &SliceCoeffs<T>,
    u: Option<&[T]>,
    xi: Option<&[T]>,
    flux: &mut [T],
    out: &mut [T],
) {
    compute_flux(nb, inv_h, coeffs, u, xi, flux);
    crate::grid::div_slice(nb, inv_h, flux, out);
}

pub(crate) fn compute_flux<T: Real>(
    nb: &Neighbors,
    inv_h: T,
    coeffs: &SliceCoeffs<T>,
    u: Option<&[T]>,
    xi: Option<&[T]>,
    flux: &mut [T],
) {
    let d = nb.next.len();
    let nodes = flux.len() / d;
    let mut g = [T::zero(); 3];
    for idx in 0..nodes {
        for j in 0..d {
            let mut v = xi.map_or(T::zero(), |x| x[j]);
            if let Some(u) = u {
                let nx = nb.next[j][idx];
                if nx != usize::MAX {
                    v = v + (u[nx] - u[idx]) * inv_h;
                }
            }
            g[j] = v;
        }
        match coeffs {
            SliceCoeffs::Diagonal(c) => {
                for j in 0..d {
                    flux[idx * d + j] = c[idx * d + j] * g[j];
                }
            }
            SliceCoeffs::Full(c) => {
                for j in 0..d {
                    let row = &c[(idx * d + j) * d..(idx * d + j + 1) * d];
                    flux[idx * d + j] = (0..d).map(|k| row[k] * g[k]).sum();
                }
            }
        }
    }
}
