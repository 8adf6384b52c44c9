//! Forward-difference gradient and backward-difference divergence.
//!
//! On the torus the pair satisfies `Σ grad(u)·F = −Σ u·div(F)` exactly. On open
//! grids the gradient is zero where the forward neighbour is missing and the
//! divergence is zero off the interior nodes.

use super::{Grid, Rank, SpaceTimeField};
use crate::error::Result;
use crate::scalar::Real;

pub(crate) const NONE: usize = usize::MAX;

/// Per-axis neighbour tables of the spatial lattice.
#[derive(Clone, Debug)]
pub struct Neighbors {
    pub(crate) next: Vec<Vec<usize>>,
    pub(crate) prev: Vec<Vec<usize>>,
    /// Nodes with every neighbour present (all nodes on the torus).
    pub(crate) interior: Vec<bool>,
}

impl Neighbors {
    pub fn new<T: Real>(grid: &Grid<T>) -> Self {
        let d = grid.d();
        let n = grid.n();
        let periodic = grid.is_periodic();
        let points = grid.points();
        let mut next = vec![vec![NONE; points]; d];
        let mut prev = vec![vec![NONE; points]; d];
        let mut interior = vec![true; points];
        let mut stride = 1;
        for j in 0..d {
            for idx in 0..points {
                let c = (idx / stride) % n;
                let base = idx - c * stride;
                if c + 1 < n {
                    next[j][idx] = idx + stride;
                } else if periodic {
                    next[j][idx] = base;
                } else {
                    interior[idx] = false;
                }
                if c > 0 {
                    prev[j][idx] = idx - stride;
                } else if periodic {
                    prev[j][idx] = base + (n - 1) * stride;
                } else {
                    interior[idx] = false;
                }
            }
            stride *= n;
        }
        Self { next, prev, interior }
    }

    pub fn is_interior(&self, idx: usize) -> bool {
        self.interior[idx]
    }
}

/// Gradient of one scalar slice into an interleaved vector slice.
pub(crate) fn grad_slice<T: Real>(nb: &Neighbors, inv_h: T, u: &[T], out: &mut [T]) {
    let d = nb.next.len();
    for idx in 0..u.len() {
        for j in 0..d {
            let nx = nb.next[j][idx];
            out[idx * d + j] = if nx == NONE { T::zero() } else { (u[nx] - u[idx]) * inv_h };
        }
    }
}

/// Divergence of one interleaved vector slice.
pub(crate) fn div_slice<T: Real>(nb: &Neighbors, inv_h: T, f: &[T], out: &mut [T]) {
    let d = nb.next.len();
    for (idx, o) in out.iter_mut().enumerate() {
        if !nb.interior[idx] {
            *o = T::zero();
            continue;
        }
        let mut acc = T::zero();
        for j in 0..d {
            acc = acc + (f[idx * d + j] - f[nb.prev[j][idx] * d + j]);
        }
        *o = acc * inv_h;
    }
}

/// Forward-difference gradient, scaled by `1/h`.
pub fn grad<T: Real>(u: &SpaceTimeField<T>) -> Result<SpaceTimeField<T>> {
    u.expect_rank(Rank::Scalar)?;
    let grid = *u.grid();
    let nb = Neighbors::new(&grid);
    let inv_h = T::one() / grid.h();
    let mut out = SpaceTimeField::zeros(grid, Rank::Vector);
    for m in 0..grid.n_t() {
        grad_slice(&nb, inv_h, u.slice(m), out.slice_mut(m));
    }
    Ok(out)
}

/// Backward-difference divergence, scaled by `1/h`.
pub fn div<T: Real>(f: &SpaceTimeField<T>) -> Result<SpaceTimeField<T>> {
    f.expect_rank(Rank::Vector)?;
    let grid = *f.grid();
    let nb = Neighbors::new(&grid);
    let inv_h = T::one() / grid.h();
    let mut out = SpaceTimeField::zeros(grid, Rank::Scalar);
    for m in 0..grid.n_t() {
        div_slice(&nb, inv_h, f.slice(m), out.slice_mut(m));
    }
    Ok(out)
}

/// Standard `2d+1`-point Laplacian, `div(grad(u))`.
pub fn laplacian<T: Real>(u: &SpaceTimeField<T>) -> Result<SpaceTimeField<T>> {
    div(&grad(u)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn gradient_of_sine_matches_difference_quotient() {
        let g = Grid::<f64>::new(1, 64, 4096).unwrap();
        let u = SpaceTimeField::scalar_fn(g, |x, _| (2.0 * PI * x[0]).sin());
        let du = grad(&u).unwrap();
        let h = g.h();
        for idx in 0..g.points() {
            let x = idx as f64 * h;
            let fd = ((2.0 * PI * (x + h)).sin() - (2.0 * PI * x).sin()) / h;
            assert!((du.get(3, idx, 0) - fd).abs() < 1e-11);
            assert!((du.get(3, idx, 0) - 2.0 * PI * (2.0 * PI * x).cos()).abs() <= 2.0 * PI * h * 2.0 * PI);
        }
    }

    #[test]
    fn laplacian_of_fourier_mode() {
        let g = Grid::<f64>::new(2, 32, 1024).unwrap();
        let u = SpaceTimeField::scalar_fn(g, |x, _| (2.0 * PI * x[0]).sin());
        let lu = laplacian(&u).unwrap();
        let h = g.h();
        let mu = 4.0 / (h * h) * (PI * h).sin().powi(2);
        let expected = u.map(|v| -mu * v);
        assert!(lu.sub(&expected).unwrap().max_abs() < 1e-9);
    }

    #[test]
    fn constants_have_exactly_zero_derivatives() {
        let g = Grid::<f64>::new(3, 6, 36).unwrap();
        let u = SpaceTimeField::scalar_fn(g, |_, _| 5.0);
        assert_eq!(grad(&u).unwrap().max_abs(), 0.0);
        let f = SpaceTimeField::from_fn(g, Rank::Vector, |_, _, c| 0.3 + c as f64);
        assert_eq!(div(&f).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn rank_mismatch_is_an_error() {
        let g = Grid::<f64>::new(2, 4, 16).unwrap();
        let f = SpaceTimeField::zeros(g, Rank::Vector);
        assert!(grad(&f).is_err());
        assert!(div(&SpaceTimeField::zeros(g, Rank::Scalar)).is_err());
    }

    #[test]
    fn open_grid_drops_boundary_differences() {
        let g = Grid::<f64>::open(1, 5, 1, 0.25, 0.0625).unwrap();
        let u = SpaceTimeField::scalar_fn(g, |x, _| x[0] * x[0]);
        let lu = laplacian(&u).unwrap();
        assert_eq!(lu.get(0, 0, 0), 0.0);
        assert_eq!(lu.get(0, 4, 0), 0.0);
        for idx in 1..4 {
            assert!((lu.get(0, idx, 0) - 2.0).abs() < 1e-12);
        }
    }
}
