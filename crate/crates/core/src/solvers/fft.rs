//! Spectral solves on one periodic slice.

use std::sync::Arc;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::scalar::{cast, count, to_f64, LineTransform, Real};

/// Multi-dimensional FFT of `n^d` complex samples (first axis fastest).
pub(crate) struct TorusFft<T> {
    d: usize,
    n: usize,
    forward: Arc<dyn LineTransform<T>>,
    inverse: Arc<dyn LineTransform<T>>,
    line: Vec<Complex<T>>,
}

impl<T: Real> TorusFft<T> {
    pub(crate) fn new(d: usize, n: usize) -> Self {
        Self {
            d,
            n,
            forward: T::line_fft(n, false),
            inverse: T::line_fft(n, true),
            line: vec![Complex::new(T::zero(), T::zero()); n],
        }
    }

    /// Unnormalized transform in place.
    pub(crate) fn transform(&mut self, data: &mut [Complex<T>], inverse: bool) {
        let plan = if inverse { &self.inverse } else { &self.forward };
        let n = self.n;
        // Axis 0 lines are contiguous and can be processed in one batch.
        plan.process(data);
        let mut stride = n;
        for _axis in 1..self.d {
            let block = stride * n;
            for base in (0..data.len()).step_by(block) {
                for off in 0..stride {
                    let start = base + off;
                    for (k, v) in self.line.iter_mut().enumerate() {
                        *v = data[start + k * stride];
                    }
                    plan.process(&mut self.line);
                    for (k, v) in self.line.iter().enumerate() {
                        data[start + k * stride] = *v;
                    }
                }
            }
            stride = block;
        }
    }
}

/// `(4/h²) sin²(πk/n)` for `k = 0..n`: minus the 1D discrete Laplacian symbol.
pub(crate) fn axis_symbol<T: Real>(n: usize, h: T) -> Vec<T> {
    let four = cast::<T>(4.0) / (h * h);
    (0..n)
        .map(|k| {
            let s = (T::PI() * count::<T>(k) / count::<T>(n)).sin();
            four * s * s
        })
        .collect()
}

/// Reusable diagonal solver `(shift + Σ_j w_j (−Δ_j)) u = f` on one slice.
pub(crate) struct SpectralSolver<T> {
    d: usize,
    n: usize,
    fft: TorusFft<T>,
    symbol: Vec<T>,
    buf: Vec<Complex<T>>,
}

impl<T: Real> SpectralSolver<T> {
    pub(crate) fn new(grid: &Grid<T>) -> Self {
        let d = grid.d();
        let n = grid.n();
        Self {
            d,
            n,
            fft: TorusFft::new(d, n),
            symbol: axis_symbol(n, grid.h()),
            buf: vec![Complex::new(T::zero(), T::zero()); grid.points()],
        }
    }

    /// Solves `(shift + Σ_j w_j (−Δ_j)) u = f`. A zero total symbol at the
    /// zero mode maps that mode to zero.
    pub(crate) fn solve(&mut self, shift: T, weights: &[T], f: &[T], u: &mut [T]) {
        for (b, &v) in self.buf.iter_mut().zip(f) {
            *b = Complex::new(v, T::zero());
        }
        self.fft.transform(&mut self.buf, false);
        let n = self.n;
        let scale = T::one() / count::<T>(self.buf.len());
        for (idx, b) in self.buf.iter_mut().enumerate() {
            let mut s = shift;
            let mut r = idx;
            for w in weights.iter().take(self.d) {
                s = s + *w * self.symbol[r % n];
                r /= n;
            }
            *b = if s == T::zero() { Complex::new(T::zero(), T::zero()) } else { *b * (scale / s) };
        }
        self.fft.transform(&mut self.buf, true);
        for (o, b) in u.iter_mut().zip(&self.buf) {
            *o = b.re;
        }
    }

    /// Zero-mean solution of `Δu = f` for zero-mean `f`.
    pub(crate) fn poisson(&mut self, f: &[T], u: &mut [T]) -> Result<()> {
        let nf = count::<T>(f.len());
        let mean = f.iter().copied().sum::<T>() / nf;
        let scale = f.iter().fold(T::one(), |acc, v| acc.max(v.abs()));
        if mean.abs() > cast::<T>(1e-8) * scale {
            return Err(Error::NonZeroMean { mean: to_f64(mean) });
        }
        let centered: Vec<T> = f.iter().map(|&v| v - mean).collect();
        let weights = vec![-T::one(); self.d];
        // The symbol of Δ is −Σ_j s_j, i.e. unit weights with a negative sign.
        self.solve(T::zero(), &weights, &centered, u);
        Ok(())
    }
}

/// Zero-mean solution of the discrete Poisson equation `Δu = f` on one
/// periodic slice. Inputs whose mean exceeds `1e-8·max(1, |f|_∞)` are rejected.
pub fn poisson_torus<T: Real>(grid: &Grid<T>, f: &[T]) -> Result<Vec<T>> {
    if f.len() != grid.points() {
        return Err(Error::InvalidField(format!(
            "slice has {} samples, grid slice has {}",
            f.len(),
            grid.points()
        )));
    }
    if !grid.is_periodic() {
        return Err(Error::InvalidGrid("poisson_torus needs a periodic grid".into()));
    }
    let mut solver = SpectralSolver::new(grid);
    let mut u = vec![T::zero(); f.len()];
    solver.poisson(f, &mut u)?;
    Ok(u)
}
