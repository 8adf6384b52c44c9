//! Space-time grids, field containers, discrete calculus, parabolic cylinders
//! and the binary field format.

mod calculus;
mod coefficient;
mod cylinder;
mod io;

pub use calculus::{div, grad, laplacian, Neighbors};
pub(crate) use calculus::{div_slice, grad_slice};
pub use coefficient::CoefficientField;
pub use cylinder::{cylinder_average, sample_frame, slice_average, Cylinder, SliceRegion};
pub use io::{read_field, read_field_on, write_field};

use crate::error::{Error, Result};
use crate::scalar::{count, CompensatedSum, Real};

/// Whether the spatial and temporal axes wrap around.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Topology {
    /// Space-time torus.
    Periodic,
    /// A box cut out of a larger grid (cylinder frames); no wraparound.
    Open,
}

/// Uniform space-time grid with `n^d` spatial points and `n_t` time slices.
///
/// Periodic grids cover `[0, L)^d × [0, T)`; slice `m` sits at time `m·tau`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid<T> {
    d: usize,
    n: usize,
    n_t: usize,
    h: T,
    tau: T,
    topology: Topology,
}

impl<T: Real> Grid<T> {
    /// Unit torus in space and time.
    pub fn new(d: usize, n: usize, n_t: usize) -> Result<Self> {
        Self::with_periods(d, n, n_t, T::one(), T::one())
    }

    /// Torus of spatial period `length` and time period `period`.
    pub fn with_periods(d: usize, n: usize, n_t: usize, length: T, period: T) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::InvalidGrid(format!("dimension {d} not in 1..=3")));
        }
        if n < 4 || n_t < 4 {
            return Err(Error::InvalidGrid(format!("need n, n_t >= 4, got n={n}, n_t={n_t}")));
        }
        if !(length > T::zero() && period > T::zero() && length.is_finite() && period.is_finite()) {
            return Err(Error::InvalidGrid("periods must be positive and finite".into()));
        }
        let h = length / count(n);
        let tau = period / count(n_t);
        if tau > h {
            return Err(Error::InvalidGrid(format!(
                "time step {tau} exceeds spatial step {h}; refine n_t"
            )));
        }
        Ok(Self { d, n, n_t, h, tau, topology: Topology::Periodic })
    }

    /// Torus of spatial period `length` whose time step is `h_ratio · h²`.
    pub fn parabolic(d: usize, n: usize, n_t: usize, length: T, h_ratio: T) -> Result<Self> {
        let h = length / count(n);
        Self::with_periods(d, n, n_t, length, h_ratio * h * h * count(n_t))
    }

    /// Non-periodic box with the given spacings (used for cylinder frames).
    pub fn open(d: usize, n: usize, n_t: usize, h: T, tau: T) -> Result<Self> {
        if !(1..=3).contains(&d) || n < 2 || n_t < 1 {
            return Err(Error::InvalidGrid(format!("open grid d={d}, n={n}, n_t={n_t}")));
        }
        Ok(Self { d, n, n_t, h, tau, topology: Topology::Open })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn h(&self) -> T {
        self.h
    }

    pub fn tau(&self) -> T {
        self.tau
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn is_periodic(&self) -> bool {
        self.topology == Topology::Periodic
    }

    /// Spatial period `n·h`.
    pub fn length(&self) -> T {
        self.h * count(self.n)
    }

    /// Time period `n_t·tau`.
    pub fn period(&self) -> T {
        self.tau * count(self.n_t)
    }

    /// Number of spatial points per slice.
    pub fn points(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    /// Spatial lattice coordinates of a flat in-slice index (unused axes are 0).
    #[inline]
    pub fn coords(&self, mut idx: usize) -> [usize; 3] {
        let mut c = [0; 3];
        for slot in c.iter_mut().take(self.d) {
            *slot = idx % self.n;
            idx /= self.n;
        }
        c
    }

    /// Flat in-slice index of lattice coordinates.
    #[inline]
    pub fn index(&self, c: &[usize]) -> usize {
        let mut idx = 0;
        for j in (0..self.d).rev() {
            idx = idx * self.n + c[j];
        }
        idx
    }

    /// Physical position of a flat in-slice index.
    pub fn position(&self, idx: usize) -> [T; 3] {
        let c = self.coords(idx);
        let mut x = [T::zero(); 3];
        for j in 0..self.d {
            x[j] = count::<T>(c[j]) * self.h;
        }
        x
    }

    /// Physical time of slice `m`.
    pub fn time(&self, m: usize) -> T {
        count::<T>(m) * self.tau
    }

    /// Whether two grids describe the same lattice.
    pub fn same_as(&self, other: &Self) -> bool {
        self.d == other.d
            && self.n == other.n
            && self.n_t == other.n_t
            && self.topology == other.topology
            && self.h == other.h
            && self.tau == other.tau
    }

    pub(crate) fn ensure_same(&self, other: &Self) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "(d={}, n={}, n_t={}, {:?}) vs (d={}, n={}, n_t={}, {:?})",
                self.d, self.n, self.n_t, self.topology, other.d, other.n, other.n_t, other.topology
            )))
        }
    }
}

/// Tensor rank of the samples carried by a field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rank {
    Scalar,
    Vector,
    Matrix,
    Tensor3,
}

impl Rank {
    pub fn components(self, d: usize) -> usize {
        match self {
            Rank::Scalar => 1,
            Rank::Vector => d,
            Rank::Matrix => d * d,
            Rank::Tensor3 => d * d * d,
        }
    }

    pub fn code(self) -> u32 {
        self as u32
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(Rank::Scalar),
            1 => Some(Rank::Vector),
            2 => Some(Rank::Matrix),
            3 => Some(Rank::Tensor3),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Rank::Scalar => "scalar",
            Rank::Vector => "vector",
            Rank::Matrix => "matrix",
            Rank::Tensor3 => "tensor3",
        }
    }
}

/// Samples on a space-time grid, laid out as (t, x_d, .., x_1, component)
/// with the component index fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeField<T> {
    grid: Grid<T>,
    rank: Rank,
    values: Vec<T>,
}

impl<T: Real> SpaceTimeField<T> {
    pub fn zeros(grid: Grid<T>, rank: Rank) -> Self {
        let len = grid.n_t * grid.points() * rank.components(grid.d);
        Self { grid, rank, values: vec![T::zero(); len] }
    }

    /// Builds a field from a sampling function `f(slice, position, component)`.
    pub fn from_fn(grid: Grid<T>, rank: Rank, mut f: impl FnMut(usize, &[T], usize) -> T) -> Self {
        let nc = rank.components(grid.d);
        let mut values = Vec::with_capacity(grid.n_t * grid.points() * nc);
        for m in 0..grid.n_t {
            for idx in 0..grid.points() {
                let x = grid.position(idx);
                for c in 0..nc {
                    values.push(f(m, &x[..grid.d], c));
                }
            }
        }
        Self { grid, rank, values }
    }

    /// Scalar field from `f(x, t)`.
    pub fn scalar_fn(grid: Grid<T>, f: impl Fn(&[T], T) -> T) -> Self {
        Self::from_fn(grid, Rank::Scalar, |m, x, _| f(x, grid.time(m)))
    }

    pub fn from_values(grid: Grid<T>, rank: Rank, values: Vec<T>) -> Result<Self> {
        let len = grid.n_t * grid.points() * rank.components(grid.d);
        if values.len() != len {
            return Err(Error::InvalidField(format!(
                "expected {len} values, found {}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!("non-finite sample at offset {pos}")));
        }
        Ok(Self { grid, rank, values })
    }

    pub(crate) fn from_values_unchecked(grid: Grid<T>, rank: Rank, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), grid.n_t * grid.points() * rank.components(grid.d));
        Self { grid, rank, values }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn rank(&self) -> Rank {
        self.rank
    }

    pub fn components(&self) -> usize {
        self.rank.components(self.grid.d)
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    fn slice_len(&self) -> usize {
        self.grid.points() * self.components()
    }

    pub fn slice(&self, m: usize) -> &[T] {
        let len = self.slice_len();
        &self.values[m * len..(m + 1) * len]
    }

    pub fn slice_mut(&mut self, m: usize) -> &mut [T] {
        let len = self.slice_len();
        &mut self.values[m * len..(m + 1) * len]
    }

    #[inline]
    pub fn get(&self, m: usize, idx: usize, c: usize) -> T {
        self.values[(m * self.grid.points() + idx) * self.components() + c]
    }

    #[inline]
    pub fn set(&mut self, m: usize, idx: usize, c: usize, v: T) {
        let nc = self.components();
        self.values[(m * self.grid.points() + idx) * nc + c] = v;
    }

    pub(crate) fn expect_rank(&self, rank: Rank) -> Result<()> {
        if self.rank == rank {
            Ok(())
        } else {
            Err(Error::RankMismatch { expected: rank.name(), found: self.rank.name() })
        }
    }

    /// Scalar field holding component `c`.
    pub fn component(&self, c: usize) -> Self {
        let nc = self.components();
        let values = self.values.iter().skip(c).step_by(nc).copied().collect();
        Self { grid: self.grid, rank: Rank::Scalar, values }
    }

    /// Interleaves scalar fields into a field of the given rank.
    pub fn from_components(parts: &[Self], rank: Rank) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::InvalidField("no components".into()))?;
        let grid = first.grid;
        if parts.len() != rank.components(grid.d) {
            return Err(Error::InvalidField(format!(
                "{} components do not form a {}",
                parts.len(),
                rank.name()
            )));
        }
        for p in parts {
            p.expect_rank(Rank::Scalar)?;
            grid.ensure_same(&p.grid)?;
        }
        let n = first.values.len();
        let mut values = Vec::with_capacity(n * parts.len());
        for k in 0..n {
            for p in parts {
                values.push(p.values[k]);
            }
        }
        Ok(Self { grid, rank, values })
    }

    /// Mean of every component over the whole grid.
    pub fn mean(&self) -> Vec<T> {
        let nc = self.components();
        let mut acc = vec![CompensatedSum::new(); nc];
        for chunk in self.values.chunks_exact(nc) {
            for (a, &v) in acc.iter_mut().zip(chunk) {
                a.add(v);
            }
        }
        let total = count::<T>(self.values.len() / nc);
        acc.into_iter().map(|a| a.value() / total).collect()
    }

    /// Root-mean-square over all samples.
    pub fn rms(&self) -> T {
        if self.values.is_empty() {
            return T::zero();
        }
        (self.values.iter().map(|&v| v * v).sum::<T>() / count(self.values.len())).sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, v| acc.max(v.abs()))
    }

    /// Euclidean inner product of the raw samples.
    pub fn dot(&self, other: &Self) -> T {
        self.values.iter().zip(&other.values).map(|(&a, &b)| a * b).sum()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { grid: self.grid, rank: self.rank, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// `self + alpha · other`.
    pub fn add_scaled(&self, alpha: T, other: &Self) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        other.expect_rank(self.rank)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| a + alpha * b).collect();
        Ok(Self { grid: self.grid, rank: self.rank, values })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add_scaled(-T::one(), other)
    }

    /// Subtracts the per-component space-time mean.
    pub fn centered(&self) -> Self {
        let mean = self.mean();
        let nc = self.components();
        let mut out = self.clone();
        for chunk in out.values.chunks_exact_mut(nc) {
            for (v, &m) in chunk.iter_mut().zip(&mean) {
                *v = *v - m;
            }
        }
        out
    }
}
