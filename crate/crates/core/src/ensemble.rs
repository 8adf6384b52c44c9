//! Seeded generators of periodized space-time coefficient fields.
//!
//! A space-time periodic field together with the uniform measure over its
//! shifts is itself a stationary ergodic ensemble, so every ensemble average
//! becomes a finite torus average.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CoefficientField, Grid, Rank, SpaceTimeField};
use crate::scalar::{cast, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    /// Independent diagonal entries per space-time cell, uniform over `values`.
    Checkerboard,
    /// Depends on `x₁` only: entry `j` on cell `k` is `values[(k + j) % len]`.
    Laminate,
    /// Depends on `t` only: `values[k % len]·I` on time cell `k`.
    TimePeriodic,
    /// `values` is the diagonal (length d) or the full row-major matrix (length d²).
    Constant,
    /// Box-smoothed Gaussian noise thresholded at equal-volume quantiles into
    /// `values`, isotropic.
    SmoothedNoise,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub lambda: f64,
    /// Cells per spatial period along each axis.
    #[serde(default = "default_cells")]
    pub cells: usize,
    /// Cells per time period; defaults to `cells`.
    #[serde(default)]
    pub time_cells: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    pub values: Vec<f64>,
}

fn default_cells() -> usize {
    1
}

impl EnsembleSpec {
    pub fn new(kind: EnsembleKind, lambda: f64, cells: usize, seed: u64, values: Vec<f64>) -> Self {
        Self { kind, lambda, cells, time_cells: None, seed, values }
    }

    pub fn constant(lambda: f64, values: Vec<f64>) -> Self {
        Self::new(EnsembleKind::Constant, lambda, 1, 0, values)
    }

    pub fn with_time_cells(mut self, time_cells: usize) -> Self {
        self.time_cells = Some(time_cells);
        self
    }

    pub fn time_cells(&self) -> usize {
        self.time_cells.unwrap_or(self.cells)
    }

    /// Checks the ensemble description against a grid.
    pub fn validate<T: Real>(&self, grid: &Grid<T>) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidEnsemble(msg));
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return bad(format!("lambda {} not in (0, 1]", self.lambda));
        }
        if self.values.is_empty() {
            return bad("empty value set".into());
        }
        let d = grid.d();
        let full_matrix = self.kind == EnsembleKind::Constant && self.values.len() == d * d && d > 1;
        if !full_matrix {
            if let Some(v) = self.values.iter().find(|v| !(**v >= self.lambda && **v <= 1.0)) {
                return bad(format!("value {v} outside [{}, 1]", self.lambda));
            }
        }
        if self.kind == EnsembleKind::Constant && self.values.len() != d && !full_matrix {
            return bad(format!("constant kind needs {d} or {} values", d * d));
        }
        if self.cells == 0 || !grid.n().is_multiple_of(self.cells) {
            return bad(format!("{} cells do not divide n = {}", self.cells, grid.n()));
        }
        let tc = self.time_cells();
        if tc == 0 || !grid.n_t().is_multiple_of(tc) {
            return bad(format!("{tc} time cells do not divide n_t = {}", grid.n_t()));
        }
        Ok(())
    }
}

/// Time cell carrying slice `m` (slice `m` represents the step ending at `t_m`).
fn time_cell(m: usize, n_t: usize, time_cells: usize) -> usize {
    ((m + n_t - 1) % n_t) * time_cells / n_t
}

/// Generates the coefficient field described by `spec` on `grid`.
pub fn generate<T: Real>(spec: &EnsembleSpec, grid: &Grid<T>) -> Result<CoefficientField<T>> {
    spec.validate(grid)?;
    let d = grid.d();
    let n = grid.n();
    let nt = grid.n_t();
    let tc = spec.time_cells();
    let cells = spec.cells;
    let lambda = cast::<T>(spec.lambda);
    let vals: Vec<T> = spec.values.iter().map(|&v| cast(v)).collect();
    let diag = |entries: &dyn Fn(usize) -> T| -> Vec<T> {
        let mut m = vec![T::zero(); d * d];
        for j in 0..d {
            m[j * d + j] = entries(j);
        }
        m
    };
    let mut values = Vec::with_capacity(nt * grid.points() * d * d);
    match spec.kind {
        EnsembleKind::Constant => {
            let m = if vals.len() == d * d && d > 1 { vals.clone() } else { diag(&|j| vals[j]) };
            for _ in 0..nt * grid.points() {
                values.extend_from_slice(&m);
            }
        }
        EnsembleKind::Laminate => {
            for _ in 0..nt {
                for idx in 0..grid.points() {
                    let k = grid.coords(idx)[0] * cells / n;
                    values.extend(diag(&|j| vals[(k + j) % vals.len()]));
                }
            }
        }
        EnsembleKind::TimePeriodic => {
            for m in 0..nt {
                let v = vals[time_cell(m, nt, tc) % vals.len()];
                for _ in 0..grid.points() {
                    values.extend(diag(&|_| v));
                }
            }
        }
        EnsembleKind::Checkerboard => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let spatial_cells = cells.pow(d as u32);
            let table: Vec<usize> = (0..tc * spatial_cells * d)
                .map(|_| rng.random_range(0..vals.len()))
                .collect();
            for m in 0..nt {
                let t = time_cell(m, nt, tc);
                for idx in 0..grid.points() {
                    let c = grid.coords(idx);
                    let mut cell = 0;
                    for j in (0..d).rev() {
                        cell = cell * cells + c[j] * cells / n;
                    }
                    let base = (t * spatial_cells + cell) * d;
                    values.extend(diag(&|j| vals[table[base + j]]));
                }
            }
        }
        EnsembleKind::SmoothedNoise => {
            let levels = smoothed_levels(spec, grid);
            for &lvl in &levels {
                values.extend(diag(&|_| vals[lvl]));
            }
        }
    }
    let field = SpaceTimeField::from_values(*grid, Rank::Matrix, values)?;
    CoefficientField::new(field, lambda)
}

/// Level index in `0..values.len()` for every space-time node.
fn smoothed_levels<T: Real>(spec: &EnsembleSpec, grid: &Grid<T>) -> Vec<usize> {
    let d = grid.d();
    let n = grid.n();
    let nt = grid.n_t();
    let pts = grid.points();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut noise: Vec<f64> = (0..nt * pts).map(|_| rng.sample(StandardNormal)).collect();
    let mut scratch = vec![0.0; n.max(nt)];
    // Separable periodic box filter: one cell wide in space and in time.
    let mut stride = 1;
    for _axis in 0..d {
        let width = (n / spec.cells).max(1);
        for start in 0..nt * pts {
            let c = (start / stride) % n;
            if c != 0 {
                continue;
            }
            box_filter(&mut noise, start, stride, n, width, &mut scratch);
        }
        stride *= n;
    }
    let width_t = (nt / spec.time_cells()).max(1);
    for idx in 0..pts {
        box_filter(&mut noise, idx, pts, nt, width_t, &mut scratch);
    }
    let mut sorted = noise.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let levels = spec.values.len();
    let thresholds: Vec<f64> =
        (1..levels).map(|k| sorted[k * sorted.len() / levels]).collect();
    noise.iter().map(|v| thresholds.iter().filter(|&&t| *v >= t).count()).collect()
}

/// Periodic moving average of `len` samples at `start + i·stride`.
fn box_filter(data: &mut [f64], start: usize, stride: usize, len: usize, width: usize, scratch: &mut [f64]) {
    let half = width / 2;
    for (i, s) in scratch.iter_mut().take(len).enumerate() {
        let mut acc = 0.0;
        for w in 0..width {
            let k = (i + len * width + w - half) % len;
            acc += data[start + k * stride];
        }
        *s = acc / width as f64;
    }
    for i in 0..len {
        data[start + i * stride] = scratch[i];
    }
}

/// Periodic translation: the result at `(x, t)` is `a` at `(x + dx, t + dt)`.
pub fn shift<T: Real>(a: &CoefficientField<T>, dx: &[isize], dt: isize) -> CoefficientField<T> {
    let grid = *a.grid();
    let d = grid.d();
    let n = grid.n() as isize;
    let nt = grid.n_t() as isize;
    let dd = d * d;
    let mut out = SpaceTimeField::zeros(grid, Rank::Matrix);
    for m in 0..grid.n_t() {
        let src_m = (m as isize + dt).rem_euclid(nt) as usize;
        let src = a.slice(src_m);
        let dst = out.slice_mut(m);
        for idx in 0..grid.points() {
            let c = grid.coords(idx);
            let mut sc = [0usize; 3];
            for j in 0..d {
                sc[j] = (c[j] as isize + dx[j]).rem_euclid(n) as usize;
            }
            let s = grid.index(&sc);
            dst[idx * dd..(idx + 1) * dd].copy_from_slice(&src[s * dd..(s + 1) * dd]);
        }
    }
    CoefficientField::from_parts_unchecked(out, a.lambda()).expect("rank preserved")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid<f64> {
        Grid::new(2, 16, 256).unwrap()
    }

    #[test]
    fn constant_kind() {
        let a = generate(&EnsembleSpec::constant(0.25, vec![0.7, 0.4]), &grid()).unwrap();
        for m in 0..256 {
            for idx in 0..256 {
                assert_eq!(a.at(m, idx), &[0.7, 0.0, 0.0, 0.4]);
            }
        }
    }

    #[test]
    fn checkerboard_values_and_seeds() {
        let spec = EnsembleSpec::new(EnsembleKind::Checkerboard, 0.25, 4, 42, vec![0.25, 1.0]);
        let a = generate(&spec, &grid()).unwrap();
        for m in a.field().values().chunks_exact(4) {
            assert!(m[0] == 0.25 || m[0] == 1.0);
            assert!(m[3] == 0.25 || m[3] == 1.0);
            assert_eq!((m[1], m[2]), (0.0, 0.0));
        }
        let b = generate(&EnsembleSpec { seed: 43, ..spec.clone() }, &grid()).unwrap();
        assert_ne!(a, b);
        assert_eq!(a, generate(&spec, &grid()).unwrap());
    }

    #[test]
    fn checkerboard_is_constant_on_cells() {
        let spec = EnsembleSpec::new(EnsembleKind::Checkerboard, 0.25, 4, 7, vec![0.25, 0.5, 1.0]);
        let g = grid();
        let a = generate(&spec, &g).unwrap();
        // Cell (1, 2) spans x-indices 4..8 and y-indices 8..12; time cell 0 spans slices 1..=64.
        let reference = a.at(1, g.index(&[4, 8])).to_vec();
        for m in 1..=64 {
            for x in 4..8 {
                for y in 8..12 {
                    assert_eq!(a.at(m, g.index(&[x, y])), &reference[..]);
                }
            }
        }
    }

    #[test]
    fn time_periodic_halves() {
        let spec = EnsembleSpec::new(EnsembleKind::TimePeriodic, 0.25, 2, 0, vec![0.25, 1.0]);
        let g = grid();
        let a = generate(&spec, &g).unwrap();
        // Steps ending at t_1..t_128 lie in [0, 1/2), the rest in [1/2, 1).
        assert_eq!(a.at(1, 0)[0], 0.25);
        assert_eq!(a.at(128, 9)[3], 0.25);
        assert_eq!(a.at(129, 3)[0], 1.0);
        assert_eq!(a.at(0, 3)[0], 1.0);
    }

    #[test]
    fn laminate_depends_on_first_axis_only() {
        let spec = EnsembleSpec::new(EnsembleKind::Laminate, 0.25, 2, 0, vec![0.25, 1.0]);
        let g = grid();
        let a = generate(&spec, &g).unwrap();
        assert_eq!(a.at(5, g.index(&[0, 11])), &[0.25, 0.0, 0.0, 1.0]);
        assert_eq!(a.at(9, g.index(&[12, 3])), &[1.0, 0.0, 0.0, 0.25]);
    }

    #[test]
    fn smoothed_noise_uses_value_set_in_equal_proportions() {
        let spec = EnsembleSpec::new(EnsembleKind::SmoothedNoise, 0.2, 4, 3, vec![0.2, 0.6, 1.0]);
        let a = generate(&spec, &grid()).unwrap();
        let mut counts = [0usize; 3];
        for m in a.field().values().chunks_exact(4) {
            let k = [0.2, 0.6, 1.0].iter().position(|v| *v == m[0]).unwrap();
            counts[k] += 1;
            assert_eq!(m[0], m[3]);
        }
        let total: usize = counts.iter().sum();
        for c in counts {
            assert!((c as f64 / total as f64 - 1.0 / 3.0).abs() < 0.01);
        }
    }

    #[test]
    fn invalid_specs() {
        let g = grid();
        let low = EnsembleSpec::new(EnsembleKind::Checkerboard, 0.3, 4, 0, vec![0.25, 1.0]);
        assert!(generate(&low, &g).is_err());
        let cells = EnsembleSpec::new(EnsembleKind::Checkerboard, 0.25, 3, 0, vec![0.25, 1.0]);
        assert!(generate(&cells, &g).is_err());
        let zero = EnsembleSpec::new(EnsembleKind::Checkerboard, 0.0, 4, 0, vec![0.25, 1.0]);
        assert!(generate(&zero, &g).is_err());
    }

    #[test]
    fn shifts_wrap_and_invert() {
        let spec = EnsembleSpec::new(EnsembleKind::Checkerboard, 0.25, 4, 42, vec![0.25, 1.0]);
        let g = grid();
        let a = generate(&spec, &g).unwrap();
        assert_eq!(shift(&a, &[16, -16], 256), a);
        let b = shift(&a, &[3, -5], 17);
        assert_ne!(a, b);
        assert_eq!(shift(&b, &[-3, 5], -17), a);
        assert_eq!(b.mean(), a.mean());
        let c = generate(&EnsembleSpec::constant(0.25, vec![0.7, 0.4]), &g).unwrap();
        assert_eq!(shift(&c, &[1, 2], 3), c);
    }
}
