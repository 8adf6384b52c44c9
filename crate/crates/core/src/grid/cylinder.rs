//! Box-shaped parabolic cylinders `C_R = [-R, R]^d × (-R², 0]` anchored on a grid.
//!
//! A cylinder of radius `R` spans `K = round(R/h)` points on either side of its
//! centre and `M = round(R²/tau)` time steps below its top slice. Averages use
//! the trapezoidal rule in space over the `2K+1` nodes per axis (so the spatial
//! measure is exactly `(2Kh)^d`) and the right-endpoint rule in time over slices
//! `top-M+1 ..= top`. The slice `top-M` is the bottom of the cylinder; it carries
//! initial data but no averaging weight.

use super::{CoefficientField, Grid, Rank, SpaceTimeField};
use crate::error::{Error, Result};
use crate::scalar::{cast, count, to_f64, Real};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cylinder<T> {
    radius: T,
    half_width: usize,
    depth: usize,
    center: [usize; 3],
    top: usize,
}

impl<T: Real> Cylinder<T> {
    /// Cylinder of the given radius with spatial centre `center` (lattice
    /// indices) and top slice `top`.
    pub fn new(grid: &Grid<T>, radius: T, center: &[usize], top: usize) -> Result<Self> {
        let (half_width, depth) = extent(grid, radius)?;
        let mut c = [0; 3];
        c[..grid.d()].copy_from_slice(&center[..grid.d()]);
        let cyl = Self { radius, half_width, depth, center: c, top };
        cyl.check(grid)?;
        Ok(cyl)
    }

    /// Cylinder at the grid centre whose top is the last slice.
    pub fn centered(grid: &Grid<T>, radius: T) -> Result<Self> {
        let center = [grid.n() / 2; 3];
        Self::new(grid, radius, &center, grid.n_t() - 1)
    }

    /// Cylinder with the same centre and top and a smaller radius.
    pub fn nested(&self, grid: &Grid<T>, radius: T) -> Result<Self> {
        let (half_width, depth) = extent(grid, radius)?;
        if half_width > self.half_width || depth > self.depth {
            return Err(Error::CylinderOutOfBounds(format!(
                "radius {} does not nest inside radius {}",
                to_f64(radius),
                to_f64(self.radius)
            )));
        }
        let cyl = Self { radius, half_width, depth, ..*self };
        cyl.check(grid)?;
        Ok(cyl)
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    /// Points on either side of the centre (`K`).
    pub fn half_width(&self) -> usize {
        self.half_width
    }

    /// Number of averaged time steps (`M`).
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn center(&self) -> [usize; 3] {
        self.center
    }

    pub fn top(&self) -> usize {
        self.top
    }

    fn check(&self, grid: &Grid<T>) -> Result<()> {
        let k = self.half_width;
        if grid.is_periodic() {
            if 2 * k + 1 > grid.n() {
                return Err(Error::CylinderOutOfBounds(format!(
                    "box of {} points exceeds the torus of {} points",
                    2 * k + 1,
                    grid.n()
                )));
            }
            if self.top >= grid.n_t() {
                return Err(Error::CylinderOutOfBounds(format!("top slice {} >= n_t", self.top)));
            }
            return Ok(());
        }
        for j in 0..grid.d() {
            if self.center[j] < k || self.center[j] + k >= grid.n() {
                return Err(Error::CylinderOutOfBounds(format!(
                    "axis {j}: centre {} with half width {k} leaves [0, {})",
                    self.center[j],
                    grid.n()
                )));
            }
        }
        if self.top < self.depth || self.top >= grid.n_t() {
            return Err(Error::CylinderOutOfBounds(format!(
                "time range [{}, {}] leaves [0, {})",
                self.top as isize - self.depth as isize,
                self.top,
                grid.n_t()
            )));
        }
        Ok(())
    }

    /// Grid slice of local time level `s` (0 = bottom, `depth` = top).
    pub fn slice_of(&self, grid: &Grid<T>, s: usize) -> usize {
        let offset = self.depth - s;
        if grid.is_periodic() {
            let nt = grid.n_t();
            (self.top + nt * (offset / nt + 1) - offset) % nt
        } else {
            self.top - offset
        }
    }

    /// Grid index of the node with box-local coordinates `l` (each in `0..=2K`).
    pub fn node_of(&self, grid: &Grid<T>, l: &[usize]) -> usize {
        let n = grid.n();
        let k = self.half_width;
        let mut idx = 0;
        for j in (0..grid.d()).rev() {
            let c = if grid.is_periodic() {
                (self.center[j] + n - k + l[j]) % n
            } else {
                self.center[j] - k + l[j]
            };
            idx = idx * n + c;
        }
        idx
    }

    /// Grid indices of all `(2K+1)^d` box nodes, first local axis fastest.
    pub fn nodes(&self, grid: &Grid<T>) -> Vec<usize> {
        let side = 2 * self.half_width + 1;
        let d = grid.d();
        let total = side.pow(d as u32);
        let mut out = Vec::with_capacity(total);
        let mut l = [0usize; 3];
        for mut r in 0..total {
            for slot in l.iter_mut().take(d) {
                *slot = r % side;
                r /= side;
            }
            out.push(self.node_of(grid, &l));
        }
        out
    }

    /// Trapezoidal spatial weights matching [`Cylinder::nodes`], normalized to sum to one.
    pub fn node_weights(&self, grid: &Grid<T>) -> Vec<T> {
        let side = 2 * self.half_width + 1;
        let d = grid.d();
        let total = side.pow(d as u32);
        let norm = count::<T>((2 * self.half_width).pow(d as u32));
        let half = cast::<T>(0.5);
        (0..total)
            .map(|mut r| {
                let mut w = T::one();
                for _ in 0..d {
                    let l = r % side;
                    r /= side;
                    if l == 0 || l == side - 1 {
                        w = w * half;
                    }
                }
                w / norm
            })
            .collect()
    }

    /// Grid indices of the `(2K)^d` cell anchors (local coordinates `0..2K`),
    /// where forward differences live.
    pub fn cells(&self, grid: &Grid<T>) -> Vec<usize> {
        let side = 2 * self.half_width;
        let d = grid.d();
        let total = side.pow(d as u32);
        let mut out = Vec::with_capacity(total);
        let mut l = [0usize; 3];
        for mut r in 0..total {
            for slot in l.iter_mut().take(d) {
                *slot = r % side;
                r /= side;
            }
            out.push(self.node_of(grid, &l));
        }
        out
    }

    /// Averaged grid slices, bottom-most first.
    pub fn slices(&self, grid: &Grid<T>) -> Vec<usize> {
        (1..=self.depth).map(|s| self.slice_of(grid, s)).collect()
    }

    /// Open grid carrying the cylinder's nodes including the bottom slice.
    pub fn local_grid(&self, grid: &Grid<T>) -> Result<Grid<T>> {
        Grid::open(grid.d(), 2 * self.half_width + 1, self.depth + 1, grid.h(), grid.tau())
    }

    /// The same cylinder expressed in the coordinates of [`Cylinder::local_grid`].
    pub fn localized(&self) -> Self {
        Self { center: [self.half_width; 3], top: self.depth, ..*self }
    }

    /// Copies the cylinder's nodes (bottom slice included) onto the local grid.
    pub fn extract(&self, f: &SpaceTimeField<T>) -> Result<SpaceTimeField<T>> {
        let grid = f.grid();
        self.check(grid)?;
        let local = self.local_grid(grid)?;
        let nodes = self.nodes(grid);
        let nc = f.components();
        let mut values = Vec::with_capacity(nodes.len() * (self.depth + 1) * nc);
        for s in 0..=self.depth {
            let slice = f.slice(self.slice_of(grid, s));
            for &idx in &nodes {
                values.extend_from_slice(&slice[idx * nc..(idx + 1) * nc]);
            }
        }
        Ok(SpaceTimeField::from_values_unchecked(local, f.rank(), values))
    }

    /// Restricts a coefficient field to the cylinder frame.
    pub fn extract_coefficients(&self, a: &CoefficientField<T>) -> Result<CoefficientField<T>> {
        CoefficientField::from_parts_unchecked(self.extract(a.field())?, a.lambda())
    }

    /// Whether every node of `other` is a node of `self` (same grid assumed).
    pub fn contains(&self, grid: &Grid<T>, other: &Self) -> bool {
        let mut ours = self.nodes(grid);
        ours.sort_unstable();
        let mut slices = self.slices(grid);
        slices.push(self.slice_of(grid, 0));
        other.nodes(grid).iter().all(|i| ours.binary_search(i).is_ok())
            && (0..=other.depth).all(|s| slices.contains(&other.slice_of(grid, s)))
    }

    /// Box-local physical position (centre at the origin) of box node `l`.
    pub fn local_position(&self, grid: &Grid<T>, l: &[usize]) -> [T; 3] {
        let mut x = [T::zero(); 3];
        for j in 0..grid.d() {
            x[j] = (count::<T>(l[j]) - count::<T>(self.half_width)) * grid.h();
        }
        x
    }

    /// Cylinder-local time of level `s` (0 at the top, `-M·tau` at the bottom).
    pub fn local_time(&self, grid: &Grid<T>, s: usize) -> T {
        -count::<T>(self.depth - s) * grid.tau()
    }
}

fn extent<T: Real>(grid: &Grid<T>, radius: T) -> Result<(usize, usize)> {
    if !(radius > T::zero()) || !radius.is_finite() {
        return Err(Error::CylinderOutOfBounds(format!("radius {}", to_f64(radius))));
    }
    let k = (radius / grid.h()).round().to_usize().unwrap_or(0);
    let m = (radius * radius / grid.tau()).round().to_usize().unwrap_or(0);
    if k == 0 || m == 0 {
        return Err(Error::CylinderOutOfBounds(format!(
            "radius {} resolves to fewer than one grid step",
            to_f64(radius)
        )));
    }
    Ok((k, m))
}

/// Mean of every component over the cylinder.
pub fn cylinder_average<T: Real>(f: &SpaceTimeField<T>, c: &Cylinder<T>) -> Result<Vec<T>> {
    let grid = f.grid();
    c.check(grid)?;
    let nodes = c.nodes(grid);
    let weights = c.node_weights(grid);
    let nc = f.components();
    let mut acc = vec![T::zero(); nc];
    for m in c.slices(grid) {
        let slice = f.slice(m);
        for (&idx, &w) in nodes.iter().zip(&weights) {
            for (a, &v) in acc.iter_mut().zip(&slice[idx * nc..(idx + 1) * nc]) {
                *a = *a + w * v;
            }
        }
    }
    let depth = count::<T>(c.depth());
    Ok(acc.into_iter().map(|a| a / depth).collect())
}

/// Spatial region of a single slice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SliceRegion<T> {
    /// The whole periodic slice.
    Torus,
    /// The spatial box of a cylinder.
    Box(Cylinder<T>),
}

/// Mean of every component over one time slice.
pub fn slice_average<T: Real>(
    f: &SpaceTimeField<T>,
    m: usize,
    region: &SliceRegion<T>,
) -> Result<Vec<T>> {
    let grid = f.grid();
    if m >= grid.n_t() {
        return Err(Error::CylinderOutOfBounds(format!("slice {m} >= n_t {}", grid.n_t())));
    }
    let nc = f.components();
    let slice = f.slice(m);
    let mut acc = vec![T::zero(); nc];
    match region {
        SliceRegion::Torus => {
            for chunk in slice.chunks_exact(nc) {
                for (a, &v) in acc.iter_mut().zip(chunk) {
                    *a = *a + v;
                }
            }
            let pts = count::<T>(grid.points());
            Ok(acc.into_iter().map(|a| a / pts).collect())
        }
        SliceRegion::Box(c) => {
            c.check(grid)?;
            for (idx, w) in c.nodes(grid).into_iter().zip(c.node_weights(grid)) {
                for (a, &v) in acc.iter_mut().zip(&slice[idx * nc..(idx + 1) * nc]) {
                    *a = *a + w * v;
                }
            }
            Ok(acc)
        }
    }
}

/// Samples `f(x, t)` on a cylinder frame, with `x` relative to the centre and
/// `t` relative to the top slice.
pub fn sample_frame<T: Real>(
    grid: &Grid<T>,
    cyl: &Cylinder<T>,
    f: impl Fn(&[T], T) -> T,
) -> Result<SpaceTimeField<T>> {
    let local = cyl.local_grid(grid)?;
    let shift = count::<T>(cyl.half_width()) * grid.h();
    let d = grid.d();
    Ok(SpaceTimeField::from_fn(local, Rank::Scalar, |s, x, _| {
        let mut y = [T::zero(); 3];
        for j in 0..d {
            y[j] = x[j] - shift;
        }
        f(&y[..d], cyl.local_time(grid, s))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1(n: usize, length: f64) -> Grid<f64> {
        Grid::with_periods(1, n, n * n, length, length * length).unwrap()
    }

    #[test]
    fn constant_and_odd_averages() {
        let g = Grid::<f64>::new(2, 32, 1024).unwrap();
        let c = Cylinder::centered(&g, 0.25).unwrap();
        let ones = SpaceTimeField::scalar_fn(g, |_, _| 3.5);
        assert!((cylinder_average(&ones, &c).unwrap()[0] - 3.5).abs() < 1e-14);
        let centre = g.position(g.index(&[16, 16]))[0];
        let odd = SpaceTimeField::scalar_fn(g, |x, _| x[0] - centre);
        assert!(cylinder_average(&odd, &c).unwrap()[0].abs() < 1e-14);
    }

    #[test]
    fn quadratic_average_on_unit_box() {
        // Q_1 × (-1, 0] inside a torus of length 4 with n = 256.
        let g = grid1(256, 4.0);
        let c = Cylinder::centered(&g, 1.0).unwrap();
        let x0 = g.position(128)[0];
        let f = SpaceTimeField::scalar_fn(g, |x, _| (x[0] - x0).powi(2));
        let avg = cylinder_average(&f, &c).unwrap()[0];
        assert!((avg - 1.0 / 3.0).abs() < 1e-3, "{avg}");
    }

    #[test]
    fn slice_averages() {
        let g = Grid::<f64>::new(2, 16, 256).unwrap();
        let f = SpaceTimeField::scalar_fn(g, |x, t| t + (2.0 * std::f64::consts::PI * x[0]).sin());
        let m = 37;
        let v = slice_average(&f, m, &SliceRegion::Torus).unwrap()[0];
        assert!((v - g.time(m)).abs() < 1e-12);
        let c = Cylinder::centered(&g, 0.25).unwrap();
        let t_only = SpaceTimeField::scalar_fn(g, |_, t| t);
        let v = slice_average(&t_only, m, &SliceRegion::Box(c)).unwrap()[0];
        assert!((v - g.time(m)).abs() < 1e-14);
    }

    #[test]
    fn nested_cylinders_are_included_with_exact_measure() {
        let g = Grid::<f64>::new(2, 64, 4096).unwrap();
        let big = Cylinder::centered(&g, 0.25).unwrap();
        let small = big.nested(&g, 0.125).unwrap();
        assert!(big.contains(&g, &small));
        assert!(!small.contains(&g, &big));
        let measure = |c: &Cylinder<f64>| ((2 * c.half_width()).pow(2) * c.depth()) as f64;
        assert_eq!(measure(&big) / measure(&small), 2f64.powi(4));
    }

    #[test]
    fn out_of_bounds_is_rejected() {
        let g = Grid::<f64>::new(1, 16, 256).unwrap();
        assert!(Cylinder::centered(&g, 0.6).is_err());
        let open = Grid::<f64>::open(1, 9, 5, 0.125, 0.015625).unwrap();
        assert!(Cylinder::new(&open, 0.5, &[4], 4).is_err());
        assert!(Cylinder::new(&open, 0.125, &[4], 4).is_ok());
    }

    #[test]
    fn extraction_preserves_values_and_wraps_in_time() {
        let g = Grid::<f64>::new(1, 16, 256).unwrap();
        let f = SpaceTimeField::from_fn(g, Rank::Scalar, |m, x, _| m as f64 * 100.0 + x[0]);
        let c = Cylinder::new(&g, 0.25, &[0], 3).unwrap();
        let e = c.extract(&f).unwrap();
        assert_eq!(e.grid().n(), 9);
        assert_eq!(e.grid().n_t(), 17);
        // bottom slice is 3 - 16 wrapped = 243; leftmost node is x = -4h wrapped to 12h
        assert_eq!(e.get(0, 0, 0), 243.0 * 100.0 + 12.0 / 16.0);
        assert_eq!(e.get(16, 4, 0), 300.0);
        let local = c.localized();
        assert_eq!(local.extract(&e).unwrap(), e);
    }
}
