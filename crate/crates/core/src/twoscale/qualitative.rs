//! `u^ε → v` in `L²`: the oscillating problem `u_t = ∇·a(x/ε, t/ε²)∇u` on the
//! unit torus against the homogenized problem with the same initial data.
//!
//! Every `ε` shares the macro grid and time step. The unit cell is resolved by
//! `ε·n` points and `cell_period·(ε·n)²/h_ratio` steps, so `â` comes from the
//! same discrete microstructure that the macro march sees.

use rayon::prelude::*;

use crate::corrector::{build_phi, flux, homogenized, HomogenizedMatrix};
use crate::ensemble::{generate, EnsembleSpec};
use crate::error::{Error, Result};
use crate::grid::{CoefficientField, Grid, Neighbors};
use crate::scalar::{cast, CompensatedSum, Real};
use crate::solvers::operator::{div_flux, SliceCoeffs};
use crate::solvers::{SolverConfig, StepSolver};

#[derive(Clone, Debug, PartialEq)]
pub struct QualitativeConfig {
    /// Microstructure on the unit cell.
    pub ensemble: EnsembleSpec,
    pub d: usize,
    /// Macro points per unit length.
    pub n: usize,
    /// Macro time step over `h²`.
    pub h_ratio: f64,
    /// Time period of the coefficients in cell units.
    pub cell_period: f64,
    pub final_time: f64,
    pub solver: SolverConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QualitativeRow<T> {
    pub eps: f64,
    /// Points and time steps per coefficient period.
    pub cell_n: usize,
    pub cell_n_t: usize,
    pub steps: usize,
    pub ahom: HomogenizedMatrix<T>,
    /// `‖u^ε − v‖` in `L²` of space-time.
    pub l2_error: T,
    /// The same relative to `‖v‖`.
    pub relative_error: T,
}

/// Smooth initial datum shared by both problems.
fn initial<T: Real>(x: &[T]) -> T {
    let tau = T::TAU();
    x.iter().enumerate().map(|(j, &v)| (tau * v + cast::<T>(j as f64)).sin()).sum()
}

/// One row per `ε`, computed concurrently.
pub fn qualitative_convergence<T: Real>(cfg: &QualitativeConfig, eps_list: &[f64]) -> Result<Vec<QualitativeRow<T>>> {
    cfg.solver.validate()?;
    if !(cfg.h_ratio > 0.0 && cfg.cell_period > 0.0 && cfg.final_time > 0.0) {
        return Err(Error::Config("h_ratio, cell_period and final_time must be positive".into()));
    }
    eps_list.par_iter().map(|&eps| one_scale(cfg, eps)).collect()
}

fn one_scale<T: Real>(cfg: &QualitativeConfig, eps: f64) -> Result<QualitativeRow<T>> {
    let cell = eps * cfg.n as f64;
    let cell_n = cell.round() as usize;
    if !(eps > 0.0) || (cell - cell_n as f64).abs() > 1e-9 || cell_n < 8 {
        return Err(Error::InvalidTwoScale(format!(
            "eps = {eps} is not resolved: needs an integer number of at least 8 points per cell at n = {}",
            cfg.n
        )));
    }
    let steps_per_period = cfg.cell_period * (cell_n * cell_n) as f64 / cfg.h_ratio;
    let cell_n_t = steps_per_period.round() as usize;
    if cell_n_t == 0 || (steps_per_period - cell_n_t as f64).abs() > 1e-6 * steps_per_period {
        return Err(Error::InvalidTwoScale(format!(
            "cell period {} is not a whole number of macro steps at eps = {eps}",
            cfg.cell_period
        )));
    }
    let base_grid = Grid::<T>::with_periods(cfg.d, cell_n, cell_n_t, T::one(), cast(cfg.cell_period))?;
    let base = generate(&cfg.ensemble, &base_grid)?;
    let (phi, _) = build_phi(&base, &cfg.solver)?;
    let ahom = homogenized(&flux(&base, &phi)?, base.lambda())?;

    let h = 1.0 / cfg.n as f64;
    let tau = cfg.h_ratio * h * h;
    let steps = (cfg.final_time / tau).round().max(1.0) as usize;
    // Spatial carrier; the march itself is not periodic in time.
    let grid = Grid::<T>::with_periods(cfg.d, cfg.n, 4, T::one(), cast(4.0 * tau))?;
    let points = grid.points();
    let nb = Neighbors::new(&grid);
    let inv_h = T::one() / grid.h();
    let theta = cast::<T>(cfg.solver.scheme.theta());
    let tau = grid.tau();
    let tol = cast::<T>(cfg.solver.tol);

    let start: Vec<T> = (0..points).map(|i| initial(&grid.position(i)[..cfg.d])).collect();
    let homog: Vec<T> = (0..points).flat_map(|_| ahom.entries().iter().copied()).collect();
    let homog_coeffs = Coeffs::new(homog, cfg.d, false);

    let mut u = start.clone();
    let mut v = start;
    let mut stepper_u = StepSolver::new(&nb, &grid, theta * tau, tol, cfg.solver.max_iter);
    let mut stepper_v = StepSolver::new(&nb, &grid, theta * tau, tol, cfg.solver.max_iter);
    let mut scratch = Scratch::new(points, cfg.d);
    let mut err = CompensatedSum::new();
    let mut norm = CompensatedSum::new();
    for m in 1..=steps {
        let coeffs = Coeffs::new(tile(&base, m % cell_n_t, &grid), cfg.d, base.is_diagonal());
        march(&mut stepper_u, &nb, inv_h, theta, tau, &coeffs, &mut u, &mut scratch)?;
        march(&mut stepper_v, &nb, inv_h, theta, tau, &homog_coeffs, &mut v, &mut scratch)?;
        for (&a, &b) in u.iter().zip(&v) {
            err.add((a - b) * (a - b));
            norm.add(b * b);
        }
    }
    let measure = grid.h().powi(cfg.d as i32) * tau;
    let l2_error = (err.value() * measure).sqrt();
    let relative_error = (err.value() / norm.value()).sqrt();
    Ok(QualitativeRow { eps, cell_n, cell_n_t, steps, ahom, l2_error, relative_error })
}

/// Slice `m` of the cell field repeated over the macro torus, as row-major matrices.
fn tile<T: Real>(base: &CoefficientField<T>, m: usize, grid: &Grid<T>) -> Vec<T> {
    let d = grid.d();
    let bgrid = *base.grid();
    let bn = bgrid.n();
    let slice = base.slice(m);
    let mut values = Vec::with_capacity(grid.points() * d * d);
    for idx in 0..grid.points() {
        let c = grid.coords(idx);
        let mut local = [0usize; 3];
        for j in 0..d {
            local[j] = c[j] % bn;
        }
        let b = bgrid.index(&local[..d]);
        values.extend_from_slice(&slice[b * d * d..(b + 1) * d * d]);
    }
    values
}

struct Coeffs<T> {
    sym: SliceCoeffs<T>,
    skew: Option<SliceCoeffs<T>>,
    full: SliceCoeffs<T>,
    means: Vec<T>,
}

impl<T: Real> Coeffs<T> {
    fn new(matrices: Vec<T>, d: usize, diagonal: bool) -> Self {
        let (sym, skew) = SliceCoeffs::split_matrices(&matrices, d, diagonal);
        let means = sym.diagonal_means(d);
        let full = if diagonal { sym.clone() } else { SliceCoeffs::Full(matrices) };
        Self { sym, skew, full, means }
    }
}

struct Scratch<T> {
    rhs: Vec<T>,
    flux: Vec<T>,
    div: Vec<T>,
}

impl<T: Real> Scratch<T> {
    fn new(points: usize, d: usize) -> Self {
        Self { rhs: vec![T::zero(); points], flux: vec![T::zero(); points * d], div: vec![T::zero(); points] }
    }
}

/// One θ-step of `x_t = div(C grad x)`.
#[allow(clippy::too_many_arguments)]
fn march<T: Real>(
    stepper: &mut StepSolver<'_, T>,
    nb: &Neighbors,
    inv_h: T,
    theta: T,
    tau: T,
    c: &Coeffs<T>,
    x: &mut [T],
    s: &mut Scratch<T>,
) -> Result<()> {
    let explicit = T::one() - theta;
    s.rhs.copy_from_slice(x);
    if explicit > T::zero() {
        div_flux(nb, inv_h, &c.full, Some(x), None, &mut s.flux, &mut s.div);
        for (r, &dv) in s.rhs.iter_mut().zip(&s.div) {
            *r = *r + explicit * tau * dv;
        }
    }
    stepper.solve(&c.sym, c.skew.as_ref(), &c.means, &s.rhs, x)
}
