//! Excess across dyadic radii for an `a`-caloric function on the largest cylinder.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{excess, ExcessReport, Frame};
use crate::corrector::ExtendedCorrector;
use crate::error::{Error, Result};
use crate::grid::{CoefficientField, Cylinder, SpaceTimeField};
use crate::scalar::{cast, count, to_f64, Real};
use crate::solvers::{caloric_residual, dirichlet_frame, SolverConfig};

/// Excess values at or below `EXCESS_FLOOR` times the energy on the largest
/// cylinder count as resolved zeros.
pub const EXCESS_FLOOR: f64 = 1e-14;

/// Shared closure of `(x, t)`.
pub type SpaceTimeFn<T> = Arc<dyn Fn(&[T], T) -> T + Send + Sync>;

/// Boundary and initial data of the decay experiment, in cylinder-local
/// coordinates.
#[derive(Clone)]
pub enum BoundaryData<T> {
    /// Seeded random trigonometric polynomial of the given degree.
    RandomTrig { seed: u64, degree: usize },
    Function(SpaceTimeFn<T>),
}

impl<T> std::fmt::Debug for BoundaryData<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::RandomTrig { seed, degree } => write!(f, "RandomTrig {{ seed: {seed}, degree: {degree} }}"),
            Self::Function(_) => f.write_str("Function(..)"),
        }
    }
}

/// Random smooth function on `C_R`: a sum of `2·degree + 1` plane waves with
/// integer wave vectors up to `degree` in each component (unit `π/(2R)`),
/// slowly varying in time, plus a random linear part.
pub fn random_trig<T: Real>(d: usize, radius: T, seed: u64, degree: usize) -> impl Fn(&[T], T) -> T + Send + Sync {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let deg = degree.max(1) as i64;
    let terms: Vec<(Vec<f64>, f64, f64, f64)> = (0..2 * degree + 1)
        .map(|_| {
            let k: Vec<f64> = (0..d).map(|_| rng.random_range(-deg..=deg) as f64).collect();
            let amp: f64 = rng.sample::<f64, _>(StandardNormal) / (1.0 + k.iter().map(|v| v * v).sum::<f64>());
            let omega = rng.random_range(-1.0..1.0);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            (k, amp, omega, phase)
        })
        .collect();
    let slope: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let r = to_f64(radius);
    move |x: &[T], t: T| {
        let x: Vec<f64> = x.iter().map(|&v| to_f64(v) / r).collect();
        let t = to_f64(t) / (r * r);
        let mut v: f64 = x.iter().zip(&slope).map(|(a, b)| a * b).sum();
        for (k, amp, omega, phase) in &terms {
            let arg = std::f64::consts::FRAC_PI_2 * k.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() + omega * t + phase;
            v += amp * arg.sin();
        }
        cast::<T>(v * r)
    }
}

#[derive(Clone, Debug)]
pub struct DecayConfig<T> {
    pub r_max: T,
    /// Number of dyadic radii `r_max, r_max/2, …`.
    pub levels: usize,
    pub boundary: BoundaryData<T>,
    pub solver: SolverConfig,
}

#[derive(Clone, Debug)]
pub struct DecayReport<T> {
    /// Strictly increasing.
    pub radii: Vec<T>,
    pub reports: Vec<ExcessReport<T>>,
    pub excess_values: Vec<T>,
    /// Least-squares slope of `ln Exc` against `ln r`; `None` when fewer than
    /// two values clear the floor.
    pub fitted_exponent: Option<T>,
    pub r_star_estimate: Option<T>,
    /// Every excess value is at or below the floor.
    pub resolved_zero: bool,
    /// `Exc(r_j) ≤ (r_{j+1}/r_j)^{d+2} Exc(r_{j+1})·1.05` for each consecutive pair.
    pub coarse_bound: Vec<bool>,
    /// Caloric residual of the solved field.
    pub caloric_residual: T,
}

impl<T: Real> DecayReport<T> {
    /// Whether the excess strictly decreases with the radius from `r_star_estimate` upward.
    pub fn decreasing_above_r_star(&self) -> bool {
        let Some(r_star) = self.r_star_estimate else { return false };
        let start = self.radii.iter().position(|&r| r >= r_star).unwrap_or(self.radii.len());
        self.excess_values[start..].windows(2).all(|w| w[0] < w[1])
    }
}

/// Solves the Dirichlet problem on the centred cylinder of radius `r_max`
/// (top at the last slice) and measures the excess at the dyadic radii.
pub fn decay_experiment<T: Real>(
    a: &CoefficientField<T>,
    corrector: &ExtendedCorrector<T>,
    cfg: &DecayConfig<T>,
) -> Result<DecayReport<T>> {
    if cfg.levels < 2 {
        return Err(Error::Config("decay experiment needs at least two levels".into()));
    }
    let grid = a.grid();
    let cyl = Cylinder::centered(grid, cfg.r_max)?;
    let frame = Frame::restrict(a, corrector, &cyl)?;
    let data = match &cfg.boundary {
        BoundaryData::RandomTrig { seed, degree } => frame.sample(random_trig(grid.d(), cfg.r_max, *seed, *degree)),
        BoundaryData::Function(f) => frame.sample(|x, t| f(x, t)),
    };
    let u = dirichlet_frame(frame.a(), &data, &cfg.solver)?;
    let radii: Vec<T> = (0..cfg.levels).rev().map(|j| cfg.r_max / count::<T>(1 << j)).collect();
    let mut report = decay_on_frame(&u, &frame, &radii)?;
    report.caloric_residual = caloric_residual(frame.a(), &u, cfg.solver.scheme)?;
    Ok(report)
}

/// Excess of `u` at the given radii (sorted here) within `frame`.
pub fn decay_on_frame<T: Real>(u: &SpaceTimeField<T>, frame: &Frame<T>, radii: &[T]) -> Result<DecayReport<T>> {
    let mut radii = radii.to_vec();
    radii.sort_by(|x, y| x.partial_cmp(y).expect("finite radii"));
    if radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("radii must be distinct".into()));
    }
    let cyls = radii.iter().map(|&r| frame.nested(r)).collect::<Result<Vec<_>>>()?;
    let reports = cyls.par_iter().map(|c| excess(u, frame, c)).collect::<Result<Vec<_>>>()?;
    let excess_values: Vec<T> = reports.iter().map(|r| r.value).collect();
    let scale = reports.last().map_or(T::zero(), |r| r.energy);
    let floor = cast::<T>(EXCESS_FLOOR) * scale;
    let resolved_zero = excess_values.iter().all(|&v| v <= floor);

    let points: Vec<(f64, f64)> = radii
        .iter()
        .zip(&excess_values)
        .filter(|(_, &v)| v > floor)
        .map(|(&r, &v)| (to_f64(r).ln(), to_f64(v).ln()))
        .collect();
    let fitted = (points.len() >= 2).then(|| least_squares_slope(&points));

    let d = frame.grid().d() as i32;
    let measure = |c: &Cylinder<T>| to_f64(count::<T>((2 * c.half_width()).pow(d as u32) * c.depth()));
    let coarse_bound = cyls
        .windows(2)
        .zip(excess_values.windows(2))
        .map(|(c, v)| to_f64(v[0]) <= measure(&c[1]) / measure(&c[0]) * to_f64(v[1]) * 1.05)
        .collect();

    let r_star_estimate = fitted.map(|p| {
        let mut r_star = *radii.last().expect("non-empty");
        for j in (0..radii.len() - 1).rev() {
            let bound = (to_f64(radii[j]) / to_f64(radii[j + 1])).powf(p) * 1.25;
            let ratio = to_f64(excess_values[j]) / to_f64(excess_values[j + 1]);
            if ratio <= bound && excess_values[j + 1] > floor {
                r_star = radii[j];
            } else {
                break;
            }
        }
        r_star
    });
    Ok(DecayReport {
        radii,
        reports,
        excess_values,
        fitted_exponent: fitted.map(cast::<T>),
        r_star_estimate,
        resolved_zero,
        coarse_bound,
        caloric_residual: T::zero(),
    })
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}
