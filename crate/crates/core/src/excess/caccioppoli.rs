//! Interior energy against the shell `L²` norm for caloric functions.

use crate::error::{Error, Result};
use crate::grid::{cylinder_average, grad_slice, CoefficientField, Cylinder, Neighbors, Rank, SpaceTimeField};
use crate::scalar::{cast, count, to_f64, CompensatedSum, Real};
use crate::solvers::{caloric_residual, TimeScheme};

/// Inputs whose caloric residual exceeds `limit` are rejected.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CaloricGate {
    pub limit: f64,
    pub scheme: TimeScheme,
}

impl Default for CaloricGate {
    fn default() -> Self {
        Self { limit: 1e-6, scheme: TimeScheme::ImplicitEuler }
    }
}

/// `∫_{C_{R−ρ}} |∇u|² / (ρ⁻² ∫_{C_R∖C_{R−ρ}} |u − c|²)` for `u` on the frame
/// grid of `a`, with `cyl` of radius `R` on that grid. A vanishing numerator
/// gives 0.
pub fn caccioppoli_ratio<T: Real>(
    u: &SpaceTimeField<T>,
    a: &CoefficientField<T>,
    cyl: &Cylinder<T>,
    rho: T,
    c: T,
    gate: CaloricGate,
) -> Result<T> {
    let grid = *a.grid();
    grid.ensure_same(u.grid())?;
    u.expect_rank(Rank::Scalar)?;
    let radius = cyl.radius();
    if !(rho > T::zero() && rho + rho <= radius) {
        return Err(Error::Config(format!("need 0 < rho <= R/2, got rho = {}", to_f64(rho))));
    }
    let residual = caloric_residual(a, u, gate.scheme)?;
    if !(to_f64(residual) <= gate.limit) {
        return Err(Error::NotCaloric { residual: to_f64(residual), limit: gate.limit });
    }
    let inner = cyl.nested(&grid, radius - rho)?;
    let d = grid.d();
    let cell_volume = grid.h().powi(d as i32) * grid.tau();
    let nb = Neighbors::new(&grid);
    let mut g = vec![T::zero(); grid.points() * d];
    let cells = inner.cells(&grid);
    let mut num = CompensatedSum::new();
    for m in inner.slices(&grid) {
        grad_slice(&nb, T::one() / grid.h(), u.slice(m), &mut g);
        for &idx in &cells {
            for j in 0..d {
                num.add(g[idx * d + j] * g[idx * d + j]);
            }
        }
    }
    let num = num.value() * cell_volume;
    if num == T::zero() {
        return Ok(T::zero());
    }
    let sq = u.map(|v| (v - c) * (v - c));
    let measure = |k: &Cylinder<T>| {
        (count::<T>(2 * k.half_width()) * grid.h()).powi(d as i32) * count::<T>(k.depth()) * grid.tau()
    };
    let outer_int = cylinder_average(&sq, cyl)?[0] * measure(cyl);
    let inner_int = cylinder_average(&sq, &inner)?[0] * measure(&inner);
    let den = (outer_int - inner_int) / (rho * rho);
    Ok(if den > T::zero() { num / den } else { cast::<T>(f64::INFINITY) })
}
