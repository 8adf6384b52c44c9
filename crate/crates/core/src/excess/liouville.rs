//! Recovery of `c + ξ·x + φ_ξ` from a field with no excess.

use super::{excess, Frame};
use crate::error::{Error, Result};
use crate::grid::cylinder_average;
use crate::scalar::{to_f64, Real};
use crate::grid::SpaceTimeField;

#[derive(Clone, Debug, PartialEq)]
pub struct LiouvilleFit<T> {
    pub c: T,
    pub xi: Vec<T>,
    /// `max |u − c − ξ·x − φ_ξ|` over the largest cylinder.
    pub residual: T,
}

/// Requires `Exc(u; r) ≤ floor · avg ∇u·a∇u` at every radius, then reads off
/// `ξ` at the largest radius and `c` as the cylinder mean of the remainder.
pub fn liouville_recover<T: Real>(
    u: &SpaceTimeField<T>,
    frame: &Frame<T>,
    radii: &[T],
    floor: T,
) -> Result<LiouvilleFit<T>> {
    let largest = radii
        .iter()
        .copied()
        .fold(None, |acc: Option<T>, r| Some(acc.map_or(r, |a| a.max(r))))
        .ok_or_else(|| Error::Config("no radii supplied".into()))?;
    let mut xi = None;
    for &r in radii {
        let rep = excess(u, frame, &frame.nested(r)?)?;
        if rep.value > floor * rep.energy {
            return Err(Error::ExcessAboveFloor {
                radius: to_f64(r),
                excess: to_f64(rep.value),
                floor: to_f64(floor * rep.energy),
            });
        }
        if r == largest {
            xi = Some(rep.xi_star);
        }
    }
    let xi = xi.expect("largest radius visited");
    let cyl = frame.nested(largest)?;
    let rest = u.sub(&frame.affine(T::zero(), &xi))?;
    let c = cylinder_average(&rest, &cyl)?[0];
    let grid = frame.grid();
    let nodes = cyl.nodes(grid);
    let mut residual = T::zero();
    for s in 0..=cyl.depth() {
        let slice = rest.slice(cyl.slice_of(grid, s));
        for &idx in &nodes {
            residual = residual.max((slice[idx] - c).abs());
        }
    }
    Ok(LiouvilleFit { c, xi, residual })
}
