//! The intrinsic excess
//!
//! `Exc(u; R) = inf_ξ avg_{C_R} (∇u − ξ − ∇φ_ξ)·a(∇u − ξ − ∇φ_ξ)`
//!
//! and the experiments built on it. Everything is evaluated on a [`Frame`]:
//! the coefficients and correctors restricted to one cylinder, expressed on an
//! open grid whose coordinates put the cylinder centre at the origin and its top
//! at `t = 0`. Gradients are forward differences on the `(2K)^d` cells of a
//! cylinder, averaged over its `M` slices.

mod caccioppoli;
mod decay;
mod liouville;
mod sublinear;

pub use caccioppoli::{caccioppoli_ratio, CaloricGate};
pub use decay::{decay_experiment, decay_on_frame, random_trig, BoundaryData, DecayConfig, DecayReport, SpaceTimeFn};
pub use liouville::{liouville_recover, LiouvilleFit};
pub use sublinear::{dyadic_radii, sublinearity_report, SublinearityRow};
pub(crate) use sublinear::row_on;

use crate::corrector::{combine, ExtendedCorrector};
use crate::error::{Error, Result};
use crate::grid::{grad_slice, CoefficientField, Cylinder, Grid, Neighbors, Rank, SpaceTimeField};
use crate::linalg;
use crate::scalar::{cast, count, to_f64, CompensatedSum, Real};

/// Gram matrices with a larger condition number are reported as degenerate.
pub const GRAM_CONDITION_CAP: f64 = 1e12;

/// Coefficients and correctors restricted to a cylinder.
#[derive(Clone, Debug)]
pub struct Frame<T> {
    a: CoefficientField<T>,
    phi: Vec<SpaceTimeField<T>>,
    grad_phi: Vec<SpaceTimeField<T>>,
    cylinder: Cylinder<T>,
}

impl<T: Real> Frame<T> {
    /// Restricts `a` and `corrector.phi` to `cyl`.
    pub fn restrict(a: &CoefficientField<T>, corrector: &ExtendedCorrector<T>, cyl: &Cylinder<T>) -> Result<Self> {
        a.grid().ensure_same(corrector.grid())?;
        let phi = corrector.phi.iter().map(|p| cyl.extract(p)).collect::<Result<Vec<_>>>()?;
        Self::from_parts(cyl.extract_coefficients(a)?, phi, cyl.localized())
    }

    /// Frame without a corrector (`φ = 0`), for coefficients that need none.
    pub fn uncorrected(a: &CoefficientField<T>, cyl: &Cylinder<T>) -> Result<Self> {
        let local = cyl.extract_coefficients(a)?;
        let phi = (0..a.grid().d()).map(|_| SpaceTimeField::zeros(*local.grid(), Rank::Scalar)).collect();
        Self::from_parts(local, phi, cyl.localized())
    }

    /// Assembles a frame from fields already on a common open grid; `cylinder`
    /// must be valid on that grid.
    pub fn from_parts(a: CoefficientField<T>, phi: Vec<SpaceTimeField<T>>, cylinder: Cylinder<T>) -> Result<Self> {
        let grid = *a.grid();
        if phi.len() != grid.d() {
            return Err(Error::GridMismatch(format!("{} corrector components for d = {}", phi.len(), grid.d())));
        }
        for p in &phi {
            grid.ensure_same(p.grid())?;
            p.expect_rank(Rank::Scalar)?;
        }
        Cylinder::new(&grid, cylinder.radius(), &cylinder.center(), cylinder.top())?;
        let grad_phi = phi.iter().map(crate::grid::grad).collect::<Result<Vec<_>>>()?;
        Ok(Self { a, phi, grad_phi, cylinder })
    }

    pub fn grid(&self) -> &Grid<T> {
        self.a.grid()
    }

    pub fn a(&self) -> &CoefficientField<T> {
        &self.a
    }

    pub fn phi(&self) -> &[SpaceTimeField<T>] {
        &self.phi
    }

    /// The full cylinder in frame coordinates.
    pub fn cylinder(&self) -> &Cylinder<T> {
        &self.cylinder
    }

    /// Cylinder of radius `r` sharing the frame's centre and top.
    pub fn nested(&self, r: T) -> Result<Cylinder<T>> {
        self.cylinder.nested(self.grid(), r)
    }

    /// Samples `f(x, t)` with `x` relative to the centre and `t ≤ 0` relative to the top.
    pub fn sample(&self, f: impl Fn(&[T], T) -> T) -> SpaceTimeField<T> {
        let grid = *self.grid();
        let k = count::<T>(self.cylinder.half_width()) * grid.h();
        let top = grid.time(self.cylinder.top());
        let d = grid.d();
        SpaceTimeField::from_fn(grid, Rank::Scalar, |m, x, _| {
            let mut y = [T::zero(); 3];
            for j in 0..d {
                y[j] = x[j] - k;
            }
            f(&y[..d], grid.time(m) - top)
        })
    }

    /// `c + ξ·x + φ_ξ`, a member of the zero-excess family.
    pub fn affine(&self, c: T, xi: &[T]) -> SpaceTimeField<T> {
        let lin = self.sample(|x, _| c + x.iter().zip(xi).map(|(&a, &b)| a * b).sum::<T>());
        let phi = combine(&self.phi, xi);
        lin.add_scaled(T::one(), &phi).expect("frame fields share a grid")
    }
}

/// Solution of the excess normal equations.
#[derive(Clone, Debug, PartialEq)]
pub struct XiFit<T> {
    pub xi: Vec<T>,
    /// Row-major `M_kl = avg (e_k + ∇φ_k)·a_sym(e_l + ∇φ_l)`.
    pub gram: Vec<T>,
    pub rhs: Vec<T>,
    pub condition: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExcessReport<T> {
    pub radius: T,
    pub value: T,
    pub xi_star: Vec<T>,
    pub gram_condition: T,
    /// `avg ∇u·a∇u` on the same cylinder, the natural scale of `value`.
    pub energy: T,
}

/// Visits every cell of `cyl` with `(G, g, a_sym)`: the corrected unit
/// gradients `G[k] = e_k + ∇φ_k` (row-major `d × d`), `∇u`, and the symmetric
/// part of `a`.
fn for_each_cell<T: Real>(
    u: &SpaceTimeField<T>,
    frame: &Frame<T>,
    cyl: &Cylinder<T>,
    mut visit: impl FnMut(&[T], &[T], &[T]),
) -> Result<usize> {
    let grid = frame.grid();
    grid.ensure_same(u.grid())?;
    u.expect_rank(Rank::Scalar)?;
    if !frame.cylinder.contains(grid, cyl) {
        return Err(Error::CylinderOutOfBounds("cylinder leaves the frame".into()));
    }
    let d = grid.d();
    let nb = Neighbors::new(grid);
    let inv_h = T::one() / grid.h();
    let cells = cyl.cells(grid);
    let mut gu = vec![T::zero(); grid.points() * d];
    let mut big = vec![T::zero(); d * d];
    let mut sym = vec![T::zero(); d * d];
    let half = cast::<T>(0.5);
    let slices = cyl.slices(grid);
    for &m in &slices {
        grad_slice(&nb, inv_h, u.slice(m), &mut gu);
        for &idx in &cells {
            for k in 0..d {
                let gp = &frame.grad_phi[k].slice(m)[idx * d..(idx + 1) * d];
                for j in 0..d {
                    big[k * d + j] = gp[j] + if j == k { T::one() } else { T::zero() };
                }
            }
            let am = frame.a.at(m, idx);
            for r in 0..d {
                for c in 0..d {
                    sym[r * d + c] = half * (am[r * d + c] + am[c * d + r]);
                }
            }
            visit(&big, &gu[idx * d..(idx + 1) * d], &sym);
        }
    }
    Ok(slices.len() * cells.len())
}

fn quad<T: Real>(x: &[T], a: &[T], y: &[T]) -> T {
    let d = x.len();
    let mut s = T::zero();
    for r in 0..d {
        for c in 0..d {
            s = s + x[r] * a[r * d + c] * y[c];
        }
    }
    s
}

/// Minimizing slope of the excess functional on `cyl`.
pub fn optimal_xi<T: Real>(u: &SpaceTimeField<T>, frame: &Frame<T>, cyl: &Cylinder<T>) -> Result<XiFit<T>> {
    let d = frame.grid().d();
    let mut gram = vec![CompensatedSum::new(); d * d];
    let mut rhs = vec![CompensatedSum::new(); d];
    let total = for_each_cell(u, frame, cyl, |big, g, sym| {
        for k in 0..d {
            let gk = &big[k * d..(k + 1) * d];
            rhs[k].add(quad(gk, sym, g));
            for l in k..d {
                gram[k * d + l].add(quad(gk, sym, &big[l * d..(l + 1) * d]));
            }
        }
    })?;
    let total = count::<T>(total);
    let mut m = vec![T::zero(); d * d];
    for k in 0..d {
        for l in k..d {
            let v = gram[k * d + l].value() / total;
            m[k * d + l] = v;
            m[l * d + k] = v;
        }
    }
    let b: Vec<T> = rhs.iter().map(|s| s.value() / total).collect();
    let condition = linalg::symmetric_condition(&m, d);
    if !(to_f64(condition) <= GRAM_CONDITION_CAP) {
        return Err(Error::IllConditioned { condition: to_f64(condition), cap: GRAM_CONDITION_CAP });
    }
    let xi = linalg::solve(&m, &b).ok_or(Error::IllConditioned { condition: f64::INFINITY, cap: GRAM_CONDITION_CAP })?;
    Ok(XiFit { xi, gram: m, rhs: b, condition })
}

/// Excess of `u` on `cyl`, evaluated directly at the optimal slope.
pub fn excess<T: Real>(u: &SpaceTimeField<T>, frame: &Frame<T>, cyl: &Cylinder<T>) -> Result<ExcessReport<T>> {
    let fit = optimal_xi(u, frame, cyl)?;
    let d = frame.grid().d();
    let mut value = CompensatedSum::new();
    let mut energy = CompensatedSum::new();
    let mut r = vec![T::zero(); d];
    let total = for_each_cell(u, frame, cyl, |big, g, sym| {
        r.copy_from_slice(g);
        for k in 0..d {
            for j in 0..d {
                r[j] = r[j] - fit.xi[k] * big[k * d + j];
            }
        }
        value.add(quad(&r, sym, &r));
        energy.add(quad(g, sym, g));
    })?;
    let total = count::<T>(total);
    Ok(ExcessReport {
        radius: cyl.radius(),
        value: (value.value() / total).max(T::zero()),
        xi_star: fit.xi,
        gram_condition: fit.condition,
        energy: energy.value() / total,
    })
}

/// `avg_C ∇u·a∇u`.
pub fn energy<T: Real>(u: &SpaceTimeField<T>, frame: &Frame<T>, cyl: &Cylinder<T>) -> Result<T> {
    let mut acc = CompensatedSum::new();
    let total = for_each_cell(u, frame, cyl, |_, g, sym| acc.add(quad(g, sym, g)))?;
    Ok(acc.value() / count::<T>(total))
}

/// The excess objective at an arbitrary slope `xi`.
pub fn excess_objective<T: Real>(u: &SpaceTimeField<T>, frame: &Frame<T>, cyl: &Cylinder<T>, xi: &[T]) -> Result<T> {
    let d = frame.grid().d();
    let mut acc = CompensatedSum::new();
    let mut r = vec![T::zero(); d];
    let total = for_each_cell(u, frame, cyl, |big, g, sym| {
        r.copy_from_slice(g);
        for k in 0..d {
            for j in 0..d {
                r[j] = r[j] - xi[k] * big[k * d + j];
            }
        }
        acc.add(quad(&r, sym, &r));
    })?;
    Ok(acc.value() / count::<T>(total))
}
