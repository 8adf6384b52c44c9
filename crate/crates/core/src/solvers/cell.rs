//! Space-time periodic cell problem `φ_t = div(a(grad φ + ξ))`.
//!
//! Marches whole periods with the θ-scheme and drives the period map
//! `φ(0) ↦ φ(T)` to its fixed point with Anderson acceleration. Each step is
//! a PCG solve with the symmetric part of `a`, preconditioned by the
//! constant-coefficient operator built from the slice means of its diagonal.
//! A skew part is lagged in a short inner iteration.

use super::anderson::Anderson;
use super::cg::{pcg, CgWork};
use super::fft::SpectralSolver;
use super::operator::{div_flux, SliceCoeffs};
use super::SolverConfig;
use crate::error::{Error, Result};
use crate::grid::{CoefficientField, Grid, Neighbors, Rank, SpaceTimeField};
use crate::scalar::{cast, to_f64, Real};

/// Result of a cell solve.
#[derive(Clone, Debug)]
pub struct CellSolve<T> {
    /// Periodic solution with zero space-time mean.
    pub phi: SpaceTimeField<T>,
    /// Periods marched.
    pub periods: usize,
    /// Relative L² change of the last period against the one before.
    pub period_change: T,
    /// Total CG iterations.
    pub cg_iterations: usize,
}

/// Corrector in direction `e_i`.
pub fn parabolic_cell<T: Real>(
    a: &CoefficientField<T>,
    i: usize,
    cfg: &SolverConfig,
) -> Result<SpaceTimeField<T>> {
    let d = a.grid().d();
    if i >= d {
        return Err(Error::InvalidSolverConfig(format!("direction {i} >= d = {d}")));
    }
    let mut xi = vec![T::zero(); d];
    xi[i] = T::one();
    Ok(solve_cell(a, &xi, None, cfg)?.phi)
}

pub(crate) struct StepSolver<'a, T> {
    nb: &'a Neighbors,
    inv_h: T,
    theta_tau: T,
    spectral: SpectralSolver<T>,
    work: CgWork<T>,
    flux: Vec<T>,
    scratch: Vec<T>,
    tol: T,
    max_iter: usize,
    iterations: usize,
}

impl<'a, T: Real> StepSolver<'a, T> {
    pub(crate) fn new(nb: &'a Neighbors, grid: &Grid<T>, theta_tau: T, tol: T, max_iter: usize) -> Self {
        let npts = grid.points();
        Self {
            nb,
            inv_h: T::one() / grid.h(),
            theta_tau,
            spectral: SpectralSolver::new(grid),
            work: CgWork::new(npts),
            flux: vec![T::zero(); npts * grid.d()],
            scratch: vec![T::zero(); npts],
            tol,
            max_iter,
            iterations: 0,
        }
    }

    /// Solves `(I − θτ div(S grad)) x = rhs + θτ div(K grad x)` in place.
    pub(crate) fn solve(
        &mut self,
        sym: &SliceCoeffs<T>,
        skew: Option<&SliceCoeffs<T>>,
        means: &[T],
        rhs: &[T],
        x: &mut [T],
    ) -> Result<()> {
        let (nb, inv_h, theta_tau, tol, max_iter) =
            (self.nb, self.inv_h, self.theta_tau, self.tol, self.max_iter);
        let weights: Vec<T> = means.iter().map(|&c| theta_tau * c).collect();
        let mut b = rhs.to_vec();
        let inner = if skew.is_some() { 50 } else { 1 };
        for pass in 0..inner {
            if let Some(k) = skew {
                div_flux(nb, inv_h, k, Some(x), None, &mut self.flux, &mut self.scratch);
                for (bi, (&r, &s)) in b.iter_mut().zip(rhs.iter().zip(self.scratch.iter())) {
                    *bi = r + theta_tau * s;
                }
            }
            let before = if skew.is_some() { x.to_vec() } else { Vec::new() };
            let flux = &mut self.flux;
            let spectral = &mut self.spectral;
            let out = pcg(
                &mut self.work,
                |v, y| {
                    div_flux(nb, inv_h, sym, Some(v), None, flux, y);
                    for (yi, &vi) in y.iter_mut().zip(v) {
                        *yi = vi - theta_tau * *yi;
                    }
                },
                |r, z| spectral.solve(T::one(), &weights, r, z),
                &b,
                x,
                tol,
                max_iter,
            );
            self.iterations += out.iterations;
            if !out.converged {
                return Err(Error::NotConverged {
                    context: "cell time step".into(),
                    iterations: out.iterations,
                    residual: to_f64(out.relative_residual),
                });
            }
            if skew.is_none() {
                break;
            }
            let diff: T = x.iter().zip(&before).map(|(&p, &q)| (p - q) * (p - q)).sum();
            let norm: T = x.iter().map(|&p| p * p).sum();
            if diff <= tol * tol * norm {
                break;
            }
            if pass + 1 == inner {
                return Err(Error::NotConverged {
                    context: "lagged skew iteration".into(),
                    iterations: inner,
                    residual: to_f64((diff / norm).sqrt()),
                });
            }
        }
        Ok(())
    }
}

/// Periodic solution of `φ_t = div(a(grad φ + ξ))` for a constant vector `ξ`,
/// optionally warm-started from a value at `t = 0`.
pub fn solve_cell<T: Real>(
    a: &CoefficientField<T>,
    xi: &[T],
    initial: Option<&[T]>,
    cfg: &SolverConfig,
) -> Result<CellSolve<T>> {
    cfg.validate()?;
    let grid = *a.grid();
    if !grid.is_periodic() {
        return Err(Error::InvalidGrid("cell problem needs a periodic grid".into()));
    }
    let d = grid.d();
    if xi.len() != d {
        return Err(Error::InvalidSolverConfig(format!("direction has {} entries, d = {d}", xi.len())));
    }
    let nt = grid.n_t();
    let npts = grid.points();
    let nb = Neighbors::new(&grid);
    let inv_h = T::one() / grid.h();
    let tau = grid.tau();
    let theta = cast::<T>(cfg.scheme.theta());

    let mut flux = vec![T::zero(); npts * d];
    let mut sym = Vec::with_capacity(nt);
    let mut skew = Vec::with_capacity(nt);
    let mut full = Vec::with_capacity(nt);
    let mut means = Vec::with_capacity(nt);
    let mut forcing = Vec::with_capacity(nt);
    let mut forcing_max = T::zero();
    for m in 0..nt {
        let (s, k) = SliceCoeffs::split(a, m);
        let f = SliceCoeffs::full(a, m);
        let mut out = vec![T::zero(); npts];
        div_flux(&nb, inv_h, &f, None, Some(xi), &mut flux, &mut out);
        out.iter_mut().for_each(|v| *v = *v * tau);
        forcing_max = out.iter().fold(forcing_max, |acc, v| acc.max(v.abs()));
        means.push(s.diagonal_means(d));
        sym.push(s);
        skew.push(k);
        full.push(f);
        forcing.push(out);
    }

    let mut phi = SpaceTimeField::zeros(grid, Rank::Scalar);
    if forcing_max == T::zero() {
        return Ok(CellSolve { phi, periods: 0, period_change: T::zero(), cg_iterations: 0 });
    }

    let inner_tol = cast::<T>(0.1 * cfg.tol.min(cfg.period_tol));
    let mut stepper = StepSolver::new(&nb, &grid, theta * tau, inner_tol, cfg.max_iter);
    let explicit = T::one() - theta;
    let period_tol = cast::<T>(cfg.period_tol);
    let mut anderson = Anderson::new(cfg.anderson_depth);
    let mut x = initial.map_or_else(|| vec![T::zero(); npts], |v| v.to_vec());
    let mut rhs = vec![T::zero(); npts];
    let mut cur = vec![T::zero(); npts];
    let mut last_change = T::infinity();

    for period in 1..=cfg.max_iter {
        let mut prev = x.clone();
        let mut change = T::zero();
        let mut norm = T::zero();
        for step in 1..=nt {
            let m = step % nt;
            for ((r, &p), &f) in rhs.iter_mut().zip(&prev).zip(&forcing[m]) {
                *r = p + f;
            }
            if explicit != T::zero() {
                div_flux(&nb, inv_h, &full[m], Some(&prev), None, &mut flux, &mut stepper.scratch);
                for (r, &s) in rhs.iter_mut().zip(stepper.scratch.iter()) {
                    *r = *r + explicit * tau * s;
                }
            }
            if period == 1 {
                cur.copy_from_slice(&prev);
            } else {
                cur.copy_from_slice(phi.slice(m));
            }
            stepper.solve(&sym[m], skew[m].as_ref(), &means[m], &rhs, &mut cur)?;
            let old = phi.slice_mut(m);
            for (o, &c) in old.iter_mut().zip(&cur) {
                change = change + (c - *o) * (c - *o);
                norm = norm + c * c;
                *o = c;
            }
            std::mem::swap(&mut prev, &mut cur);
        }
        let g = prev;
        let fnorm: T = g.iter().zip(&x).map(|(&p, &q)| (p - q) * (p - q)).sum::<T>().sqrt();
        let gnorm: T = g.iter().map(|&p| p * p).sum::<T>().sqrt();
        let map_residual = if gnorm == T::zero() { fnorm } else { fnorm / gnorm };
        last_change = if norm == T::zero() { change.sqrt() } else { (change / norm).sqrt() };
        if map_residual <= period_tol && last_change <= period_tol {
            let mean = phi.mean()[0];
            phi.values_mut().iter_mut().for_each(|v| *v = *v - mean);
            return Ok(CellSolve {
                phi,
                periods: period,
                period_change: last_change,
                cg_iterations: stepper.iterations,
            });
        }
        x = anderson.next(&x, &g);
    }
    Err(Error::NotConverged {
        context: "periodic cell problem".into(),
        iterations: cfg.max_iter,
        residual: to_f64(last_change),
    })
}
