//! Initial-boundary value problem `u_t = div(a grad u)` on a cylinder frame.
//!
//! The unknowns of each step are the interior nodes; lateral boundary nodes
//! and the bottom slice are copied from the data. Each step is a PCG solve
//! with the symmetric part of `a` and a Jacobi preconditioner; a skew part is
//! lagged in a short inner iteration.

use super::cg::{pcg, CgWork};
use super::operator::{div_flux, SliceCoeffs};
use super::{SolverConfig, TimeScheme};
use crate::error::{Error, Result};
use crate::grid::{sample_frame, CoefficientField, Cylinder, Neighbors, SpaceTimeField};
use crate::scalar::{cast, to_f64, Real};

/// Solves on cylinder `cyl` of `a`'s grid. `boundary(x, t)` supplies the
/// lateral data and `initial(x)` the bottom slice, both in cylinder-local
/// coordinates (`x` relative to the centre, `t ∈ [-M·tau, 0]`). The result
/// lives on `cyl.local_grid`.
pub fn parabolic_dirichlet<T: Real>(
    a: &CoefficientField<T>,
    cyl: &Cylinder<T>,
    boundary: impl Fn(&[T], T) -> T,
    initial: impl Fn(&[T]) -> T,
    cfg: &SolverConfig,
) -> Result<SpaceTimeField<T>> {
    let grid = a.grid();
    let a_local = cyl.extract_coefficients(a)?;
    let bottom = cyl.local_time(grid, 0);
    let data = sample_frame(grid, cyl, |x, t| if t == bottom { initial(x) } else { boundary(x, t) })?;
    dirichlet_frame(&a_local, &data, cfg)
}

/// Solves on an open frame grid. `data` supplies the bottom slice and the
/// lateral boundary nodes of every slice; its interior values above the
/// bottom are ignored.
pub fn dirichlet_frame<T: Real>(
    a: &CoefficientField<T>,
    data: &SpaceTimeField<T>,
    cfg: &SolverConfig,
) -> Result<SpaceTimeField<T>> {
    cfg.validate()?;
    let grid = *a.grid();
    grid.ensure_same(data.grid())?;
    if grid.is_periodic() {
        return Err(Error::InvalidGrid("Dirichlet solves need an open frame grid".into()));
    }
    let d = grid.d();
    let npts = grid.points();
    let nb = Neighbors::new(&grid);
    let inv_h = T::one() / grid.h();
    let tau = grid.tau();
    let theta = cast::<T>(cfg.scheme.theta());
    let explicit = T::one() - theta;
    let tol = cast::<T>(cfg.tol);
    let interior: Vec<bool> = (0..npts).map(|i| nb.is_interior(i)).collect();

    let mut u = data.clone();
    let mut work = CgWork::new(npts);
    let mut flux = vec![T::zero(); npts * d];
    let mut scratch = vec![T::zero(); npts];
    let mut diag = vec![T::zero(); npts];
    let mut lifted = vec![T::zero(); npts];
    let mut rhs = vec![T::zero(); npts];
    let mut base = vec![T::zero(); npts];
    let mut x = vec![T::zero(); npts];
    for s in 1..grid.n_t() {
        let (sym, skew) = SliceCoeffs::split(a, s);
        let full = SliceCoeffs::full(a, s);
        sym.operator_diagonal(&nb, inv_h, &mut diag);
        let prev = u.slice(s - 1).to_vec();
        // Boundary values of this slice, zero in the interior.
        for (i, l) in lifted.iter_mut().enumerate() {
            *l = if interior[i] { T::zero() } else { data.slice(s)[i] };
        }
        // rhs = u^{s-1} + (1-θ)τ L u^{s-1} + θτ L g, restricted to the interior.
        div_flux(&nb, inv_h, &full, Some(&lifted), None, &mut flux, &mut scratch);
        for i in 0..npts {
            base[i] = if interior[i] { prev[i] + theta * tau * scratch[i] } else { T::zero() };
        }
        if explicit != T::zero() {
            div_flux(&nb, inv_h, &full, Some(&prev), None, &mut flux, &mut scratch);
            for i in 0..npts {
                if interior[i] {
                    base[i] = base[i] + explicit * tau * scratch[i];
                }
            }
        }
        for i in 0..npts {
            x[i] = if interior[i] { prev[i] } else { T::zero() };
        }
        let inner = if skew.is_some() { 50 } else { 1 };
        for pass in 0..inner {
            rhs.copy_from_slice(&base);
            let before = x.clone();
            if let Some(k) = &skew {
                // Skew flux of the interior iterate; the boundary part is already in `base`
                // through the full coefficients.
                div_flux(&nb, inv_h, k, Some(&x), None, &mut flux, &mut scratch);
                for i in 0..npts {
                    if interior[i] {
                        rhs[i] = rhs[i] + theta * tau * scratch[i];
                    }
                }
            }
            let theta_tau = theta * tau;
            let fl = &mut flux;
            let out = pcg(
                &mut work,
                |v, y| {
                    div_flux(&nb, inv_h, &sym, Some(v), None, fl, y);
                    for i in 0..npts {
                        y[i] = if interior[i] { v[i] - theta_tau * y[i] } else { v[i] };
                    }
                },
                |r, z| {
                    for i in 0..npts {
                        z[i] = if interior[i] { r[i] / (T::one() + theta_tau * diag[i]) } else { T::zero() };
                    }
                },
                &rhs,
                &mut x,
                tol,
                cfg.max_iter,
            );
            if !out.converged {
                return Err(Error::NotConverged {
                    context: format!("Dirichlet step {s}"),
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
        let out = u.slice_mut(s);
        for i in 0..npts {
            out[i] = if interior[i] { x[i] } else { lifted[i] };
        }
    }
    Ok(u)
}

/// Relative θ-scheme residual of `u_t = div(a grad u)` over the interior nodes
/// of slices `1..n_t` of a frame: `|u_t − L u| / max(|u_t|, |L u|)` in the
/// Euclidean norm, and 0 when both vanish.
pub fn caloric_residual<T: Real>(
    a: &CoefficientField<T>,
    u: &SpaceTimeField<T>,
    scheme: TimeScheme,
) -> Result<T> {
    let grid = *a.grid();
    grid.ensure_same(u.grid())?;
    let d = grid.d();
    let npts = grid.points();
    let nb = Neighbors::new(&grid);
    let inv_h = T::one() / grid.h();
    let inv_tau = T::one() / grid.tau();
    let theta = cast::<T>(scheme.theta());
    let mut flux = vec![T::zero(); npts * d];
    let mut lu = vec![T::zero(); npts];
    let mut lu_prev = vec![T::zero(); npts];
    let (mut res, mut dt, mut op) = (T::zero(), T::zero(), T::zero());
    let periodic = grid.is_periodic();
    let first = if periodic { 0 } else { 1 };
    for s in first..grid.n_t() {
        let p = if s == 0 { grid.n_t() - 1 } else { s - 1 };
        let full = SliceCoeffs::full(a, s);
        div_flux(&nb, inv_h, &full, Some(u.slice(s)), None, &mut flux, &mut lu);
        if theta != T::one() {
            div_flux(&nb, inv_h, &full, Some(u.slice(p)), None, &mut flux, &mut lu_prev);
        }
        for i in 0..npts {
            if !nb.is_interior(i) {
                continue;
            }
            let ut = (u.slice(s)[i] - u.slice(p)[i]) * inv_tau;
            let l = if theta == T::one() { lu[i] } else { theta * lu[i] + (T::one() - theta) * lu_prev[i] };
            res = res + (ut - l) * (ut - l);
            dt = dt + ut * ut;
            op = op + l * l;
        }
    }
    let scale = dt.max(op).sqrt();
    Ok(if scale == T::zero() { res.sqrt() } else { res.sqrt() / scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn frame_grid(n: usize, n_t: usize) -> Grid<f64> {
        Grid::with_periods(2, n, n_t, 1.0, 1.0 / 16.0).unwrap()
    }

    #[test]
    fn linear_data_is_reproduced() {
        let g = frame_grid(32, 256);
        let a = CoefficientField::identity(g);
        let cyl = Cylinder::centered(&g, 0.25).unwrap();
        let u = parabolic_dirichlet(&a, &cyl, |x, _| x[0], |x| x[0], &SolverConfig::default()).unwrap();
        let exact = sample_frame(&g, &cyl, |x, _| x[0]).unwrap();
        assert!(u.sub(&exact).unwrap().max_abs() <= 1e-10);
        let a_local = cyl.extract_coefficients(&a).unwrap();
        assert!(caloric_residual(&a_local, &u, TimeScheme::ImplicitEuler).unwrap() <= 1e-10);
    }

    #[test]
    fn quadratic_caloric_data_is_reproduced() {
        // u = x₁² + 2t on two resolutions.
        let mut errors = Vec::new();
        for (n, nt) in [(16, 64), (32, 256)] {
            let g = frame_grid(n, nt);
            let a = CoefficientField::identity(g);
            let cyl = Cylinder::centered(&g, 0.25).unwrap();
            let f = |x: &[f64], t: f64| x[0] * x[0] + 2.0 * t;
            let u = parabolic_dirichlet(&a, &cyl, f, |x| f(x, cyl.local_time(&g, 0)), &SolverConfig::default())
                .unwrap();
            let exact = sample_frame(&g, &cyl, f).unwrap();
            errors.push(u.sub(&exact).unwrap().max_abs());
        }
        // The discrete Laplacian is exact on quadratics and the time derivative
        // exact on linear t, so both levels are at solver precision.
        assert!(errors.iter().all(|&e| e < 1e-9), "{errors:?}");
    }

    #[test]
    fn boundary_is_attained_and_energy_dissipates() {
        let g = frame_grid(32, 256);
        let a = CoefficientField::identity(g);
        let cyl = Cylinder::centered(&g, 0.25).unwrap();
        let u0 = |x: &[f64]| (x[0] * 7.0).sin() * (x[1] * 3.0).cos() * (1.0 - 16.0 * x[0] * x[0]);
        let u = parabolic_dirichlet(&a, &cyl, |_, _| 0.0, u0, &SolverConfig::default()).unwrap();
        let lg = u.grid();
        let nb = Neighbors::new(lg);
        let mut last = f64::INFINITY;
        for s in 0..lg.n_t() {
            let e: f64 = u.slice(s).iter().map(|v| v * v).sum();
            assert!(e <= last + 1e-14);
            last = e;
            if s > 0 {
                for i in 0..lg.points() {
                    if !nb.is_interior(i) {
                        assert_eq!(u.slice(s)[i], 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn maximum_principle() {
        let g = frame_grid(32, 256);
        let spec = crate::ensemble::EnsembleSpec::new(
            crate::ensemble::EnsembleKind::Checkerboard,
            0.25,
            8,
            3,
            vec![0.25, 1.0],
        );
        let a = crate::ensemble::generate(&spec, &g).unwrap();
        let cyl = Cylinder::centered(&g, 0.25).unwrap();
        let data = |x: &[f64], t: f64| (5.0 * x[0] + 3.0 * t).sin() + x[1];
        let u = parabolic_dirichlet(&a, &cyl, data, |x| data(x, -0.0625), &SolverConfig::default()).unwrap();
        let sampled = sample_frame(&g, &cyl, data).unwrap();
        let nb = Neighbors::new(u.grid());
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in 0..u.grid().n_t() {
            for i in 0..u.grid().points() {
                if s == 0 || !nb.is_interior(i) {
                    lo = lo.min(sampled.slice(s)[i]);
                    hi = hi.max(sampled.slice(s)[i]);
                }
            }
        }
        assert!(u.values().iter().all(|&v| v >= lo - 1e-9 && v <= hi + 1e-9));
    }
}
