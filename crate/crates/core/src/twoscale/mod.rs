//! Two-scale diagnostics: mollification, cutoff, `â`-caloric extension, the
//! augmented homogenization error `w = u − (1 + η φ_i ∂_i) v` and its energy
//! against the terms that control it.
//!
//! Quantities that compare different cylinders are reported after rescaling
//! `C_R` to the unit cylinder (`x ↦ x/R`, `t ↦ t/R²`), so the constants are
//! dimensionless.

mod qualitative;

pub use qualitative::{qualitative_convergence, QualitativeConfig, QualitativeRow};

use rayon::prelude::*;

use crate::corrector::{ExtendedCorrector, HomogenizedMatrix};
use crate::error::{Error, Result};
use crate::excess::row_on;
use crate::grid::{grad_slice, CoefficientField, Cylinder, Grid, Neighbors, Rank, SpaceTimeField};
use crate::scalar::{cast, count, to_f64, CompensatedSum, Real};
use crate::solvers::{dirichlet_frame, SolverConfig};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoScaleConfig<T> {
    /// Mollification radius (a length).
    pub eps: T,
    /// Cutoff shell width as a fraction of the radius.
    pub rho: T,
    pub radius: T,
}

impl<T: Real> TwoScaleConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let quarter = cast::<T>(0.25);
        if !(self.radius > T::zero()) {
            return Err(Error::InvalidTwoScale(format!("radius {} must be positive", to_f64(self.radius))));
        }
        if !(self.eps > T::zero() && self.eps < quarter * self.radius) {
            return Err(Error::InvalidTwoScale(format!(
                "need 0 < eps < R/4, got eps = {} with R = {}",
                to_f64(self.eps),
                to_f64(self.radius)
            )));
        }
        if !(self.rho > T::zero() && self.rho < cast::<T>(0.125)) {
            return Err(Error::InvalidTwoScale(format!("need 0 < rho < 1/8, got {}", to_f64(self.rho))));
        }
        Ok(())
    }
}

/// Spatial convolution with the bump `exp(−1/(1 − |x/ε|²))`, normalized to
/// unit discrete mass. Near the edges of an open grid the truncated kernel is
/// renormalized. No smoothing in time.
pub fn mollify<T: Real>(u: &SpaceTimeField<T>, eps: T) -> Result<SpaceTimeField<T>> {
    u.expect_rank(Rank::Scalar)?;
    let grid = *u.grid();
    let h = grid.h();
    if !(eps >= h) {
        return Err(Error::InvalidTwoScale(format!(
            "mollification radius {} is below the grid spacing {}",
            to_f64(eps),
            to_f64(h)
        )));
    }
    let d = grid.d();
    let n = grid.n() as isize;
    let reach = (eps / h).floor().to_isize().unwrap_or(0);
    let side = 2 * reach + 1;
    let mut stencil: Vec<([isize; 3], T)> = Vec::new();
    for r in 0..side.pow(d as u32) {
        let mut k = [0isize; 3];
        let mut rest = r;
        for slot in k.iter_mut().take(d) {
            *slot = rest % side - reach;
            rest /= side;
        }
        let dist2: T = k[..d].iter().map(|&v| count::<T>(v.unsigned_abs()).powi(2)).sum::<T>() * h * h / (eps * eps);
        if dist2 < T::one() {
            stencil.push((k, (-T::one() / (T::one() - dist2)).exp()));
        }
    }
    let total: T = stencil.iter().map(|s| s.1).sum();
    stencil.iter_mut().for_each(|s| s.1 = s.1 / total);

    let points = grid.points();
    let periodic = grid.is_periodic();
    let mut out = SpaceTimeField::zeros(grid, Rank::Scalar);
    out.values_mut().par_chunks_mut(points).enumerate().for_each(|(m, dst)| {
        let src = u.slice(m);
        for (idx, o) in dst.iter_mut().enumerate() {
            let c = grid.coords(idx);
            let mut acc = CompensatedSum::new();
            let mut mass = CompensatedSum::new();
            'stencil: for (k, w) in &stencil {
                let mut target = 0usize;
                for j in (0..d).rev() {
                    let mut cj = c[j] as isize + k[j];
                    if periodic {
                        cj = cj.rem_euclid(n);
                    } else if cj < 0 || cj >= n {
                        continue 'stencil;
                    }
                    target = target * n as usize + cj as usize;
                }
                acc.add(*w * src[target]);
                mass.add(*w);
            }
            *o = acc.value() / mass.value();
        }
    });
    Ok(out)
}

/// `6z⁵ − 15z⁴ + 10z³` on `[0, 1]`, clamped outside.
fn smootherstep<T: Real>(z: T) -> T {
    let z = z.max(T::zero()).min(T::one());
    z * z * z * (z * (z * cast::<T>(6.0) - cast::<T>(15.0)) + cast::<T>(10.0))
}

/// Cutoff on `grid` for the cylinder `cyl` of radius `R`: 1 on `C_{R−2ρR}`,
/// 0 outside `C_{R−ρR}`, a smootherstep of the parabolic box distance
/// `max(|x|_∞, √−t)` in between.
pub fn cutoff<T: Real>(grid: &Grid<T>, cyl: &Cylinder<T>, rho: T) -> Result<SpaceTimeField<T>> {
    let radius = cyl.radius();
    let shell = rho * radius;
    if !(shell >= cast::<T>(4.0) * grid.h()) {
        return Err(Error::InvalidTwoScale(format!(
            "cutoff shell {} is thinner than four grid cells",
            to_f64(shell)
        )));
    }
    let d = grid.d();
    let n = grid.n();
    let nt = grid.n_t();
    let center = cyl.center();
    let top = cyl.top();
    let outer = radius - shell;
    let value = |m: usize, idx: usize| {
        let back = if grid.is_periodic() {
            (top + nt - m) % nt
        } else if m > top {
            return T::zero();
        } else {
            top - m
        };
        let c = grid.coords(idx);
        let mut dist = (count::<T>(back) * grid.tau()).sqrt();
        for j in 0..d {
            let mut off = c[j].abs_diff(center[j]);
            if grid.is_periodic() {
                off = off.min(n - off);
            }
            dist = dist.max(count::<T>(off) * grid.h());
        }
        smootherstep((outer - dist) / shell)
    };
    let points = grid.points();
    let values = (0..nt * points).map(|k| value(k / points, k % points)).collect();
    SpaceTimeField::from_values(*grid, Rank::Scalar, values)
}

/// Solves `v_t = ∇·â∇v` on `cyl` (a cylinder of `u_eps`'s grid) with `v = u_eps`
/// on the parabolic boundary. The result lives on `cyl.local_grid`.
pub fn ahom_extension<T: Real>(
    u_eps: &SpaceTimeField<T>,
    ahom: &HomogenizedMatrix<T>,
    cyl: &Cylinder<T>,
    solver: &SolverConfig,
) -> Result<SpaceTimeField<T>> {
    let data = cyl.extract(u_eps)?;
    let a = ahom.as_coefficients(*data.grid())?;
    dirichlet_frame(&a, &data, solver)
}

/// Outcome of the boundary-radius scan.
#[derive(Clone, Debug, PartialEq)]
pub struct RadiusChoice<T> {
    pub radius: T,
    /// Dimensionless constants of the three boundary bounds at `radius`:
    /// `‖u^ε − u‖/(ε√E)`, `ε‖u^ε_t‖/√E` and `(‖∇u‖ + ‖∇u^ε‖)/√E`, norms over
    /// the parabolic boundary, `E = ∫_{C_R}|∇u|²`.
    pub constants: [T; 3],
    pub score: T,
    /// Every candidate radius with its score.
    pub candidates: Vec<(T, T)>,
}

/// Scans the grid radii strictly between `R/2` and `3R/4` and returns the one
/// with the smallest sum of the three boundary constants. `u` and `u_eps`
/// live on the frame grid of `cyl`.
pub fn radius_select<T: Real>(
    u: &SpaceTimeField<T>,
    u_eps: &SpaceTimeField<T>,
    cyl: &Cylinder<T>,
    eps: T,
) -> Result<RadiusChoice<T>> {
    let grid = *u.grid();
    grid.ensure_same(u_eps.grid())?;
    u.expect_rank(Rank::Scalar)?;
    u_eps.expect_rank(Rank::Scalar)?;
    let big = cyl.radius();
    let k_max = cyl.half_width();
    let ks: Vec<usize> = (1..k_max).filter(|&k| 2 * k > k_max && 4 * k < 3 * k_max).collect();
    if ks.is_empty() {
        return Err(Error::InvalidTwoScale(format!(
            "no grid radius strictly between R/2 and 3R/4 for K = {k_max}"
        )));
    }
    let d = grid.d();
    let scale = UnitScale::new(&grid, big);
    let nb = Neighbors::new(&grid);
    let inv_h = T::one() / grid.h();
    let energy = scale.energy(&grid, &nb, u, cyl);
    let root_e = energy.sqrt();
    let eps_hat = eps / big;

    let mut gu = vec![T::zero(); grid.points() * d];
    let mut ge = vec![T::zero(); grid.points() * d];
    let mut rows = Vec::with_capacity(ks.len());
    for &k in &ks {
        let sub = cyl.nested(&grid, count::<T>(k) * grid.h())?;
        let nodes = sub.nodes(&grid);
        let side = 2 * k + 1;
        let lateral: Vec<bool> = (0..nodes.len())
            .map(|mut r| {
                (0..d).any(|_| {
                    let l = r % side;
                    r /= side;
                    l == 0 || l == side - 1
                })
            })
            .collect();
        let mut sums = [CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new()];
        for s in 0..=sub.depth() {
            let m = sub.slice_of(&grid, s);
            let (prev, next) = if m == 0 { (0, 1) } else { (m - 1, m) };
            grad_slice(&nb, inv_h, u.slice(m), &mut gu);
            grad_slice(&nb, inv_h, u_eps.slice(m), &mut ge);
            let (ue, uu) = (u_eps.slice(m), u.slice(m));
            let (lo, hi) = (u_eps.slice(prev), u_eps.slice(next));
            for (p, &idx) in nodes.iter().enumerate() {
                let w = if s == 0 {
                    scale.bottom
                } else if lateral[p] {
                    scale.lateral
                } else {
                    continue;
                };
                let diff = ue[idx] - uu[idx];
                let dt = (hi[idx] - lo[idx]) / grid.tau() * scale.dt;
                let g2 = |g: &[T]| g[idx * d..(idx + 1) * d].iter().map(|&v| v * v).sum::<T>() * scale.grad2;
                sums[0].add(w * diff * diff);
                sums[1].add(w * dt * dt);
                sums[2].add(w * g2(&gu));
                sums[3].add(w * g2(&ge));
            }
        }
        let [s1, s2, s3, s4] = sums.map(|s| s.value().sqrt());
        let constants = if root_e > T::zero() {
            [s1 / (eps_hat * root_e), s2 * eps_hat / root_e, (s3 + s4) / root_e]
        } else {
            [T::zero(); 3]
        };
        rows.push((count::<T>(k) * grid.h(), constants));
    }
    let score = |c: &[T; 3]| c[0] + c[1] + c[2];
    let best = rows
        .iter()
        .min_by(|x, y| score(&x.1).partial_cmp(&score(&y.1)).expect("finite boundary constants"))
        .expect("non-empty candidates");
    Ok(RadiusChoice {
        radius: best.0,
        constants: best.1,
        score: score(&best.1),
        candidates: rows.iter().map(|(r, c)| (*r, score(c))).collect(),
    })
}

/// Weights after rescaling `C_R` to the unit cylinder.
struct UnitScale<T> {
    lateral: T,
    bottom: T,
    cell: T,
    grad2: T,
    dt: T,
}

impl<T: Real> UnitScale<T> {
    fn new(grid: &Grid<T>, radius: T) -> Self {
        let d = grid.d() as i32;
        let h = grid.h() / radius;
        let tau = grid.tau() / (radius * radius);
        Self {
            lateral: h.powi(d - 1) * tau,
            bottom: h.powi(d),
            cell: h.powi(d) * tau,
            grad2: radius * radius,
            dt: radius * radius,
        }
    }

    /// `∫_{C}|∇u|²` over the cells of `cyl`.
    fn energy(&self, grid: &Grid<T>, nb: &Neighbors, u: &SpaceTimeField<T>, cyl: &Cylinder<T>) -> T {
        let d = grid.d();
        let mut g = vec![T::zero(); grid.points() * d];
        let cells = cyl.cells(grid);
        let mut acc = CompensatedSum::new();
        for m in cyl.slices(grid) {
            grad_slice(nb, T::one() / grid.h(), u.slice(m), &mut g);
            for &idx in &cells {
                for v in &g[idx * d..(idx + 1) * d] {
                    acc.add(*v * *v);
                }
            }
        }
        acc.value() * self.cell * self.grad2
    }
}

/// `w = u − v − η Σ_i φ_i ∂_i v` with forward differences for `∂_i v`.
pub fn homogenization_error<T: Real>(
    u: &SpaceTimeField<T>,
    v: &SpaceTimeField<T>,
    phi: &[SpaceTimeField<T>],
    eta: &SpaceTimeField<T>,
) -> Result<SpaceTimeField<T>> {
    let grid = *u.grid();
    let d = grid.d();
    for f in [v, eta].into_iter().chain(phi) {
        grid.ensure_same(f.grid())?;
        f.expect_rank(Rank::Scalar)?;
    }
    u.expect_rank(Rank::Scalar)?;
    if phi.len() != d {
        return Err(Error::InvalidField(format!("{} correctors for d = {d}", phi.len())));
    }
    let nb = Neighbors::new(&grid);
    let inv_h = T::one() / grid.h();
    let points = grid.points();
    let mut w = SpaceTimeField::zeros(grid, Rank::Scalar);
    w.values_mut().par_chunks_mut(points).enumerate().for_each(|(m, dst)| {
        let mut g = vec![T::zero(); points * d];
        grad_slice(&nb, inv_h, v.slice(m), &mut g);
        let (us, vs, es) = (u.slice(m), v.slice(m), eta.slice(m));
        for (idx, o) in dst.iter_mut().enumerate() {
            let corr: T = (0..d).map(|i| phi[i].slice(m)[idx] * g[idx * d + i]).sum();
            *o = us[idx] - vs[idx] - es[idx] * corr;
        }
    });
    Ok(w)
}

/// `∫ ∇w·a∇w` over the cells and averaged slices of the whole (open) grid of
/// `w`, with `a` on the same grid, in physical units.
pub fn energy_lhs<T: Real>(w: &SpaceTimeField<T>, a: &CoefficientField<T>) -> Result<T> {
    let grid = *w.grid();
    grid.ensure_same(a.grid())?;
    w.expect_rank(Rank::Scalar)?;
    let d = grid.d();
    let n = grid.n();
    let nb = Neighbors::new(&grid);
    let inv_h = T::one() / grid.h();
    let cells: Vec<usize> = (0..grid.points()).filter(|&i| grid.coords(i)[..d].iter().all(|&c| c + 1 < n)).collect();
    let mut g = vec![T::zero(); grid.points() * d];
    let mut acc = CompensatedSum::new();
    for m in 1..grid.n_t() {
        grad_slice(&nb, inv_h, w.slice(m), &mut g);
        for &idx in &cells {
            let gi = &g[idx * d..(idx + 1) * d];
            let mat = a.at(m, idx);
            for i in 0..d {
                for j in 0..d {
                    acc.add(gi[i] * mat[i * d + j] * gi[j]);
                }
            }
        }
    }
    Ok(acc.value() * grid.h().powi(d as i32) * grid.tau())
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyTerm<T> {
    pub name: &'static str,
    pub value: T,
}

/// Left side and control terms of the energy estimate for `w`, rescaled to the
/// unit cylinder.
#[derive(Clone, Debug)]
pub struct EnergyReport<T> {
    pub choice: RadiusChoice<T>,
    /// `∫_{C_{r_ε}} ∇w·a∇w`.
    pub lhs: T,
    /// `E = ∫_{C_R} |∇u|²`.
    pub energy: T,
    pub terms: Vec<EnergyTerm<T>>,
    pub rhs: T,
    /// `lhs / rhs`; zero when both vanish.
    pub constant: T,
    /// The augmented error on `C_{r_ε}` and the coefficients there; the left
    /// side is `energy_lhs(w, a_local)` times `R^{-d}`.
    pub w: SpaceTimeField<T>,
    pub a_local: CoefficientField<T>,
    pub radius: T,
}

/// Runs the full pipeline for `u`, which lives on the frame grid of `cyl` (a
/// cylinder of `a`'s torus) and is `a`-caloric there.
pub fn energy_report<T: Real>(
    a: &CoefficientField<T>,
    corrector: &ExtendedCorrector<T>,
    u: &SpaceTimeField<T>,
    cyl: &Cylinder<T>,
    cfg: &TwoScaleConfig<T>,
    solver: &SolverConfig,
) -> Result<EnergyReport<T>> {
    cfg.validate()?;
    let torus = *a.grid();
    torus.ensure_same(corrector.grid())?;
    let frame_grid = cyl.local_grid(&torus)?;
    frame_grid.ensure_same(u.grid())?;
    let big = cyl.radius();
    if big != cfg.radius {
        return Err(Error::InvalidTwoScale("configured radius differs from the cylinder's".into()));
    }
    let local = cyl.localized();
    let d = torus.d();

    let u_eps = mollify(u, cfg.eps)?;
    let choice = radius_select(u, &u_eps, &local, cfg.eps)?;
    let sub = local.nested(&frame_grid, choice.radius)?;
    let sub_torus = cyl.nested(&torus, choice.radius)?;
    let sub_grid = sub.local_grid(&frame_grid)?;

    let v = ahom_extension(&u_eps, &corrector.ahom, &sub, solver)?;
    let eta = cutoff(&sub_grid, &sub.localized(), cfg.rho)?;
    let phi = corrector.phi.iter().map(|p| sub_torus.extract(p)).collect::<Result<Vec<_>>>()?;
    let w = homogenization_error(&sub.extract(u)?, &v, &phi, &eta)?;
    let a_local = sub_torus.extract_coefficients(a)?;

    let unit = big.powi(-(d as i32));
    let lhs = energy_lhs(&w, &a_local)? * unit;
    let scale = UnitScale::new(&frame_grid, big);
    let energy = scale.energy(&frame_grid, &Neighbors::new(&frame_grid), u, &local);

    let row = row_on(corrector, cyl, T::zero());
    let unit_volume = count::<T>(1 << d);
    let correctors = unit_volume * (row.phi_norm.powi(2) + row.psi_norm.powi(2) + row.sigma_norm.powi(2));
    let zeta = unit_volume * row.zeta_norm.powi(2);
    let flux = unit_volume * row.flux_avg.powi(2);
    let (rho, eps_hat) = (cfg.rho, cfg.eps / big);
    let dd = count::<T>(d);
    let two = cast::<T>(2.0);
    let terms = vec![
        EnergyTerm { name: "epsilon", value: eps_hat * energy },
        EnergyTerm { name: "rho_shell", value: rho.powf(two / dd) / (eps_hat * eps_hat) * energy },
        EnergyTerm { name: "corrector", value: correctors / rho.powf(dd + cast::<T>(4.0)) * energy },
        EnergyTerm { name: "zeta", value: zeta.sqrt() / rho.powf(dd / two + cast::<T>(3.0)) * energy },
        EnergyTerm { name: "zeta_squared", value: zeta / rho.powf(dd + cast::<T>(6.0)) * energy },
        EnergyTerm { name: "zeta_flux", value: (zeta * flux).sqrt() / rho.powf(dd + cast::<T>(4.0)) * energy },
    ];
    let rhs: T = terms.iter().map(|t| t.value).sum();
    let constant = if rhs > T::zero() {
        lhs / rhs
    } else if lhs == T::zero() {
        T::zero()
    } else {
        T::infinity()
    };
    Ok(EnergyReport { choice, lhs, energy, terms, rhs, constant, w, a_local, radius: big })
}

#[cfg(test)]
mod tests;
