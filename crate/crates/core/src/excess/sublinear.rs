//! Normalized large-scale averages of the extended corrector on growing cylinders.

use crate::corrector::ExtendedCorrector;
use crate::error::Result;
use crate::grid::{Cylinder, Grid, SpaceTimeField};
use crate::scalar::{count, CompensatedSum, Real};

#[derive(Clone, Debug, PartialEq)]
pub struct SublinearityRow<T> {
    pub radius: T,
    /// `R⁻¹ (avg_C Σ_i |φ_i − (φ_i)_R|²)^½`.
    pub phi_norm: T,
    /// `R⁻¹ (avg_C Σ_i |ψ_i − (ψ_i)_{t,R}|²)^½`, slice-wise normalization.
    pub psi_norm: T,
    /// `R⁻¹ (avg_C Σ_ijk |σ_ijk − (σ_ijk)_{t,R}|²)^½`, slice-wise normalization.
    pub sigma_norm: T,
    /// `R⁻² (avg_C Σ_ij |ζ_ij − ζ_ij(top)|²)^½`.
    pub zeta_norm: T,
    /// `(avg_C Σ_i |q_i|²)^½`.
    pub flux_avg: T,
    /// `(mean over the torus of Σ_i |q_i|²)^½`.
    pub flux_mean: T,
}

/// Dyadic radii `r_min, 2 r_min, …` not exceeding `r_max`.
pub fn dyadic_radii<T: Real>(r_min: T, r_max: T) -> Vec<T> {
    let mut out = Vec::new();
    let mut r = r_min;
    let slack = T::one() + T::epsilon() * count::<T>(64);
    while r <= r_max * slack {
        out.push(r);
        r = r + r;
    }
    out
}

/// One row per radius, on cylinders centred on the torus with top slice 0
/// (extending backwards in time across the periodic wrap).
pub fn sublinearity_report<T: Real>(c: &ExtendedCorrector<T>, radii: &[T]) -> Result<Vec<SublinearityRow<T>>> {
    let grid = *c.grid();
    let flux_mean = c
        .q
        .iter()
        .map(|q| q.values().iter().map(|&v| v * v).sum::<T>() / count::<T>(grid.n_t() * grid.points()))
        .sum::<T>()
        .sqrt();
    radii
        .iter()
        .map(|&radius| {
            let cyl = Cylinder::new(&grid, radius, &[grid.n() / 2; 3], 0)?;
            Ok(row_on(c, &cyl, flux_mean))
        })
        .collect()
}

/// Sublinearity row on an arbitrary cylinder of the corrector's torus.
pub(crate) fn row_on<T: Real>(c: &ExtendedCorrector<T>, cyl: &Cylinder<T>, flux_mean: T) -> SublinearityRow<T> {
    let grid = *c.grid();
    let d = grid.d();
    let radius = cyl.radius();
    let phi: T = c.phi.iter().map(|f| deviation(f, &grid, cyl, false)).sum();
    let psi: T = c.psi.iter().map(|f| deviation(f, &grid, cyl, true)).sum();
    let sigma: T = c.sigma.iter().map(|f| deviation(f, &grid, cyl, true)).sum();
    let flux: T = c.q.iter().map(|f| deviation_from(f, &grid, cyl, |_| vec![T::zero(); d])).sum();
    let top = cyl.slice_of(&grid, cyl.depth());
    let mut zeta = CompensatedSum::new();
    for m in cyl.slices(&grid) {
        for ij in 0..d * d {
            let dz = c.zeta.get(m, ij / d, ij % d) - c.zeta.get(top, ij / d, ij % d);
            zeta.add(dz * dz);
        }
    }
    let zeta = zeta.value() / count::<T>(cyl.depth());
    SublinearityRow {
        radius,
        phi_norm: phi.sqrt() / radius,
        psi_norm: psi.sqrt() / radius,
        sigma_norm: sigma.sqrt() / radius,
        zeta_norm: zeta.sqrt() / (radius * radius),
        flux_avg: flux.sqrt(),
        flux_mean,
    }
}

/// `avg_C |f − mean|²` where the mean is over the whole cylinder or per slice.
fn deviation<T: Real>(f: &SpaceTimeField<T>, grid: &Grid<T>, cyl: &Cylinder<T>, per_slice: bool) -> T {
    if per_slice {
        deviation_from(f, grid, cyl, |m| box_mean(f, grid, cyl, &[m]))
    } else {
        let mean = box_mean(f, grid, cyl, &cyl.slices(grid));
        deviation_from(f, grid, cyl, |_| mean.clone())
    }
}

fn box_mean<T: Real>(f: &SpaceTimeField<T>, grid: &Grid<T>, cyl: &Cylinder<T>, slices: &[usize]) -> Vec<T> {
    let nc = f.components();
    let mut acc = vec![CompensatedSum::new(); nc];
    let weights = cyl.node_weights(grid);
    for &m in slices {
        let s = f.slice(m);
        for (&idx, &w) in cyl.nodes(grid).iter().zip(&weights) {
            for c in 0..nc {
                acc[c].add(w * s[idx * nc + c]);
            }
        }
    }
    acc.iter().map(|a| a.value() / count::<T>(slices.len())).collect()
}

fn deviation_from<T: Real>(
    f: &SpaceTimeField<T>,
    grid: &Grid<T>,
    cyl: &Cylinder<T>,
    mean: impl Fn(usize) -> Vec<T>,
) -> T {
    let nc = f.components();
    let nodes = cyl.nodes(grid);
    let weights = cyl.node_weights(grid);
    let mut acc = CompensatedSum::new();
    for m in cyl.slices(grid) {
        let mu = mean(m);
        let s = f.slice(m);
        for (&idx, &w) in nodes.iter().zip(&weights) {
            for c in 0..nc {
                let v = s[idx * nc + c] - mu[c];
                acc.add(w * v * v);
            }
        }
    }
    acc.value() / count::<T>(cyl.depth())
}
