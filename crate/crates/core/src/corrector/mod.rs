//! The extended corrector `(φ, ψ, σ, ζ)`, the flux `q` and the homogenized matrix `â`.
//!
//! For each direction `i`:
//! - `φ_i` is the space-time periodic solution of `φ_t = ∇·a(∇φ_i + e_i)` with zero mean,
//! - `q_i = a(∇φ_i + e_i)` and column `i` of `â` is the space-time mean of `q_i`,
//! - `Δψ_i = ∇·q_i` slice by slice,
//! - `Δσ_ijk = ∂_k(q_i − ∇ψ_i)_j − ∂_j(q_i − ∇ψ_i)_k`, so that
//!   `∇·σ_i = q_i − ∇ψ_i − ⟨q_i⟩_slice`,
//! - `∂_t ζ_i = ⟨q_i⟩_slice − â e_i` with `ζ_i(0) = 0`.
//!
//! The slice average `⟨·⟩_slice` stands in for the conditional expectation
//! given the spatial shifts: on a periodized ensemble the spatially
//! shift-invariant functions are exactly the spatial torus averages.

mod io;
mod verify;

pub use io::{load_corrector, save_corrector};
pub use verify::{verify, IdentityItem, IdentityReport, VerifyThresholds};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{grad_slice, CoefficientField, Grid, Neighbors, Rank, SpaceTimeField};
use crate::linalg::{spectral_norm, symmetric_eigenvalues, symmetric_part};
use crate::scalar::{cast, count, to_f64, CompensatedSum, Real};
use crate::solvers::operator::{compute_flux, SliceCoeffs};
use crate::solvers::{solve_cell, SolverConfig, SpectralSolver};

/// The `d×d` homogenized matrix, row-major, with the ellipticity constant it inherits.
#[derive(Clone, Debug, PartialEq)]
pub struct HomogenizedMatrix<T> {
    d: usize,
    entries: Vec<T>,
    lambda: T,
}

impl<T: Real> HomogenizedMatrix<T> {
    /// Checks `λ|ξ|² ≤ ξ·âξ` and `|âξ| ≤ |ξ|/λ`.
    pub fn new(d: usize, entries: Vec<T>, lambda: T) -> Result<Self> {
        if entries.len() != d * d {
            return Err(Error::InvalidField(format!("expected {} entries", d * d)));
        }
        let m = Self { d, entries, lambda };
        let (low, high) = m.ellipticity_bounds();
        let slack = cast::<T>(64.0) * T::epsilon();
        if !(low >= lambda * (T::one() - slack)) {
            return Err(Error::Ellipticity(format!(
                "homogenized matrix: smallest symmetric eigenvalue {} below {}",
                to_f64(low),
                to_f64(lambda)
            )));
        }
        if !(high <= (T::one() + slack) / lambda) {
            return Err(Error::Ellipticity(format!(
                "homogenized matrix: norm {} above 1/lambda",
                to_f64(high)
            )));
        }
        Ok(m)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.entries[row * self.d + col]
    }

    pub fn apply(&self, xi: &[T]) -> Vec<T> {
        crate::linalg::mat_vec(&self.entries, xi)
    }

    /// Smallest eigenvalue of the symmetric part and the operator norm.
    pub fn ellipticity_bounds(&self) -> (T, T) {
        let low = symmetric_eigenvalues(&symmetric_part(&self.entries, self.d), self.d)[0];
        (low, spectral_norm(&self.entries, self.d))
    }

    /// As a constant coefficient field on `grid` (the norm may exceed one, so
    /// the pointwise bound `|aξ| ≤ |ξ|` is not enforced here).
    pub fn as_coefficients(&self, grid: Grid<T>) -> Result<CoefficientField<T>> {
        let field = SpaceTimeField::from_fn(grid, Rank::Matrix, |_, _, c| self.entries[c]);
        CoefficientField::from_parts_unchecked(field, self.lambda)
    }
}

/// Per-slice spatial means of the fluxes: `values[(m·d + i)·d + j]` is the
/// mean of `(q_i)_j` on slice `m`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalFlux<T> {
    d: usize,
    n_t: usize,
    values: Vec<T>,
}

impl<T: Real> ConditionalFlux<T> {
    pub fn get(&self, m: usize, i: usize, j: usize) -> T {
        self.values[(m * self.d + i) * self.d + j]
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    /// Time average, which equals `â` (column `i` is entry block `i`).
    pub fn time_average(&self) -> Vec<T> {
        let dd = self.d * self.d;
        let mut acc = vec![CompensatedSum::new(); dd];
        for chunk in self.values.chunks_exact(dd) {
            for (a, &v) in acc.iter_mut().zip(chunk) {
                a.add(v);
            }
        }
        acc.into_iter().map(|a| a.value() / count(self.n_t)).collect()
    }
}

/// Spatially constant `ζ`: `values[(m·d + i)·d + j]` is `(ζ_i)_j` at time `t_m`,
/// and `period_end` holds the value at `t = T`, which returns to zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Zeta<T> {
    d: usize,
    values: Vec<T>,
    period_end: Vec<T>,
}

impl<T: Real> Zeta<T> {
    pub fn from_parts(d: usize, values: Vec<T>, period_end: Vec<T>) -> Result<Self> {
        if !values.len().is_multiple_of(d * d) || period_end.len() != d * d {
            return Err(Error::InvalidField("zeta series has the wrong length".into()));
        }
        Ok(Self { d, values, period_end })
    }

    pub fn len(&self) -> usize {
        self.values.len() / (self.d * self.d)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, m: usize, i: usize, j: usize) -> T {
        self.values[(m * self.d + i) * self.d + j]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn period_end(&self) -> &[T] {
        &self.period_end
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().chain(&self.period_end).fold(T::zero(), |a, v| a.max(v.abs()))
    }
}

/// Statistics of one cell solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellStats {
    pub periods: usize,
    pub period_change: f64,
    pub cg_iterations: usize,
}

/// The assembled extended corrector. `sigma[(i·d + j)·d + k]` holds `σ_ijk`.
#[derive(Clone, Debug)]
pub struct ExtendedCorrector<T> {
    pub phi: Vec<SpaceTimeField<T>>,
    pub q: Vec<SpaceTimeField<T>>,
    pub psi: Vec<SpaceTimeField<T>>,
    pub sigma: Vec<SpaceTimeField<T>>,
    pub zeta: Zeta<T>,
    pub conditional: ConditionalFlux<T>,
    pub ahom: HomogenizedMatrix<T>,
    pub stats: Vec<CellStats>,
}

impl<T: Real> ExtendedCorrector<T> {
    /// Builds every component for the coefficient field `a`.
    pub fn build(a: &CoefficientField<T>, cfg: &SolverConfig) -> Result<Self> {
        let (phi, stats) = build_phi(a, cfg)?;
        let q = flux(a, &phi)?;
        let ahom = homogenized(&q, a.lambda())?;
        let conditional = conditional_flux(&q)?;
        let psi = build_psi(&q)?;
        let sigma = build_sigma(&q, &psi)?;
        let zeta = build_zeta(&conditional, &ahom, a.grid().tau());
        Ok(Self { phi, q, psi, sigma, zeta, conditional, ahom, stats })
    }

    pub fn grid(&self) -> &Grid<T> {
        self.phi[0].grid()
    }

    pub fn d(&self) -> usize {
        self.phi.len()
    }

    pub fn sigma_component(&self, i: usize, j: usize, k: usize) -> &SpaceTimeField<T> {
        let d = self.d();
        &self.sigma[(i * d + j) * d + k]
    }

    /// `φ_ξ = Σ_i ξ_i φ_i`.
    pub fn phi_xi(&self, xi: &[T]) -> SpaceTimeField<T> {
        combine(&self.phi, xi)
    }
}

/// `Σ_i w_i f_i` for scalar fields on a common grid.
pub(crate) fn combine<T: Real>(fields: &[SpaceTimeField<T>], w: &[T]) -> SpaceTimeField<T> {
    let mut out = SpaceTimeField::zeros(*fields[0].grid(), fields[0].rank());
    for (f, &wi) in fields.iter().zip(w) {
        if wi != T::zero() {
            for (o, &v) in out.values_mut().iter_mut().zip(f.values()) {
                *o = *o + wi * v;
            }
        }
    }
    out
}

/// One cell solve per direction, each normalized to zero space-time mean.
pub fn build_phi<T: Real>(
    a: &CoefficientField<T>,
    cfg: &SolverConfig,
) -> Result<(Vec<SpaceTimeField<T>>, Vec<CellStats>)> {
    let d = a.grid().d();
    let solved: Vec<_> = (0..d)
        .into_par_iter()
        .map(|i| {
            let mut xi = vec![T::zero(); d];
            xi[i] = T::one();
            solve_cell(a, &xi, None, cfg)
        })
        .collect::<Result<_>>()?;
    let stats = solved
        .iter()
        .map(|s| CellStats {
            periods: s.periods,
            period_change: to_f64(s.period_change),
            cg_iterations: s.cg_iterations,
        })
        .collect();
    Ok((solved.into_iter().map(|s| s.phi).collect(), stats))
}

/// `q_i = a(∇φ_i + e_i)` with the solver's forward-difference gradient.
pub fn flux<T: Real>(a: &CoefficientField<T>, phi: &[SpaceTimeField<T>]) -> Result<Vec<SpaceTimeField<T>>> {
    let grid = *a.grid();
    let d = grid.d();
    if phi.len() != d {
        return Err(Error::InvalidField(format!("{} correctors for d = {d}", phi.len())));
    }
    for p in phi {
        grid.ensure_same(p.grid())?;
        p.expect_rank(Rank::Scalar)?;
    }
    let nb = Neighbors::new(&grid);
    let inv_h = T::one() / grid.h();
    Ok(phi
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut xi = vec![T::zero(); d];
            xi[i] = T::one();
            let mut q = SpaceTimeField::zeros(grid, Rank::Vector);
            for m in 0..grid.n_t() {
                let coeffs = SliceCoeffs::full(a, m);
                compute_flux(&nb, inv_h, &coeffs, Some(p.slice(m)), Some(&xi), q.slice_mut(m));
            }
            q
        })
        .collect())
}

/// Column `i` of `â` is the space-time mean of `q_i`; ellipticity is checked.
pub fn homogenized<T: Real>(q: &[SpaceTimeField<T>], lambda: T) -> Result<HomogenizedMatrix<T>> {
    let d = q.len();
    let mut entries = vec![T::zero(); d * d];
    for (i, qi) in q.iter().enumerate() {
        qi.expect_rank(Rank::Vector)?;
        for (j, v) in qi.mean().into_iter().enumerate() {
            entries[j * d + i] = v;
        }
    }
    HomogenizedMatrix::new(d, entries, lambda)
}

/// Spatial mean of every `q_i` on every slice.
pub fn conditional_flux<T: Real>(q: &[SpaceTimeField<T>]) -> Result<ConditionalFlux<T>> {
    let d = q.len();
    let grid = q[0].grid();
    let nt = grid.n_t();
    let pts = count::<T>(grid.points());
    let mut values = vec![T::zero(); nt * d * d];
    for (i, qi) in q.iter().enumerate() {
        qi.expect_rank(Rank::Vector)?;
        for m in 0..nt {
            let mut acc = vec![CompensatedSum::new(); d];
            for chunk in qi.slice(m).chunks_exact(d) {
                for (a, &v) in acc.iter_mut().zip(chunk) {
                    a.add(v);
                }
            }
            for j in 0..d {
                values[(m * d + i) * d + j] = acc[j].value() / pts;
            }
        }
    }
    Ok(ConditionalFlux { d, n_t: nt, values })
}

/// `ψ_i` with `Δψ_i = ∇·q_i` and zero mean on every slice.
pub fn build_psi<T: Real>(q: &[SpaceTimeField<T>]) -> Result<Vec<SpaceTimeField<T>>> {
    let grid = *q[0].grid();
    let nb = Neighbors::new(&grid);
    let inv_h = T::one() / grid.h();
    q.par_iter()
        .map(|qi| {
            qi.expect_rank(Rank::Vector)?;
            let mut solver = SpectralSolver::new(&grid);
            let mut psi = SpaceTimeField::zeros(grid, Rank::Scalar);
            let mut div = vec![T::zero(); grid.points()];
            for m in 0..grid.n_t() {
                crate::grid::div_slice(&nb, inv_h, qi.slice(m), &mut div);
                solver.poisson(&div, psi.slice_mut(m))?;
            }
            Ok(psi)
        })
        .collect()
}

/// `σ_ijk` for `j > k` from the gauge equation, mirrored with a sign flip for
/// `j < k` and zero on `j = k`, so skew symmetry holds bit for bit.
pub fn build_sigma<T: Real>(q: &[SpaceTimeField<T>], psi: &[SpaceTimeField<T>]) -> Result<Vec<SpaceTimeField<T>>> {
    let d = q.len();
    let grid = *q[0].grid();
    let nb = Neighbors::new(&grid);
    let inv_h = T::one() / grid.h();
    let npts = grid.points();
    let pairs: Vec<(usize, usize, usize)> =
        (0..d).flat_map(|i| (0..d).flat_map(move |j| (0..j).map(move |k| (i, j, k)))).collect();
    let solved: Vec<SpaceTimeField<T>> = pairs
        .par_iter()
        .map(|&(i, j, k)| {
            let mut solver = SpectralSolver::new(&grid);
            let mut out = SpaceTimeField::zeros(grid, Rank::Scalar);
            let mut gpsi = vec![T::zero(); npts * d];
            let mut rhs = vec![T::zero(); npts];
            for m in 0..grid.n_t() {
                grad_slice(&nb, inv_h, psi[i].slice(m), &mut gpsi);
                let qs = q[i].slice(m);
                let p = |idx: usize, c: usize| qs[idx * d + c] - gpsi[idx * d + c];
                for (idx, r) in rhs.iter_mut().enumerate() {
                    let nk = nb.next[k][idx];
                    let nj = nb.next[j][idx];
                    *r = ((p(nk, j) - p(idx, j)) - (p(nj, k) - p(idx, k))) * inv_h;
                }
                solver.poisson(&rhs, out.slice_mut(m))?;
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut sigma = vec![SpaceTimeField::zeros(grid, Rank::Scalar); d * d * d];
    for (&(i, j, k), field) in pairs.iter().zip(solved) {
        sigma[(i * d + k) * d + j] = field.map(|v| -v);
        sigma[(i * d + j) * d + k] = field;
    }
    Ok(sigma)
}

/// `ζ_i(t_m) = τ Σ_{l=1}^{m} (⟨q_i⟩_l − â e_i)`: exact integration of the
/// flux mean, which is constant on each time step.
pub fn build_zeta<T: Real>(cond: &ConditionalFlux<T>, ahom: &HomogenizedMatrix<T>, tau: T) -> Zeta<T> {
    let d = cond.d;
    let nt = cond.n_t;
    let mut values = vec![T::zero(); nt * d * d];
    let mut acc = vec![CompensatedSum::new(); d * d];
    for step in 1..=nt {
        let m = step % nt;
        for i in 0..d {
            for j in 0..d {
                acc[i * d + j].add(tau * (cond.get(m, i, j) - ahom.get(j, i)));
            }
        }
        if step < nt {
            for (slot, a) in acc.iter().enumerate() {
                values[step * d * d + slot] = a.value();
            }
        }
    }
    Zeta { d, values, period_end: acc.iter().map(|a| a.value()).collect() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{generate, EnsembleKind, EnsembleSpec};

    #[test]
    fn constant_coefficients() {
        let g = Grid::<f64>::new(2, 16, 256).unwrap();
        let a = generate(&EnsembleSpec::constant(0.25, vec![0.7, 0.4]), &g).unwrap();
        let c = ExtendedCorrector::build(&a, &SolverConfig::default()).unwrap();
        for (x, y) in c.ahom.entries().iter().zip([0.7, 0.0, 0.0, 0.4]) {
            assert!((x - y).abs() < 1e-13);
        }
        assert!(c.q[0].component(0).values().iter().all(|&v| v == 0.7));
        assert!(c.psi.iter().chain(&c.sigma).all(|f| f.max_abs() == 0.0));
        assert_eq!(c.zeta.max_abs(), 0.0);
    }

    #[test]
    fn time_only_coefficients() {
        let g = Grid::<f64>::new(1, 8, 64).unwrap();
        let spec = EnsembleSpec::new(EnsembleKind::TimePeriodic, 0.25, 2, 0, vec![0.25, 1.0]);
        let a = generate(&spec, &g).unwrap();
        let c = ExtendedCorrector::build(&a, &SolverConfig::default()).unwrap();
        assert!(c.phi[0].max_abs() == 0.0);
        assert!((c.ahom.get(0, 0) - 0.625).abs() < 1e-15);
        assert!((c.zeta.get(32, 0, 0) + 0.1875).abs() < 1e-15);
        assert!(c.zeta.period_end()[0].abs() < 1e-15);
        for m in 0..64 {
            assert_eq!(c.conditional.get(m, 0, 0), a.at(m, 0)[0]);
        }
    }

    #[test]
    fn sigma_is_exactly_skew() {
        let g = Grid::<f64>::with_periods(3, 8, 32, 1.0, 0.5).unwrap();
        let spec = EnsembleSpec::new(EnsembleKind::Checkerboard, 0.25, 2, 9, vec![0.25, 1.0]);
        let a = generate(&spec, &g).unwrap();
        let c = ExtendedCorrector::build(&a, &SolverConfig::default()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let s = c.sigma_component(i, j, k).values();
                    let t = c.sigma_component(i, k, j).values();
                    assert!(s.iter().zip(t).all(|(x, y)| *x == -*y));
                }
            }
        }
        let avg = c.conditional.time_average();
        for i in 0..3 {
            for j in 0..3 {
                assert!((avg[i * 3 + j] - c.ahom.get(j, i)).abs() < 1e-12);
            }
        }
    }
}
