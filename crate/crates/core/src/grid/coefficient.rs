use super::{Grid, Rank, SpaceTimeField};
use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, symmetric_eigenvalues, symmetric_part};
use crate::scalar::{cast, to_f64, Real};

/// Matrix-valued space-time coefficient `a(x, t)` with
/// `λ|ξ|² ≤ ξ·aξ` and `|aξ| ≤ |ξ|` at every grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientField<T> {
    field: SpaceTimeField<T>,
    lambda: T,
    diagonal: bool,
}

impl<T: Real> CoefficientField<T> {
    /// Validates ellipticity at every sample.
    pub fn new(field: SpaceTimeField<T>, lambda: T) -> Result<Self> {
        field.expect_rank(Rank::Matrix)?;
        if !(lambda > T::zero() && lambda <= T::one()) {
            return Err(Error::Ellipticity(format!("lambda {} not in (0, 1]", to_f64(lambda))));
        }
        let d = field.grid().d();
        for (k, m) in field.values().chunks_exact(d * d).enumerate() {
            check_matrix(m, d, lambda).map_err(|e| {
                let pts = field.grid().points();
                Error::Ellipticity(format!("slice {}, node {}: {e}", k / pts, k % pts))
            })?;
        }
        Self::from_parts_unchecked(field, lambda)
    }

    pub(crate) fn from_parts_unchecked(field: SpaceTimeField<T>, lambda: T) -> Result<Self> {
        field.expect_rank(Rank::Matrix)?;
        let d = field.grid().d();
        let diagonal = field
            .values()
            .chunks_exact(d * d)
            .all(|m| (0..d).all(|i| (0..d).all(|j| i == j || m[i * d + j] == T::zero())));
        Ok(Self { field, lambda, diagonal })
    }

    /// The same matrix at every point; `matrix` is row-major `d×d`.
    pub fn constant(grid: Grid<T>, matrix: &[T], lambda: T) -> Result<Self> {
        let d = grid.d();
        if matrix.len() != d * d {
            return Err(Error::InvalidField(format!("expected {} matrix entries", d * d)));
        }
        let field = SpaceTimeField::from_fn(grid, Rank::Matrix, |_, _, c| matrix[c]);
        Self::new(field, lambda)
    }

    /// Identity coefficients (`λ = 1`).
    pub fn identity(grid: Grid<T>) -> Self {
        let d = grid.d();
        let field = SpaceTimeField::from_fn(grid, Rank::Matrix, |_, _, c| {
            if c / d == c % d {
                T::one()
            } else {
                T::zero()
            }
        });
        Self { field, lambda: T::one(), diagonal: true }
    }

    pub fn grid(&self) -> &Grid<T> {
        self.field.grid()
    }

    pub fn field(&self) -> &SpaceTimeField<T> {
        &self.field
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    /// Whether every sample is a diagonal matrix.
    pub fn is_diagonal(&self) -> bool {
        self.diagonal
    }

    /// Row-major matrix at slice `m`, node `idx`.
    pub fn at(&self, m: usize, idx: usize) -> &[T] {
        let dd = self.grid().d() * self.grid().d();
        &self.field.slice(m)[idx * dd..(idx + 1) * dd]
    }

    /// Row-major matrices of one slice.
    pub fn slice(&self, m: usize) -> &[T] {
        self.field.slice(m)
    }

    /// Pointwise transpose.
    pub fn transpose(&self) -> Self {
        let d = self.grid().d();
        let mut field = self.field.clone();
        for m in field.values_mut().chunks_exact_mut(d * d) {
            for i in 0..d {
                for j in i + 1..d {
                    m.swap(i * d + j, j * d + i);
                }
            }
        }
        Self { field, lambda: self.lambda, diagonal: self.diagonal }
    }

    /// Pointwise transpose combined with time reversal `t ↦ -t`, mapping the
    /// step carried by slice `m` to the step carried by slice `1 - m`.
    pub fn adjoint(&self) -> Self {
        let grid = *self.grid();
        let nt = grid.n_t();
        let tr = self.transpose();
        let mut field = SpaceTimeField::zeros(grid, Rank::Matrix);
        for m in 0..nt {
            let src = (nt + 1 - m) % nt;
            field.slice_mut(m).copy_from_slice(tr.field.slice(src));
        }
        Self { field, lambda: self.lambda, diagonal: self.diagonal }
    }

    /// Mean matrix over the whole grid.
    pub fn mean(&self) -> Vec<T> {
        self.field.mean()
    }
}

/// Checks the two ellipticity bounds for one row-major matrix.
pub(crate) fn check_matrix<T: Real>(m: &[T], d: usize, lambda: T) -> std::result::Result<(), String> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err("non-finite entry".into());
    }
    let diagonal = (0..d).all(|i| (0..d).all(|j| i == j || m[i * d + j] == T::zero()));
    if diagonal {
        for i in 0..d {
            let v = m[i * d + i];
            if v < lambda || v > T::one() {
                return Err(format!("diagonal entry {} outside [{}, 1]", to_f64(v), to_f64(lambda)));
            }
        }
        return Ok(());
    }
    // Eigen-solves carry rounding; allow a few ulps.
    let slack = cast::<T>(64.0) * T::epsilon();
    let low = symmetric_eigenvalues(&symmetric_part(m, d), d)[0];
    if low < lambda * (T::one() - slack) {
        return Err(format!("smallest symmetric eigenvalue {} below {}", to_f64(low), to_f64(lambda)));
    }
    let norm = spectral_norm(m, d);
    if norm > T::one() + slack {
        return Err(format!("operator norm {} exceeds 1", to_f64(norm)));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_field_is_accepted_and_stored() {
        let g = Grid::<f64>::new(2, 4, 16).unwrap();
        let a = CoefficientField::constant(g, &[0.7, 0.0, 0.0, 0.4], 0.25).unwrap();
        assert!(a.is_diagonal());
        assert_eq!(a.at(3, 5), &[0.7, 0.0, 0.0, 0.4]);
    }

    #[test]
    fn violations_are_rejected() {
        let g = Grid::<f64>::new(2, 4, 16).unwrap();
        assert!(CoefficientField::constant(g, &[0.1, 0.0, 0.0, 0.4], 0.25).is_err());
        assert!(CoefficientField::constant(g, &[1.1, 0.0, 0.0, 0.4], 0.25).is_err());
        assert!(CoefficientField::constant(g, &[0.7, 0.0, 0.0, 0.4], 0.0).is_err());
        // |aξ| > |ξ| for ξ = (1, 1)/√2
        assert!(CoefficientField::constant(g, &[0.9, 0.5, 0.5, 0.9], 0.25).is_err());
        assert!(CoefficientField::constant(g, &[0.6, 0.2, -0.2, 0.6], 0.25).is_ok());
    }

    #[test]
    fn adjoint_is_an_involution() {
        let g = Grid::<f64>::new(2, 4, 16).unwrap();
        let field = SpaceTimeField::from_fn(g, Rank::Matrix, |m, x, c| match c {
            0 => 0.5 + 0.02 * m as f64,
            1 => 0.1 * x[0],
            2 => -0.1 * x[1],
            _ => 0.6,
        });
        let a = CoefficientField::new(field, 0.2).unwrap();
        assert_eq!(a.adjoint().adjoint(), a);
        assert_eq!(a.transpose().at(2, 3)[1], a.at(2, 3)[2]);
    }
}
