//! Periodic cell solver, Dirichlet cylinder solver and torus Poisson solver.

mod anderson;
mod cell;
mod cg;
mod dirichlet;
mod fft;
pub(crate) mod operator;

pub use cell::{parabolic_cell, solve_cell, CellSolve};
pub use dirichlet::{caloric_residual, dirichlet_frame, parabolic_dirichlet};
pub use fft::poisson_torus;
pub(crate) use cell::StepSolver;
pub(crate) use fft::SpectralSolver;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Time discretization of `u_t = div(a grad u)` on a step with coefficient `a^m`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeScheme {
    #[default]
    ImplicitEuler,
    CrankNicolson,
}

impl TimeScheme {
    /// Implicit weight `θ` of the θ-scheme.
    pub fn theta(self) -> f64 {
        match self {
            TimeScheme::ImplicitEuler => 1.0,
            TimeScheme::CrankNicolson => 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Relative residual tolerance of every linear solve.
    pub tol: f64,
    /// Cap on CG iterations per solve and on periods of the cell fixed point.
    pub max_iter: usize,
    /// Relative change between consecutive periods at which the cell problem stops.
    pub period_tol: f64,
    pub scheme: TimeScheme,
    /// History length of the Anderson-accelerated period map (0 disables it).
    pub anderson_depth: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 1000, period_tol: 1e-10, scheme: TimeScheme::ImplicitEuler, anderson_depth: 5 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::InvalidSolverConfig(format!("tol {} not in (0, 1)", self.tol)));
        }
        if !(self.period_tol > 0.0 && self.period_tol < 1.0) {
            return Err(Error::InvalidSolverConfig(format!("period_tol {} not in (0, 1)", self.period_tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidSolverConfig("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}
