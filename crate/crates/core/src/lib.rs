pub mod corrector;
pub mod ensemble;
pub mod excess;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod run;
pub mod scalar;
pub mod solvers;
pub mod twoscale;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision aliases for the generic types.
pub type Grid = grid::Grid<f64>;
pub type Field = grid::SpaceTimeField<f64>;
pub type Coefficients = grid::CoefficientField<f64>;
pub type Cylinder = grid::Cylinder<f64>;
pub type Corrector = corrector::ExtendedCorrector<f64>;
pub type Ahom = corrector::HomogenizedMatrix<f64>;
pub type CylinderFrame = excess::Frame<f64>;
