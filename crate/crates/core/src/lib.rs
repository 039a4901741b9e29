//! Longitudinal, transverse and star transforms of 2D vector fields on a
//! pixel grid, with the inversions that recover a field from them.

pub mod beam;
pub mod diffops;
pub mod error;
pub mod eval;
pub mod grid;
pub mod io;
pub mod phantom;
pub mod poisson;
pub mod radon;
pub mod recon;
pub mod sparse;
pub mod vlt;

pub use beam::Direction;
pub use error::{Error, Result};
pub use eval::{NoiseSpec, ReconReport};
pub use grid::{make_grid, perp, sample_scalar, Grid2D, Point, ScalarField, VectorField};
pub use radon::Sinogram;
pub use recon::{PadSpec, Pipeline, PipelineConfig, PipelineRun};
pub use vlt::{StarGeometry, VLineGeometry};
