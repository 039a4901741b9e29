//! Benchmark inputs shared by the bench targets.

use vline_core::phantom::phantom2;
use vline_core::{Grid2D, VectorField};

/// Phantom 2 on an `n`-pixel unit grid.
pub fn input(n: usize) -> VectorField {
    phantom2(&Grid2D::unit(n).expect("valid grid"))
}
