//! Test fields: the three reference phantoms, a compactly supported bump
//! potential for the potential/solenoidal experiments, and RGB image ingestion.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{sample_scalar, Grid2D, Point, ScalarField, VectorField};

/// One weighted disc of a piecewise-constant phantom.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiscSpec {
    pub r: f64,
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
}

impl DiscSpec {
    pub const fn new(r: f64, cx: f64, cy: f64, w: f64) -> Self {
        Self { r, cx, cy, w }
    }

    #[inline]
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.cx, y - self.cy);
        dx * dx + dy * dy < self.r * self.r
    }
}

pub const PHANTOM3_F1: [DiscSpec; 3] =
    [DiscSpec::new(0.25, 0.1, 0.3, 0.3), DiscSpec::new(0.35, 0.0, -0.1, 0.9), DiscSpec::new(0.3, -0.2, 0.3, 0.7)];

pub const PHANTOM3_F2: [DiscSpec; 3] =
    [DiscSpec::new(0.3, 0.2, 0.1, 0.25), DiscSpec::new(0.2, 0.4, 0.3, 0.45), DiscSpec::new(0.2, -0.3, 0.4, 0.9)];

pub fn disc_sum(discs: &[DiscSpec], x: f64, y: f64) -> f64 {
    discs.iter().filter(|d| d.contains(x, y)).map(|d| d.w).sum()
}

/// `exp(-s / (s - |p - c|²))` inside the disc `|p - c|² < s`, zero outside.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Point,
    /// Squared support radius.
    pub scale: f64,
}

impl Bump {
    pub const fn new(center: Point, scale: f64) -> Self {
        Self { center, scale }
    }

    pub fn support_radius(&self) -> f64 {
        self.scale.sqrt()
    }
}

/// A scalar potential with analytic first derivatives.
pub trait Potential {
    fn value(&self, x: f64, y: f64) -> f64;
    fn gradient(&self, x: f64, y: f64) -> Point;
}

impl Potential for Bump {
    fn value(&self, x: f64, y: f64) -> f64 {
        let (dx, dy) = (x - self.center[0], y - self.center[1]);
        let q = self.scale - (dx * dx + dy * dy);
        if q > 0.0 {
            (-self.scale / q).exp()
        } else {
            0.0
        }
    }

    fn gradient(&self, x: f64, y: f64) -> Point {
        let (dx, dy) = (x - self.center[0], y - self.center[1]);
        let q = self.scale - (dx * dx + dy * dy);
        if q > 0.0 {
            // d/dx exp(-s/q) = exp(-s/q) * (s/q²) * dq/dx, dq/dx = -2 dx
            let g = (-self.scale / q).exp() * self.scale / (q * q);
            [-2.0 * dx * g, -2.0 * dy * g]
        } else {
            [0.0, 0.0]
        }
    }
}

/// The documented potential used to exercise potential/solenoidal recovery:
/// `W(x, y) = exp(-0.3 / (0.3 - x² - y²))` inside radius `√0.3`, zero outside.
pub const TEST_POTENTIAL: Bump = Bump::new([0.0, 0.0], 0.3);

pub const PHANTOM2_F1: Bump = Bump::new([0.15, 0.15], 0.4);
pub const PHANTOM2_F2: Bump = Bump::new([0.0, 0.3], 0.3);

pub fn phantom1_at(x: f64, y: f64) -> Point {
    [1.0 + (PI * x).sin() * (PI * y).cos(), 1.0 + (PI * y).sin() * (PI * x).cos()]
}

pub fn phantom2_at(x: f64, y: f64) -> Point {
    [PHANTOM2_F1.value(x, y), PHANTOM2_F2.value(x, y)]
}

pub fn phantom3_at(x: f64, y: f64) -> Point {
    [disc_sum(&PHANTOM3_F1, x, y), disc_sum(&PHANTOM3_F2, x, y)]
}

pub fn phantom1(grid: &Grid2D) -> VectorField {
    VectorField::sample(grid, phantom1_at).expect("phantom 1 is finite")
}

pub fn phantom2(grid: &Grid2D) -> VectorField {
    VectorField::sample(grid, phantom2_at).expect("phantom 2 is finite")
}

/// Pointwise sampling at pixel centers, no anti-aliasing of the disc edges.
pub fn phantom3(grid: &Grid2D) -> VectorField {
    VectorField::sample(grid, phantom3_at).expect("phantom 3 is finite")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhantomId {
    One,
    Two,
    Three,
}

impl PhantomId {
    pub fn from_number(id: u32) -> Option<Self> {
        match id {
            1 => Some(Self::One),
            2 => Some(Self::Two),
            3 => Some(Self::Three),
            _ => None,
        }
    }

    pub fn number(self) -> u32 {
        match self {
            Self::One => 1,
            Self::Two => 2,
            Self::Three => 3,
        }
    }

    pub fn generate(self, grid: &Grid2D) -> VectorField {
        match self {
            Self::One => phantom1(grid),
            Self::Two => phantom2(grid),
            Self::Three => phantom3(grid),
        }
    }
}

pub fn potential_field<P: Potential>(w: &P, grid: &Grid2D) -> ScalarField {
    sample_scalar(grid, |x, y| w.value(x, y)).expect("potential is finite")
}

/// Samples `∇W`.
pub fn gradient_field<P: Potential>(w: &P, grid: &Grid2D) -> VectorField {
    VectorField::sample(grid, |x, y| w.gradient(x, y)).expect("gradient is finite")
}

/// Samples `∇⊥W = (-∂W/∂y, ∂W/∂x)`.
pub fn perp_gradient_field<P: Potential>(w: &P, grid: &Grid2D) -> VectorField {
    VectorField::sample(grid, |x, y| {
        let g = w.gradient(x, y);
        [-g[1], g[0]]
    })
    .expect("gradient is finite")
}

/// Zeroes the field outside the open disc of the given radius.
pub fn truncate_to_disc(field: &VectorField, radius: f64) -> VectorField {
    let grid = *field.grid();
    let r2 = radius * radius;
    let mask = |f: &ScalarField| {
        ScalarField::from_fn(grid, |i, j| {
            let [x, y] = grid.point(i, j);
            if x * x + y * y < r2 {
                f.get(i, j)
            } else {
                0.0
            }
        })
    };
    VectorField { f1: mask(&field.f1), f2: mask(&field.f2) }
}

/// Reads a square 8-bit image as a vector field on `[-1, 1]²`:
/// `f1 = red / 255`, `f2 = green / 255`; blue (and alpha) are ignored.
pub fn field_from_rgb_image(path: &Path) -> Result<VectorField> {
    let img = image::open(path)
        .map_err(|e| Error::InvalidImage { path: path.to_path_buf(), reason: e.to_string() })?
        .to_rgb8();
    let (w, h) = img.dimensions();
    if w != h {
        return Err(Error::InvalidImage { path: path.to_path_buf(), reason: format!("image is {w}x{h}, not square") });
    }
    let grid = Grid2D::unit(w as usize)
        .map_err(|e| Error::InvalidImage { path: path.to_path_buf(), reason: e.to_string() })?;
    let n = w;
    let channel =
        |c: usize| ScalarField::from_fn(grid, |i, j| img.get_pixel(i as u32, n - 1 - j as u32).0[c] as f64 / 255.0);
    Ok(VectorField { f1: channel(0), f2: channel(1) })
}
