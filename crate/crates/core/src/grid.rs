//! Square pixel grids and the scalar/vector fields sampled on them.
//!
//! A grid of `n` pixels per side covers `[-a, a]²` with spacing `h = 2a/n`.
//! Samples live at pixel centers `x_i = -a + (i + 1/2) h` (0-based `i`).
//! Field values are stored row-major with the first index along `x`, so
//! `value(i, j)` is the sample at `(x_i, y_j)`.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point or direction in world coordinates.
pub type Point = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    n: usize,
    half_extent: f64,
}

/// Builds a grid with `n` pixels per side on `[-half_extent, half_extent]²`.
pub fn make_grid(n: usize, half_extent: f64) -> Result<Grid2D> {
    Grid2D::new(n, half_extent)
}

impl Grid2D {
    pub fn new(n: usize, half_extent: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3 pixels per side, got {n}")));
        }
        if !(half_extent.is_finite() && half_extent > 0.0) {
            return Err(Error::InvalidGrid(format!("half extent must be positive, got {half_extent}")));
        }
        Ok(Self { n, half_extent })
    }

    /// The default `[-1, 1]²` domain.
    pub fn unit(n: usize) -> Result<Self> {
        Self::new(n, 1.0)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn half_extent(&self) -> f64 {
        self.half_extent
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_extent / self.n as f64
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of the center of pixel `i` along either axis.
    #[inline]
    pub fn center(&self, i: usize) -> f64 {
        -self.half_extent + (i as f64 + 0.5) * self.spacing()
    }

    #[inline]
    pub fn point(&self, i: usize, j: usize) -> Point {
        [self.center(i), self.center(j)]
    }

    /// Pixel index containing coordinate `c`, or `None` outside the domain.
    pub fn index_of(&self, c: f64) -> Option<usize> {
        let k = ((c + self.half_extent) / self.spacing()).floor();
        if k >= 0.0 && k < self.n as f64 {
            Some(k as usize)
        } else {
            None
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        p[0].abs() <= self.half_extent && p[1].abs() <= self.half_extent
    }

    /// Grid with the same spacing and `pad_factor` times the extent.
    pub fn padded(&self, pad_factor: f64) -> Result<Grid2D> {
        if !(pad_factor.is_finite() && pad_factor >= 1.0) {
            return Err(Error::InvalidPadding(format!("pad factor must be >= 1, got {pad_factor}")));
        }
        let target = self.n as f64 * pad_factor;
        let n = target.round();
        if (target - n).abs() > 1e-9 {
            return Err(Error::InvalidPadding(format!(
                "pad factor {pad_factor} gives a non-integer pixel count {target}"
            )));
        }
        let n = n as usize;
        if !(n - self.n).is_multiple_of(2) {
            return Err(Error::InvalidPadding(format!("padded grid of {n} pixels cannot center a grid of {}", self.n)));
        }
        Grid2D::new(n, self.spacing() * n as f64 / 2.0)
    }

    /// Offset of `inner` inside `self` in pixels, when `inner` is a centered sub-grid.
    pub fn offset_of(&self, inner: &Grid2D) -> Result<usize> {
        let same_h = (self.spacing() - inner.spacing()).abs() <= 1e-12 * self.spacing();
        if !same_h || inner.n > self.n || !(self.n - inner.n).is_multiple_of(2) {
            return Err(Error::GridMismatch(format!(
                "{}-pixel grid (h = {}) is not a centered sub-grid of {}-pixel grid (h = {})",
                inner.n,
                inner.spacing(),
                self.n,
                self.spacing()
            )));
        }
        Ok((self.n - inner.n) / 2)
    }

    fn check_same(&self, other: &Grid2D) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{}-pixel grid on [-{a}, {a}] vs {}-pixel grid on [-{b}, {b}]",
                self.n,
                other.n,
                a = self.half_extent,
                b = other.half_extent
            )))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid2D,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid2D) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: Grid2D, c: f64) -> Self {
        Self { grid, values: vec![c; grid.len()] }
    }

    pub fn from_values(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} values for a {}x{} grid", values.len(), grid.n(), grid.n())));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { i: k / grid.n(), j: k % grid.n(), value: values[k] });
        }
        Ok(Self { grid, values })
    }

    /// Builds a field from a per-pixel closure of `(i, j)`.
    pub fn from_fn(grid: Grid2D, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let n = grid.n();
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..n {
            for j in 0..n {
                values.push(f(i, j));
            }
        }
        Self { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.grid.n()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.n() + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let n = self.grid.n();
        self.values[i * n + j] = v;
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { grid: self.grid, values })
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// `a * self + b * other`.
    pub fn lincomb(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.zip_with(other, |x, y| a * x + b * y)
    }

    pub fn norm_l2(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Places this field at the center of the larger grid `outer`, zero elsewhere.
    pub fn embed(&self, outer: &Grid2D) -> Result<Self> {
        let off = outer.offset_of(&self.grid)?;
        let n = self.n();
        let mut out = ScalarField::zeros(*outer);
        for i in 0..n {
            for j in 0..n {
                out.set(i + off, j + off, self.get(i, j));
            }
        }
        Ok(out)
    }

    /// Extracts the centered sub-grid `inner`.
    pub fn crop(&self, inner: &Grid2D) -> Result<Self> {
        let off = self.grid.offset_of(inner)?;
        Ok(ScalarField::from_fn(*inner, |i, j| self.get(i + off, j + off)))
    }
}

impl Add for &ScalarField {
    type Output = ScalarField;

    fn add(self, rhs: &ScalarField) -> ScalarField {
        self.zip_with(rhs, |a, b| a + b).expect("fields on different grids")
    }
}

impl Sub for &ScalarField {
    type Output = ScalarField;

    fn sub(self, rhs: &ScalarField) -> ScalarField {
        self.zip_with(rhs, |a, b| a - b).expect("fields on different grids")
    }
}

impl Neg for &ScalarField {
    type Output = ScalarField;

    fn neg(self) -> ScalarField {
        self.map(|v| -v)
    }
}

impl Mul<&ScalarField> for f64 {
    type Output = ScalarField;

    fn mul(self, rhs: &ScalarField) -> ScalarField {
        rhs.scale(self)
    }
}

/// Samples `f` at every pixel center, rejecting non-finite values.
pub fn sample_scalar(grid: &Grid2D, f: impl Fn(f64, f64) -> f64) -> Result<ScalarField> {
    let n = grid.n();
    let mut values = Vec::with_capacity(grid.len());
    for i in 0..n {
        let x = grid.center(i);
        for j in 0..n {
            let y = grid.center(j);
            let v = f(x, y);
            if !v.is_finite() {
                return Err(Error::NonFinite { i, j, value: v });
            }
            values.push(v);
        }
    }
    Ok(ScalarField { grid: *grid, values })
}

#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub f1: ScalarField,
    pub f2: ScalarField,
}

impl VectorField {
    pub fn new(f1: ScalarField, f2: ScalarField) -> Result<Self> {
        f1.grid.check_same(&f2.grid)?;
        Ok(Self { f1, f2 })
    }

    pub fn zeros(grid: Grid2D) -> Self {
        Self { f1: ScalarField::zeros(grid), f2: ScalarField::zeros(grid) }
    }

    /// Samples a vector-valued closure at pixel centers.
    pub fn sample(grid: &Grid2D, f: impl Fn(f64, f64) -> Point) -> Result<Self> {
        let f1 = sample_scalar(grid, |x, y| f(x, y)[0])?;
        let f2 = sample_scalar(grid, |x, y| f(x, y)[1])?;
        Ok(Self { f1, f2 })
    }

    #[inline]
    pub fn grid(&self) -> &Grid2D {
        self.f1.grid()
    }

    pub fn components(&self) -> [&ScalarField; 2] {
        [&self.f1, &self.f2]
    }

    /// Pointwise projection `f · d`.
    pub fn dot(&self, d: Point) -> ScalarField {
        self.f1.zip_with(&self.f2, |a, b| a * d[0] + b * d[1]).expect("components share a grid")
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { f1: self.f1.scale(c), f2: self.f2.scale(c) }
    }

    pub fn lincomb(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        Ok(Self { f1: self.f1.lincomb(a, &other.f1, b)?, f2: self.f2.lincomb(a, &other.f2, b)? })
    }

    pub fn embed(&self, outer: &Grid2D) -> Result<Self> {
        Ok(Self { f1: self.f1.embed(outer)?, f2: self.f2.embed(outer)? })
    }

    pub fn crop(&self, inner: &Grid2D) -> Result<Self> {
        Ok(Self { f1: self.f1.crop(inner)?, f2: self.f2.crop(inner)? })
    }
}

/// `x⊥ = (-x₂, x₁)`.
#[inline]
pub fn perp_vec(d: Point) -> Point {
    [-d[1], d[0]]
}

/// Pointwise perpendicular `(f1, f2) -> (-f2, f1)`.
pub fn perp(field: &VectorField) -> VectorField {
    VectorField { f1: -&field.f2, f2: field.f1.clone() }
}
