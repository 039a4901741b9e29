//! Divergent beam transform and its first moment on pixelized images.
//!
//! Rays are traversed exactly: the parametric crossings with the vertical and
//! horizontal pixel edges are merged in order (Siddon's method), and every
//! interval between consecutive crossings is charged to the pixel containing
//! its midpoint. Crossings closer than `1e-12 h` are merged into one, which
//! resolves rays passing through pixel corners deterministically.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid2D, Point, ScalarField};

/// A unit direction vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Direction([f64; 2]);

impl Direction {
    /// Normalizes `(x, y)`; rejects zero and non-finite input.
    pub fn new(x: f64, y: f64) -> Result<Self> {
        let norm = x.hypot(y);
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidGeometry(format!("direction ({x}, {y}) has no length")));
        }
        if (norm - 1.0).abs() <= 1e-12 {
            Ok(Self([x, y]))
        } else {
            Ok(Self([x / norm, y / norm]))
        }
    }

    /// `(cos θ, sin θ)`.
    pub fn from_angle(theta: f64) -> Self {
        Self([theta.cos(), theta.sin()])
    }

    pub fn from_degrees(deg: f64) -> Self {
        Self::from_angle(deg.to_radians())
    }

    #[inline]
    pub fn vec(&self) -> Point {
        self.0
    }

    #[inline]
    pub fn x(&self) -> f64 {
        self.0[0]
    }

    #[inline]
    pub fn y(&self) -> f64 {
        self.0[1]
    }

    pub fn perp(&self) -> Self {
        Self([-self.0[1], self.0[0]])
    }

    pub fn neg(&self) -> Self {
        Self([-self.0[0], -self.0[1]])
    }

    pub fn dot(&self, p: Point) -> f64 {
        self.0[0] * p[0] + self.0[1] * p[1]
    }
}

/// How the distance weight of the first moment is evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum MomentWeight {
    /// Distance from the vertex to the pixel center, constant per pixel.
    #[default]
    PixelCenter,
    /// Exact `∫ t dt` over each segment.
    Exact,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RaySegment {
    pub i: usize,
    pub j: usize,
    pub length: f64,
    /// Distance from the ray origin to the center of pixel `(i, j)`.
    pub t_mid: f64,
    /// Ray parameters where the segment enters and leaves the pixel.
    pub t_enter: f64,
    pub t_exit: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RaySegmentList {
    pub segments: Vec<RaySegment>,
}

impl RaySegmentList {
    pub fn total_length(&self) -> f64 {
        self.segments.iter().map(|s| s.length).sum()
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }
}

/// Parameter interval `[t_lo, t_hi]` of the line `p + t d` inside the grid
/// square, intersected with `[t_min, ∞)`.
pub fn clip(grid: &Grid2D, p: Point, d: Point, t_min: f64) -> Option<(f64, f64)> {
    let a = grid.half_extent();
    let mut lo = t_min;
    let mut hi = f64::INFINITY;
    for k in 0..2 {
        if d[k] == 0.0 {
            if p[k].abs() > a {
                return None;
            }
        } else {
            let t1 = (-a - p[k]) / d[k];
            let t2 = (a - p[k]) / d[k];
            lo = lo.max(t1.min(t2));
            hi = hi.min(t1.max(t2));
        }
    }
    (hi > lo).then_some((lo, hi))
}

struct Axis {
    next_plane: i64,
    step: i64,
    next_t: f64,
}

impl Axis {
    fn new(grid: &Grid2D, p: f64, d: f64, t0: f64) -> Self {
        let h = grid.spacing();
        let a = grid.half_extent();
        if d == 0.0 {
            return Self { next_plane: 0, step: 0, next_t: f64::INFINITY };
        }
        let cell = ((p + t0 * d + a) / h).floor() as i64;
        let (next_plane, step) = if d > 0.0 { (cell + 1, 1) } else { (cell, -1) };
        let mut axis = Self { next_plane, step, next_t: 0.0 };
        axis.next_t = axis.plane_t(grid, p, d);
        axis
    }

    #[inline]
    fn plane_t(&self, grid: &Grid2D, p: f64, d: f64) -> f64 {
        (-grid.half_extent() + self.next_plane as f64 * grid.spacing() - p) / d
    }

    #[inline]
    fn advance(&mut self, grid: &Grid2D, p: f64, d: f64) {
        self.next_plane += self.step;
        self.next_t = self.plane_t(grid, p, d);
    }
}

/// Visits the pixel segments of `{p + t d : t in [t_lo, t_hi]}` in order of
/// increasing `t`, calling `visit(i, j, t_enter, t_exit)`.
fn traverse(grid: &Grid2D, p: Point, d: Point, t_lo: f64, t_hi: f64, mut visit: impl FnMut(usize, usize, f64, f64)) {
    let h = grid.spacing();
    let a = grid.half_extent();
    let n = grid.n();
    let tie = 1e-12 * h;
    let mut ax = Axis::new(grid, p[0], d[0], t_lo);
    let mut ay = Axis::new(grid, p[1], d[1], t_lo);
    let index = |c: f64| (((c + a) / h).floor().max(0.0) as usize).min(n - 1);

    let mut t = t_lo;
    while t < t_hi {
        let t_next = ax.next_t.min(ay.next_t).min(t_hi);
        if ax.next_t <= t_next + tie && ax.next_t < f64::INFINITY {
            ax.advance(grid, p[0], d[0]);
        }
        if ay.next_t <= t_next + tie && ay.next_t < f64::INFINITY {
            ay.advance(grid, p[1], d[1]);
        }
        if t_next - t <= tie {
            if t_next >= t_hi {
                break;
            }
            // corner or edge tie: fold the sliver into the next interval
            continue;
        }
        let tm = 0.5 * (t + t_next);
        visit(index(p[0] + tm * d[0]), index(p[1] + tm * d[1]), t, t_next);
        t = t_next;
    }
}

/// Visits the segments of the ray `{vertex + t d : t >= 0}` inside the grid.
#[inline]
pub fn for_each_ray_segment(grid: &Grid2D, vertex: Point, d: Direction, visit: impl FnMut(usize, usize, f64, f64)) {
    if let Some((lo, hi)) = clip(grid, vertex, d.vec(), 0.0) {
        traverse(grid, vertex, d.vec(), lo, hi, visit);
    }
}

/// Visits the segments of the full line `{p + t d : t in R}` inside the grid.
#[inline]
pub fn for_each_line_segment(grid: &Grid2D, p: Point, d: Direction, visit: impl FnMut(usize, usize, f64, f64)) {
    if let Some((lo, hi)) = clip(grid, p, d.vec(), f64::NEG_INFINITY) {
        traverse(grid, p, d.vec(), lo, hi, visit);
    }
}

pub fn trace_ray(grid: &Grid2D, vertex: Point, direction: Direction) -> RaySegmentList {
    let mut segments = Vec::new();
    for_each_ray_segment(grid, vertex, direction, |i, j, ta, tb| {
        let [cx, cy] = grid.point(i, j);
        segments.push(RaySegment {
            i,
            j,
            length: tb - ta,
            t_mid: (cx - vertex[0]).hypot(cy - vertex[1]),
            t_enter: ta,
            t_exit: tb,
        });
    });
    RaySegmentList { segments }
}

/// `X_u h(x) = ∫₀^∞ h(x + t u) dt` for the pixelized `h`.
pub fn xray(field: &ScalarField, vertex: Point, direction: Direction) -> f64 {
    let n = field.n();
    let values = field.values();
    let mut acc = 0.0;
    for_each_ray_segment(field.grid(), vertex, direction, |i, j, ta, tb| {
        acc += values[i * n + j] * (tb - ta);
    });
    acc
}

/// `X¹_u h(x) = ∫₀^∞ h(x + t u) t dt` with the pixel-center distance weight.
pub fn xray_moment(field: &ScalarField, vertex: Point, direction: Direction) -> f64 {
    xray_moment_with(field, vertex, direction, MomentWeight::PixelCenter)
}

pub fn xray_moment_with(field: &ScalarField, vertex: Point, direction: Direction, weight: MomentWeight) -> f64 {
    let grid = field.grid();
    let n = field.n();
    let values = field.values();
    let mut acc = 0.0;
    for_each_ray_segment(grid, vertex, direction, |i, j, ta, tb| {
        let w = match weight {
            MomentWeight::PixelCenter => {
                let [cx, cy] = grid.point(i, j);
                (cx - vertex[0]).hypot(cy - vertex[1]) * (tb - ta)
            }
            MomentWeight::Exact => 0.5 * (tb * tb - ta * ta),
        };
        acc += values[i * n + j] * w;
    });
    acc
}

fn vertex_map(field: &ScalarField, per_vertex: impl Fn(Point) -> f64 + Sync) -> ScalarField {
    let grid = *field.grid();
    let n = grid.n();
    let mut out = vec![0.0; grid.len()];
    out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, v) in row.iter_mut().enumerate() {
            *v = per_vertex(grid.point(i, j));
        }
    });
    ScalarField::from_values(grid, out).expect("beam sums are finite")
}

/// Beam transform with the vertex at every pixel center.
pub fn xray_map(field: &ScalarField, direction: Direction) -> ScalarField {
    vertex_map(field, |x| xray(field, x, direction))
}

pub fn xray_moment_map(field: &ScalarField, direction: Direction) -> ScalarField {
    xray_moment_map_with(field, direction, MomentWeight::PixelCenter)
}

pub fn xray_moment_map_with(field: &ScalarField, direction: Direction, weight: MomentWeight) -> ScalarField {
    vertex_map(field, |x| xray_moment_with(field, x, direction, weight))
}
