//! Forward V-line and star transforms of vector fields.
//!
//! All operators are built from beam maps of scalar projections of the field:
//!
//! | transform | definition |
//! |-----------|------------|
//! | `lvt`  | `-X_u(f·u)  + X_v(f·v)`   |
//! | `tvt`  | `-X_u(f·u⊥) + X_v(f·v⊥)`  |
//! | `lvt1` | `-X¹_u(f·u) + X¹_v(f·v)`  |
//! | `tvt1` | `-X¹_u(f·u⊥) + X¹_v(f·v⊥)`|
//! | `star` | `Σ c_i X_{γ_i}(f·γ_i, f·γ_i⊥)` |

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::beam::{xray_map, xray_moment_map_with, Direction, MomentWeight};
use crate::error::{Error, Result};
use crate::grid::{ScalarField, VectorField};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VLineGeometry {
    u: Direction,
    v: Direction,
}

impl Default for VLineGeometry {
    /// `u` at 45°, `v` at 135°.
    fn default() -> Self {
        Self::from_angles(PI / 4.0, 3.0 * PI / 4.0).expect("default directions are independent")
    }
}

impl VLineGeometry {
    pub fn new(u: Direction, v: Direction) -> Result<Self> {
        let det = v.x() * u.y() - v.y() * u.x();
        if det.abs() <= 1e-12 {
            return Err(Error::InvalidGeometry(format!(
                "V-line directions ({}, {}) and ({}, {}) are linearly dependent",
                u.x(),
                u.y(),
                v.x(),
                v.y()
            )));
        }
        Ok(Self { u, v })
    }

    /// Directions given by polar angles in radians.
    pub fn from_angles(u: f64, v: f64) -> Result<Self> {
        Self::new(Direction::from_angle(u), Direction::from_angle(v))
    }

    pub fn u(&self) -> Direction {
        self.u
    }

    pub fn v(&self) -> Direction {
        self.v
    }

    /// `det(v, u) = v₁u₂ - v₂u₁`.
    pub fn det_vu(&self) -> f64 {
        self.v.x() * self.u.y() - self.v.y() * self.u.x()
    }

    /// `‖v - u‖`.
    pub fn norm_v_minus_u(&self) -> f64 {
        (self.v.x() - self.u.x()).hypot(self.v.y() - self.u.y())
    }

    /// `w = (v - u) / ‖v - u‖`.
    pub fn w(&self) -> Direction {
        Direction::new(self.v.x() - self.u.x(), self.v.y() - self.u.y()).expect("u and v are independent")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StarGeometry {
    directions: Vec<Direction>,
    weights: Vec<f64>,
}

impl Default for StarGeometry {
    /// Three branches at 0, 2π/3 and 4π/3 with unit weights.
    fn default() -> Self {
        Self::from_angles(&[0.0, 2.0 * PI / 3.0, 4.0 * PI / 3.0], &[1.0, 1.0, 1.0]).expect("valid default star")
    }
}

impl StarGeometry {
    pub fn new(directions: Vec<Direction>, weights: Vec<f64>) -> Result<Self> {
        if directions.is_empty() {
            return Err(Error::InvalidGeometry("a star needs at least one branch".into()));
        }
        if directions.len() != weights.len() {
            return Err(Error::InvalidGeometry(format!(
                "{} branch directions but {} weights",
                directions.len(),
                weights.len()
            )));
        }
        if let Some(c) = weights.iter().find(|c| !(c.is_finite() && **c != 0.0)) {
            return Err(Error::InvalidGeometry(format!("branch weight {c} must be finite and non-zero")));
        }
        Ok(Self { directions, weights })
    }

    /// Branches given by polar angles in radians.
    pub fn from_angles(angles: &[f64], weights: &[f64]) -> Result<Self> {
        Self::new(angles.iter().map(|&a| Direction::from_angle(a)).collect(), weights.to_vec())
    }

    pub fn branches(&self) -> impl Iterator<Item = (Direction, f64)> + '_ {
        self.directions.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// True when the branches pair up as `γ_i = -γ_k` with `c_i = -c_k`.
    pub fn is_symmetric(&self) -> bool {
        const TOL: f64 = 1e-9;
        let m = self.len();
        if !m.is_multiple_of(2) {
            return false;
        }
        let pairs = |a: usize, b: usize| {
            let (ga, gb) = (self.directions[a], self.directions[b]);
            (ga.x() + gb.x()).abs() <= TOL
                && (ga.y() + gb.y()).abs() <= TOL
                && (self.weights[a] + self.weights[b]).abs() <= TOL * self.weights[a].abs().max(1.0)
        };
        fn matching(used: &mut [bool], pairs: &dyn Fn(usize, usize) -> bool) -> bool {
            let Some(a) = used.iter().position(|u| !u) else {
                return true;
            };
            used[a] = true;
            for b in a + 1..used.len() {
                if !used[b] && pairs(a, b) {
                    used[b] = true;
                    if matching(used, pairs) {
                        return true;
                    }
                    used[b] = false;
                }
            }
            used[a] = false;
            false
        }
        matching(&mut vec![false; m], &pairs)
    }
}

fn combine(minus: ScalarField, plus: ScalarField) -> ScalarField {
    plus.zip_with(&minus, |p, m| p - m).expect("same grid")
}

fn beam_pair(
    f: &VectorField,
    g: &VLineGeometry,
    du: Direction,
    dv: Direction,
    moment: Option<MomentWeight>,
) -> ScalarField {
    let map = |h: ScalarField, dir: Direction| match moment {
        None => xray_map(&h, dir),
        Some(w) => xray_moment_map_with(&h, dir, w),
    };
    let (a, b) = rayon::join(|| map(f.dot(du.vec()), g.u()), || map(f.dot(dv.vec()), g.v()));
    combine(a, b)
}

/// Longitudinal V-line transform.
pub fn lvt(f: &VectorField, g: &VLineGeometry) -> ScalarField {
    beam_pair(f, g, g.u(), g.v(), None)
}

/// Transverse V-line transform.
pub fn tvt(f: &VectorField, g: &VLineGeometry) -> ScalarField {
    beam_pair(f, g, g.u().perp(), g.v().perp(), None)
}

/// First-moment longitudinal V-line transform.
pub fn lvt1(f: &VectorField, g: &VLineGeometry) -> ScalarField {
    lvt1_with(f, g, MomentWeight::PixelCenter)
}

pub fn lvt1_with(f: &VectorField, g: &VLineGeometry, weight: MomentWeight) -> ScalarField {
    beam_pair(f, g, g.u(), g.v(), Some(weight))
}

/// First-moment transverse V-line transform.
pub fn tvt1(f: &VectorField, g: &VLineGeometry) -> ScalarField {
    tvt1_with(f, g, MomentWeight::PixelCenter)
}

pub fn tvt1_with(f: &VectorField, g: &VLineGeometry, weight: MomentWeight) -> ScalarField {
    beam_pair(f, g, g.u().perp(), g.v().perp(), Some(weight))
}

/// Vector star transform: (longitudinal, transversal) data.
pub fn star(f: &VectorField, s: &StarGeometry) -> (ScalarField, ScalarField) {
    let grid = *f.grid();
    let mut long = ScalarField::zeros(grid);
    let mut trans = ScalarField::zeros(grid);
    for (gamma, c) in s.branches() {
        let (a, b) =
            rayon::join(|| xray_map(&f.dot(gamma.vec()), gamma), || xray_map(&f.dot(gamma.perp().vec()), gamma));
        long = long.lincomb(1.0, &a, c).expect("same grid");
        trans = trans.lincomb(1.0, &b, c).expect("same grid");
    }
    (long, trans)
}
