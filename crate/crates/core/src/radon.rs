//! Parallel-beam Radon transform, filtered backprojection, and the 2×2
//! matrices that turn star-transform sinograms into field sinograms.
//!
//! `R h(ψ, s)` integrates `h` along `{x · ψ = s}`, `ψ = (cos θ, sin θ)`.
//! Radial samples are `s_k = (k - m) h_s`, `k = 0..=2m`, with
//! `m = ⌊n/√2⌋ + 2` so that every line meeting the square is sampled.

use std::f64::consts::PI;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::beam::{for_each_line_segment, Direction};
use crate::error::{Error, Result};
use crate::grid::{Grid2D, Point, ScalarField};
use crate::vlt::StarGeometry;

const SINO_MAGIC: &str = "VLS1";

/// `|ψ · γ_i|` below this marks `ψ` as singular for the star.
pub const SINGULAR_EPS: f64 = 1e-6;
pub const MAX_CONDITION: f64 = 1e8;
pub const MIN_ANGLES: usize = 8;

/// `⌊n/√2⌋ + 2`.
pub fn radial_half_count(n: usize) -> usize {
    (n as f64 / std::f64::consts::SQRT_2).floor() as usize + 2
}

/// 0, 1, ..., 179 degrees.
pub fn standard_angles() -> Vec<f64> {
    (0..180).map(f64::from).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    angles: Vec<f64>,
    m: usize,
    h_s: f64,
    values: Vec<f64>,
}

impl Sinogram {
    pub fn zeros(angles: Vec<f64>, m: usize, h_s: f64) -> Self {
        let len = angles.len() * (2 * m + 1);
        Sinogram { angles, m, h_s, values: vec![0.0; len] }
    }

    pub fn from_values(angles: Vec<f64>, m: usize, h_s: f64, values: Vec<f64>) -> Result<Self> {
        let expected = angles.len() * (2 * m + 1);
        if values.len() != expected {
            return Err(Error::GridMismatch(format!("sinogram needs {expected} values, got {}", values.len())));
        }
        if !(h_s.is_finite() && h_s > 0.0) {
            return Err(Error::InvalidGrid(format!("radial spacing {h_s} must be positive")));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            let ns = 2 * m + 1;
            return Err(Error::NonFinite { i: k / ns, j: k % ns, value: values[k] });
        }
        Ok(Sinogram { angles, m, h_s, values })
    }

    /// Angles in degrees.
    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn num_angles(&self) -> usize {
        self.angles.len()
    }

    pub fn num_s(&self) -> usize {
        2 * self.m + 1
    }

    pub fn half_count(&self) -> usize {
        self.m
    }

    pub fn h_s(&self) -> f64 {
        self.h_s
    }

    pub fn s(&self, k: usize) -> f64 {
        (k as f64 - self.m as f64) * self.h_s
    }

    pub fn get(&self, a: usize, k: usize) -> f64 {
        self.values[a * self.num_s() + k]
    }

    pub fn row(&self, a: usize) -> &[f64] {
        let ns = self.num_s();
        &self.values[a * ns..(a + 1) * ns]
    }

    pub fn row_mut(&mut self, a: usize) -> &mut [f64] {
        let ns = self.num_s();
        &mut self.values[a * ns..(a + 1) * ns]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.angles != other.angles || self.m != other.m || self.h_s != other.h_s {
            return Err(Error::GridMismatch("sinograms sampled differently".into()));
        }
        Ok(())
    }

    pub fn scale(&self, c: f64) -> Self {
        Sinogram { values: self.values.iter().map(|v| c * v).collect(), ..self.clone() }
    }

    /// `a·self + b·other`.
    pub fn lincomb(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.check_same(other)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Ok(Sinogram { values, ..self.clone() })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Replaces every masked row by the mean of the nearest unmasked rows
    /// on either side (or the single nearest one at the ends).
    pub fn fill_rows(&mut self, mask: &[bool]) -> Result<()> {
        assert_eq!(mask.len(), self.num_angles());
        if mask.iter().all(|&m| m) {
            return Err(Error::AllAnglesSingular);
        }
        for a in (0..mask.len()).filter(|&a| mask[a]) {
            let before = (0..a).rev().find(|&b| !mask[b]);
            let after = (a + 1..mask.len()).find(|&b| !mask[b]);
            let fill: Vec<f64> = match (before, after) {
                (Some(b), Some(c)) => self.row(b).iter().zip(self.row(c)).map(|(x, y)| 0.5 * (x + y)).collect(),
                (Some(b), None) | (None, Some(b)) => self.row(b).to_vec(),
                (None, None) => unreachable!("some row is unmasked"),
            };
            self.row_mut(a).copy_from_slice(&fill);
        }
        Ok(())
    }

    /// `VLS1 <num_angles> <num_s> <h_s>` header, then little-endian `f64`
    /// values row by row. Angles are implied as `a · 180 / num_angles`.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut buf = format!("{SINO_MAGIC} {} {} {}\n", self.num_angles(), self.num_s(), self.h_s).into_bytes();
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        fs::File::create(path)?.write_all(&buf)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bad = |reason: String| Error::Format { path: path.to_path_buf(), reason };
        let mut reader = BufReader::new(fs::File::open(path)?);
        let mut header = String::new();
        reader.read_line(&mut header)?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != SINO_MAGIC {
            return Err(bad(format!("expected `{SINO_MAGIC} <num_angles> <num_s> <h_s>` header")));
        }
        let na: usize = parts[1].parse().map_err(|_| bad(format!("bad angle count {:?}", parts[1])))?;
        let ns: usize = parts[2].parse().map_err(|_| bad(format!("bad radial count {:?}", parts[2])))?;
        let h_s: f64 = parts[3].parse().map_err(|_| bad(format!("bad radial spacing {:?}", parts[3])))?;
        if ns.is_multiple_of(2) {
            return Err(bad(format!("radial count {ns} must be odd")));
        }
        let mut bytes = Vec::new();
        reader.read_to_end(&mut bytes)?;
        if bytes.len() != 8 * na * ns {
            return Err(bad(format!("expected {} data bytes, found {}", 8 * na * ns, bytes.len())));
        }
        let values = bytes.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk"))).collect();
        let angles = (0..na).map(|a| a as f64 * 180.0 / na as f64).collect();
        Sinogram::from_values(angles, ns / 2, h_s, values)
    }
}

/// Line integrals of `field` at the given angles (degrees), radial spacing
/// one pixel.
pub fn radon(field: &ScalarField, angles: &[f64]) -> Sinogram {
    let grid = field.grid();
    let n = grid.n();
    let h = grid.spacing();
    let m = radial_half_count(n);
    let mut sino = Sinogram::zeros(angles.to_vec(), m, h);
    let ns = sino.num_s();
    let values = field.values();
    sino.values.par_chunks_mut(ns).zip(angles.par_iter()).for_each(|(row, &deg)| {
        let psi = Direction::from_degrees(deg);
        let along = psi.perp();
        for (k, out) in row.iter_mut().enumerate() {
            let s = (k as f64 - m as f64) * h;
            let integrate = |s: f64| {
                let foot: Point = [s * psi.x(), s * psi.y()];
                let mut acc = 0.0;
                for_each_line_segment(grid, foot, along, |i, j, ta, tb| acc += values[i * n + j] * (tb - ta));
                acc
            };
            *out = if on_pixel_edge(grid, psi, s) {
                let d = 1e-6 * h;
                0.5 * (integrate(s - d) + integrate(s + d))
            } else {
                integrate(s)
            };
        }
    });
    sino
}

/// True when `{x · ψ = s}` runs along a pixel edge. Such a line borders two
/// pixel rows equally, so `radon` charges it the mean of both.
fn on_pixel_edge(grid: &Grid2D, psi: Direction, s: f64) -> bool {
    let h = grid.spacing();
    let axis_offset = if psi.y().abs() < 1e-12 {
        s * psi.x().signum()
    } else if psi.x().abs() < 1e-12 {
        s * psi.y().signum()
    } else {
        return false;
    };
    let cells = (axis_offset + grid.half_extent()) / h;
    (cells - cells.round()).abs() < 1e-9
}

/// `∂/∂s` by central differences, one-sided at both radial ends.
pub fn d_ds(sino: &Sinogram) -> Sinogram {
    let ns = sino.num_s();
    let h = sino.h_s;
    let mut out = sino.clone();
    out.values.par_chunks_mut(ns).zip(sino.values.par_chunks(ns)).for_each(|(o, r)| {
        o[0] = (r[1] - r[0]) / h;
        o[ns - 1] = (r[ns - 1] - r[ns - 2]) / h;
        for k in 1..ns - 1 {
            o[k] = (r[k + 1] - r[k - 1]) / (2.0 * h);
        }
    });
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Filter {
    #[default]
    RamLak,
    /// Ramp times a Hann window, for noisy data.
    Hann,
}

/// Filtered backprojection onto `grid`. Assumes the angles sample `[0°, 180°)`
/// uniformly.
pub fn iradon(sino: &Sinogram, grid: &Grid2D, filter: Filter) -> Result<ScalarField> {
    let na = sino.num_angles();
    if na < MIN_ANGLES {
        return Err(Error::TooFewAngles(na));
    }
    let filtered = filter_rows(sino, filter);
    let trig: Vec<(f64, f64)> = sino.angles.iter().map(|d| (d.to_radians().cos(), d.to_radians().sin())).collect();
    let ns = sino.num_s();
    let m = sino.m as f64;
    let scale = PI / na as f64;
    let n = grid.n();
    let mut out = vec![0.0; grid.len()];
    out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let x = grid.center(i);
        for (j, v) in row.iter_mut().enumerate() {
            let y = grid.center(j);
            let mut acc = 0.0;
            for (a, &(c, s)) in trig.iter().enumerate() {
                let pos = (x * c + y * s) / sino.h_s + m;
                let k = pos.floor();
                if k < 0.0 || k + 1.0 > (ns - 1) as f64 {
                    continue;
                }
                let (k, w) = (k as usize, pos - k);
                let q = &filtered[a * ns..(a + 1) * ns];
                acc += (1.0 - w) * q[k] + w * q[k + 1];
            }
            *v = acc * scale;
        }
    });
    ScalarField::from_values(*grid, out)
}

/// Convolves every row with the band-limited ramp kernel
/// (`1/(4τ²)` at 0, `-1/(k²π²τ²)` at odd `k`, 0 at even `k`) via FFT.
fn filter_rows(sino: &Sinogram, filter: Filter) -> Vec<f64> {
    let ns = sino.num_s();
    let len = (2 * ns).next_power_of_two().max(64);
    let tau = sino.h_s;
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);

    let mut kernel = vec![Complex::new(0.0, 0.0); len];
    for (idx, slot) in kernel.iter_mut().enumerate() {
        let k = if idx <= len / 2 { idx as i64 } else { idx as i64 - len as i64 };
        let v = if k == 0 {
            1.0 / (4.0 * tau * tau)
        } else if k % 2 != 0 {
            -1.0 / ((k * k) as f64 * PI * PI * tau * tau)
        } else {
            0.0
        };
        slot.re = v;
    }
    fwd.process(&mut kernel);
    if filter == Filter::Hann {
        for (q, slot) in kernel.iter_mut().enumerate() {
            let q = q.min(len - q);
            let w = 2.0 * PI * q as f64 / len as f64;
            *slot *= 0.5 * (1.0 + w.cos());
        }
    }
    // fold τ (quadrature weight) and 1/len (unnormalized inverse) into the kernel
    let norm = tau / len as f64;
    for slot in kernel.iter_mut() {
        *slot *= norm;
    }

    let mut out = vec![0.0; sino.values.len()];
    out.par_chunks_mut(ns).zip(sino.values.par_chunks(ns)).for_each(|(o, r)| {
        let mut buf = vec![Complex::new(0.0, 0.0); len];
        for (b, v) in buf.iter_mut().zip(r) {
            b.re = *v;
        }
        fwd.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&kernel) {
            *b *= k;
        }
        inv.process(&mut buf);
        for (o, b) in o.iter_mut().zip(&buf) {
            *o = b.re;
        }
    });
    out
}

/// `γ(ψ) = -Σ c_i γ_i / (ψ · γ_i)` and the inverse of `[γ(ψ); γ(ψ)⊥]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QMatrix {
    pub psi: Point,
    /// `None` when some `ψ · γ_i` vanishes.
    pub gamma: Option<Point>,
    /// `None` when singular.
    pub q: Option<[[f64; 2]; 2]>,
}

impl QMatrix {
    pub fn is_singular(&self) -> bool {
        self.q.is_none()
    }

    pub fn apply(&self, v: Point) -> Option<Point> {
        self.q.map(|q| [q[0][0] * v[0] + q[0][1] * v[1], q[1][0] * v[0] + q[1][1] * v[1]])
    }
}

/// Builds `Q(ψ)` for `ψ` at `psi_degrees`. Singular when any `|ψ · γ_i|`
/// is below `SINGULAR_EPS`, when `γ(ψ)` cancels to rounding level, or when
/// the 2×2 matrix has condition number above `MAX_CONDITION`.
pub fn q_matrix(psi_degrees: f64, star: &StarGeometry) -> Result<QMatrix> {
    if star.is_symmetric() {
        return Err(Error::SymmetricStar);
    }
    let psi = Direction::from_degrees(psi_degrees);
    let mut gamma = [0.0; 2];
    let mut magnitude = 0.0;
    for (g, c) in star.branches() {
        let d = psi.dot(g.vec());
        if d.abs() < SINGULAR_EPS {
            return Ok(QMatrix { psi: psi.vec(), gamma: None, q: None });
        }
        gamma[0] -= c * g.x() / d;
        gamma[1] -= c * g.y() / d;
        magnitude += (c / d).abs();
    }
    let (g1, g2) = (gamma[0], gamma[1]);
    // [γ; γ⊥] = [[g1, g2], [-g2, g1]] is |γ| times a rotation
    let det = g1 * g1 + g2 * g2;
    let cancelled = det.sqrt() <= 1e-12 * magnitude;
    let cond = condition_number([[g1, g2], [-g2, g1]]);
    if cancelled || cond.is_nan() || cond > MAX_CONDITION {
        return Ok(QMatrix { psi: psi.vec(), gamma: Some(gamma), q: None });
    }
    let q = [[g1 / det, -g2 / det], [g2 / det, g1 / det]];
    Ok(QMatrix { psi: psi.vec(), gamma: Some(gamma), q: Some(q) })
}

/// 2-norm condition number of a 2×2 matrix.
fn condition_number(a: [[f64; 2]; 2]) -> f64 {
    let fro2 = a[0][0].powi(2) + a[0][1].powi(2) + a[1][0].powi(2) + a[1][1].powi(2);
    let det = (a[0][0] * a[1][1] - a[0][1] * a[1][0]).abs();
    if det == 0.0 {
        return f64::INFINITY;
    }
    // σ₁² + σ₂² = fro², σ₁σ₂ = det
    let disc = (fro2 * fro2 - 4.0 * det * det).max(0.0).sqrt();
    let s1 = ((fro2 + disc) / 2.0).sqrt();
    let s2 = det / s1;
    s1 / s2
}

/// Angles on which `q_matrix` is singular.
pub fn singular_mask(angles: &[f64], star: &StarGeometry) -> Result<Vec<bool>> {
    angles.iter().map(|&a| q_matrix(a, star).map(|q| q.is_singular())).collect()
}
