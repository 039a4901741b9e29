//! Inversion pipelines: potential/solenoidal parts from one transform, the
//! full field from LVT + TVT, from a transform plus its first moment, and
//! from star-transform data via the Radon transform.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beam::{xray_map, xray_moment_map, Direction};
use crate::diffops::{
    curl, curl_from_lvt, curl_from_lvt_with, div, div_from_tvt, div_from_tvt_with, grad, mixed_derivative,
    mixed_derivative_with, partial_x, partial_y, MixedStencil,
};
use crate::error::{Error, Result};
use crate::eval::{add_noise_stream, NoiseSpec};
use crate::grid::{perp, Grid2D, ScalarField, VectorField};
use crate::phantom::truncate_to_disc;
use crate::poisson::solve_dirichlet_zero;
use crate::radon::{
    d_ds, iradon, q_matrix, radial_half_count, radon, singular_mask, standard_angles, Filter, Sinogram,
};
use crate::vlt::{lvt, lvt1, star, tvt, tvt1, StarGeometry, VLineGeometry};

/// Computational-domain padding for the forward data and the support
/// truncation applied to inputs of the moment pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PadSpec {
    /// Padded half-extent over the original one; pixel size is kept.
    pub pad_factor: f64,
    /// Radius (in units of the half-extent) of the disc the input field is
    /// cut to before the moment pipelines run.
    pub support_radius: f64,
}

impl PadSpec {
    pub const NONE: PadSpec = PadSpec { pad_factor: 1.0, support_radius: 0.9 };

    pub fn default_for(pipeline: Pipeline) -> Self {
        match pipeline {
            Pipeline::LvtMoment | Pipeline::TvtMoment => PadSpec { pad_factor: 2.0, support_radius: 0.9 },
            // the star data's line integrals are continued past the padded
            // edge, which needs the branch footprints there to stay apart
            Pipeline::Star => PadSpec { pad_factor: 2.0, support_radius: 1.0 },
            _ => Self::NONE,
        }
    }
}

/// `V` with `f = ∇V` from `T f`: solves `-ΔV = -div f`, `V = 0` on the edge.
pub fn recover_potential(tf: &ScalarField, g: &VLineGeometry) -> Result<ScalarField> {
    solve_dirichlet_zero(&div_from_tvt(tf, g).scale(-1.0))
}

/// `W` with `f = ∇⊥W` from `L f`: solves `-ΔW = -curl f`.
pub fn recover_solenoidal(lf: &ScalarField, g: &VLineGeometry) -> Result<ScalarField> {
    solve_dirichlet_zero(&curl_from_lvt(lf, g).scale(-1.0))
}

/// Both components from `L f` and `T f`, using
/// `Δf₁ = -(1/det) D_u D_v (∂ₓTf + ∂ᵧLf)` and
/// `Δf₂ = (1/det) D_u D_v (∂ₓLf - ∂ᵧTf)`.
pub fn recover_from_lvt_tvt(lf: &ScalarField, tf: &ScalarField, g: &VLineGeometry) -> Result<VectorField> {
    same_grid(lf, tf)?;
    let det = g.det_vu();
    let s1 = &partial_x(tf) + &partial_y(lf);
    let s2 = &partial_x(lf) - &partial_y(tf);
    let lap1 = mixed_derivative(&s1, g).scale(-1.0 / det);
    let lap2 = mixed_derivative(&s2, g).scale(1.0 / det);
    let (f1, f2) = rayon::join(|| solve_dirichlet_zero(&lap1.scale(-1.0)), || solve_dirichlet_zero(&lap2.scale(-1.0)));
    VectorField::new(f1?, f2?)
}

/// Output of the moment pipelines: the field and the intermediate signed
/// V-line data `X_u f_i - X_v f_i` it was integrated from.
#[derive(Debug, Clone)]
pub struct MomentRecon {
    pub field: VectorField,
    pub svl: VectorField,
}

/// Components from `L f` and its first moment `I f = L¹ f`. Data must cover
/// enough room around the support for the back-rays along `w`.
pub fn recover_from_lvt_moment(lf: &ScalarField, if_: &ScalarField, g: &VLineGeometry) -> Result<MomentRecon> {
    same_grid(lf, if_)?;
    let (u, v) = (g.u(), g.v());
    let c = clear_ring(curl_from_lvt_with(lf, g, MixedStencil::Compact));
    let (cu, cv) = rayon::join(|| xray_moment_map(&c, u), || xray_moment_map(&c, v));
    // I₁ = ∂ₓIf + u₂ X¹_u curl - v₂ X¹_v curl
    let i1 = combine(&partial_x(if_), &cu, u.y(), &cv, -v.y());
    // I₂ = ∂ᵧIf - u₁ X¹_u curl + v₁ X¹_v curl
    let i2 = combine(&partial_y(if_), &cu, -u.x(), &cv, v.x());
    finish_moment(i1, i2, g)
}

/// Components from `T f` and `J f = T¹ f`.
pub fn recover_from_tvt_moment(tf: &ScalarField, jf: &ScalarField, g: &VLineGeometry) -> Result<MomentRecon> {
    same_grid(tf, jf)?;
    let (u, v) = (g.u(), g.v());
    let d = clear_ring(div_from_tvt_with(tf, g, MixedStencil::Compact));
    let (du, dv) = rayon::join(|| xray_moment_map(&d, u), || xray_moment_map(&d, v));
    // I₁ = -∂ᵧJf - u₁ X¹_u div + v₁ X¹_v div
    let i1 = combine(&partial_y(jf).scale(-1.0), &du, -u.x(), &dv, v.x());
    // I₂ = ∂ₓJf - u₂ X¹_u div + v₂ X¹_v div
    let i2 = combine(&partial_x(jf), &du, -u.y(), &dv, v.y());
    finish_moment(i1, i2, g)
}

/// The field vanishes near the edge of the data grid, so its curl and
/// divergence do too; the outermost ring only holds one-sided stencil noise,
/// which the moment integrals would pick up with large weights.
fn clear_ring(mut f: ScalarField) -> ScalarField {
    let n = f.n();
    for k in 0..n {
        for idx in [k, (n - 1) * n + k, k * n, k * n + n - 1] {
            f.values_mut()[idx] = 0.0;
        }
    }
    f
}

fn combine(base: &ScalarField, a: &ScalarField, ca: f64, b: &ScalarField, cb: f64) -> ScalarField {
    let mut out = base.clone();
    for ((o, x), y) in out.values_mut().iter_mut().zip(a.values()).zip(b.values()) {
        *o += ca * x + cb * y;
    }
    out
}

fn finish_moment(i1: ScalarField, i2: ScalarField, g: &VLineGeometry) -> Result<MomentRecon> {
    let (f1, f2) = rayon::join(|| invert_svl(&i1, g), || invert_svl(&i2, g));
    Ok(MomentRecon { field: VectorField::new(f1, f2)?, svl: VectorField::new(i1, i2)? })
}

/// `h = D_u D_v X_w (X_u h - X_v h) / ‖v - u‖`, `w = (v - u)/‖v - u‖`.
pub fn invert_svl(svl: &ScalarField, g: &VLineGeometry) -> ScalarField {
    invert_svl_with(svl, g, MixedStencil::Gradient)
}

pub fn invert_svl_with(svl: &ScalarField, g: &VLineGeometry, stencil: MixedStencil) -> ScalarField {
    let edges = OpenEdges::new(svl, g);
    let svl = edges.repaired(svl);
    let mut back = xray_map(&svl, g.w());
    for (b, t) in back.values_mut().iter_mut().zip(edges.tail(&svl, g)) {
        *b += t;
    }
    mixed_derivative_with(&back, g, stencil).scale(1.0 / g.norm_v_minus_u())
}

/// Grid edges through which `u` enters and `v` does not.
///
/// With `h` vanishing off the grid, signed data at a point `q` beyond such
/// an edge reduce to `X_u h(q)`: the `u`-ray from `q` re-enters through the
/// edge and the `v`-ray never does. So values past the edge, and on its
/// outermost ring (which carries one-sided differences), are copies of the
/// second ring carried along `u`. The `w` back-ray integral beyond the grid
/// becomes an integral along that strip.
struct OpenEdges {
    /// Per edge (left, right, bottom, top): the second-ring strip, the
    /// along-edge speed of the re-entry point, and the along-edge offset of
    /// a point's `u`-ray at the second ring.
    edges: [Option<(EdgeStrip, f64, f64)>; 4],
}

const NORMALS: [[f64; 2]; 4] = [[-1.0, 0.0], [1.0, 0.0], [0.0, -1.0], [0.0, 1.0]];
const TANGENTS: [[f64; 2]; 4] = [[0.0, 1.0], [0.0, 1.0], [1.0, 0.0], [1.0, 0.0]];

fn dot(p: [f64; 2], q: [f64; 2]) -> f64 {
    p[0] * q[0] + p[1] * q[1]
}

fn ring(n: usize, edge: usize, depth: usize, k: usize) -> usize {
    match edge {
        0 => depth * n + k,
        1 => (n - 1 - depth) * n + k,
        2 => k * n + depth,
        _ => k * n + n - 1 - depth,
    }
}

impl OpenEdges {
    fn new(svl: &ScalarField, g: &VLineGeometry) -> Self {
        let grid = svl.grid();
        let (n, a, h) = (grid.n(), grid.half_extent(), grid.spacing());
        let (u, v, w) = (g.u(), g.v(), g.w());
        let (u, v, w) = ([u.x(), u.y()], [v.x(), v.y()], [w.x(), w.y()]);
        let edges = std::array::from_fn(|e| {
            let normal = NORMALS[e];
            let tangent = TANGENTS[e];
            let (un, vn) = (dot(u, normal), dot(v, normal));
            if n < 4 || un >= 0.0 || vn < 0.0 {
                return None;
            }
            let r = dot(w, normal) / un;
            let speed = dot([w[0] - r * u[0], w[1] - r * u[1]], tangent);
            let per_depth = h * dot(u, tangent) / -un;
            let strip = (0..n).map(|k| svl.values()[ring(n, e, 1, k)]).collect();
            Some((EdgeStrip::new(strip, a, h), speed, per_depth))
        });
        OpenEdges { edges }
    }

    fn repaired(&self, svl: &ScalarField) -> ScalarField {
        let grid = svl.grid();
        let (n, a, h) = (grid.n(), grid.half_extent(), grid.spacing());
        let mut out = svl.clone();
        for (e, edge) in self.edges.iter().enumerate() {
            let Some((strip, _, per_depth)) = edge else { continue };
            for k in 0..n {
                let c = -a + (k as f64 + 0.5) * h;
                out.values_mut()[ring(n, e, 0, k)] = strip.value(c + per_depth);
            }
        }
        out
    }

    /// Part of the `w` back-ray integral from each pixel lying off the grid.
    fn tail(&self, svl: &ScalarField, g: &VLineGeometry) -> Vec<f64> {
        let grid = svl.grid();
        let (n, a) = (grid.n(), grid.half_extent());
        let w = [g.w().x(), g.w().y()];
        (0..n * n)
            .map(|k| {
                let x = grid.point(k / n, k % n);
                let tx = exit_time(x[0], w[0], a);
                let ty = exit_time(x[1], w[1], a);
                let (e, t) = match (tx < ty, w[0] < 0.0, w[1] < 0.0) {
                    (true, true, _) => (0, tx),
                    (true, false, _) => (1, tx),
                    (false, _, true) => (2, ty),
                    (false, _, false) => (3, ty),
                };
                let Some((strip, speed, per_depth)) = &self.edges[e] else { return 0.0 };
                let c = if e < 2 { x[1] + t * w[1] } else { x[0] + t * w[0] };
                // the edge itself is half a ring outside the outer centers
                let c = (c + 1.5 * per_depth).clamp(-a, a);
                let part = if *speed > 0.0 { strip.total() - strip.prefix(c) } else { strip.prefix(c) };
                part / speed.abs()
            })
            .collect()
    }
}

fn exit_time(x: f64, d: f64, a: f64) -> f64 {
    if d > 0.0 {
        (a - x) / d
    } else if d < 0.0 {
        (x + a) / -d
    } else {
        f64::INFINITY
    }
}

/// Piecewise-linear interpolant of pixel-center samples on `[-a, a]`,
/// constant past the outer centers, with its running integral.
struct EdgeStrip {
    vals: Vec<f64>,
    cum: Vec<f64>,
    a: f64,
    h: f64,
    /// Sample `k` sits at `-a + (k + ½) h - offset`.
    offset: f64,
}

impl EdgeStrip {
    fn new(vals: Vec<f64>, a: f64, h: f64) -> Self {
        let mut cum = Vec::with_capacity(vals.len());
        let mut acc = 0.5 * h * vals[0];
        cum.push(acc);
        for p in vals.windows(2) {
            acc += 0.5 * h * (p[0] + p[1]);
            cum.push(acc);
        }
        EdgeStrip { vals, cum, a, h, offset: 0.0 }
    }

    fn shifted(self, offset: f64) -> Self {
        EdgeStrip { offset, ..self }
    }

    /// `∫_{-a}^{c}` (from the first sample's cell edge when shifted).
    fn prefix(&self, c: f64) -> f64 {
        let c = c + self.offset;
        let n = self.vals.len();
        let pos = (c + self.a) / self.h - 0.5;
        if pos <= 0.0 {
            return (c + self.a) * self.vals[0];
        }
        let j = pos.floor() as usize;
        if j >= n - 1 {
            return self.cum[n - 1] + (pos - (n - 1) as f64) * self.h * self.vals[n - 1];
        }
        let t = pos - j as f64;
        self.cum[j] + self.h * t * (self.vals[j] + 0.5 * t * (self.vals[j + 1] - self.vals[j]))
    }

    fn value(&self, c: f64) -> f64 {
        let c = c + self.offset;
        let n = self.vals.len();
        let pos = ((c + self.a) / self.h - 0.5).clamp(0.0, (n - 1) as f64);
        let j = (pos.floor() as usize).min(n - 2);
        let t = pos - j as f64;
        self.vals[j] + t * (self.vals[j + 1] - self.vals[j])
    }

    fn total(&self) -> f64 {
        self.prefix(self.a)
    }
}

/// Both components from star data: `Rf = Q(ψ) ∂ₛR(Sf)` on every regular
/// angle, singular angles filled from their neighbours, then FBP.
///
/// The field must vanish outside the centered square of half-extent
/// `support`; the line integrals of the data are continued past the grid
/// edge on that assumption (see [`star_tail`]).
pub fn recover_from_star(
    long: &ScalarField,
    trans: &ScalarField,
    s: &StarGeometry,
    filter: Filter,
    support: f64,
) -> Result<VectorField> {
    same_grid(long, trans)?;
    let angles = standard_angles();
    let mask = singular_mask(&angles, s)?;
    let full = |data: &ScalarField| {
        let r = radon(data, &angles);
        let tail = star_tail(data, &angles, s, support);
        d_ds(&r.lincomb(1.0, &tail, 1.0).expect("same sampling"))
    };
    let (rl, rt) = rayon::join(|| full(long), || full(trans));
    let mut r1 = Sinogram::zeros(angles.clone(), rl.half_count(), rl.h_s());
    let mut r2 = r1.clone();
    for (a, &deg) in angles.iter().enumerate() {
        if mask[a] {
            continue;
        }
        let q = q_matrix(deg, s)?.q.expect("regular angle");
        let (sl, st) = (rl.row(a), rt.row(a));
        for (k, out) in r1.row_mut(a).iter_mut().enumerate() {
            *out = q[0][0] * sl[k] + q[0][1] * st[k];
        }
        for (k, out) in r2.row_mut(a).iter_mut().enumerate() {
            *out = q[1][0] * sl[k] + q[1][1] * st[k];
        }
    }
    r1.fill_rows(&mask)?;
    r2.fill_rows(&mask)?;
    let grid = *long.grid();
    let (f1, f2) = rayon::join(|| iradon(&r1, &grid, filter), || iradon(&r2, &grid, filter));
    VectorField::new(f1?, f2?)
}

/// Line integrals of star data over the parts of each line outside the grid.
///
/// Off the grid every branch term is constant along its own direction, so at
/// a point `q` outside it equals the term's value where the branch ray from
/// `q` re-enters. On the edge pixels each branch is told apart by which
/// branch rays from there can reach the support square: where exactly one
/// can, the data are that branch's term alone. Edge points reached by
/// several branches are ambiguous and contribute nothing.
pub fn star_tail(data: &ScalarField, angles: &[f64], s: &StarGeometry, support: f64) -> Sinogram {
    let grid = data.grid();
    let (n, a, h) = (grid.n(), grid.half_extent(), grid.spacing());
    let branches: Vec<[f64; 2]> = s.branches().map(|(g, _)| [g.x(), g.y()]).collect();
    let reaches = |p: [f64; 2], g: [f64; 2]| ray_hits_square(p, g, support);

    // (branch, edge) -> strip of that branch's term along the edge
    let mut strips: Vec<Vec<Option<EdgeStrip>>> = Vec::new();
    for (bi, &g) in branches.iter().enumerate() {
        let per_edge = (0..4)
            .map(|e| {
                let (normal, tangent) = (NORMALS[e], TANGENTS[e]);
                let gn = dot(g, normal);
                if gn >= 0.0 {
                    return None;
                }
                // ring centers sit half a pixel in along the branch ray
                let shift = 0.5 * h * dot(g, tangent) / -gn;
                let vals = (0..n)
                    .map(|k| {
                        let c = -a + (k as f64 + 0.5) * h - shift;
                        let p = [a * normal[0] + c * tangent[0], a * normal[1] + c * tangent[1]];
                        let own = reaches(p, g);
                        let other = branches.iter().enumerate().any(|(bj, &gj)| bj != bi && reaches(p, gj));
                        if own && !other {
                            data.values()[ring(n, e, 0, k)]
                        } else {
                            0.0
                        }
                    })
                    .collect();
                Some(EdgeStrip::new(vals, a, h).shifted(shift))
            })
            .collect();
        strips.push(per_edge);
    }

    let m = radial_half_count(n);
    let mut out = Sinogram::zeros(angles.to_vec(), m, h);
    let ns = out.num_s();
    let rows: Vec<Vec<f64>> = angles
        .par_iter()
        .map(|&deg| {
            let psi = Direction::from_degrees(deg);
            let (psi, along) = ([psi.x(), psi.y()], [psi.perp().x(), psi.perp().y()]);
            (0..ns)
                .map(|k| {
                    let sk = (k as f64 - m as f64) * h;
                    let foot = [sk * psi[0], sk * psi[1]];
                    // lines missing the grid still cross the branch shadows
                    let (t0, t1) = slab(foot, along, a).unwrap_or((0.0, 0.0));
                    let mut acc = 0.0;
                    for (t, sign) in [(t1, 1.0), (t0, -1.0)] {
                        let end = [foot[0] + t * along[0], foot[1] + t * along[1]];
                        let dir = [sign * along[0], sign * along[1]];
                        for (bi, &g) in branches.iter().enumerate() {
                            for (e, strip) in strips[bi].iter().enumerate() {
                                if let Some(strip) = strip {
                                    acc += beyond_edge(end, dir, g, e, a, strip);
                                }
                            }
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect();
    for (idx, row) in rows.into_iter().enumerate() {
        out.row_mut(idx).copy_from_slice(&row);
    }
    out
}

/// `∫₀^∞ F(e(τ)) dτ` over the half-line `end + τ dir`, where `e(τ)` is the
/// point at which the `g`-ray from there enters through edge `e`, counting
/// only the part of the half-line whose rays do enter there.
fn beyond_edge(end: [f64; 2], dir: [f64; 2], g: [f64; 2], e: usize, a: f64, strip: &EdgeStrip) -> f64 {
    let (normal, tangent) = (NORMALS[e], TANGENTS[e]);
    let gn = dot(g, normal);
    let ratio = dot(g, tangent) / gn;
    // edge coordinate of the entry point: c0 + rate τ
    let c0 = dot(end, tangent) + (a - dot(end, normal)) * ratio;
    let rate = dot(dir, tangent) - dot(dir, normal) * ratio;
    if rate.abs() < 1e-12 {
        return 0.0;
    }
    // τ range: τ ≥ 0, on the outer side of the edge line, entry on the edge
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    let (en, dn) = (dot(end, normal) - a, dot(dir, normal));
    if dn > 0.0 {
        lo = lo.max(-en / dn);
    } else if dn < 0.0 {
        hi = hi.min(-en / dn);
    } else if en < 0.0 {
        return 0.0;
    }
    let (ta, tb) = ((-a - c0) / rate, (a - c0) / rate);
    lo = lo.max(ta.min(tb));
    hi = hi.min(ta.max(tb));
    if hi <= lo {
        return 0.0;
    }
    let (ca, cb) = (c0 + rate * lo, c0 + rate * hi);
    (strip.prefix(ca.max(cb)) - strip.prefix(ca.min(cb))) / rate.abs()
}

/// Parameter range of the line `p + t d` inside `[-a, a]²`.
fn slab(p: [f64; 2], d: [f64; 2], a: f64) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for k in 0..2 {
        if d[k].abs() < 1e-15 {
            if p[k].abs() > a {
                return None;
            }
        } else {
            let (t0, t1) = ((-a - p[k]) / d[k], (a - p[k]) / d[k]);
            lo = lo.max(t0.min(t1));
            hi = hi.min(t0.max(t1));
        }
    }
    (hi > lo).then_some((lo, hi))
}

fn ray_hits_square(p: [f64; 2], d: [f64; 2], a: f64) -> bool {
    slab(p, d, a).is_some_and(|(_, hi)| hi > 0.0)
}

fn same_grid(a: &ScalarField, b: &ScalarField) -> Result<()> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch("pipeline data on different grids".into()));
    }
    Ok(())
}

/// `‖curl f‖₂` and `‖div f‖₂` over the inset disc. A field recovered as a
/// pure potential should show a small curl, and vice versa.
pub fn field_diagnostics(f: &VectorField, inset_radius: f64) -> (f64, f64) {
    let norm = |s: ScalarField| {
        let g = *s.grid();
        let n = g.n();
        s.values()
            .iter()
            .enumerate()
            .filter(|(k, _)| {
                let [x, y] = g.point(k / n, k % n);
                x.hypot(y) <= inset_radius
            })
            .map(|(_, v)| v * v)
            .sum::<f64>()
            .sqrt()
    };
    (norm(curl(f)), norm(div(f)))
}

/// The five data sets and their inversions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Pipeline {
    /// Potential part from `T f`, solenoidal part from `L f`.
    Helmholtz = 1,
    LvtTvt = 2,
    LvtMoment = 3,
    TvtMoment = 4,
    Star = 5,
}

impl Pipeline {
    pub const ALL: [Pipeline; 5] =
        [Pipeline::Helmholtz, Pipeline::LvtTvt, Pipeline::LvtMoment, Pipeline::TvtMoment, Pipeline::Star];

    pub fn id(self) -> u8 {
        self as u8
    }
}

impl TryFrom<u8> for Pipeline {
    type Error = String;

    fn try_from(id: u8) -> std::result::Result<Self, String> {
        Pipeline::ALL.into_iter().find(|p| p.id() == id).ok_or_else(|| format!("unknown pipeline {id} (expected 1-5)"))
    }
}

impl From<Pipeline> for u8 {
    fn from(p: Pipeline) -> u8 {
        p.id()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub pipeline: Pipeline,
    pub vline: VLineGeometry,
    pub star: StarGeometry,
    pub pad: PadSpec,
    pub noise: NoiseSpec,
    pub hann: bool,
}

impl PipelineConfig {
    pub fn new(pipeline: Pipeline) -> Self {
        PipelineConfig {
            pipeline,
            vline: VLineGeometry::default(),
            star: StarGeometry::default(),
            pad: PadSpec::default_for(pipeline),
            noise: NoiseSpec::none(),
            hann: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    /// The field the data were generated from (after support truncation).
    pub truth: VectorField,
    pub recon: VectorField,
    /// Named (possibly noisy) forward data on the computational grid.
    pub data: Vec<(String, ScalarField)>,
    /// Recovered and exact `X_u f_i - X_v f_i`, moment pipelines only,
    /// cropped to the original grid.
    pub svl: Option<(VectorField, VectorField)>,
    /// Recovered `(V, W)` with `f = ∇V + ∇⊥W`, Helmholtz pipeline only.
    pub potentials: Option<(ScalarField, ScalarField)>,
    pub warnings: Vec<String>,
    pub seconds: f64,
}

/// Generates the pipeline's forward data from `field`, adds noise, inverts,
/// and crops back to `field`'s grid.
pub fn run_pipeline(field: &VectorField, cfg: &PipelineConfig) -> Result<PipelineRun> {
    Forward::new(field, cfg)?.invert(&cfg.noise)
}

/// Noise-free forward data of one pipeline, reusable across noise draws.
#[derive(Debug, Clone)]
pub struct Forward {
    cfg: PipelineConfig,
    grid: Grid2D,
    truth: VectorField,
    clean: Vec<(String, ScalarField)>,
    /// Exact signed V-line data of the padded truth, moment pipelines only.
    exact_svl: Option<VectorField>,
    seconds: f64,
}

impl Forward {
    pub fn new(field: &VectorField, cfg: &PipelineConfig) -> Result<Self> {
        let start = Instant::now();
        let grid = *field.grid();
        let moment = matches!(cfg.pipeline, Pipeline::LvtMoment | Pipeline::TvtMoment);
        let truth =
            if moment { truncate_to_disc(field, cfg.pad.support_radius * grid.half_extent()) } else { field.clone() };
        let outer: Grid2D = grid.padded(cfg.pad.pad_factor)?;
        let f = truth.embed(&outer)?;
        let g = &cfg.vline;

        let clean: Vec<(String, ScalarField)> = match cfg.pipeline {
            Pipeline::Helmholtz | Pipeline::LvtTvt => {
                let (l, t) = rayon::join(|| lvt(&f, g), || tvt(&f, g));
                vec![("lvt".into(), l), ("tvt".into(), t)]
            }
            Pipeline::LvtMoment => {
                let (l, i) = rayon::join(|| lvt(&f, g), || lvt1(&f, g));
                vec![("lvt".into(), l), ("lvt1".into(), i)]
            }
            Pipeline::TvtMoment => {
                let (t, j) = rayon::join(|| tvt(&f, g), || tvt1(&f, g));
                vec![("tvt".into(), t), ("tvt1".into(), j)]
            }
            Pipeline::Star => {
                let (sl, st) = star(&f, &cfg.star);
                vec![("star_long".into(), sl), ("star_trans".into(), st)]
            }
        };
        let exact_svl =
            if moment { Some(VectorField::new(signed_vline(&f.f1, g), signed_vline(&f.f2, g))?) } else { None };
        Ok(Forward { cfg: cfg.clone(), grid, truth, clean, exact_svl, seconds: start.elapsed().as_secs_f64() })
    }

    pub fn truth(&self) -> &VectorField {
        &self.truth
    }

    /// Named noise-free data on the computational grid.
    pub fn data(&self) -> &[(String, ScalarField)] {
        &self.clean
    }

    /// Adds noise drawn from `noise` (one stream per data set) and inverts.
    pub fn invert(&self, noise: &NoiseSpec) -> Result<PipelineRun> {
        let start = Instant::now();
        let (cfg, grid) = (&self.cfg, self.grid);
        let g = &cfg.vline;
        let mut warnings = Vec::new();
        let data: Vec<(String, ScalarField)> = self
            .clean
            .iter()
            .enumerate()
            .map(|(k, (name, d))| {
                let noisy = add_noise_stream(d, noise, k as u64);
                if noisy.zero_data {
                    warnings.push(format!("{name} is identically zero; no noise added"));
                }
                (name.clone(), noisy.field)
            })
            .collect();
        let (a, b) = (&data[0].1, &data[1].1);

        let (mut svl, mut potentials) = (None, None);
        let recon = match cfg.pipeline {
            Pipeline::Helmholtz => {
                let (v, w) = rayon::join(|| recover_potential(b, g), || recover_solenoidal(a, g));
                let (v, w) = (v?, w?);
                let (gv, gw) = (grad(&v), perp(&grad(&w)));
                potentials = Some((v.crop(&grid)?, w.crop(&grid)?));
                gv.lincomb(1.0, &gw, 1.0)?
            }
            Pipeline::LvtTvt => recover_from_lvt_tvt(a, b, g)?,
            Pipeline::LvtMoment | Pipeline::TvtMoment => {
                let r = if cfg.pipeline == Pipeline::LvtMoment {
                    recover_from_lvt_moment(a, b, g)?
                } else {
                    recover_from_tvt_moment(a, b, g)?
                };
                let exact = self.exact_svl.as_ref().expect("moment pipelines keep the exact data");
                svl = Some((r.svl.crop(&grid)?, exact.crop(&grid)?));
                r.field
            }
            Pipeline::Star => {
                let filter = if cfg.hann { Filter::Hann } else { Filter::RamLak };
                recover_from_star(a, b, &cfg.star, filter, grid.half_extent())?
            }
        };
        Ok(PipelineRun {
            truth: self.truth.clone(),
            recon: recon.crop(&grid)?,
            data,
            svl,
            potentials,
            warnings,
            seconds: self.seconds + start.elapsed().as_secs_f64(),
        })
    }
}

/// `X_u h - X_v h`.
pub fn signed_vline(h: &ScalarField, g: &VLineGeometry) -> ScalarField {
    let (a, b) = rayon::join(|| xray_map(h, g.u()), || xray_map(h, g.v()));
    &a - &b
}
