//! Finite-difference derivatives on pixel grids and the curl/div recovery
//! identities for V-line data.
//!
//! First derivatives use central differences in the interior and one-sided
//! first-order differences on the outermost rows and columns. Every
//! directional derivative is assembled from that same gradient.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beam::Direction;
use crate::grid::{ScalarField, VectorField};
use crate::vlt::VLineGeometry;

/// `∂/∂x` (along the first index).
pub fn partial_x(field: &ScalarField) -> ScalarField {
    let n = field.n();
    let h = field.grid().spacing();
    let src = field.values();
    let mut out = vec![0.0; n * n];
    out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let (lo, hi, span) = match i {
            0 => (0, 1, h),
            _ if i == n - 1 => (n - 2, n - 1, h),
            _ => (i - 1, i + 1, 2.0 * h),
        };
        for (j, v) in row.iter_mut().enumerate() {
            *v = (src[hi * n + j] - src[lo * n + j]) / span;
        }
    });
    ScalarField::from_values(*field.grid(), out).expect("finite differences of finite data")
}

/// `∂/∂y` (along the second index).
pub fn partial_y(field: &ScalarField) -> ScalarField {
    let n = field.n();
    let h = field.grid().spacing();
    let src = field.values();
    let mut out = vec![0.0; n * n];
    out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let s = &src[i * n..(i + 1) * n];
        row[0] = (s[1] - s[0]) / h;
        row[n - 1] = (s[n - 1] - s[n - 2]) / h;
        for j in 1..n - 1 {
            row[j] = (s[j + 1] - s[j - 1]) / (2.0 * h);
        }
    });
    ScalarField::from_values(*field.grid(), out).expect("finite differences of finite data")
}

pub fn grad(field: &ScalarField) -> VectorField {
    let (fx, fy) = rayon::join(|| partial_x(field), || partial_y(field));
    VectorField { f1: fx, f2: fy }
}

/// `D_d φ = d · ∇φ`.
pub fn directional_derivative(field: &ScalarField, d: Direction) -> ScalarField {
    let g = grad(field);
    g.f1.lincomb(d.x(), &g.f2, d.y()).expect("same grid")
}

/// How `D_u D_v` is discretized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MixedStencil {
    /// Two passes of the gradient stencil (`D_v`, then `D_u`).
    #[default]
    Gradient,
    /// `u₁v₁ ∂ₓₓ + (u₁v₂ + u₂v₁) ∂ₓᵧ + u₂v₂ ∂ᵧᵧ` with 3-point second
    /// differences and the 4-corner cross difference. On beam data of a
    /// discontinuous field this matches the axis-aligned first differences
    /// used elsewhere, where the wide two-pass stencil does not.
    Compact,
}

/// `D_u D_v φ`, applying `D_v` first.
pub fn mixed_derivative(field: &ScalarField, g: &VLineGeometry) -> ScalarField {
    directional_derivative(&directional_derivative(field, g.v()), g.u())
}

pub fn mixed_derivative_with(field: &ScalarField, g: &VLineGeometry, stencil: MixedStencil) -> ScalarField {
    match stencil {
        MixedStencil::Gradient => mixed_derivative(field, g),
        MixedStencil::Compact => compact_mixed(field, g),
    }
}

/// Compact stencil in the interior; the outermost ring keeps the gradient
/// stencil's values.
fn compact_mixed(field: &ScalarField, g: &VLineGeometry) -> ScalarField {
    let (u, v) = (g.u(), g.v());
    let cxx = u.x() * v.x();
    let cxy = u.x() * v.y() + u.y() * v.x();
    let cyy = u.y() * v.y();
    let n = field.n();
    let h2 = field.grid().spacing().powi(2);
    let src = field.values();
    let mut out = mixed_derivative(field, g);
    out.values_mut().par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        if i == 0 || i == n - 1 {
            return;
        }
        let at = |a: usize, b: usize| src[a * n + b];
        for (j, out) in row.iter_mut().enumerate().take(n - 1).skip(1) {
            let dxx = at(i + 1, j) - 2.0 * at(i, j) + at(i - 1, j);
            let dyy = at(i, j + 1) - 2.0 * at(i, j) + at(i, j - 1);
            let dxy = 0.25 * (at(i + 1, j + 1) - at(i + 1, j - 1) - at(i - 1, j + 1) + at(i - 1, j - 1));
            *out = (cxx * dxx + cxy * dxy + cyy * dyy) / h2;
        }
    });
    out
}

/// `curl f = (1 / det(v, u)) D_u D_v L f`.
pub fn curl_from_lvt(lf: &ScalarField, g: &VLineGeometry) -> ScalarField {
    curl_from_lvt_with(lf, g, MixedStencil::Gradient)
}

pub fn curl_from_lvt_with(lf: &ScalarField, g: &VLineGeometry, stencil: MixedStencil) -> ScalarField {
    mixed_derivative_with(lf, g, stencil).scale(1.0 / g.det_vu())
}

/// `div f = -(1 / det(v, u)) D_u D_v T f`.
pub fn div_from_tvt(tf: &ScalarField, g: &VLineGeometry) -> ScalarField {
    div_from_tvt_with(tf, g, MixedStencil::Gradient)
}

pub fn div_from_tvt_with(tf: &ScalarField, g: &VLineGeometry, stencil: MixedStencil) -> ScalarField {
    mixed_derivative_with(tf, g, stencil).scale(-1.0 / g.det_vu())
}

/// `∂f₂/∂x - ∂f₁/∂y` of sampled field data.
pub fn curl(f: &VectorField) -> ScalarField {
    &partial_x(&f.f2) - &partial_y(&f.f1)
}

/// `∂f₁/∂x + ∂f₂/∂y` of sampled field data.
pub fn div(f: &VectorField) -> ScalarField {
    &partial_x(&f.f1) + &partial_y(&f.f2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{sample_scalar, Grid2D};
    use crate::phantom::{
        gradient_field, perp_gradient_field, phantom1, phantom2, Potential, PHANTOM2_F1, PHANTOM2_F2, TEST_POTENTIAL,
    };
    use crate::vlt::{lvt, tvt};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    /// Relative L2 error over pixels at least `inset` away from the edge.
    fn rel_err_inset(a: &ScalarField, b: &ScalarField, inset: usize) -> f64 {
        let n = a.n();
        let (mut num, mut den) = (0.0, 0.0);
        for i in inset..n - inset {
            for j in inset..n - inset {
                num += (a.get(i, j) - b.get(i, j)).powi(2);
                den += b.get(i, j).powi(2);
            }
        }
        (num / den).sqrt()
    }

    fn max_abs_inset(a: &ScalarField, inset: usize) -> f64 {
        let n = a.n();
        let mut m = 0.0f64;
        for i in inset..n - inset {
            for j in inset..n - inset {
                m = m.max(a.get(i, j).abs());
            }
        }
        m
    }

    #[test]
    fn grad_exact_on_affine() {
        let g = Grid2D::unit(11).unwrap();
        let f = sample_scalar(&g, |x, y| 0.5 - 2.0 * x + 3.0 * y).unwrap();
        let gr = grad(&f);
        // one-sided differences are exact on affine data too
        for v in gr.f1.values() {
            assert_relative_eq!(*v, -2.0, epsilon = 1e-12);
        }
        for v in gr.f2.values() {
            assert_relative_eq!(*v, 3.0, epsilon = 1e-12);
        }
        let c = grad(&ScalarField::constant(g, 4.0));
        assert_eq!(c.f1.max_abs() + c.f2.max_abs(), 0.0);

        let u = Direction::from_degrees(30.0);
        let du = directional_derivative(&f, u);
        for v in du.values() {
            assert_relative_eq!(*v, -2.0 * u.x() + 3.0 * u.y(), epsilon = 1e-12);
        }
    }

    #[test]
    fn grad_one_sided_at_edges() {
        let g = Grid2D::unit(5).unwrap();
        let f = sample_scalar(&g, |x, _| x * x).unwrap();
        let fx = partial_x(&f);
        let h = g.spacing();
        assert_relative_eq!(fx.get(0, 2), (f.get(1, 2) - f.get(0, 2)) / h);
        assert_relative_eq!(fx.get(4, 2), (f.get(4, 2) - f.get(3, 2)) / h);
        assert_relative_eq!(fx.get(2, 2), (f.get(3, 2) - f.get(1, 2)) / (2.0 * h));
    }

    #[test]
    fn grad_truncation_bound() {
        let g = Grid2D::unit(64).unwrap();
        let h = g.spacing();
        let f = sample_scalar(&g, |x, _| (PI * x).sin()).unwrap();
        let fx = partial_x(&f);
        let bound = PI.powi(3) * h * h / 6.0 * 1.01;
        for i in 1..63 {
            let exact = PI * (PI * g.center(i)).cos();
            assert!((fx.get(i, 5) - exact).abs() <= bound);
        }
    }

    #[test]
    fn mixed_derivatives_commute() {
        let g = Grid2D::unit(48).unwrap();
        let f = sample_scalar(&g, |x, y| (2.0 * x).sin() * (1.0 + y * y) + x * y * y).unwrap();
        let geo = VLineGeometry::default();
        let uv = directional_derivative(&directional_derivative(&f, geo.v()), geo.u());
        let vu = directional_derivative(&directional_derivative(&f, geo.u()), geo.v());
        // identical central stencils commute exactly away from the edges
        assert!(max_abs_inset(&(&uv - &vu), 2) < 1e-9);
    }

    #[test]
    fn zero_data() {
        let g = Grid2D::unit(9).unwrap();
        let z = ScalarField::zeros(g);
        let geo = VLineGeometry::default();
        assert_eq!(curl_from_lvt(&z, &geo).max_abs(), 0.0);
        assert_eq!(div_from_tvt(&z, &geo).max_abs(), 0.0);
    }

    #[test]
    fn potential_field_has_no_curl_and_solenoidal_no_div() {
        let g = Grid2D::unit(96).unwrap();
        let geo = VLineGeometry::default();
        let pot = gradient_field(&TEST_POTENTIAL, &g);
        let sol = perp_gradient_field(&TEST_POTENTIAL, &g);
        let scale = div(&pot).max_abs();
        assert!(max_abs_inset(&curl_from_lvt(&lvt(&pot, &geo), &geo), 2) < 0.05 * scale);
        assert!(max_abs_inset(&div_from_tvt(&tvt(&sol, &geo), &geo), 2) < 0.05 * scale);
        // discrete div/curl of sampled exact fields: second-order small
        let coarse = max_abs_inset(&div(&sol), 1);
        assert!(coarse < 0.06 * scale);
        assert_eq!(coarse, max_abs_inset(&curl(&pot), 1));
        let fine_g = Grid2D::unit(192).unwrap();
        let fine = max_abs_inset(&div(&perp_gradient_field(&TEST_POTENTIAL, &fine_g)), 1);
        // steep bump flanks keep n = 96 short of the asymptotic factor 4
        assert!(fine < coarse / 2.5, "{coarse} {fine}");
    }

    #[test]
    fn phantom1_curl_and_div_from_data() {
        let g = Grid2D::unit(128).unwrap();
        let geo = VLineGeometry::default();
        let f = phantom1(&g);
        let c = curl_from_lvt(&lvt(&f, &geo), &geo);
        let d = div_from_tvt(&tvt(&f, &geo), &geo);
        let exact_div = sample_scalar(&g, |x, y| 2.0 * PI * (PI * x).cos() * (PI * y).cos()).unwrap();
        assert!(max_abs_inset(&c, 2) < 0.05 * exact_div.max_abs(), "curl {}", max_abs_inset(&c, 2));
        let e = rel_err_inset(&d, &exact_div, 2);
        assert!(e < 0.02, "div rel err {e}");
    }

    #[test]
    fn phantom2_curl_converges() {
        let geo = VLineGeometry::default();
        let errs: Vec<f64> = [64usize, 128, 256]
            .iter()
            .map(|&n| {
                let g = Grid2D::unit(n).unwrap();
                let f = phantom2(&g);
                let exact =
                    sample_scalar(&g, |x, y| PHANTOM2_F2.gradient(x, y)[0] - PHANTOM2_F1.gradient(x, y)[1]).unwrap();
                let c = curl_from_lvt(&lvt(&f, &geo), &geo);
                rel_err_inset(&c, &exact, 10 * n / 256)
            })
            .collect();
        assert!(errs[2] <= 0.05, "{errs:?}");
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }
}
