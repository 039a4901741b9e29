//! Dirichlet problem `-Δu = f` on the pixel square, 5-point scheme.
//!
//! The outermost ring of pixels carries the boundary data `g`; the unknowns
//! are the `(n-2)²` interior pixels, ordered with the second index fastest
//! (1-based `k = (n-2)(i-2) + (j-1)`). The matrix is stored exactly as
//! displayed, `A = -blocktridiag(I, B, I)` with `B = tridiag(1, -4, 1)`,
//! which is already symmetric positive definite, and `F = h² f̃`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Grid2D, ScalarField};
use crate::sparse::CsrMatrix;

/// Largest `n` that goes to the banded Cholesky factorization under
/// [`Solver::Auto`].
pub const DIRECT_MAX_N: usize = 200;
pub const CG_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Solver {
    /// Direct for `n ≤ DIRECT_MAX_N`, conjugate gradient above.
    #[default]
    Auto,
    Direct,
    ConjugateGradient,
}

#[derive(Debug, Clone)]
pub struct PoissonSystem {
    grid: Grid2D,
    a: CsrMatrix,
    f: Vec<f64>,
    boundary: ScalarField,
}

impl PoissonSystem {
    /// Assembles the system for `source` (read at interior pixels) and
    /// `boundary` (read at edge pixels). Both must live on the same grid.
    pub fn assemble(source: &ScalarField, boundary: &ScalarField) -> Result<Self> {
        let grid = *source.grid();
        if *boundary.grid() != grid {
            return Err(Error::GridMismatch("source and boundary data on different grids".into()));
        }
        let n = grid.n();
        if n < 4 {
            return Err(Error::InvalidGrid(format!("Poisson solve needs n >= 4, got {n}")));
        }
        let m = n - 2;
        let h = grid.spacing();
        let idx = |i: usize, j: usize| m * (i - 1) + (j - 1);

        let mut trip = Vec::with_capacity(5 * m * m);
        let mut f = vec![0.0; m * m];
        for i in 1..=m {
            for j in 1..=m {
                let k = idx(i, j);
                trip.push((k, k, 4.0));
                let mut ft = source.get(i, j);
                for (ii, jj) in [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)] {
                    if ii == 0 || jj == 0 || ii == n - 1 || jj == n - 1 {
                        ft += boundary.get(ii, jj) / (h * h);
                    } else {
                        trip.push((k, idx(ii, jj), -1.0));
                    }
                }
                f[k] = h * h * ft;
            }
        }
        Ok(PoissonSystem { grid, a: CsrMatrix::from_triplets(m * m, m * m, trip), f, boundary: boundary.clone() })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.a
    }

    /// `F = h² f̃`.
    pub fn rhs(&self) -> &[f64] {
        &self.f
    }

    /// Boundary-modified source `f̃` at interior pixel `(i, j)` (0-based,
    /// so `1 ≤ i, j ≤ n-2`).
    pub fn modified_source(&self, i: usize, j: usize) -> f64 {
        let h = self.grid.spacing();
        self.f[self.unknown_index(i, j)] / (h * h)
    }

    /// 0-based unknown index of interior pixel `(i, j)`.
    pub fn unknown_index(&self, i: usize, j: usize) -> usize {
        let m = self.grid.n() - 2;
        assert!((1..=m).contains(&i) && (1..=m).contains(&j), "({i}, {j}) is not interior");
        m * (i - 1) + (j - 1)
    }

    /// `‖A U - F‖∞ / ‖F‖∞` (absolute when `F = 0`).
    pub fn relative_residual(&self, u: &[f64]) -> f64 {
        let mut au = vec![0.0; u.len()];
        self.a.mul_vec(u, &mut au);
        let r = au.iter().zip(&self.f).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = self.f.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if scale > 0.0 {
            r / scale
        } else {
            r
        }
    }

    pub fn solve(&self) -> Result<ScalarField> {
        self.solve_with(Solver::Auto)
    }

    pub fn solve_with(&self, solver: Solver) -> Result<ScalarField> {
        let direct = match solver {
            Solver::Auto => self.grid.n() <= DIRECT_MAX_N,
            Solver::Direct => true,
            Solver::ConjugateGradient => false,
        };
        let u = if direct { self.solve_banded_cholesky() } else { self.solve_cg()? };
        Ok(self.to_field(&u))
    }

    /// Interior unknowns as a field, boundary pixels set to `g`.
    pub fn to_field(&self, u: &[f64]) -> ScalarField {
        let n = self.grid.n();
        let mut out = self.boundary.clone();
        for i in 1..n - 1 {
            for j in 1..n - 1 {
                out.set(i, j, u[self.unknown_index(i, j)]);
            }
        }
        out
    }

    pub fn write_matrix_market(&self, path: &Path) -> Result<()> {
        self.a.write_matrix_market(path)
    }

    /// Cholesky factorization in band storage; bandwidth is `n - 2`.
    fn solve_banded_cholesky(&self) -> Vec<f64> {
        let dim = self.a.nrows();
        let p = self.grid.n() - 2;
        let w = p + 1;
        // row i holds columns i-p ..= i at offsets 0 ..= p
        let at = |i: usize, k: usize| i * w + k + p - i;
        let mut l = vec![0.0; dim * w];
        for i in 0..dim {
            for (c, v) in self.a.row(i) {
                if c <= i {
                    l[at(i, c)] = v;
                }
            }
        }
        for i in 0..dim {
            let lo = i.saturating_sub(p);
            for j in lo..i {
                let start = lo.max(j.saturating_sub(p));
                let dot: f64 =
                    l[at(i, start)..at(i, j)].iter().zip(&l[at(j, start)..at(j, j)]).map(|(a, b)| a * b).sum();
                l[at(i, j)] = (l[at(i, j)] - dot) / l[at(j, j)];
            }
            let sq: f64 = l[at(i, lo)..at(i, i)].iter().map(|v| v * v).sum();
            let d = l[at(i, i)] - sq;
            debug_assert!(d > 0.0, "matrix not positive definite");
            l[at(i, i)] = d.sqrt();
        }

        let mut y = self.f.clone();
        for i in 0..dim {
            let lo = i.saturating_sub(p);
            let dot: f64 = l[at(i, lo)..at(i, i)].iter().zip(&y[lo..i]).map(|(a, b)| a * b).sum();
            y[i] = (y[i] - dot) / l[at(i, i)];
        }
        for i in (0..dim).rev() {
            y[i] /= l[at(i, i)];
            let yi = y[i];
            for k in i.saturating_sub(p)..i {
                y[k] -= l[at(i, k)] * yi;
            }
        }
        y
    }

    /// Jacobi-preconditioned conjugate gradient to relative residual
    /// `CG_TOLERANCE` in the 2-norm.
    fn solve_cg(&self) -> Result<Vec<f64>> {
        let dim = self.a.nrows();
        let inv_diag: Vec<f64> = self.a.diagonal().iter().map(|d| 1.0 / d).collect();
        let b_norm = norm(&self.f);
        let mut x = vec![0.0; dim];
        if b_norm == 0.0 {
            return Ok(x);
        }
        let max_iter = (20 * self.grid.n()).max(1000);
        let mut r = self.f.clone();
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
        let mut p = z.clone();
        let mut ap = vec![0.0; dim];
        let mut rz = dot(&r, &z);
        for _ in 0..max_iter {
            self.a.mul_vec(&p, &mut ap);
            let alpha = rz / dot(&p, &ap);
            for k in 0..dim {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            if norm(&r) <= CG_TOLERANCE * b_norm {
                return Ok(x);
            }
            for k in 0..dim {
                z[k] = r[k] * inv_diag[k];
            }
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for k in 0..dim {
                p[k] = z[k] + beta * p[k];
            }
        }
        Err(Error::NotConverged { iterations: max_iter, residual: norm(&r) / b_norm })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Assemble and solve `-Δu = source`, `u = g` on the edge pixels.
pub fn solve_dirichlet(source: &ScalarField, g: &ScalarField) -> Result<ScalarField> {
    PoissonSystem::assemble(source, g)?.solve()
}

/// Homogeneous boundary data.
pub fn solve_dirichlet_zero(source: &ScalarField) -> Result<ScalarField> {
    solve_dirichlet(source, &ScalarField::zeros(*source.grid()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::sample_scalar;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    /// Grid whose edge pixel centers sit exactly on `x, y = ±1`.
    fn node_grid(n: usize) -> Grid2D {
        Grid2D::new(n, n as f64 / (n as f64 - 1.0)).unwrap()
    }

    fn transpose(f: &ScalarField) -> ScalarField {
        ScalarField::from_fn(*f.grid(), |i, j| f.get(j, i))
    }

    #[test]
    fn n4_matrix_structure() {
        let g = Grid2D::unit(4).unwrap();
        let z = ScalarField::zeros(g);
        let sys = PoissonSystem::assemble(&z, &z).unwrap();
        let dense = sys.matrix().to_dense();
        let expected = [[4.0, -1.0, -1.0, 0.0], [-1.0, 4.0, 0.0, -1.0], [-1.0, 0.0, 4.0, -1.0], [0.0, -1.0, -1.0, 4.0]];
        for r in 0..4 {
            assert_eq!(dense[r], expected[r]);
        }
        assert!(PoissonSystem::assemble(
            &ScalarField::zeros(Grid2D::unit(3).unwrap()),
            &ScalarField::zeros(Grid2D::unit(3).unwrap())
        )
        .is_err());
    }

    #[test]
    fn structure_invariants() {
        let g = Grid2D::unit(9).unwrap();
        let z = ScalarField::zeros(g);
        let sys = PoissonSystem::assemble(&z, &z).unwrap();
        let a = sys.matrix();
        assert!(a.is_symmetric(0.0));
        assert_eq!(a.bandwidth(), 7);
        for i in 1..8 {
            for j in 1..8 {
                let deep = (2..7).contains(&i) && (2..7).contains(&j);
                let nnz = a.row_nnz(sys.unknown_index(i, j));
                if deep {
                    assert_eq!(nnz, 5);
                } else {
                    assert!(nnz < 5);
                }
            }
        }
        // 1-based, the ordering is k = (N-2)(i-2) + (j-1)
        assert_eq!(sys.unknown_index(1, 1), 0);
        assert_eq!(sys.unknown_index(2, 1), 7);
        assert_eq!(sys.unknown_index(7, 7) + 1, 7 * (8 - 2) + (8 - 1));
    }

    #[test]
    fn boundary_terms_in_modified_source() {
        let g = Grid2D::unit(5).unwrap();
        let h = g.spacing();
        let sys = PoissonSystem::assemble(&ScalarField::zeros(g), &ScalarField::constant(g, 1.0)).unwrap();
        assert_relative_eq!(sys.modified_source(1, 1), 2.0 / (h * h), max_relative = 1e-14);
        assert_relative_eq!(sys.modified_source(3, 3), 2.0 / (h * h), max_relative = 1e-14);
        assert_relative_eq!(sys.modified_source(1, 2), 1.0 / (h * h), max_relative = 1e-14);
        assert_eq!(sys.modified_source(2, 2), 0.0);

        let src = sample_scalar(&g, |x, y| x - y * y).unwrap();
        let sys = PoissonSystem::assemble(&src, &ScalarField::zeros(g)).unwrap();
        for i in 1..4 {
            for j in 1..4 {
                assert_relative_eq!(sys.modified_source(i, j), src.get(i, j), max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn zero_problem() {
        let g = Grid2D::unit(12).unwrap();
        let u = solve_dirichlet_zero(&ScalarField::zeros(g)).unwrap();
        assert_eq!(u.max_abs(), 0.0);
        let sys = PoissonSystem::assemble(&ScalarField::zeros(g), &ScalarField::zeros(g)).unwrap();
        assert_eq!(sys.solve_with(Solver::ConjugateGradient).unwrap().max_abs(), 0.0);
    }

    fn sine_error(n: usize) -> f64 {
        let g = node_grid(n);
        let f = sample_scalar(&g, |x, y| 2.0 * PI * PI * (PI * x).sin() * (PI * y).sin()).unwrap();
        let exact = sample_scalar(&g, |x, y| (PI * x).sin() * (PI * y).sin()).unwrap();
        // the sine vanishes on the edge nodes up to rounding
        let u = solve_dirichlet(&f, &exact).unwrap();
        (&u - &exact).norm_l2() / exact.norm_l2()
    }

    #[test]
    fn second_order_convergence() {
        let (e41, e81) = (sine_error(41), sine_error(81));
        let h41 = 2.0 / 40.0;
        assert!(e41 <= h41 * h41, "{e41}");
        let ratio = e41 / e81;
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn direct_and_cg_agree_and_residuals_small() {
        let g = Grid2D::unit(40).unwrap();
        let f = sample_scalar(&g, |x, y| (3.0 * x).cos() + x * y).unwrap();
        let bd = sample_scalar(&g, |x, y| x + 0.5 * y * y).unwrap();
        let sys = PoissonSystem::assemble(&f, &bd).unwrap();
        let d = sys.solve_with(Solver::Direct).unwrap();
        let c = sys.solve_with(Solver::ConjugateGradient).unwrap();
        assert!((&d - &c).max_abs() < 1e-8 * d.max_abs());
        let interior = |u: &ScalarField| {
            let mut v = vec![0.0; 38 * 38];
            for i in 1..39 {
                for j in 1..39 {
                    v[sys.unknown_index(i, j)] = u.get(i, j);
                }
            }
            v
        };
        assert!(sys.relative_residual(&interior(&d)) <= 1e-9);
        assert!(sys.relative_residual(&interior(&c)) <= 1e-8);
        // boundary pixels carry g
        assert_eq!(d.get(0, 7), bd.get(0, 7));
        assert_eq!(d.get(39, 39), bd.get(39, 39));
    }

    #[test]
    fn maximum_principle() {
        let g = Grid2D::unit(30).unwrap();
        let bd = sample_scalar(&g, |x, y| (2.0 * x).sin() + y * y * y).unwrap();
        let u = solve_dirichlet(&ScalarField::zeros(g), &bd).unwrap();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..30 {
            for j in 0..30 {
                if i == 0 || j == 0 || i == 29 || j == 29 {
                    lo = lo.min(bd.get(i, j));
                    hi = hi.max(bd.get(i, j));
                }
            }
        }
        for v in u.values() {
            assert!(*v >= lo - 1e-12 && *v <= hi + 1e-12);
        }
    }

    #[test]
    fn transposed_ordering_gives_same_solution() {
        let g = Grid2D::unit(33).unwrap();
        let f = sample_scalar(&g, |x, y| (x - 0.3 * y).exp()).unwrap();
        let bd = sample_scalar(&g, |x, y| x * y).unwrap();
        let u = solve_dirichlet(&f, &bd).unwrap();
        let ut = solve_dirichlet(&transpose(&f), &transpose(&bd)).unwrap();
        assert!((&u - &transpose(&ut)).max_abs() <= 1e-10);
    }

    #[test]
    fn matrix_dump() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid2D::unit(4).unwrap();
        let z = ScalarField::zeros(g);
        let path = dir.path().join("a.mtx");
        PoissonSystem::assemble(&z, &z).unwrap().write_matrix_market(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.lines().nth(1).unwrap() == "4 4 12");
    }
}
