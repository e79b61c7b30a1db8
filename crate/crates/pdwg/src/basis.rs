//! Polynomial bases: centroid/diameter-scaled monomials on triangles and
//! Legendre polynomials on edges.
//!
//! Triangle basis functions are `((x-xc)/h)^alpha ((y-yc)/h)^beta` with
//! `alpha + beta <= degree`, ordered by total degree and then by descending
//! `alpha`. The scaling keeps local mass matrices well conditioned independent
//! of the mesh size. Edge basis functions are Legendre polynomials in the edge
//! parameter `t in [-1, 1]` running from the lower- to the higher-indexed
//! vertex, so they are mutually orthogonal on the edge.

use crate::{Error, Result, Vec2};
use nalgebra::DMatrix;

/// Dimension of the polynomial space of total degree `k` in two variables.
pub fn poly_dim(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

/// Scaled monomial basis on a triangle.
#[derive(Debug, Clone)]
pub struct TriBasis {
    pub degree: usize,
    pub center: Vec2,
    pub scale: f64,
    exps: Vec<(u32, u32)>,
}

impl TriBasis {
    pub fn new(degree: usize, center: Vec2, scale: f64) -> Self {
        let mut exps = Vec::with_capacity(poly_dim(degree));
        for d in 0..=degree as u32 {
            for alpha in (0..=d).rev() {
                exps.push((alpha, d - alpha));
            }
        }
        TriBasis { degree, center, scale, exps }
    }

    pub fn dim(&self) -> usize {
        self.exps.len()
    }

    pub fn exponents(&self) -> &[(u32, u32)] {
        &self.exps
    }

    #[inline]
    fn local(&self, p: Vec2) -> (f64, f64) {
        ((p.x - self.center.x) / self.scale, (p.y - self.center.y) / self.scale)
    }

    /// Values of all basis functions at `p`.
    pub fn eval(&self, p: Vec2) -> Vec<f64> {
        let (xi, eta) = self.local(p);
        self.exps.iter().map(|&(a, b)| powi(xi, a) * powi(eta, b)).collect()
    }

    /// Gradients of all basis functions at `p`.
    pub fn eval_grad(&self, p: Vec2) -> Vec<Vec2> {
        let (xi, eta) = self.local(p);
        let inv_h = 1.0 / self.scale;
        self.exps
            .iter()
            .map(|&(a, b)| {
                let gx = if a == 0 { 0.0 } else { a as f64 * powi(xi, a - 1) * powi(eta, b) * inv_h };
                let gy = if b == 0 { 0.0 } else { b as f64 * powi(xi, a) * powi(eta, b - 1) * inv_h };
                Vec2::new(gx, gy)
            })
            .collect()
    }

    /// Second derivatives `(dxx, dxy, dyy)` of all basis functions at `p`.
    pub fn eval_hess(&self, p: Vec2) -> Vec<[f64; 3]> {
        let (xi, eta) = self.local(p);
        let inv_h2 = 1.0 / (self.scale * self.scale);
        self.exps
            .iter()
            .map(|&(a, b)| {
                let af = a as f64;
                let bf = b as f64;
                let dxx = if a >= 2 { af * (af - 1.0) * powi(xi, a - 2) * powi(eta, b) } else { 0.0 };
                let dxy = if a >= 1 && b >= 1 { af * bf * powi(xi, a - 1) * powi(eta, b - 1) } else { 0.0 };
                let dyy = if b >= 2 { bf * (bf - 1.0) * powi(xi, a) * powi(eta, b - 2) } else { 0.0 };
                [dxx * inv_h2, dxy * inv_h2, dyy * inv_h2]
            })
            .collect()
    }

    /// Tabulated values or derivatives at a set of points.
    pub fn eval_table(&self, pts: &[Vec2], deriv_order: usize) -> Result<DerivTable> {
        let n = pts.len();
        let m = self.dim();
        match deriv_order {
            0 => {
                let mut values = DMatrix::zeros(n, m);
                for (i, &p) in pts.iter().enumerate() {
                    for (j, v) in self.eval(p).into_iter().enumerate() {
                        values[(i, j)] = v;
                    }
                }
                Ok(DerivTable::Values(values))
            }
            1 => {
                let mut dx = DMatrix::zeros(n, m);
                let mut dy = DMatrix::zeros(n, m);
                for (i, &p) in pts.iter().enumerate() {
                    for (j, g) in self.eval_grad(p).into_iter().enumerate() {
                        dx[(i, j)] = g.x;
                        dy[(i, j)] = g.y;
                    }
                }
                Ok(DerivTable::Gradients { dx, dy })
            }
            2 => {
                let mut dxx = DMatrix::zeros(n, m);
                let mut dxy = DMatrix::zeros(n, m);
                let mut dyy = DMatrix::zeros(n, m);
                for (i, &p) in pts.iter().enumerate() {
                    for (j, h) in self.eval_hess(p).into_iter().enumerate() {
                        dxx[(i, j)] = h[0];
                        dxy[(i, j)] = h[1];
                        dyy[(i, j)] = h[2];
                    }
                }
                Ok(DerivTable::Second { dxx, dxy, dyy })
            }
            o => Err(Error::UnsupportedDerivOrder(o)),
        }
    }

    /// Local mass matrix on the given physical quadrature points/weights.
    pub fn mass_matrix(&self, pts: &[Vec2], wts: &[f64]) -> DMatrix<f64> {
        let m = self.dim();
        let mut mass = DMatrix::zeros(m, m);
        for (&p, &w) in pts.iter().zip(wts) {
            let vals = self.eval(p);
            for i in 0..m {
                for j in i..m {
                    mass[(i, j)] += w * vals[i] * vals[j];
                }
            }
        }
        for i in 0..m {
            for j in 0..i {
                mass[(i, j)] = mass[(j, i)];
            }
        }
        mass
    }
}

#[inline]
fn powi(x: f64, n: u32) -> f64 {
    match n {
        0 => 1.0,
        1 => x,
        2 => x * x,
        _ => x.powi(n as i32),
    }
}

/// Output of [`TriBasis::eval_table`]; matrices are points-by-functions.
#[derive(Debug, Clone)]
pub enum DerivTable {
    Values(DMatrix<f64>),
    Gradients { dx: DMatrix<f64>, dy: DMatrix<f64> },
    Second { dxx: DMatrix<f64>, dxy: DMatrix<f64>, dyy: DMatrix<f64> },
}

/// Legendre basis on an oriented edge `a -> b` (lower to higher vertex index).
#[derive(Debug, Clone)]
pub struct EdgeBasis {
    pub degree: usize,
    pub a: Vec2,
    pub b: Vec2,
}

impl EdgeBasis {
    pub fn new(degree: usize, a: Vec2, b: Vec2) -> Self {
        EdgeBasis { degree, a, b }
    }

    pub fn dim(&self) -> usize {
        self.degree + 1
    }

    pub fn length(&self) -> f64 {
        (self.b - self.a).norm()
    }

    /// Physical point of parameter `t in [-1, 1]`.
    pub fn point(&self, t: f64) -> Vec2 {
        0.5 * (self.a + self.b) + 0.5 * t * (self.b - self.a)
    }

    /// Values `P_0(t) .. P_degree(t)`.
    pub fn eval_param(&self, t: f64) -> Vec<f64> {
        legendre_values(self.degree, t)
    }

    /// `int_e P_q^2 ds = |e| / (2q + 1)`.
    pub fn mass_diag(&self, q: usize) -> f64 {
        self.length() / (2.0 * q as f64 + 1.0)
    }
}

/// Values of the Legendre polynomials up to the given degree at `t`.
pub fn legendre_values(degree: usize, t: f64) -> Vec<f64> {
    let mut vals = Vec::with_capacity(degree + 1);
    vals.push(1.0);
    if degree >= 1 {
        vals.push(t);
    }
    for j in 2..=degree {
        let jf = j as f64;
        let next = ((2.0 * jf - 1.0) * t * vals[j - 1] - (jf - 1.0) * vals[j - 2]) / jf;
        vals.push(next);
    }
    vals
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{edge_quadrature, map_to_segment, map_to_triangle, tri_quadrature};

    fn sample_basis() -> TriBasis {
        TriBasis::new(2, Vec2::new(0.3, 0.4), 0.7)
    }

    #[test]
    fn ordering_and_dim() {
        let b = sample_basis();
        assert_eq!(b.dim(), 6);
        assert_eq!(b.exponents(), &[(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]);
    }

    #[test]
    fn constant_gradient_vanishes() {
        let b = sample_basis();
        for p in [Vec2::new(0.0, 0.0), Vec2::new(1.0, -0.5), Vec2::new(0.3, 0.4)] {
            let g = b.eval_grad(p);
            assert_eq!(g[0], Vec2::zeros());
        }
    }

    #[test]
    fn quadratic_second_derivative() {
        // basis function ((x-xc)/h)^2 has dxx = 2/h^2 everywhere
        let b = sample_basis();
        let h = b.eval_hess(Vec2::new(0.9, -1.3));
        let idx = b.exponents().iter().position(|&e| e == (2, 0)).unwrap();
        assert!((h[idx][0] - 2.0 / (0.7 * 0.7)).abs() < 1e-14);
        assert_eq!(h[idx][1], 0.0);
        assert_eq!(h[idx][2], 0.0);
    }

    #[test]
    fn gradient_matches_central_difference() {
        let b = TriBasis::new(3, Vec2::new(0.2, -0.1), 0.9);
        let step = 1e-6;
        // deterministic pseudo-random points
        let mut seed = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..20 {
            let p = Vec2::new(next() * 2.0 - 1.0, next() * 2.0 - 1.0);
            let grads = b.eval_grad(p);
            let vxp = b.eval(p + Vec2::new(step, 0.0));
            let vxm = b.eval(p - Vec2::new(step, 0.0));
            let vyp = b.eval(p + Vec2::new(0.0, step));
            let vym = b.eval(p - Vec2::new(0.0, step));
            for j in 0..b.dim() {
                let fdx = (vxp[j] - vxm[j]) / (2.0 * step);
                let fdy = (vyp[j] - vym[j]) / (2.0 * step);
                assert!((grads[j].x - fdx).abs() < 1e-6, "d/dx basis {j}");
                assert!((grads[j].y - fdy).abs() < 1e-6, "d/dy basis {j}");
            }
        }
    }

    #[test]
    fn deriv_order_three_unsupported() {
        let b = sample_basis();
        assert!(b.eval_table(&[Vec2::zeros()], 3).is_err());
    }

    #[test]
    fn mass_matrix_spd_and_well_conditioned() {
        // on a skewed triangle, centroid/diameter scaling keeps cond < 1e6 for k <= 3
        let v = [Vec2::new(0.0, 0.0), Vec2::new(0.11, 0.005), Vec2::new(0.04, 0.09)];
        let centroid = (v[0] + v[1] + v[2]) / 3.0;
        let h = (v[1] - v[0]).norm().max((v[2] - v[1]).norm()).max((v[0] - v[2]).norm());
        let rule = tri_quadrature(8).unwrap();
        let (pts, wts) = map_to_triangle(&rule, &v);
        for k in 0..=3 {
            let basis = TriBasis::new(k, centroid, h);
            let m = basis.mass_matrix(&pts, &wts);
            let eig = m.clone().symmetric_eigen().eigenvalues;
            let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = eig.iter().cloned().fold(0.0_f64, f64::max);
            assert!(min > 0.0, "k={k} mass not positive definite");
            assert!(max / min < 1e6, "k={k} condition {}", max / min);
        }
    }

    #[test]
    fn edge_legendre_orthogonal() {
        let e = EdgeBasis::new(4, Vec2::new(0.1, 0.2), Vec2::new(0.8, -0.3));
        let rule = edge_quadrature(10).unwrap();
        let (_, wts, params) = map_to_segment(&rule, e.a, e.b);
        let n = e.dim();
        let mut gram = vec![vec![0.0; n]; n];
        for (&t, &w) in params.iter().zip(&wts) {
            let vals = e.eval_param(t);
            for i in 0..n {
                for j in 0..n {
                    gram[i][j] += w * vals[i] * vals[j];
                }
            }
        }
        for i in 0..n {
            assert!((gram[i][i] - e.mass_diag(i)).abs() < 1e-13 * e.length());
            for j in 0..n {
                if i != j {
                    assert!(gram[i][j].abs() < 1e-13 * e.length(), "gram[{i}][{j}] = {}", gram[i][j]);
                }
            }
        }
    }
}
