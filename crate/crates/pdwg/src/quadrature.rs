//! Gauss quadrature on segments and triangles.
//!
//! Segment rules are Gauss-Legendre on `[-1, 1]`, computed by Newton iteration
//! on the Legendre recurrence. Triangle rules are built on the reference
//! triangle `(0,0), (1,0), (0,1)` by collapsing a tensorized Gauss rule on the
//! unit square through the Duffy transform `(s, t) -> (s, t (1 - s))`, whose
//! Jacobian `1 - s` raises the required `s`-degree by one.

use crate::{Error, Result, Vec2};

/// Largest supported exactness degree.
pub const MAX_EXACT_DEGREE: usize = 20;

/// A quadrature rule with points of type `P` and the polynomial degree it
/// integrates exactly.
#[derive(Debug, Clone)]
pub struct QuadRule<P> {
    pub points: Vec<P>,
    pub weights: Vec<f64>,
    pub exact_degree: usize,
}

/// Rule on the reference triangle (0,0), (1,0), (0,1).
pub type TriRule = QuadRule<Vec2>;
/// Rule on the reference segment [-1, 1].
pub type SegRule = QuadRule<f64>;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut pts = vec![0.0; n];
    let mut wts = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_deriv(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                // one polishing step
                let (p2, d2) = legendre_with_deriv(n, x);
                x -= p2 / d2;
                dp = d2;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        pts[i] = -x;
        pts[n - 1 - i] = x;
        wts[i] = w;
        wts[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        pts[n / 2] = 0.0;
    }
    (pts, wts)
}

/// Value and derivative of the degree-`n` Legendre polynomial at `x`.
fn legendre_with_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss rule on `[-1, 1]` exact for polynomials of the given degree.
pub fn edge_quadrature(exact_degree: usize) -> Result<SegRule> {
    if exact_degree > MAX_EXACT_DEGREE {
        return Err(Error::QuadDegreeOutOfRange(exact_degree));
    }
    let n = exact_degree / 2 + 1;
    let (points, weights) = gauss_legendre(n);
    Ok(SegRule { points, weights, exact_degree })
}

/// Duffy-collapsed tensor rule on the reference triangle, exact for the given
/// total degree.
pub fn tri_quadrature(exact_degree: usize) -> Result<TriRule> {
    if exact_degree > MAX_EXACT_DEGREE {
        return Err(Error::QuadDegreeOutOfRange(exact_degree));
    }
    // The Jacobian (1 - s) makes the s-integrand one degree higher.
    let ns = (exact_degree + 1) / 2 + 1;
    let nt = exact_degree / 2 + 1;
    let (sp, sw) = gauss_legendre(ns);
    let (tp, tw) = gauss_legendre(nt);
    let mut points = Vec::with_capacity(ns * nt);
    let mut weights = Vec::with_capacity(ns * nt);
    for (&s, &ws) in sp.iter().zip(&sw) {
        let s01 = 0.5 * (s + 1.0);
        for (&t, &wt) in tp.iter().zip(&tw) {
            let t01 = 0.5 * (t + 1.0);
            points.push(Vec2::new(s01, t01 * (1.0 - s01)));
            weights.push(0.25 * ws * wt * (1.0 - s01));
        }
    }
    Ok(TriRule { points, weights, exact_degree })
}

/// Map a reference-triangle rule to the physical triangle with the given
/// vertices; weights carry the affine Jacobian (twice the area).
pub fn map_to_triangle(rule: &TriRule, v: &[Vec2; 3]) -> (Vec<Vec2>, Vec<f64>) {
    let jac = 2.0 * triangle_area(v);
    let pts = rule
        .points
        .iter()
        .map(|r| v[0] + (v[1] - v[0]) * r.x + (v[2] - v[0]) * r.y)
        .collect();
    let wts = rule.weights.iter().map(|w| w * jac).collect();
    (pts, wts)
}

/// Map a reference-segment rule to the physical segment `a -> b`.
/// Returns (points, weights, parameters in [-1,1]).
pub fn map_to_segment(rule: &SegRule, a: Vec2, b: Vec2) -> (Vec<Vec2>, Vec<f64>, Vec<f64>) {
    let half = 0.5 * (b - a).norm();
    let mid = 0.5 * (a + b);
    let dir = 0.5 * (b - a);
    let pts = rule.points.iter().map(|&t| mid + dir * t).collect();
    let wts = rule.weights.iter().map(|w| w * half).collect();
    (pts, wts, rule.points.clone())
}

/// Signed-then-absolute area of a triangle.
pub fn triangle_area(v: &[Vec2; 3]) -> f64 {
    0.5 * ((v[1] - v[0]).perp(&(v[2] - v[0]))).abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrate_tri<F: Fn(Vec2) -> f64>(rule: &TriRule, f: F) -> f64 {
        rule.points.iter().zip(&rule.weights).map(|(p, w)| w * f(*p)).sum()
    }

    #[test]
    fn reference_triangle_measure() {
        let rule = tri_quadrature(0).unwrap();
        assert!((integrate_tri(&rule, |_| 1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn two_point_gauss_x_squared() {
        let rule = edge_quadrature(2).unwrap();
        assert_eq!(rule.points.len(), 2);
        let v: f64 = rule.points.iter().zip(&rule.weights).map(|(x, w)| w * x * x).sum();
        assert!((v - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn xy_on_reference_triangle() {
        // exact integral of x*y over (0,0),(1,0),(0,1) is 1/24
        let rule = tri_quadrature(2).unwrap();
        assert!((integrate_tri(&rule, |p| p.x * p.y) - 1.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn exactness_all_monomials() {
        // exact value of int x^a y^b over the reference triangle: a! b! / (a+b+2)!
        fn exact(a: u32, b: u32) -> f64 {
            let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
            fact(a) * fact(b) / fact(a + b + 2)
        }
        for deg in 0..=MAX_EXACT_DEGREE {
            let rule = tri_quadrature(deg).unwrap();
            for a in 0..=deg as u32 {
                for b in 0..=(deg as u32 - a) {
                    let num = integrate_tri(&rule, |p| p.x.powi(a as i32) * p.y.powi(b as i32));
                    let ex = exact(a, b);
                    assert!(
                        (num - ex).abs() <= 1e-13 * ex.abs().max(1.0),
                        "degree {deg} monomial x^{a} y^{b}: {num} vs {ex}"
                    );
                }
            }
        }
    }

    #[test]
    fn edge_exactness_and_weight_sum() {
        for deg in 0..=MAX_EXACT_DEGREE {
            let rule = edge_quadrature(deg).unwrap();
            let wsum: f64 = rule.weights.iter().sum();
            assert!((wsum - 2.0).abs() < 1e-13);
            for a in 0..=deg as u32 {
                let num: f64 = rule.points.iter().zip(&rule.weights).map(|(x, w)| w * x.powi(a as i32)).sum();
                let ex = if a % 2 == 1 { 0.0 } else { 2.0 / (a as f64 + 1.0) };
                assert!((num - ex).abs() < 1e-13, "degree {deg} x^{a}");
            }
        }
    }

    #[test]
    fn degree_out_of_range() {
        assert!(tri_quadrature(MAX_EXACT_DEGREE + 1).is_err());
        assert!(edge_quadrature(MAX_EXACT_DEGREE + 1).is_err());
    }

    #[test]
    fn mapped_triangle_area() {
        let rule = tri_quadrature(2).unwrap();
        let v = [Vec2::new(0.2, 0.1), Vec2::new(1.3, 0.4), Vec2::new(0.5, 1.1)];
        let (_, wts) = map_to_triangle(&rule, &v);
        let total: f64 = wts.iter().sum();
        assert!((total - triangle_area(&v)).abs() < 1e-14);
    }
}
