//! Error norms, convergence rates, conservation residuals, flux continuity,
//! and field sampling.
//!
//! With `Q_h u` the projected exact solution, the error `e_h = u_h - Q_h u`
//! is measured in the broken norms
//!
//! ```text
//!   ||e0||^2      = sum_T int_T e0^2,
//!   ||grad e0||^2 = sum_T int_T |grad e0|^2,
//!   ||eb||^2      = sum_T h_T ||ub - Q_b u||^2_{dT},
//!   ||en||^2      = sum_T h_T ||un - Q_n((a grad u + b u).n)||^2_{dT},
//! ```
//!
//! where the boundary sums run over element sides, so every interior edge
//! contributes once per adjacent element and the flux comparison is taken in
//! the element-local (outward normal) orientation.

use crate::assembly::{local_forms, project_qh, LocalDofs};
use crate::basis::legendre_values;
use crate::problem::ProblemSpec;
use crate::quadrature::{map_to_triangle, tri_quadrature};
use crate::solver::SolveReport;
use crate::space::WgSpace;
use crate::{Result, Vec2};
use nalgebra::DVector;
use rayon::prelude::*;
use std::fmt::Write as _;

/// Summation with a fixed pairwise-tree order so that parallel-computed
/// contributions reduce deterministically.
pub(crate) fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        2 => v[0] + v[1],
        n => pairwise_sum(&v[..n / 2]) + pairwise_sum(&v[n / 2..]),
    }
}

/// The four error norms of one solve.
#[derive(Debug, Clone, Copy)]
pub struct ErrorNorms {
    pub e0: f64,
    pub grad_e0: f64,
    pub eb: f64,
    pub en: f64,
}

/// Compute the broken error norms against the projected exact solution.
pub fn error_norms(solution: &[f64], problem: &ProblemSpec, space: &WgSpace) -> Result<ErrorNorms> {
    let qh = project_qh(space, problem)?;
    let mesh = &space.mesh;
    let rule = tri_quadrature(space.quad_degree.max(2 * space.k + 4))?;

    let per_elem: Vec<[f64; 4]> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let basis = space.tri_basis(t);
            let (pts, wts) = map_to_triangle(&rule, &mesh.triangle_vertices(t));
            let range = space.u0_range(t);
            let d0: Vec<f64> =
                solution[range.clone()].iter().zip(&qh[range]).map(|(a, b)| a - b).collect();
            let mut e0 = 0.0;
            let mut ge0 = 0.0;
            for (&p, &w) in pts.iter().zip(&wts) {
                let vals = basis.eval(p);
                let grads = basis.eval_grad(p);
                let mut v = 0.0;
                let mut g = Vec2::zeros();
                for (i, &c) in d0.iter().enumerate() {
                    v += c * vals[i];
                    g += c * grads[i];
                }
                e0 += w * v * v;
                ge0 += w * g.norm_squared();
            }
            // edge components via Legendre orthogonality
            let h = mesh.h_tri[t];
            let mut eb = 0.0;
            let mut en = 0.0;
            for &(e, _) in &mesh.tri_edges[t] {
                let len = (mesh.points[mesh.edges[e][1]] - mesh.points[mesh.edges[e][0]]).norm();
                for (q, i) in space.ub_range(e).enumerate() {
                    let d = solution[i] - qh[i];
                    eb += h * d * d * len / (2.0 * q as f64 + 1.0);
                }
                for (q, i) in space.un_range(e).enumerate() {
                    let d = solution[i] - qh[i];
                    en += h * d * d * len / (2.0 * q as f64 + 1.0);
                }
            }
            [e0, ge0, eb, en]
        })
        .collect();

    let col = |j: usize| pairwise_sum(&per_elem.iter().map(|r| r[j]).collect::<Vec<_>>()).sqrt();
    Ok(ErrorNorms { e0: col(0), grad_e0: col(1), eb: col(2), en: col(3) })
}

/// Discrete seminorms `|||u_h - Q_h u|||_{W_h}` (when an exact solution is
/// available) and `|||lambda_h|||_{M_h}`.
pub fn seminorms(solution: &[f64], problem: &ProblemSpec, space: &WgSpace) -> Result<(Option<f64>, f64)> {
    let qh = problem.exact.as_ref().map(|_| project_qh(space, problem)).transpose()?;
    let dofs = LocalDofs::of(space);
    let per_elem: Vec<[f64; 2]> = (0..space.mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let lf = local_forms(space, problem, t)?;
            let s_val = match &qh {
                Some(qh) => {
                    let map = dofs.global_map(space, t);
                    let d: DVector<f64> =
                        DVector::from_iterator(map.len(), map.iter().map(|&g| solution[g] - qh[g]));
                    d.dot(&(&lf.s * &d))
                }
                None => 0.0,
            };
            let lam: DVector<f64> =
                DVector::from_iterator(space.dim_u0(), space.lambda_range(t).map(|g| solution[g]));
            let c_val = lam.dot(&(&lf.c * &lam));
            Ok([s_val, c_val])
        })
        .collect::<Result<_>>()?;
    let s_total = pairwise_sum(&per_elem.iter().map(|r| r[0]).collect::<Vec<_>>());
    let c_total = pairwise_sum(&per_elem.iter().map(|r| r[1]).collect::<Vec<_>>());
    Ok((qh.map(|_| s_total.max(0.0).sqrt()), c_total.max(0.0).sqrt()))
}

/// Per-element mass balance residual
/// `r_T = | -int_{dT} F_h . n - int_T f |` with numerical flux `F_h = un n`.
pub fn conservation_residual(solution: &[f64], problem: &ProblemSpec, space: &WgSpace) -> Result<Vec<f64>> {
    let mesh = &space.mesh;
    let rule = tri_quadrature(space.quad_degree)?;
    Ok((0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            // only the constant Legendre mode contributes to int_e un ds
            let mut outflux = 0.0;
            for &(e, sign) in &mesh.tri_edges[t] {
                let len = (mesh.points[mesh.edges[e][1]] - mesh.points[mesh.edges[e][0]]).norm();
                outflux += sign as f64 * solution[space.un_range(e).start] * len;
            }
            let (pts, wts) = map_to_triangle(&rule, &mesh.triangle_vertices(t));
            let f_int: f64 = pts.iter().zip(&wts).map(|(&p, &w)| w * (problem.load)(p)).sum();
            (-outflux - f_int).abs()
        })
        .collect())
}

/// L2 norm of the load over the mesh (used to scale conservation residuals).
pub fn load_l2_norm(problem: &ProblemSpec, space: &WgSpace) -> Result<f64> {
    let rule = tri_quadrature(space.quad_degree)?;
    let per: Vec<f64> = (0..space.mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let (pts, wts) = map_to_triangle(&rule, &space.mesh.triangle_vertices(t));
            pts.iter().zip(&wts).map(|(&p, &w)| w * (problem.load)(p) * (problem.load)(p)).sum()
        })
        .collect();
    Ok(pairwise_sum(&per).sqrt())
}

/// Maximum over interior edges of the normal-flux jump
/// `F_h|_{T1} . n_1 + F_h|_{T2} . n_2`, sampled at Gauss points.
/// Zero by construction because `un` is single-valued per edge.
pub fn flux_jump(solution: &[f64], space: &WgSpace) -> f64 {
    let mesh = &space.mesh;
    let sample = [-0.9f64, -0.5, 0.0, 0.5, 0.9];
    let mut worst = 0.0f64;
    for e in 0..mesh.num_edges() {
        let (t1, t2) = mesh.edge_tris[e];
        let Some(t2) = t2 else { continue };
        let sign = |t: usize| {
            mesh.tri_edges[t].iter().find(|&&(ei, _)| ei == e).map(|&(_, s)| s as f64).unwrap()
        };
        let (s1, s2) = (sign(t1), sign(t2));
        let coeffs = &solution[space.un_range(e)];
        for &tq in &sample {
            let vals = legendre_values(space.l, tq);
            let un: f64 = vals.iter().zip(coeffs).map(|(a, b)| a * b).sum();
            // local flux trace per side is sign * un; the normal components add
            worst = worst.max((s1 * un + s2 * un).abs());
        }
    }
    worst
}

/// One row of a convergence study.
#[derive(Debug, Clone)]
pub struct LevelReport {
    /// Nominal resolution (the tables' `1/h`).
    pub inv_h: usize,
    /// True mesh size (maximum triangle diameter).
    pub h: f64,
    pub n_unknowns: usize,
    pub norms: Option<ErrorNorms>,
    pub seminorm_u: Option<f64>,
    pub seminorm_lambda: f64,
    pub cons_residual: f64,
    pub flux_jump: f64,
    pub solve: SolveReport,
}

/// Rows of a refinement ladder plus observed convergence rates.
#[derive(Debug, Clone)]
pub struct ErrorReport {
    pub rows: Vec<LevelReport>,
}

/// Observed order between two errors under mesh ratio `ratio > 1`.
pub fn rate_between(coarse: f64, fine: f64, ratio: f64) -> Option<f64> {
    if coarse <= 0.0 || fine <= 0.0 {
        return None;
    }
    Some((coarse / fine).ln() / ratio.ln())
}

/// Per-row rates for (eb, en, grad_e0, e0); `None` on the first row and where
/// a level has exactly zero error.
pub fn rates(report: &ErrorReport) -> Vec<[Option<f64>; 4]> {
    let mut out = vec![[None; 4]; report.rows.len()];
    for i in 1..report.rows.len() {
        let (prev, cur) = (&report.rows[i - 1], &report.rows[i]);
        let ratio = cur.inv_h as f64 / prev.inv_h as f64;
        if let (Some(p), Some(c)) = (prev.norms, cur.norms) {
            out[i] = [
                rate_between(p.eb, c.eb, ratio),
                rate_between(p.en, c.en, ratio),
                rate_between(p.grad_e0, c.grad_e0, ratio),
                rate_between(p.e0, c.e0, ratio),
            ];
        }
    }
    out
}

impl ErrorReport {
    /// CSV with the fixed schema
    /// `example,k,l,tau1,tau2,inv_h,e0,rate_e0,grad_e0,rate_grad,eb,rate_eb,en,rate_en,cons_resid`.
    pub fn to_csv(&self, example: &str, k: usize, l: usize, tau1: f64, tau2: f64) -> String {
        let mut s = String::from(
            "example,k,l,tau1,tau2,inv_h,e0,rate_e0,grad_e0,rate_grad,eb,rate_eb,en,rate_en,cons_resid\n",
        );
        let rates = rates(self);
        let fmt_opt = |v: Option<f64>| v.map(|x| format!("{x:.6e}")).unwrap_or_default();
        let fmt_rate = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_default();
        for (row, rr) in self.rows.iter().zip(&rates) {
            let n = row.norms;
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{:.6e}",
                example,
                k,
                l,
                tau1,
                tau2,
                row.inv_h,
                fmt_opt(n.map(|n| n.e0)),
                fmt_rate(rr[3]),
                fmt_opt(n.map(|n| n.grad_e0)),
                fmt_rate(rr[2]),
                fmt_opt(n.map(|n| n.eb)),
                fmt_rate(rr[0]),
                fmt_opt(n.map(|n| n.en)),
                fmt_rate(rr[1]),
                row.cons_residual,
            );
        }
        s
    }

    /// Markdown table in the layout of the convergence tables:
    /// `1/h | eb rate | en rate | grad_e0 rate | e0 rate`.
    pub fn to_markdown(&self, title: &str) -> String {
        let mut s = format!("### {title}\n\n");
        if self.rows.iter().any(|r| r.norms.is_some()) {
            s.push_str("| 1/h | ||e_b|| | rate | ||e_n|| | rate | ||grad e_0|| | rate | ||e_0|| | rate |\n");
            s.push_str("|----:|--------:|-----:|--------:|-----:|-------------:|-----:|--------:|-----:|\n");
            let rates = rates(self);
            for (row, rr) in self.rows.iter().zip(&rates) {
                let n = row.norms.unwrap();
                let r = |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "--".into());
                let _ = writeln!(
                    s,
                    "| {} | {:.2e} | {} | {:.2e} | {} | {:.2e} | {} | {:.2e} | {} |",
                    row.inv_h,
                    n.eb,
                    r(rr[0]),
                    n.en,
                    r(rr[1]),
                    n.grad_e0,
                    r(rr[2]),
                    n.e0,
                    r(rr[3]),
                );
            }
        } else {
            s.push_str("| 1/h | unknowns | conservation residual | flux jump |\n");
            s.push_str("|----:|---------:|----------------------:|----------:|\n");
            for row in &self.rows {
                let _ = writeln!(
                    s,
                    "| {} | {} | {:.2e} | {:.2e} |",
                    row.inv_h, row.n_unknowns, row.cons_residual, row.flux_jump
                );
            }
        }
        s
    }
}

/// Rasterized interior field for plotting.
#[derive(Debug, Clone)]
pub struct FieldSample {
    pub nx: usize,
    pub ny: usize,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Row-major `u0` values; `None` outside the domain.
    pub values: Vec<Option<f64>>,
}

impl FieldSample {
    /// CSV grid with header `x,y,u`; outside-domain nodes print `nan`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y,u\n");
        for j in 0..self.ny {
            for i in 0..self.nx {
                match self.values[j * self.nx + i] {
                    Some(v) => {
                        let _ = writeln!(s, "{:.10e},{:.10e},{:.10e}", self.xs[i], self.ys[j], v);
                    }
                    None => {
                        let _ = writeln!(s, "{:.10e},{:.10e},nan", self.xs[i], self.ys[j]);
                    }
                }
            }
        }
        s
    }
}

/// Evaluate `u0` on a regular grid over the mesh bounding box; grid nodes
/// outside every triangle are flagged as `None`.
pub fn sample_field(solution: &[f64], space: &WgSpace, resolution: usize) -> FieldSample {
    let mesh = &space.mesh;
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in &mesh.points {
        xmin = xmin.min(p.x);
        xmax = xmax.max(p.x);
        ymin = ymin.min(p.y);
        ymax = ymax.max(p.y);
    }
    let n = resolution.max(2);
    let xs: Vec<f64> = (0..n).map(|i| xmin + (xmax - xmin) * i as f64 / (n - 1) as f64).collect();
    let ys: Vec<f64> = (0..n).map(|j| ymin + (ymax - ymin) * j as f64 / (n - 1) as f64).collect();

    // bucket triangles by bounding box for point location
    let grid = 64usize;
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); grid * grid];
    let to_cell = |x: f64, min: f64, max: f64| -> usize {
        if max <= min {
            return 0;
        }
        (((x - min) / (max - min) * grid as f64) as isize).clamp(0, grid as isize - 1) as usize
    };
    for t in 0..mesh.num_triangles() {
        let v = mesh.triangle_vertices(t);
        let (tx0, tx1) = (
            v.iter().map(|p| p.x).fold(f64::MAX, f64::min),
            v.iter().map(|p| p.x).fold(f64::MIN, f64::max),
        );
        let (ty0, ty1) = (
            v.iter().map(|p| p.y).fold(f64::MAX, f64::min),
            v.iter().map(|p| p.y).fold(f64::MIN, f64::max),
        );
        for cx in to_cell(tx0, xmin, xmax)..=to_cell(tx1, xmin, xmax) {
            for cy in to_cell(ty0, ymin, ymax)..=to_cell(ty1, ymin, ymax) {
                buckets[cy * grid + cx].push(t);
            }
        }
    }

    let locate = |p: Vec2| -> Option<usize> {
        let bucket = &buckets[to_cell(p.y, ymin, ymax) * grid + to_cell(p.x, xmin, xmax)];
        bucket
            .iter()
            .copied()
            .find(|&t| {
                let v = mesh.triangle_vertices(t);
                let area2 = (v[1] - v[0]).perp(&(v[2] - v[0]));
                let tol = -1e-12 * area2;
                (v[1] - v[0]).perp(&(p - v[0])) >= tol
                    && (v[2] - v[1]).perp(&(p - v[1])) >= tol
                    && (v[0] - v[2]).perp(&(p - v[2])) >= tol
            })
    };

    let values: Vec<Option<f64>> = ys
        .par_iter()
        .flat_map_iter(|&y| {
            xs.iter().map(move |&x| Vec2::new(x, y)).collect::<Vec<_>>()
        })
        .map(|p| locate(p).map(|t| crate::assembly::eval_u0(space, solution, t, p)))
        .collect();

    FieldSample { nx: n, ny: n, xs, ys, values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{coarse_mesh, BoundaryTag, Domain};
    use crate::problem::{builtin, manufacture_constant, ExampleId};
    use crate::Mat2;
    use std::sync::Arc;

    fn linear_problem() -> ProblemSpec {
        manufacture_constant(
            "linear",
            Mat2::identity(),
            Vec2::zeros(),
            Arc::new(|p: Vec2| p.x + p.y),
            Arc::new(|_| Vec2::new(1.0, 1.0)),
            Arc::new(|_| [0.0; 3]),
        )
    }

    fn space_on(domain: &Domain, refines: usize, k: usize, l: usize) -> WgSpace {
        let problem_classifier = |_: Vec2, _: Vec2| BoundaryTag::Dirichlet;
        let mut mesh = coarse_mesh(domain).unwrap();
        for _ in 0..refines {
            mesh = mesh.refine_uniform();
        }
        let mesh = Arc::new(mesh.tag_boundary(problem_classifier));
        WgSpace::new(mesh, k, l, 0.0, 0.0).unwrap()
    }

    #[test]
    fn norms_vanish_for_projected_solution() {
        let problem = builtin(ExampleId::Ex1);
        let space = space_on(&Domain::unit_square(), 1, 1, 1);
        let mut full = vec![0.0; space.n_total()];
        let qh = project_qh(&space, &problem).unwrap();
        full[..space.n_u()].copy_from_slice(&qh);
        let norms = error_norms(&full, &problem, &space).unwrap();
        assert!(norms.e0 < 1e-13 && norms.grad_e0 < 1e-12 && norms.eb < 1e-13 && norms.en < 1e-12);
        let (su, sl) = seminorms(&full, &problem, &space).unwrap();
        assert!(su.unwrap() < 1e-10);
        assert_eq!(sl, 0.0); // lambda block is zero here
    }

    #[test]
    fn norms_positive_for_perturbed_solution() {
        let problem = builtin(ExampleId::Ex1);
        let space = space_on(&Domain::unit_square(), 0, 1, 1);
        let qh = project_qh(&space, &problem).unwrap();
        let mut full = vec![0.0; space.n_total()];
        full[..space.n_u()].copy_from_slice(&qh);
        full[0] += 1e-3; // perturb one u0 coefficient
        full[space.n_u0()] += 1e-3; // one ub coefficient
        full[space.n_u0() + space.n_ub()] += 1e-3; // one un coefficient
        let norms = error_norms(&full, &problem, &space).unwrap();
        assert!(norms.e0 > 0.0 && norms.grad_e0 == 0.0 && norms.eb > 0.0 && norms.en > 0.0);
    }

    #[test]
    fn conservation_zero_for_zero_data() {
        let problem = manufacture_constant(
            "zero",
            Mat2::identity(),
            Vec2::zeros(),
            Arc::new(|_| 0.0),
            Arc::new(|_| Vec2::zeros()),
            Arc::new(|_| [0.0; 3]),
        );
        let space = space_on(&Domain::unit_square(), 1, 1, 1);
        let solution = vec![0.0; space.n_total()];
        let r = conservation_residual(&solution, &problem, &space).unwrap();
        assert!(r.into_iter().all(|v| v == 0.0));
    }

    #[test]
    fn flux_jump_structurally_zero() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let space = space_on(&Domain::unit_square(), 1, 1, 1);
        let mut rng = StdRng::seed_from_u64(3);
        // randomized un coefficients: the jump must still vanish
        let solution: Vec<f64> = (0..space.n_total()).map(|_| rng.random_range(-10.0..10.0)).collect();
        assert_eq!(flux_jump(&solution, &space), 0.0);
    }

    #[test]
    fn flux_jump_two_triangle_hand_check() {
        // single square, two triangles, one interior edge: the two signs are
        // opposite so the jump telescopes to zero for any coefficient
        let points = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        let tris = vec![[0, 1, 2], [0, 2, 3]];
        let mesh = Arc::new(crate::mesh::Mesh::from_cells(points, tris).unwrap());
        let interior: Vec<usize> = (0..mesh.num_edges()).filter(|&e| !mesh.is_boundary_edge(e)).collect();
        assert_eq!(interior.len(), 1);
        let space = WgSpace::new(mesh, 1, 1, 0.0, 0.0).unwrap();
        let mut solution = vec![0.0; space.n_total()];
        for i in space.un_range(interior[0]) {
            solution[i] = 2.5;
        }
        assert_eq!(flux_jump(&solution, &space), 0.0);
    }

    #[test]
    fn rate_computation() {
        assert_eq!(rate_between(4e-2, 1e-2, 2.0), Some(2.0));
        assert_eq!(rate_between(1e-2, 1e-2, 2.0), Some(0.0));
        assert_eq!(rate_between(0.0, 1e-2, 2.0), None);
    }

    #[test]
    fn raster_reproduces_linear_field() {
        let problem = linear_problem();
        let space = space_on(&Domain::unit_square(), 1, 1, 1);
        let qh = project_qh(&space, &problem).unwrap();
        let mut full = vec![0.0; space.n_total()];
        full[..space.n_u()].copy_from_slice(&qh);
        let raster = sample_field(&full, &space, 41);
        for j in 0..raster.ny {
            for i in 0..raster.nx {
                let v = raster.values[j * raster.nx + i].expect("inside unit square");
                assert!((v - (raster.xs[i] + raster.ys[j])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn raster_flags_l_shape_cutout() {
        let domain = Domain::l_shape();
        let space = space_on(&domain, 1, 1, 1);
        let full = vec![0.0; space.n_total()];
        let raster = sample_field(&full, &space, 81);
        let mut outside = 0;
        for j in 0..raster.ny {
            for i in 0..raster.nx {
                let p = Vec2::new(raster.xs[i], raster.ys[j]);
                let sampled = raster.values[j * raster.nx + i].is_some();
                // point-in-polygon oracle, away from the boundary where
                // locate() tolerances differ legitimately
                let clearly_out = !domain.contains(p)
                    && (p.x - 0.5).abs() > 1e-6
                    && (p.y - 0.5).abs() > 1e-6;
                if clearly_out {
                    assert!(!sampled, "point {p:?} should be outside");
                    outside += 1;
                }
            }
        }
        assert!(outside > 0);
    }

    #[test]
    fn csv_schema() {
        let report = ErrorReport {
            rows: vec![LevelReport {
                inv_h: 4,
                h: 0.35,
                n_unknowns: 10,
                norms: Some(ErrorNorms { e0: 1e-2, grad_e0: 1e-1, eb: 2e-2, en: 3e-1 }),
                seminorm_u: Some(0.5),
                seminorm_lambda: 0.1,
                cons_residual: 1e-12,
                flux_jump: 0.0,
                solve: SolveReport { method: "direct", n: 10, nnz: 20, iterations: 0, residual: 1e-14 },
            }],
        };
        let csv = report.to_csv("ex1", 1, 1, 1.0, 1.0);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "example,k,l,tau1,tau2,inv_h,e0,rate_e0,grad_e0,rate_grad,eb,rate_eb,en,rate_en,cons_resid"
        );
        let row = lines.next().unwrap();
        assert!(row.starts_with("ex1,1,1,1,1,4,"));
        // rate cells empty on the first level
        assert!(row.contains(",,"));
    }
}
