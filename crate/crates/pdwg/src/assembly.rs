//! Discrete weak gradients, local bilinear forms, and global assembly of the
//! primal-dual saddle-point system.
//!
//! For a weak function `v = {v0, vb, vn}` the discrete weak gradient
//! `grad_w v` is the vector polynomial in `[P_{k-1}(T)]^2` defined by duality,
//!
//! ```text
//!   (grad_w v, psi)_T = -(v0, div psi)_T + <vb, psi . n>_{dT}.
//! ```
//!
//! The bilinear forms assembled here are
//!
//! ```text
//!   s(u, v) = sum_T h_T^-3 <u0 - ub, v0 - vb>_{dT}
//!           + h_T^-1 <(a grad u0 + b u0).n - un, (a grad v0 + b v0).n - vn>_{dT},
//!   b(u, q) = sum_T (a grad_w u + b u0, grad q)_T - <un, q>_{dT},
//!   c(p, q) = tau1 sum_T h_T^2 (grad p, grad q)_T
//!           + tau2 sum_T h_T^4 sum_ij (d2_ij p, d2_ij q)_T,
//! ```
//!
//! and the global system over free unknowns is the symmetric indefinite
//! block matrix `[[S, B^T], [B, -C]]` with right-hand side `(0, (f, q))`.
//! Trace (`ub`) coefficients on Dirichlet edges and flux (`un`) coefficients
//! on Neumann edges are eliminated symmetrically: their columns move to the
//! right-hand side and their rows are dropped.

use crate::basis::{EdgeBasis, TriBasis};
use crate::mesh::BoundaryTag;
use crate::problem::ProblemSpec;
use crate::quadrature::{edge_quadrature, map_to_segment, map_to_triangle, tri_quadrature, SegRule, TriRule};
use crate::solver::SparseMatrix;
use crate::space::WgSpace;
use crate::{Error, Result, Vec2};
use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;

/// Per-element quadrature and geometry data shared by the local computations.
pub(crate) struct ElemContext {
    pub t: usize,
    pub h: f64,
    pub basis: TriBasis,
    pub basis_km1: TriBasis,
    pub tri_pts: Vec<Vec2>,
    pub tri_wts: Vec<f64>,
    pub edges: [EdgeCtx; 3],
}

pub(crate) struct EdgeCtx {
    pub sign: f64,
    pub normal_out: Vec2,
    pub pts: Vec<Vec2>,
    pub wts: Vec<f64>,
    pub params: Vec<f64>,
    pub trace: EdgeBasis,
    pub flux: EdgeBasis,
}

impl ElemContext {
    pub fn new(space: &WgSpace, t: usize, tri_rule: &TriRule, seg_rule: &SegRule) -> Self {
        let mesh = &space.mesh;
        let verts = mesh.triangle_vertices(t);
        let centroid = mesh.triangle_centroid(t);
        let h = mesh.h_tri[t];
        let (tri_pts, tri_wts) = map_to_triangle(tri_rule, &verts);
        let edges = std::array::from_fn(|i| {
            let (e, sign) = mesh.tri_edges[t][i];
            let frame = mesh.edge_frame(e);
            let [a, b] = mesh.edges[e];
            let (pts, wts, params) = map_to_segment(seg_rule, mesh.points[a], mesh.points[b]);
            EdgeCtx {
                sign: sign as f64,
                normal_out: sign as f64 * frame.global_normal,
                pts,
                wts,
                params,
                trace: space.edge_basis(e),
                flux: space.flux_basis(e),
            }
        });
        ElemContext {
            t,
            h,
            basis: TriBasis::new(space.k, centroid, h),
            basis_km1: TriBasis::new(space.k - 1, centroid, h),
            tri_pts,
            tri_wts,
            edges,
        }
    }

    fn rules(space: &WgSpace) -> Result<(TriRule, SegRule)> {
        Ok((tri_quadrature(space.quad_degree)?, edge_quadrature(space.quad_degree)?))
    }
}

/// Element matrix of the discrete weak gradient.
///
/// Maps the local coefficients `(u0, ub on the three edges)` to the
/// coefficients of `grad_w v` in the `[P_{k-1}(T)]^2` basis; rows hold the
/// x-component block then the y-component block.
#[derive(Debug, Clone)]
pub struct LocalWeakGradient {
    pub matrix: DMatrix<f64>,
    pub dim_km1: usize,
}

impl LocalWeakGradient {
    /// Number of `(u0, ub)` input coefficients.
    pub fn input_dim(&self) -> usize {
        self.matrix.ncols()
    }
}

/// Compute the weak-gradient matrix of one element.
pub fn weak_gradient(space: &WgSpace, t: usize) -> Result<LocalWeakGradient> {
    let (tri_rule, seg_rule) = ElemContext::rules(space)?;
    let ctx = ElemContext::new(space, t, &tri_rule, &seg_rule);
    weak_gradient_ctx(space, &ctx)
}

fn weak_gradient_ctx(space: &WgSpace, ctx: &ElemContext) -> Result<LocalWeakGradient> {
    let nd = ctx.basis_km1.dim();
    let n_u0 = space.dim_u0();
    let n_ub = space.dim_ub();
    let ncols = n_u0 + 3 * n_ub;

    let mass = ctx.basis_km1.mass_matrix(&ctx.tri_pts, &ctx.tri_wts);
    let chol = Cholesky::new(mass).ok_or(Error::DegenerateElement(ctx.t))?;

    let mut rx = DMatrix::zeros(nd, ncols);
    let mut ry = DMatrix::zeros(nd, ncols);

    // -(v0, div psi)_T for psi = (m_i, 0) and (0, m_i)
    for (&p, &w) in ctx.tri_pts.iter().zip(&ctx.tri_wts) {
        let vals_k = ctx.basis.eval(p);
        let grads = ctx.basis_km1.eval_grad(p);
        for i in 0..nd {
            for j in 0..n_u0 {
                rx[(i, j)] -= w * vals_k[j] * grads[i].x;
                ry[(i, j)] -= w * vals_k[j] * grads[i].y;
            }
        }
    }
    // <vb, psi . n>_{dT}
    for (le, edge) in ctx.edges.iter().enumerate() {
        for ((&p, &w), &tq) in edge.pts.iter().zip(&edge.wts).zip(&edge.params) {
            let vals_km1 = ctx.basis_km1.eval(p);
            let pvals = edge.trace.eval_param(tq);
            for i in 0..nd {
                for (q, &pv) in pvals.iter().enumerate() {
                    let col = n_u0 + le * n_ub + q;
                    rx[(i, col)] += w * pv * vals_km1[i] * edge.normal_out.x;
                    ry[(i, col)] += w * pv * vals_km1[i] * edge.normal_out.y;
                }
            }
        }
    }

    let gx = chol.solve(&rx);
    let gy = chol.solve(&ry);
    let mut matrix = DMatrix::zeros(2 * nd, ncols);
    matrix.rows_mut(0, nd).copy_from(&gx);
    matrix.rows_mut(nd, nd).copy_from(&gy);
    Ok(LocalWeakGradient { matrix, dim_km1: nd })
}

/// Element contributions to `s`, `b`, `c` and the load functional.
#[derive(Debug, Clone)]
pub struct LocalForms {
    /// Stabilizer block, `nu x nu` over local `(u0, ub, un)` coefficients.
    pub s: DMatrix<f64>,
    /// Constraint block, `n_lambda x nu`.
    pub b: DMatrix<f64>,
    /// Dual stabilizer block, `n_lambda x n_lambda`.
    pub c: DMatrix<f64>,
    /// `(f, q)_T` against the multiplier basis.
    pub rhs: DVector<f64>,
}

/// Local degree-of-freedom layout inside an element:
/// `u0` block, then `ub` per local edge, then `un` per local edge.
pub(crate) struct LocalDofs {
    pub n_u0: usize,
    pub n_ub: usize,
    pub n_un: usize,
}

impl LocalDofs {
    pub fn of(space: &WgSpace) -> Self {
        LocalDofs { n_u0: space.dim_u0(), n_ub: space.dim_ub(), n_un: space.dim_un() }
    }

    pub fn total(&self) -> usize {
        self.n_u0 + 3 * (self.n_ub + self.n_un)
    }

    pub fn ub_col(&self, local_edge: usize, q: usize) -> usize {
        self.n_u0 + local_edge * self.n_ub + q
    }

    pub fn un_col(&self, local_edge: usize, q: usize) -> usize {
        self.n_u0 + 3 * self.n_ub + local_edge * self.n_un + q
    }

    /// Global indices corresponding to the local layout.
    pub fn global_map(&self, space: &WgSpace, t: usize) -> Vec<usize> {
        let mut map = Vec::with_capacity(self.total());
        map.extend(space.u0_range(t));
        for i in 0..3 {
            map.extend(space.ub_range(space.mesh.tri_edges[t][i].0));
        }
        for i in 0..3 {
            map.extend(space.un_range(space.mesh.tri_edges[t][i].0));
        }
        map
    }
}

/// Assemble the local forms of one element.
pub fn local_forms(space: &WgSpace, problem: &ProblemSpec, t: usize) -> Result<LocalForms> {
    let (tri_rule, seg_rule) = ElemContext::rules(space)?;
    let ctx = ElemContext::new(space, t, &tri_rule, &seg_rule);
    local_forms_ctx(space, problem, &ctx)
}

fn local_forms_ctx(space: &WgSpace, problem: &ProblemSpec, ctx: &ElemContext) -> Result<LocalForms> {
    let dofs = LocalDofs::of(space);
    let nu = dofs.total();
    let nl = space.dim_u0();
    let nd = ctx.basis_km1.dim();
    let wg = weak_gradient_ctx(space, ctx)?;
    let h = ctx.h;
    let (w_h3, w_h1) = (h.powi(-3), h.recip());
    let (tau1_h2, tau2_h4) = (space.tau1 * h * h, space.tau2 * h.powi(4));

    let mut s = DMatrix::zeros(nu, nu);
    let mut b = DMatrix::zeros(nl, nu);
    let mut c = DMatrix::zeros(nl, nl);
    let mut rhs = DVector::zeros(nl);

    // volume terms: b(., q) gradient part, c(., .), and (f, q)
    let n_wg_cols = wg.input_dim();
    for (&p, &w) in ctx.tri_pts.iter().zip(&ctx.tri_wts) {
        let vals = ctx.basis.eval(p);
        let grads = ctx.basis.eval_grad(p);
        let a = (problem.diffusion)(p);
        let bv = (problem.convection)(p);
        let fv = (problem.load)(p);

        for m in 0..nl {
            rhs[m] += w * fv * vals[m];
        }

        if tau1_h2 > 0.0 {
            for i in 0..nl {
                for j in i..nl {
                    c[(i, j)] += tau1_h2 * w * grads[i].dot(&grads[j]);
                }
            }
        }
        if tau2_h4 > 0.0 {
            let hess = ctx.basis.eval_hess(p);
            for i in 0..nl {
                for j in i..nl {
                    // sum over all (i,j) derivative pairs counts mixed terms twice
                    let v = hess[i][0] * hess[j][0] + 2.0 * hess[i][1] * hess[j][1] + hess[i][2] * hess[j][2];
                    c[(i, j)] += tau2_h4 * w * v;
                }
            }
        }

        // a grad_w phi_col + b phi_col (the convective part only for u0 columns)
        let vals_km1 = ctx.basis_km1.eval(p);
        for col in 0..n_wg_cols {
            let mut g = Vec2::zeros();
            for i in 0..nd {
                g.x += wg.matrix[(i, col)] * vals_km1[i];
                g.y += wg.matrix[(nd + i, col)] * vals_km1[i];
            }
            let mut field = a * g;
            if col < dofs.n_u0 {
                field += bv * vals[col];
            }
            for m in 0..nl {
                b[(m, col)] += w * grads[m].dot(&field);
            }
        }
    }
    // symmetrize c
    for i in 0..nl {
        for j in 0..i {
            c[(i, j)] = c[(j, i)];
        }
    }

    // boundary terms: the stabilizer s and the -<un, q> part of b
    let mut d1 = vec![0.0; nu];
    let mut d2 = vec![0.0; nu];
    for (le, edge) in ctx.edges.iter().enumerate() {
        for ((&p, &w), &tq) in edge.pts.iter().zip(&edge.wts).zip(&edge.params) {
            let vals = ctx.basis.eval(p);
            let grads = ctx.basis.eval_grad(p);
            let a = (problem.diffusion)(p);
            let bv = (problem.convection)(p);
            let pvals = edge.trace.eval_param(tq);
            let nvals = edge.flux.eval_param(tq);

            d1.iter_mut().for_each(|v| *v = 0.0);
            d2.iter_mut().for_each(|v| *v = 0.0);
            for j in 0..dofs.n_u0 {
                d1[j] = vals[j];
                d2[j] = (a * grads[j] + bv * vals[j]).dot(&edge.normal_out);
            }
            for (q, &pv) in pvals.iter().enumerate() {
                d1[dofs.ub_col(le, q)] = -pv;
            }
            // the local flux trace is sign * (global un)
            for (q, &nv) in nvals.iter().enumerate() {
                d2[dofs.un_col(le, q)] = -edge.sign * nv;
            }

            for i in 0..nu {
                let (a1, a2) = (w_h3 * w * d1[i], w_h1 * w * d2[i]);
                if a1 != 0.0 || a2 != 0.0 {
                    for j in 0..nu {
                        s[(i, j)] += a1 * d1[j] + a2 * d2[j];
                    }
                }
            }

            for (q, &nv) in nvals.iter().enumerate() {
                let col = dofs.un_col(le, q);
                for m in 0..nl {
                    b[(m, col)] -= w * edge.sign * nv * vals[m];
                }
            }
        }
    }

    Ok(LocalForms { s, b, c, rhs })
}

/// The assembled saddle-point system over free unknowns.
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    /// Free index of each global DOF (`usize::MAX` for constrained ones).
    pub free_of_global: Vec<usize>,
    pub global_of_free: Vec<usize>,
    /// Constrained DOFs with their prescribed coefficient values.
    pub prescribed: Vec<(usize, f64)>,
    pub n_u: usize,
    pub n_lambda: usize,
}

impl SaddleSystem {
    pub fn n_free(&self) -> usize {
        self.global_of_free.len()
    }

    /// Expand a free-DOF solution to the full coefficient vector
    /// (prescribed values filled in).
    pub fn recover_full(&self, x_free: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.n_u + self.n_lambda];
        for (f, &g) in self.global_of_free.iter().enumerate() {
            full[g] = x_free[f];
        }
        for &(g, v) in &self.prescribed {
            full[g] = v;
        }
        full
    }
}

/// Project the Dirichlet datum onto an edge trace basis.
fn project_edge<F: Fn(Vec2) -> f64>(basis: &EdgeBasis, seg_rule: &SegRule, f: F) -> Vec<f64> {
    let (pts, wts, params) = map_to_segment(seg_rule, basis.a, basis.b);
    let mut coeffs = vec![0.0; basis.dim()];
    for ((&p, &w), &tq) in pts.iter().zip(&wts).zip(&params) {
        let pv = basis.eval_param(tq);
        let fv = f(p);
        for (q, &v) in pv.iter().enumerate() {
            coeffs[q] += w * fv * v;
        }
    }
    for (q, cq) in coeffs.iter_mut().enumerate() {
        *cq /= basis.mass_diag(q);
    }
    coeffs
}

/// Prescribed boundary coefficients: `ub = Q_b g1` on Dirichlet edges and
/// `un = Q_n g2` (stored in global orientation) on Neumann edges.
fn boundary_constraints(space: &WgSpace, problem: &ProblemSpec, seg_rule: &SegRule) -> Result<Vec<(usize, f64)>> {
    let mesh = &space.mesh;
    let mut prescribed = Vec::new();
    for e in 0..mesh.num_edges() {
        if !mesh.is_boundary_edge(e) {
            continue;
        }
        match mesh.boundary_tag[e] {
            None => return Err(Error::UntaggedBoundaryEdge(e)),
            Some(BoundaryTag::Dirichlet) => {
                let basis = space.edge_basis(e);
                let g1 = &problem.dirichlet;
                let coeffs = project_edge(&basis, seg_rule, |p| g1(p));
                for (q, v) in coeffs.into_iter().enumerate() {
                    prescribed.push((space.ub_range(e).start + q, v));
                }
            }
            Some(BoundaryTag::Neumann) => {
                let t = mesh.edge_tris[e].0;
                let sign = mesh.tri_edges[t].iter().find(|&&(ei, _)| ei == e).unwrap().1 as f64;
                let n_out = mesh.outward_normal(t, e);
                let basis = space.flux_basis(e);
                let g2 = &problem.neumann;
                let coeffs = project_edge(&basis, seg_rule, |p| g2(p, n_out));
                for (q, v) in coeffs.into_iter().enumerate() {
                    prescribed.push((space.un_range(e).start + q, sign * v));
                }
            }
        }
    }
    Ok(prescribed)
}

/// Assemble the global system `[[S, B^T], [B, -C]] x = (0, (f, q))` with
/// boundary conditions eliminated symmetrically.
pub fn assemble(space: &WgSpace, problem: &ProblemSpec) -> Result<SaddleSystem> {
    let mesh = &space.mesh;
    let (tri_rule, seg_rule) = ElemContext::rules(space)?;
    let prescribed = boundary_constraints(space, problem, &seg_rule)?;

    let n_total = space.n_total();
    let mut value_of = vec![f64::NAN; n_total];
    let mut constrained = vec![false; n_total];
    for &(g, v) in &prescribed {
        constrained[g] = true;
        value_of[g] = v;
    }
    let mut free_of_global = vec![usize::MAX; n_total];
    let mut global_of_free = Vec::with_capacity(n_total - prescribed.len());
    for g in 0..n_total {
        if !constrained[g] {
            free_of_global[g] = global_of_free.len();
            global_of_free.push(g);
        }
    }

    let locals: Vec<LocalForms> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let ctx = ElemContext::new(space, t, &tri_rule, &seg_rule);
            local_forms_ctx(space, problem, &ctx)
        })
        .collect::<Result<_>>()?;

    let nf = global_of_free.len();
    let mut rhs = vec![0.0; nf];
    let dofs = LocalDofs::of(space);
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    for (t, lf) in locals.iter().enumerate() {
        let map_u = dofs.global_map(space, t);
        let lam = space.lambda_range(t);
        // u rows: S u + B^T lambda = 0
        for (li, &gi) in map_u.iter().enumerate() {
            if constrained[gi] {
                continue;
            }
            let r = free_of_global[gi];
            for (lj, &gj) in map_u.iter().enumerate() {
                let v = lf.s[(li, lj)];
                if v == 0.0 {
                    continue;
                }
                if constrained[gj] {
                    rhs[r] -= v * value_of[gj];
                } else {
                    triplets.push((r, free_of_global[gj], v));
                }
            }
            for (lm, gm) in lam.clone().enumerate() {
                let v = lf.b[(lm, li)];
                if v != 0.0 {
                    triplets.push((r, free_of_global[gm], v));
                }
            }
        }
        // lambda rows: B u - C lambda = (f, q)
        for (lm, gm) in lam.clone().enumerate() {
            let r = free_of_global[gm];
            rhs[r] += lf.rhs[lm];
            for (lj, &gj) in map_u.iter().enumerate() {
                let v = lf.b[(lm, lj)];
                if v == 0.0 {
                    continue;
                }
                if constrained[gj] {
                    rhs[r] -= v * value_of[gj];
                } else {
                    triplets.push((r, free_of_global[gj], v));
                }
            }
            for (lm2, gm2) in lam.clone().enumerate() {
                let v = -lf.c[(lm, lm2)];
                if v != 0.0 {
                    triplets.push((r, free_of_global[gm2], v));
                }
            }
        }
    }

    let matrix = SparseMatrix::from_triplets(nf, &triplets);
    Ok(SaddleSystem {
        matrix,
        rhs,
        free_of_global,
        global_of_free,
        prescribed,
        n_u: space.n_u(),
        n_lambda: space.n_lambda(),
    })
}

/// `Q_h w = {Q_0 w, Q_b w, Q_n((a grad w + b w) . n)}` of the exact solution:
/// elementwise and edgewise L2 projections, with the flux component stored in
/// the global edge orientation. Returns the `n_u` primal coefficients.
pub fn project_qh(space: &WgSpace, problem: &ProblemSpec) -> Result<Vec<f64>> {
    let exact = problem.exact.as_ref().ok_or(Error::MissingExact)?;
    let mesh = &space.mesh;
    let (tri_rule, seg_rule) = ElemContext::rules(space)?;
    let mut out = vec![0.0; space.n_u()];

    for t in 0..mesh.num_triangles() {
        let basis = space.tri_basis(t);
        let (pts, wts) = map_to_triangle(&tri_rule, &mesh.triangle_vertices(t));
        let mass = basis.mass_matrix(&pts, &wts);
        let chol = Cholesky::new(mass).ok_or(Error::DegenerateElement(t))?;
        let mut rhs = DVector::zeros(basis.dim());
        for (&p, &w) in pts.iter().zip(&wts) {
            let vals = basis.eval(p);
            let uv = (exact.u)(p);
            for (i, &v) in vals.iter().enumerate() {
                rhs[i] += w * uv * v;
            }
        }
        let coeffs = chol.solve(&rhs);
        out[space.u0_range(t)].copy_from_slice(coeffs.as_slice());
    }

    for e in 0..mesh.num_edges() {
        let frame = mesh.edge_frame(e);
        let trace = space.edge_basis(e);
        let u = &exact.u;
        let ub = project_edge(&trace, &seg_rule, |p| u(p));
        out[space.ub_range(e)].copy_from_slice(&ub);

        let flux_basis = space.flux_basis(e);
        let n = frame.global_normal;
        let un = project_edge(&flux_basis, &seg_rule, |p| {
            problem.exact_flux(p).expect("exact present").dot(&n)
        });
        out[space.un_range(e)].copy_from_slice(&un);
    }
    Ok(out)
}

/// Residual of the commutativity identity `grad_w(Q_h w) = Q_h^{k-1}(grad w)`
/// on one element, for a given `w` with gradient `grad_w_fn`.
pub fn commutativity_check<F, G>(space: &WgSpace, t: usize, w: F, grad_w_fn: G) -> Result<f64>
where
    F: Fn(Vec2) -> f64,
    G: Fn(Vec2) -> Vec2,
{
    let (tri_rule, seg_rule) = ElemContext::rules(space)?;
    let ctx = ElemContext::new(space, t, &tri_rule, &seg_rule);
    let wg = weak_gradient_ctx(space, &ctx)?;
    let nd = ctx.basis_km1.dim();

    // Q_0 w and Q_b w
    let mass_k = ctx.basis.mass_matrix(&ctx.tri_pts, &ctx.tri_wts);
    let chol_k = Cholesky::new(mass_k).ok_or(Error::DegenerateElement(t))?;
    let mut rhs0 = DVector::zeros(ctx.basis.dim());
    for (&p, &wq) in ctx.tri_pts.iter().zip(&ctx.tri_wts) {
        let vals = ctx.basis.eval(p);
        for (i, &v) in vals.iter().enumerate() {
            rhs0[i] += wq * w(p) * v;
        }
    }
    let q0 = chol_k.solve(&rhs0);

    let mut input = DVector::zeros(wg.input_dim());
    input.rows_mut(0, ctx.basis.dim()).copy_from(&q0);
    for (le, edge) in ctx.edges.iter().enumerate() {
        let coeffs = project_edge(&edge.trace, &seg_rule, &w);
        for (q, v) in coeffs.into_iter().enumerate() {
            input[ctx.basis.dim() + le * space.dim_ub() + q] = v;
        }
    }
    let wg_coeffs = &wg.matrix * &input;

    // Q_h^{k-1} of the gradient, componentwise
    let mass_km1 = ctx.basis_km1.mass_matrix(&ctx.tri_pts, &ctx.tri_wts);
    let chol = Cholesky::new(mass_km1.clone()).ok_or(Error::DegenerateElement(t))?;
    let mut rx = DVector::zeros(nd);
    let mut ry = DVector::zeros(nd);
    for (&p, &wq) in ctx.tri_pts.iter().zip(&ctx.tri_wts) {
        let vals = ctx.basis_km1.eval(p);
        let g = grad_w_fn(p);
        for (i, &v) in vals.iter().enumerate() {
            rx[i] += wq * g.x * v;
            ry[i] += wq * g.y * v;
        }
    }
    let px = chol.solve(&rx);
    let py = chol.solve(&ry);

    let dx = wg_coeffs.rows(0, nd) - px;
    let dy = wg_coeffs.rows(nd, nd) - py;
    let norm2 = dx.dot(&(&mass_km1 * &dx)) + dy.dot(&(&mass_km1 * &dy));
    Ok(norm2.max(0.0).sqrt())
}

/// L2 norm of `grad w` on one element, by quadrature (used to scale
/// commutativity residuals).
pub fn grad_norm_on_element<G: Fn(Vec2) -> Vec2>(space: &WgSpace, t: usize, grad_w_fn: G) -> Result<f64> {
    let (tri_rule, _) = ElemContext::rules(space)?;
    let (pts, wts) = map_to_triangle(&tri_rule, &space.mesh.triangle_vertices(t));
    let v: f64 = pts.iter().zip(&wts).map(|(&p, &w)| w * grad_w_fn(p).norm_squared()).sum();
    Ok(v.sqrt())
}

/// Evaluate the discrete interior solution `u0` of element `t` at a point.
pub fn eval_u0(space: &WgSpace, solution: &[f64], t: usize, p: Vec2) -> f64 {
    let basis = space.tri_basis(t);
    let vals = basis.eval(p);
    let range = space.u0_range(t);
    vals.iter().zip(&solution[range]).map(|(v, c)| v * c).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{coarse_mesh, Domain, Mesh};
    use crate::problem::{builtin, manufacture_constant, ExampleId};
    use crate::Mat2;
    use std::sync::Arc;

    fn unit_square_space(k: usize, l: usize) -> WgSpace {
        let mesh = Arc::new(coarse_mesh(&Domain::unit_square()).unwrap());
        WgSpace::new(mesh, k, l, 1.0, 1.0).unwrap()
    }

    /// independent dense reconstruction of the weak gradient on one element:
    /// assemble mass and right-hand side from scratch with a fresh quadrature
    /// rule and solve by LU instead of Cholesky.
    fn weak_gradient_oracle(space: &WgSpace, t: usize, v0: &[f64], vb: &[Vec<f64>; 3]) -> DVector<f64> {
        let mesh = &space.mesh;
        let k = space.k;
        let centroid = mesh.triangle_centroid(t);
        let h = mesh.h_tri[t];
        let basis_k = TriBasis::new(k, centroid, h);
        let basis_r = TriBasis::new(k - 1, centroid, h);
        let nd = basis_r.dim();
        let rule = tri_quadrature(2 * k + 6).unwrap();
        let seg = edge_quadrature(2 * k + 6).unwrap();
        let (pts, wts) = map_to_triangle(&rule, &mesh.triangle_vertices(t));
        let mut mass = DMatrix::zeros(2 * nd, 2 * nd);
        let mut rhs = DVector::zeros(2 * nd);
        for (&p, &w) in pts.iter().zip(&wts) {
            let vr = basis_r.eval(p);
            for i in 0..nd {
                for j in 0..nd {
                    mass[(i, j)] += w * vr[i] * vr[j];
                    mass[(nd + i, nd + j)] += w * vr[i] * vr[j];
                }
            }
            let gr = basis_r.eval_grad(p);
            let vk = basis_k.eval(p);
            let v0_val: f64 = vk.iter().zip(v0).map(|(a, b)| a * b).sum();
            for i in 0..nd {
                rhs[i] -= w * v0_val * gr[i].x;
                rhs[nd + i] -= w * v0_val * gr[i].y;
            }
        }
        for le in 0..3 {
            let (e, sign) = mesh.tri_edges[t][le];
            let [a, b] = mesh.edges[e];
            let (epts, ewts, params) = map_to_segment(&seg, mesh.points[a], mesh.points[b]);
            let n_out = sign as f64 * mesh.edge_frame(e).global_normal;
            let trace = space.edge_basis(e);
            for ((&p, &w), &tq) in epts.iter().zip(&ewts).zip(&params) {
                let vr = basis_r.eval(p);
                let pv = trace.eval_param(tq);
                let vb_val: f64 = pv.iter().zip(&vb[le]).map(|(a, b)| a * b).sum();
                for i in 0..nd {
                    rhs[i] += w * vb_val * vr[i] * n_out.x;
                    rhs[nd + i] += w * vb_val * vr[i] * n_out.y;
                }
            }
        }
        mass.lu().solve(&rhs).unwrap()
    }

    fn apply_weak_gradient(space: &WgSpace, t: usize, v0: &[f64], vb: &[Vec<f64>; 3]) -> DVector<f64> {
        let wg = weak_gradient(space, t).unwrap();
        let mut input = DVector::zeros(wg.input_dim());
        for (i, &v) in v0.iter().enumerate() {
            input[i] = v;
        }
        for le in 0..3 {
            for (q, &v) in vb[le].iter().enumerate() {
                input[space.dim_u0() + le * space.dim_ub() + q] = v;
            }
        }
        &wg.matrix * input
    }

    #[test]
    fn weak_gradient_of_constant_vanishes() {
        let space = unit_square_space(1, 1);
        for t in 0..space.mesh.num_triangles() {
            let v0 = vec![3.0, 0.0, 0.0]; // constant 3 in scaled monomials
            let vb = [vec![3.0, 0.0], vec![3.0, 0.0], vec![3.0, 0.0]];
            let g = apply_weak_gradient(&space, t, &v0, &vb);
            assert!(g.amax() < 1e-13, "t={t}: {g:?}");
        }
    }

    #[test]
    fn weak_gradient_reproduces_linear_gradient() {
        // v0 = x - xc with vb its trace: grad_w v = (1, 0) exactly
        let space = unit_square_space(1, 1);
        for t in 0..space.mesh.num_triangles() {
            let h = space.mesh.h_tri[t];
            let centroid = space.mesh.triangle_centroid(t);
            // x - xc = h * xi, so coefficient of xi is h
            let v0 = vec![0.0, h, 0.0];
            let trace = |e: usize| {
                let basis = space.edge_basis(e);
                let seg = edge_quadrature(space.quad_degree).unwrap();
                project_edge(&basis, &seg, |p| p.x - centroid.x)
            };
            let vb = [
                trace(space.mesh.tri_edges[t][0].0),
                trace(space.mesh.tri_edges[t][1].0),
                trace(space.mesh.tri_edges[t][2].0),
            ];
            let g = apply_weak_gradient(&space, t, &v0, &vb);
            assert!((g[0] - 1.0).abs() < 1e-12 && g[1].abs() < 1e-12, "t={t}: {g:?}");
        }
    }

    #[test]
    fn weak_gradient_matches_dense_oracle() {
        // vb = 1 on one edge, 0 elsewhere, v0 = 0; compare against an
        // independent dense solve (6x6 system for k = 2).
        for (k, l) in [(1usize, 1usize), (2, 2)] {
            let space = unit_square_space(k, l);
            for t in [0usize, 3] {
                let v0 = vec![0.0; space.dim_u0()];
                let mut vb = [vec![0.0; k + 1], vec![0.0; k + 1], vec![0.0; k + 1]];
                vb[1][0] = 1.0;
                let ours = apply_weak_gradient(&space, t, &v0, &vb);
                let oracle = weak_gradient_oracle(&space, t, &v0, &vb);
                assert!((ours - oracle).amax() < 1e-11, "k={k} t={t}");
            }
        }
    }

    #[test]
    fn weak_gradient_consistency_random_polynomials() {
        // for vb = trace(v0), grad_w v equals grad v0 exactly
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(7);
        for k in [1usize, 2, 3] {
            let space = unit_square_space(k, k);
            let seg = edge_quadrature(space.quad_degree).unwrap();
            for t in 0..4 {
                let basis = space.tri_basis(t);
                let v0: Vec<f64> = (0..space.dim_u0()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let poly = |p: Vec2| -> f64 {
                    basis.eval(p).iter().zip(&v0).map(|(a, b)| a * b).sum()
                };
                let vb = std::array::from_fn(|le| {
                    let e = space.mesh.tri_edges[t][le].0;
                    project_edge(&space.edge_basis(e), &seg, poly)
                });
                let g = apply_weak_gradient(&space, t, &v0, &vb);
                // analytic gradient coefficients of v0 in the k-1 basis
                let basis_r = TriBasis::new(k - 1, basis.center, basis.scale);
                let mut gx = vec![0.0; basis_r.dim()];
                let mut gy = vec![0.0; basis_r.dim()];
                for (j, &(a, b)) in basis.exponents().iter().enumerate() {
                    if a > 0 {
                        let idx = basis_r.exponents().iter().position(|&x| x == (a - 1, b)).unwrap();
                        gx[idx] += v0[j] * a as f64 / basis.scale;
                    }
                    if b > 0 {
                        let idx = basis_r.exponents().iter().position(|&x| x == (a, b - 1)).unwrap();
                        gy[idx] += v0[j] * b as f64 / basis.scale;
                    }
                }
                for i in 0..basis_r.dim() {
                    assert!((g[i] - gx[i]).abs() < 1e-12, "k={k} t={t} x-coeff {i}");
                    assert!((g[basis_r.dim() + i] - gy[i]).abs() < 1e-12, "k={k} t={t} y-coeff {i}");
                }
            }
        }
    }

    #[test]
    fn commutativity_monomials() {
        for k in [1usize, 2] {
            let mesh = Arc::new(coarse_mesh(&Domain::unit_square()).unwrap().refine_uniform());
            let space = WgSpace::new(mesh, k, k, 0.0, 0.0).unwrap();
            for t in 0..space.mesh.num_triangles() {
                for a in 0..=k as u32 {
                    for b in 0..=(k as u32 - a) {
                        let w = move |p: Vec2| p.x.powi(a as i32) * p.y.powi(b as i32);
                        let gw = move |p: Vec2| {
                            Vec2::new(
                                if a == 0 { 0.0 } else { a as f64 * p.x.powi(a as i32 - 1) * p.y.powi(b as i32) },
                                if b == 0 { 0.0 } else { b as f64 * p.x.powi(a as i32) * p.y.powi(b as i32 - 1) },
                            )
                        };
                        let resid = commutativity_check(&space, t, w, gw).unwrap();
                        let scale = grad_norm_on_element(&space, t, gw).unwrap().max(1e-30);
                        if a == 0 && b == 0 {
                            assert!(resid < 1e-14, "constant residual {resid}");
                        } else {
                            assert!(resid < 1e-12 * scale.max(1.0), "k={k} t={t} x^{a}y^{b}: {resid:.2e}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn stabilizer_vanishes_on_consistent_triples() {
        // constant coefficients, l = k, u0 in P_k with matching traces and fluxes
        let problem = manufacture_constant(
            "patch",
            Mat2::new(1.0, 1.0, 1.0, 6.0),
            Vec2::new(1.0, 1.0),
            Arc::new(|p: Vec2| 1.0 + p.x - 2.0 * p.y),
            Arc::new(|_| Vec2::new(1.0, -2.0)),
            Arc::new(|_| [0.0; 3]),
        );
        let space = unit_square_space(1, 1);
        let qh = project_qh(&space, &problem).unwrap();
        let dofs = LocalDofs::of(&space);
        for t in 0..space.mesh.num_triangles() {
            let lf = local_forms(&space, &problem, t).unwrap();
            let map = dofs.global_map(&space, t);
            let local: DVector<f64> = DVector::from_iterator(map.len(), map.iter().map(|&g| qh[g]));
            let sv = &lf.s * &local;
            assert!(sv.amax() < 1e-11, "t={t}: |S v| = {:.2e}", sv.amax());
        }
    }

    #[test]
    fn dual_stabilizer_linear_multiplier() {
        // k=1, tau2=0: c(q, q) = tau1 h^2 int |grad q|^2; for q = x - xc this is
        // tau1 h^2 area
        let mesh = Arc::new(coarse_mesh(&Domain::unit_square()).unwrap());
        let tau1 = 0.7;
        let space = WgSpace::new(mesh, 1, 0, tau1, 0.0).unwrap();
        let problem = builtin(ExampleId::Ex1);
        for t in 0..space.mesh.num_triangles() {
            let lf = local_forms(&space, &problem, t).unwrap();
            let h = space.mesh.h_tri[t];
            let area = space.mesh.triangle_area(t);
            // q = x - xc has coefficient h on the xi basis function
            let mut q = DVector::zeros(3);
            q[1] = h;
            let c_qq = q.dot(&(&lf.c * &q));
            let expected = tau1 * h * h * area;
            assert!((c_qq - expected).abs() < 1e-12 * expected, "t={t}: {c_qq} vs {expected}");
        }
    }

    #[test]
    fn b_form_identity_for_projected_polynomials() {
        // b_T(Q_h w, q) = (f_w, q)_T for w in P_k, constant a, b, l = k,
        // where f_w = -div(a grad w + b w)
        let a = Mat2::new(2.0, 0.5, 0.5, 3.0);
        let bvec = Vec2::new(1.0, -2.0);
        // w = x^2 - xy + 3, f_w = -(div a grad w) - b . grad w
        let problem = manufacture_constant(
            "bform",
            a,
            bvec,
            Arc::new(|p: Vec2| p.x * p.x - p.x * p.y + 3.0),
            Arc::new(|p: Vec2| Vec2::new(2.0 * p.x - p.y, -p.x)),
            Arc::new(|_| [2.0, -1.0, 0.0]),
        );
        let space = unit_square_space(2, 2);
        let qh = project_qh(&space, &problem).unwrap();
        let dofs = LocalDofs::of(&space);
        let rule = tri_quadrature(space.quad_degree).unwrap();
        for t in 0..space.mesh.num_triangles() {
            let lf = local_forms(&space, &problem, t).unwrap();
            let map = dofs.global_map(&space, t);
            let local: DVector<f64> = DVector::from_iterator(map.len(), map.iter().map(|&g| qh[g]));
            let bu = &lf.b * &local;
            // oracle: (f_w, q)_T by quadrature
            let basis = space.tri_basis(t);
            let (pts, wts) = map_to_triangle(&rule, &space.mesh.triangle_vertices(t));
            let mut expected = DVector::zeros(basis.dim());
            for (&p, &w) in pts.iter().zip(&wts) {
                let vals = basis.eval(p);
                let fv = (problem.load)(p);
                for (i, &v) in vals.iter().enumerate() {
                    expected[i] += w * fv * v;
                }
            }
            assert!((bu - expected).amax() < 1e-10, "t={t}");
        }
    }

    #[test]
    fn assembled_system_symmetric() {
        let problem = builtin(ExampleId::Ex1);
        for (k, l) in [(1usize, 1usize), (1, 0), (2, 2), (2, 1)] {
            let mesh = Arc::new(
                coarse_mesh(&Domain::unit_square()).unwrap().tag_boundary(|m, n| (problem.classifier)(m, n)),
            );
            let space = WgSpace::new(mesh, k, l, 1.0, 1.0).unwrap();
            let system = assemble(&space, &problem).unwrap();
            let asym = system.matrix.max_asymmetry();
            let scale = system.matrix.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(asym < 1e-12 * scale, "k={k} l={l}: asymmetry {asym:.2e} scale {scale:.2e}");
        }
    }

    #[test]
    fn stabilizer_and_dual_forms_semidefinite() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(99);
        let problem = builtin(ExampleId::Ex2);
        let space = unit_square_space(2, 1);
        for t in 0..space.mesh.num_triangles() {
            let lf = local_forms(&space, &problem, t).unwrap();
            for _ in 0..10 {
                let v: DVector<f64> =
                    DVector::from_iterator(lf.s.nrows(), (0..lf.s.nrows()).map(|_| rng.random_range(-1.0..1.0)));
                let q: DVector<f64> =
                    DVector::from_iterator(lf.c.nrows(), (0..lf.c.nrows()).map(|_| rng.random_range(-1.0..1.0)));
                assert!(v.dot(&(&lf.s * &v)) >= -1e-10);
                assert!(q.dot(&(&lf.c * &q)) >= -1e-10);
            }
        }
    }

    #[test]
    fn untagged_boundary_edge_rejected() {
        let problem = builtin(ExampleId::Ex1);
        let mesh: Arc<Mesh> = Arc::new(coarse_mesh(&Domain::unit_square()).unwrap()); // no tags
        let space = WgSpace::new(mesh, 1, 1, 0.0, 0.0).unwrap();
        assert!(matches!(assemble(&space, &problem), Err(Error::UntaggedBoundaryEdge(_))));
    }

    #[test]
    fn projection_reproduces_polynomials_and_is_orthogonal() {
        let problem = manufacture_constant(
            "proj",
            Mat2::identity(),
            Vec2::zeros(),
            Arc::new(|p: Vec2| 2.0 - p.x + 3.0 * p.y),
            Arc::new(|_| Vec2::new(-1.0, 3.0)),
            Arc::new(|_| [0.0; 3]),
        );
        let space = unit_square_space(1, 1);
        let qh = project_qh(&space, &problem).unwrap();
        // Q_0 of a P_k function reproduces it: evaluate at centroids and vertices
        for t in 0..space.mesh.num_triangles() {
            for p in space.mesh.triangle_vertices(t).into_iter().chain([space.mesh.triangle_centroid(t)]) {
                let v = eval_u0(&space, &qh, t, p);
                let exact = 2.0 - p.x + 3.0 * p.y;
                assert!((v - exact).abs() < 1e-12);
            }
        }
        // orthogonality of the residual for a non-polynomial on one element;
        // checked with the same quadrature that defines the projection
        let sin_problem = builtin(ExampleId::Ex1);
        let qh = project_qh(&space, &sin_problem).unwrap();
        let rule = tri_quadrature(space.quad_degree).unwrap();
        let exact = sin_problem.exact.as_ref().unwrap();
        for t in [0usize, 5] {
            let basis = space.tri_basis(t);
            let (pts, wts) = map_to_triangle(&rule, &space.mesh.triangle_vertices(t));
            for j in 0..basis.dim() {
                let mut ip = 0.0;
                for (&p, &w) in pts.iter().zip(&wts) {
                    let resid = (exact.u)(p) - eval_u0(&space, &qh, t, p);
                    ip += w * resid * basis.eval(p)[j];
                }
                assert!(ip.abs() < 1e-12, "t={t} mode {j}: {ip:.2e}");
            }
        }
        // edge projection of a constant flux keeps only the constant mode
        let const_flux = manufacture_constant(
            "constflux",
            Mat2::identity(),
            Vec2::zeros(),
            Arc::new(|p: Vec2| p.x),
            Arc::new(|_| Vec2::new(1.0, 0.0)),
            Arc::new(|_| [0.0; 3]),
        );
        let space2 = unit_square_space(2, 2);
        let qh2 = project_qh(&space2, &const_flux).unwrap();
        for e in 0..space2.mesh.num_edges() {
            let range = space2.un_range(e);
            let coeffs = &qh2[range];
            for &c in &coeffs[1..] {
                assert!(c.abs() < 1e-13, "edge {e}: higher Legendre mode {c:.2e}");
            }
        }
    }
}
