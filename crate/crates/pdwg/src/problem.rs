//! Problem definitions: coefficients, data, boundary split, optional exact
//! solution, and the five built-in test examples.

use crate::mesh::BoundaryTag;
use crate::{Mat2, Vec2};
use std::sync::Arc;

pub type ScalarFn = Arc<dyn Fn(Vec2) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(Vec2) -> Vec2 + Send + Sync>;
pub type TensorFn = Arc<dyn Fn(Vec2) -> Mat2 + Send + Sync>;
/// Boundary flux datum evaluated at (point, outward unit normal).
pub type FluxFn = Arc<dyn Fn(Vec2, Vec2) -> f64 + Send + Sync>;
pub type ClassifierFn = Arc<dyn Fn(Vec2, Vec2) -> BoundaryTag + Send + Sync>;

/// Exact solution used for error computation.
#[derive(Clone)]
pub struct ExactSolution {
    pub u: ScalarFn,
    pub grad_u: VectorFn,
}

/// A convection-diffusion problem instance:
/// `-div(a grad u + b u) = f` with `u = g1` on the Dirichlet boundary and
/// `(a grad u + b u) . n = g2` on the Neumann boundary.
#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    /// Diffusion tensor `a(x)`, symmetric positive definite.
    pub diffusion: TensorFn,
    /// Convection field `b(x)`.
    pub convection: VectorFn,
    /// Load `f(x)`.
    pub load: ScalarFn,
    /// Dirichlet datum `g1(x)`.
    pub dirichlet: ScalarFn,
    /// Neumann datum `g2(x, n)`, the value of `(a grad u + b u) . n`.
    pub neumann: FluxFn,
    /// Classifies a boundary edge from its midpoint and outward normal.
    pub classifier: ClassifierFn,
    pub exact: Option<ExactSolution>,
}

impl ProblemSpec {
    /// Flux `(a grad u + b u)(p)` of the exact solution, if available.
    pub fn exact_flux(&self, p: Vec2) -> Option<Vec2> {
        self.exact.as_ref().map(|ex| {
            let a = (self.diffusion)(p);
            let b = (self.convection)(p);
            a * (ex.grad_u)(p) + b * (ex.u)(p)
        })
    }
}

/// Load choice for the examples without exact solutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadChoice {
    Zero,
    One,
}

impl LoadChoice {
    pub fn value(self) -> f64 {
        match self {
            LoadChoice::Zero => 0.0,
            LoadChoice::One => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainChoice {
    UnitSquare,
    LShape,
}

/// The built-in test examples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExampleId {
    /// Constant diffusion a = [[1,1],[1,6]] and convection b = (1,1);
    /// u = sin(pi x) sin(pi y); Neumann boundary {x = 0}.
    Ex1,
    /// Continuous diffusion a = diag(1+x, 1+y), b = (e^{1-x}, e^{xy});
    /// u = sin(x) cos(y); Neumann boundary {x = 0}.
    Ex2,
    /// Convection-dominated: a = diag(eps, eps), b = (1,1);
    /// u = (x+0.5)(y+0.5) e^{1-x} e^{y}; all-Dirichlet boundary.
    Ex3 { eps: f64 },
    /// a = diag(1e-4, 1e-4), b = (y, -x); g1 = sin(3x) on the inflow boundary
    /// (b.n < 0), g2 = 0 elsewhere; no exact solution.
    Ex4 { f: LoadChoice },
    /// a = diag(1e-5, 1e-5), b = (y, -x); g1 = sin(2x) on the Dirichlet part;
    /// Neumann part {x=1 or y=0} on the square, {x=1 or y=0.5} on the L-shape.
    Ex5 { domain: DomainChoice, f: LoadChoice },
}

impl ExampleId {
    /// Natural domain of the example (Ex5 carries its own choice).
    pub fn default_domain(&self) -> DomainChoice {
        match self {
            ExampleId::Ex5 { domain, .. } => *domain,
            _ => DomainChoice::UnitSquare,
        }
    }

    pub fn has_exact(&self) -> bool {
        !matches!(self, ExampleId::Ex4 { .. } | ExampleId::Ex5 { .. })
    }
}

const TIE_TOL: f64 = 1e-12;

/// Build one of the built-in examples with hand-derived data.
pub fn builtin(example: ExampleId) -> ProblemSpec {
    use std::f64::consts::PI;
    match example {
        ExampleId::Ex1 => {
            let u = |p: Vec2| (PI * p.x).sin() * (PI * p.y).sin();
            let grad = |p: Vec2| {
                Vec2::new(
                    PI * (PI * p.x).cos() * (PI * p.y).sin(),
                    PI * (PI * p.x).sin() * (PI * p.y).cos(),
                )
            };
            let a = Mat2::new(1.0, 1.0, 1.0, 6.0);
            let bvec = Vec2::new(1.0, 1.0);
            // f = -(u_xx + 2 u_xy + 6 u_yy + u_x + u_y)
            let f = move |p: Vec2| {
                let (sx, cx) = (PI * p.x).sin_cos();
                let (sy, cy) = (PI * p.y).sin_cos();
                7.0 * PI * PI * sx * sy - 2.0 * PI * PI * cx * cy - PI * cx * sy - PI * sx * cy
            };
            from_exact(
                "ex1",
                Arc::new(move |_| a),
                Arc::new(move |_| bvec),
                Arc::new(f),
                Arc::new(u),
                Arc::new(grad),
                neumann_iff(move |mid, _| mid.x.abs() < TIE_TOL),
            )
        }
        ExampleId::Ex2 => {
            let u = |p: Vec2| p.x.sin() * p.y.cos();
            let grad = |p: Vec2| Vec2::new(p.x.cos() * p.y.cos(), -p.x.sin() * p.y.sin());
            let a = |p: Vec2| Mat2::new(1.0 + p.x, 0.0, 0.0, 1.0 + p.y);
            let b = |p: Vec2| Vec2::new((1.0 - p.x).exp(), (p.x * p.y).exp());
            let f = move |p: Vec2| {
                let (sx, cx) = p.x.sin_cos();
                let (sy, cy) = p.y.sin_cos();
                let (u, ux, uy) = (sx * cy, cx * cy, -sx * sy);
                let (uxx, uyy) = (-sx * cy, -sx * cy);
                let div_a_grad = ux + (1.0 + p.x) * uxx + uy + (1.0 + p.y) * uyy;
                let div_bu = (1.0 - p.x).exp() * (ux - u) + (p.x * p.y).exp() * (p.x * u + uy);
                -(div_a_grad + div_bu)
            };
            from_exact(
                "ex2",
                Arc::new(a),
                Arc::new(b),
                Arc::new(f),
                Arc::new(u),
                Arc::new(grad),
                neumann_iff(move |mid, _| mid.x.abs() < TIE_TOL),
            )
        }
        ExampleId::Ex3 { eps } => {
            // u = X(x) Y(y) with X = (x+0.5) e^{1-x}, Y = (y+0.5) e^{y}
            let xf = |x: f64| (x + 0.5) * (1.0 - x).exp();
            let xfp = |x: f64| (0.5 - x) * (1.0 - x).exp();
            let xfpp = |x: f64| (x - 1.5) * (1.0 - x).exp();
            let yf = |y: f64| (y + 0.5) * y.exp();
            let yfp = |y: f64| (y + 1.5) * y.exp();
            let yfpp = |y: f64| (y + 2.5) * y.exp();
            let u = move |p: Vec2| xf(p.x) * yf(p.y);
            let grad = move |p: Vec2| Vec2::new(xfp(p.x) * yf(p.y), xf(p.x) * yfp(p.y));
            let f = move |p: Vec2| {
                let lap = xfpp(p.x) * yf(p.y) + xf(p.x) * yfpp(p.y);
                let conv = xfp(p.x) * yf(p.y) + xf(p.x) * yfp(p.y); // b = (1,1)
                -(eps * lap + conv)
            };
            from_exact(
                "ex3",
                Arc::new(move |_| Mat2::new(eps, 0.0, 0.0, eps)),
                Arc::new(|_| Vec2::new(1.0, 1.0)),
                Arc::new(f),
                Arc::new(u),
                Arc::new(grad),
                Arc::new(|_, _| BoundaryTag::Dirichlet),
            )
        }
        ExampleId::Ex4 { f } => {
            let fval = f.value();
            let b = |p: Vec2| Vec2::new(p.y, -p.x);
            ProblemSpec {
                name: "ex4".into(),
                diffusion: Arc::new(|_| Mat2::new(1e-4, 0.0, 0.0, 1e-4)),
                convection: Arc::new(b),
                load: Arc::new(move |_| fval),
                dirichlet: Arc::new(|p: Vec2| (3.0 * p.x).sin()),
                neumann: Arc::new(|_, _| 0.0),
                // inflow is Dirichlet; ties (b.n = 0) resolve to Neumann
                classifier: Arc::new(move |mid: Vec2, n: Vec2| {
                    if b(mid).dot(&n) < -TIE_TOL {
                        BoundaryTag::Dirichlet
                    } else {
                        BoundaryTag::Neumann
                    }
                }),
                exact: None,
            }
        }
        ExampleId::Ex5 { domain, f } => {
            let fval = f.value();
            let neumann_side = move |mid: Vec2| match domain {
                DomainChoice::UnitSquare => (mid.x - 1.0).abs() < TIE_TOL || mid.y.abs() < TIE_TOL,
                DomainChoice::LShape => (mid.x - 1.0).abs() < TIE_TOL || (mid.y - 0.5).abs() < TIE_TOL,
            };
            ProblemSpec {
                name: "ex5".into(),
                diffusion: Arc::new(|_| Mat2::new(1e-5, 0.0, 0.0, 1e-5)),
                convection: Arc::new(|p: Vec2| Vec2::new(p.y, -p.x)),
                load: Arc::new(move |_| fval),
                dirichlet: Arc::new(|p: Vec2| (2.0 * p.x).sin()),
                neumann: Arc::new(|_, _| 0.0),
                classifier: Arc::new(move |mid: Vec2, _| {
                    if neumann_side(mid) {
                        BoundaryTag::Neumann
                    } else {
                        BoundaryTag::Dirichlet
                    }
                }),
                exact: None,
            }
        }
    }
}

fn neumann_iff<F>(pred: F) -> ClassifierFn
where
    F: Fn(Vec2, Vec2) -> bool + Send + Sync + 'static,
{
    Arc::new(move |mid, n| if pred(mid, n) { BoundaryTag::Neumann } else { BoundaryTag::Dirichlet })
}

fn from_exact(
    name: &str,
    diffusion: TensorFn,
    convection: VectorFn,
    load: ScalarFn,
    u: ScalarFn,
    grad_u: VectorFn,
    classifier: ClassifierFn,
) -> ProblemSpec {
    let g2 = {
        let (a, b, u, gu) = (diffusion.clone(), convection.clone(), u.clone(), grad_u.clone());
        move |p: Vec2, n: Vec2| (a(p) * gu(p) + b(p) * u(p)).dot(&n)
    };
    ProblemSpec {
        name: name.into(),
        diffusion,
        convection,
        load,
        dirichlet: u.clone(),
        neumann: Arc::new(g2),
        classifier,
        exact: Some(ExactSolution { u, grad_u }),
    }
}

/// Ingredients for a manufactured problem. The load is computed pointwise as
/// `f = -(grad_a : grad_u + a : hess_u + div_b u + b . grad_u)`.
#[derive(Clone)]
pub struct Manufactured {
    pub name: String,
    pub u: ScalarFn,
    pub grad_u: VectorFn,
    /// Hessian of `u` as `(u_xx, u_xy, u_yy)`.
    pub hess_u: Arc<dyn Fn(Vec2) -> [f64; 3] + Send + Sync>,
    pub a: TensorFn,
    /// Partial derivatives `[da/dx, da/dy]` of the diffusion tensor.
    pub grad_a: Arc<dyn Fn(Vec2) -> [Mat2; 2] + Send + Sync>,
    pub b: VectorFn,
    pub div_b: ScalarFn,
}

/// Build a problem with a prescribed exact solution; all-Dirichlet by default
/// (swap the classifier afterwards for mixed boundary conditions).
pub fn manufacture(m: Manufactured) -> ProblemSpec {
    let f = {
        let m = m.clone();
        move |p: Vec2| {
            let g = (m.grad_u)(p);
            let hess = (m.hess_u)(p);
            let a = (m.a)(p);
            let [dax, day] = (m.grad_a)(p);
            // sum_ij (d_i a_ij)(d_j u)
            let grad_a_grad_u = g.x * (dax[(0, 0)] + day[(1, 0)]) + g.y * (dax[(0, 1)] + day[(1, 1)]);
            let a_hess = a[(0, 0)] * hess[0] + (a[(0, 1)] + a[(1, 0)]) * hess[1] + a[(1, 1)] * hess[2];
            let div_bu = (m.div_b)(p) * (m.u)(p) + (m.b)(p).dot(&g);
            -(grad_a_grad_u + a_hess + div_bu)
        }
    };
    from_exact(
        &m.name.clone(),
        m.a,
        m.b,
        Arc::new(f),
        m.u,
        m.grad_u,
        Arc::new(|_, _| BoundaryTag::Dirichlet),
    )
}

/// Manufactured problem with constant coefficients.
pub fn manufacture_constant(
    name: &str,
    a: Mat2,
    b: Vec2,
    u: ScalarFn,
    grad_u: VectorFn,
    hess_u: Arc<dyn Fn(Vec2) -> [f64; 3] + Send + Sync>,
) -> ProblemSpec {
    manufacture(Manufactured {
        name: name.into(),
        u,
        grad_u,
        hess_u,
        a: Arc::new(move |_| a),
        grad_a: Arc::new(|_| [Mat2::zeros(), Mat2::zeros()]),
        b: Arc::new(move |_| b),
        div_b: Arc::new(|_| 0.0),
    })
}
