//! Degree-of-freedom layout for the primal weak space `W_h` and the multiplier
//! space `M_h`.
//!
//! Global ordering: element-major `u0` blocks, then edge-major `ub` blocks,
//! then edge-major `un` blocks, then element-major `lambda` blocks. The `ub`
//! and `un` coefficients are single-valued per edge; an element-local trace of
//! `un` carries the edge sign `sigma_{T,e}`, so the stored coefficients always
//! refer to the flux through the edge in its global normal direction.

use crate::basis::{poly_dim, EdgeBasis, TriBasis};
use crate::mesh::Mesh;
use crate::{Error, Result};
use std::ops::Range;
use std::sync::Arc;

/// Discrete space parameters and DOF maps for one mesh.
#[derive(Debug, Clone)]
pub struct WgSpace {
    pub mesh: Arc<Mesh>,
    /// Interior/trace polynomial degree, `k >= 1`.
    pub k: usize,
    /// Edge-flux degree, `l = k` or `l = k - 1`.
    pub l: usize,
    /// Gradient stabilization weight on the multiplier.
    pub tau1: f64,
    /// Hessian stabilization weight on the multiplier.
    pub tau2: f64,
    /// Quadrature exactness used for all forms (default `2k + 4`).
    pub quad_degree: usize,
}

impl WgSpace {
    pub fn new(mesh: Arc<Mesh>, k: usize, l: usize, tau1: f64, tau2: f64) -> Result<Self> {
        if k < 1 || (l != k && l + 1 != k) {
            return Err(Error::InvalidDegrees { k, l });
        }
        if tau1 < 0.0 || tau2 < 0.0 {
            return Err(Error::Config("tau1 and tau2 must be nonnegative".into()));
        }
        Ok(WgSpace { mesh, k, l, tau1, tau2, quad_degree: 2 * k + 4 })
    }

    /// Stabilization defaults per regime: `(0,0)` for `l = k`; `tau1 > 0`
    /// for `l = k-1, k = 1`; `tau2 > 0` for `l = k-1, k >= 2`.
    pub fn default_taus(k: usize, l: usize) -> (f64, f64) {
        if l == k {
            (0.0, 0.0)
        } else if k == 1 {
            (1.0, 0.0)
        } else {
            (0.0, 1.0)
        }
    }

    pub fn with_quad_degree(mut self, degree: usize) -> Result<Self> {
        if degree > crate::quadrature::MAX_EXACT_DEGREE {
            return Err(Error::QuadDegreeOutOfRange(degree));
        }
        if degree < 2 * self.k {
            return Err(Error::Config(format!(
                "quadrature degree {degree} too small for k = {} (need >= {})",
                self.k,
                2 * self.k
            )));
        }
        self.quad_degree = degree;
        Ok(self)
    }

    /// Dimension of the element-interior block `P_k(T)`.
    pub fn dim_u0(&self) -> usize {
        poly_dim(self.k)
    }

    /// Dimension of one edge-trace block `P_k(e)`.
    pub fn dim_ub(&self) -> usize {
        self.k + 1
    }

    /// Dimension of one edge-flux block `P_l(e)`.
    pub fn dim_un(&self) -> usize {
        self.l + 1
    }

    pub fn n_u0(&self) -> usize {
        self.mesh.num_triangles() * self.dim_u0()
    }

    pub fn n_ub(&self) -> usize {
        self.mesh.num_edges() * self.dim_ub()
    }

    pub fn n_un(&self) -> usize {
        self.mesh.num_edges() * self.dim_un()
    }

    /// Total primal unknowns.
    pub fn n_u(&self) -> usize {
        self.n_u0() + self.n_ub() + self.n_un()
    }

    /// Total multiplier unknowns.
    pub fn n_lambda(&self) -> usize {
        self.mesh.num_triangles() * self.dim_u0()
    }

    pub fn n_total(&self) -> usize {
        self.n_u() + self.n_lambda()
    }

    pub fn u0_range(&self, t: usize) -> Range<usize> {
        let d = self.dim_u0();
        t * d..(t + 1) * d
    }

    pub fn ub_range(&self, e: usize) -> Range<usize> {
        let d = self.dim_ub();
        self.n_u0() + e * d..self.n_u0() + (e + 1) * d
    }

    pub fn un_range(&self, e: usize) -> Range<usize> {
        let d = self.dim_un();
        let base = self.n_u0() + self.n_ub();
        base + e * d..base + (e + 1) * d
    }

    /// Global range of the multiplier coefficients of element `t`.
    pub fn lambda_range(&self, t: usize) -> Range<usize> {
        let d = self.dim_u0();
        self.n_u() + t * d..self.n_u() + (t + 1) * d
    }

    /// Scaled monomial basis of degree `k` on element `t`.
    pub fn tri_basis(&self, t: usize) -> TriBasis {
        TriBasis::new(self.k, self.mesh.triangle_centroid(t), self.mesh.h_tri[t])
    }

    /// Legendre trace basis of degree `k` on edge `e`.
    pub fn edge_basis(&self, e: usize) -> EdgeBasis {
        let [a, b] = self.mesh.edges[e];
        EdgeBasis::new(self.k, self.mesh.points[a], self.mesh.points[b])
    }

    /// Legendre flux basis of degree `l` on edge `e`.
    pub fn flux_basis(&self, e: usize) -> EdgeBasis {
        let [a, b] = self.mesh.edges[e];
        EdgeBasis::new(self.l, self.mesh.points[a], self.mesh.points[b])
    }
}
