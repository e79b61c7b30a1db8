//! Conforming triangular meshes with oriented edge topology.
//!
//! Conventions:
//! - Triangles store vertex indices in counterclockwise order.
//! - Edge `e = (v0, v1)` always has `v0 < v1`; its tangent runs from `v0` to
//!   `v1` and the global normal is the tangent rotated by +90 degrees.
//! - For a triangle `T` adjacent to `e`, the outward normal of `T` on `e`
//!   equals `sign * global_normal` with `sign = sigma_{T,e} in {+1, -1}`.
//!   The two signs of an interior edge always differ.
//! - `h_T` is the triangle diameter (longest edge); `h` is the mesh maximum.

use crate::{Error, Result, Vec2};
use std::collections::HashMap;
use std::fmt::Write as _;

/// Boundary condition kind carried by tagged boundary edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryTag {
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    UnitSquare,
    LShape,
    Polygon,
}

/// Computational domain described by a counterclockwise boundary loop.
#[derive(Debug, Clone)]
pub struct Domain {
    pub kind: DomainKind,
    pub vertices: Vec<Vec2>,
}

impl Domain {
    pub fn unit_square() -> Self {
        let v = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
        Domain { kind: DomainKind::UnitSquare, vertices: v.iter().map(|&(x, y)| Vec2::new(x, y)).collect() }
    }

    pub fn l_shape() -> Self {
        let v = [(0.0, 0.0), (0.5, 0.0), (0.5, 0.5), (1.0, 0.5), (1.0, 1.0), (0.0, 1.0)];
        Domain { kind: DomainKind::LShape, vertices: v.iter().map(|&(x, y)| Vec2::new(x, y)).collect() }
    }

    /// General simple polygon, counterclockwise.
    pub fn polygon(vertices: Vec<Vec2>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidDomain("polygon needs at least 3 vertices".into()));
        }
        for i in 0..vertices.len() {
            for j in (i + 1)..vertices.len() {
                if (vertices[i] - vertices[j]).norm() < 1e-14 {
                    return Err(Error::InvalidDomain(format!("repeated vertex at index {j}")));
                }
            }
        }
        let area = polygon_signed_area(&vertices);
        if area <= 1e-14 {
            return Err(Error::InvalidDomain("polygon must be counterclockwise with positive area".into()));
        }
        Ok(Domain { kind: DomainKind::Polygon, vertices })
    }

    pub fn area(&self) -> f64 {
        polygon_signed_area(&self.vertices)
    }

    /// Point-in-polygon test (ray casting); boundary points count as inside.
    pub fn contains(&self, p: Vec2) -> bool {
        let v = &self.vertices;
        let n = v.len();
        let mut inside = false;
        for i in 0..n {
            let a = v[i];
            let b = v[(i + 1) % n];
            // on-segment check
            let d = b - a;
            let ap = p - a;
            let cross = d.perp(&ap);
            let t = if d.norm_squared() > 0.0 { ap.dot(&d) / d.norm_squared() } else { 0.0 };
            if cross.abs() < 1e-12 && (-1e-12..=1.0 + 1e-12).contains(&t) {
                return true;
            }
            if (a.y > p.y) != (b.y > p.y) {
                let x_int = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x_int {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

fn polygon_signed_area(v: &[Vec2]) -> f64 {
    let n = v.len();
    let mut s = 0.0;
    for i in 0..n {
        let a = v[i];
        let b = v[(i + 1) % n];
        s += a.perp(&b);
    }
    0.5 * s
}

/// Midpoint, tangent, normal and length of a global edge.
#[derive(Debug, Clone, Copy)]
pub struct EdgeFrame {
    pub midpoint: Vec2,
    pub tangent: Vec2,
    pub global_normal: Vec2,
    pub length: f64,
}

/// Immutable conforming triangulation.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub points: Vec<Vec2>,
    pub triangles: Vec<[usize; 3]>,
    /// Global edges with `v0 < v1`.
    pub edges: Vec<[usize; 2]>,
    /// Per triangle: the three (edge index, sign) pairs opposite to its local
    /// traversal order `(v0,v1), (v1,v2), (v2,v0)`.
    pub tri_edges: Vec<[(usize, i8); 3]>,
    /// Per edge: adjacent triangle(s). Interior edges have two.
    pub edge_tris: Vec<(usize, Option<usize>)>,
    /// Per edge: boundary tag; `None` for interior edges or untagged boundaries.
    pub boundary_tag: Vec<Option<BoundaryTag>>,
    /// Per triangle diameter.
    pub h_tri: Vec<f64>,
    /// Mesh size: maximum triangle diameter.
    pub h: f64,
}

impl Mesh {
    /// Build topology from points and counterclockwise triangles.
    pub fn from_cells(points: Vec<Vec2>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<[usize; 2]> = Vec::new();
        let mut edge_tris: Vec<(usize, Option<usize>)> = Vec::new();
        let mut tri_edges = Vec::with_capacity(triangles.len());
        let mut h_tri = Vec::with_capacity(triangles.len());

        for (t, tri) in triangles.iter().enumerate() {
            let v = [points[tri[0]], points[tri[1]], points[tri[2]]];
            let area2 = (v[1] - v[0]).perp(&(v[2] - v[0]));
            if area2 <= 0.0 {
                return Err(Error::DegenerateElement(t));
            }
            let mut local = [(0usize, 0i8); 3];
            for i in 0..3 {
                let a = tri[i];
                let b = tri[(i + 1) % 3];
                let key = (a.min(b), a.max(b));
                let e = *edge_index.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edge_tris.push((usize::MAX, None));
                    edges.len() - 1
                });
                // Outward normal of a CCW triangle on traversal a->b is the
                // direction rotated -90 deg; the global normal is the lower-to-
                // higher tangent rotated +90 deg. Hence:
                let sign = if a < b { -1i8 } else { 1i8 };
                local[i] = (e, sign);
                if edge_tris[e].0 == usize::MAX {
                    edge_tris[e].0 = t;
                } else if edge_tris[e].1.is_none() {
                    edge_tris[e].1 = Some(t);
                } else {
                    return Err(Error::InvalidDomain(format!("edge {e} shared by more than two triangles")));
                }
            }
            tri_edges.push(local);
            let d = (v[1] - v[0]).norm().max((v[2] - v[1]).norm()).max((v[0] - v[2]).norm());
            h_tri.push(d);
        }

        let h = h_tri.iter().cloned().fold(0.0, f64::max);
        let boundary_tag = vec![None; edges.len()];
        Ok(Mesh { points, triangles, edges, tri_edges, edge_tris, boundary_tag, h_tri, h })
    }

    pub fn num_points(&self) -> usize {
        self.points.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.edge_tris[e].1.is_none()
    }

    pub fn edge_frame(&self, e: usize) -> EdgeFrame {
        let [a, b] = self.edges[e];
        let pa = self.points[a];
        let pb = self.points[b];
        let length = (pb - pa).norm();
        let tangent = (pb - pa) / length;
        EdgeFrame {
            midpoint: 0.5 * (pa + pb),
            tangent,
            global_normal: Vec2::new(-tangent.y, tangent.x),
            length,
        }
    }

    pub fn triangle_vertices(&self, t: usize) -> [Vec2; 3] {
        let [a, b, c] = self.triangles[t];
        [self.points[a], self.points[b], self.points[c]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let v = self.triangle_vertices(t);
        0.5 * (v[1] - v[0]).perp(&(v[2] - v[0]))
    }

    pub fn triangle_centroid(&self, t: usize) -> Vec2 {
        let v = self.triangle_vertices(t);
        (v[0] + v[1] + v[2]) / 3.0
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    /// Replace every triangle by four congruent children (red refinement).
    /// Boundary tags are inherited from the parent boundary edges.
    pub fn refine_uniform(&self) -> Mesh {
        let mut points = self.points.clone();
        let mut midpoint = vec![0usize; self.num_edges()];
        for (e, &[a, b]) in self.edges.iter().enumerate() {
            midpoint[e] = points.len();
            points.push(0.5 * (self.points[a] + self.points[b]));
        }

        let mut triangles = Vec::with_capacity(4 * self.num_triangles());
        for (t, &[v0, v1, v2]) in self.triangles.iter().enumerate() {
            let m01 = midpoint[self.tri_edges[t][0].0];
            let m12 = midpoint[self.tri_edges[t][1].0];
            let m20 = midpoint[self.tri_edges[t][2].0];
            triangles.push([v0, m01, m20]);
            triangles.push([v1, m12, m01]);
            triangles.push([v2, m20, m12]);
            triangles.push([m01, m12, m20]);
        }

        let mut mesh = Mesh::from_cells(points, triangles).expect("refinement preserves orientation");

        // child boundary edges join a parent vertex with the parent edge midpoint
        let mut tag_of: HashMap<(usize, usize), BoundaryTag> = HashMap::new();
        for (e, &[a, b]) in self.edges.iter().enumerate() {
            if let Some(tag) = self.boundary_tag[e] {
                let m = midpoint[e];
                tag_of.insert((a.min(m), a.max(m)), tag);
                tag_of.insert((b.min(m), b.max(m)), tag);
            }
        }
        for (e, &[a, b]) in mesh.edges.iter().enumerate() {
            if let Some(&tag) = tag_of.get(&(a, b)) {
                mesh.boundary_tag[e] = Some(tag);
            }
        }
        mesh
    }

    /// Tag every boundary edge using a classifier of (midpoint, outward normal).
    pub fn tag_boundary<F>(mut self, classifier: F) -> Mesh
    where
        F: Fn(Vec2, Vec2) -> BoundaryTag,
    {
        for e in 0..self.num_edges() {
            if self.is_boundary_edge(e) {
                let frame = self.edge_frame(e);
                let outward = self.outward_normal(self.edge_tris[e].0, e);
                self.boundary_tag[e] = Some(classifier(frame.midpoint, outward));
            } else {
                self.boundary_tag[e] = None;
            }
        }
        self
    }

    /// Outward unit normal of triangle `t` on edge `e`.
    pub fn outward_normal(&self, t: usize, e: usize) -> Vec2 {
        let sign = self
            .tri_edges[t]
            .iter()
            .find(|&&(ei, _)| ei == e)
            .map(|&(_, s)| s as f64)
            .expect("edge not adjacent to triangle");
        sign * self.edge_frame(e).global_normal
    }

    /// Plain-text serialization ("pdwg-mesh v1").
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("pdwg-mesh v1\n");
        let _ = writeln!(s, "points {}", self.num_points());
        for p in &self.points {
            let _ = writeln!(s, "{:.16e} {:.16e}", p.x, p.y);
        }
        let _ = writeln!(s, "triangles {}", self.num_triangles());
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        let tagged: Vec<(usize, BoundaryTag)> = (0..self.num_edges())
            .filter_map(|e| self.boundary_tag[e].map(|tag| (e, tag)))
            .collect();
        let _ = writeln!(s, "edge-tags {}", tagged.len());
        for (e, tag) in tagged {
            let [a, b] = self.edges[e];
            let c = match tag {
                BoundaryTag::Dirichlet => 'D',
                BoundaryTag::Neumann => 'N',
            };
            let _ = writeln!(s, "{a} {b} {c}");
        }
        s
    }

    /// Parse the plain-text format produced by [`Mesh::to_text`].
    pub fn from_text(text: &str) -> Result<Mesh> {
        let mut tokens = text.split_whitespace();
        let mut expect = |what: &str| -> Result<&str> {
            tokens.next().ok_or_else(|| Error::Parse(format!("unexpected end of input, expected {what}")))
        };
        let header = (expect("header")?, expect("version")?);
        if header != ("pdwg-mesh", "v1") {
            return Err(Error::Parse(format!("bad header {header:?}")));
        }
        fn parse<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
            s.parse().map_err(|_| Error::Parse(format!("bad {what}: {s:?}")))
        }
        if expect("section")? != "points" {
            return Err(Error::Parse("expected points section".into()));
        }
        let np: usize = parse(expect("count")?, "point count")?;
        let mut points = Vec::with_capacity(np);
        for _ in 0..np {
            let x: f64 = parse(expect("x")?, "coordinate")?;
            let y: f64 = parse(expect("y")?, "coordinate")?;
            points.push(Vec2::new(x, y));
        }
        if expect("section")? != "triangles" {
            return Err(Error::Parse("expected triangles section".into()));
        }
        let nt: usize = parse(expect("count")?, "triangle count")?;
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let a: usize = parse(expect("a")?, "vertex index")?;
            let b: usize = parse(expect("b")?, "vertex index")?;
            let c: usize = parse(expect("c")?, "vertex index")?;
            triangles.push([a, b, c]);
        }
        let mut mesh = Mesh::from_cells(points, triangles)?;
        if let Ok(section) = expect("section") {
            if section != "edge-tags" {
                return Err(Error::Parse("expected edge-tags section".into()));
            }
            let ne: usize = parse(expect("count")?, "tag count")?;
            let idx: HashMap<(usize, usize), usize> =
                mesh.edges.iter().enumerate().map(|(e, &[a, b])| ((a, b), e)).collect();
            for _ in 0..ne {
                let a: usize = parse(expect("v0")?, "vertex index")?;
                let b: usize = parse(expect("v1")?, "vertex index")?;
                let tag = match expect("tag")? {
                    "D" => BoundaryTag::Dirichlet,
                    "N" => BoundaryTag::Neumann,
                    other => return Err(Error::Parse(format!("bad tag {other:?}"))),
                };
                let e = *idx
                    .get(&(a.min(b), a.max(b)))
                    .ok_or_else(|| Error::Parse(format!("tagged edge ({a}, {b}) not in mesh")))?;
                mesh.boundary_tag[e] = Some(tag);
            }
        }
        Ok(mesh)
    }
}

/// Coarse triangulation of a domain.
///
/// The unit square becomes a 2x2 grid of squares, each split by the diagonal
/// of positive slope (8 triangles); the L-shape becomes its three constituent
/// half-unit squares split the same way (6 triangles). General polygons are
/// ear-clipped.
pub fn coarse_mesh(domain: &Domain) -> Result<Mesh> {
    match domain.kind {
        DomainKind::UnitSquare => structured_cells(&[(0, 0), (1, 0), (0, 1), (1, 1)]),
        DomainKind::LShape => structured_cells(&[(0, 0), (0, 1), (1, 1)]),
        DomainKind::Polygon => {
            let triangles = ear_clip(&domain.vertices)?;
            Mesh::from_cells(domain.vertices.clone(), triangles)
        }
    }
}

/// Criss-cross mesh over the listed cells of the 2x2 grid of 0.5-sized squares.
fn structured_cells(cells: &[(usize, usize)]) -> Result<Mesh> {
    let mut index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut points = Vec::new();
    let mut node = |ij: (usize, usize), points: &mut Vec<Vec2>| -> usize {
        *index.entry(ij).or_insert_with(|| {
            points.push(Vec2::new(ij.0 as f64 * 0.5, ij.1 as f64 * 0.5));
            points.len() - 1
        })
    };
    let mut triangles = Vec::new();
    for &(i, j) in cells {
        let bl = node((i, j), &mut points);
        let br = node((i + 1, j), &mut points);
        let tr = node((i + 1, j + 1), &mut points);
        let tl = node((i, j + 1), &mut points);
        triangles.push([bl, br, tr]);
        triangles.push([bl, tr, tl]);
    }
    Mesh::from_cells(points, triangles)
}

/// Ear-clipping triangulation of a simple counterclockwise polygon.
fn ear_clip(vertices: &[Vec2]) -> Result<Vec<[usize; 3]>> {
    let n = vertices.len();
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut triangles = Vec::with_capacity(n - 2);
    let inside_tri = |a: Vec2, b: Vec2, c: Vec2, p: Vec2| -> bool {
        let s0 = (b - a).perp(&(p - a));
        let s1 = (c - b).perp(&(p - b));
        let s2 = (a - c).perp(&(p - c));
        s0 > -1e-14 && s1 > -1e-14 && s2 > -1e-14
    };
    while remaining.len() > 3 {
        let m = remaining.len();
        let mut clipped = false;
        for i in 0..m {
            let (ia, ib, ic) = (remaining[(i + m - 1) % m], remaining[i], remaining[(i + 1) % m]);
            let (a, b, c) = (vertices[ia], vertices[ib], vertices[ic]);
            if (b - a).perp(&(c - a)) <= 1e-14 {
                continue; // reflex or collinear corner
            }
            let blocked = remaining
                .iter()
                .any(|&j| j != ia && j != ib && j != ic && inside_tri(a, b, c, vertices[j]));
            if !blocked {
                triangles.push([ia, ib, ic]);
                remaining.remove(i);
                clipped = true;
                break;
            }
        }
        if !clipped {
            return Err(Error::InvalidDomain("polygon is not simple".into()));
        }
    }
    let [ia, ib, ic] = [remaining[0], remaining[1], remaining[2]];
    triangles.push([ia, ib, ic]);
    Ok(triangles)
}
