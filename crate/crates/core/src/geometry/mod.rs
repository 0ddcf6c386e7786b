//! Triangular disk meshes with equispaced boundary electrodes.
//!
//! Conductivity lives on the piecewise-linear (vertex) basis, the potential
//! on the piecewise-quadratic basis whose extra nodes sit at edge midpoints.
//! Edges are numbered canonically (lower vertex index first, lexicographic
//! order), so second-order node numbering is stable across runs.

mod generator;
mod locate;
mod validate;
mod wheel;

pub use generator::generate_disk_mesh;
pub use locate::PointLocator;
pub use validate::{validate_mesh, MeshReport, MeshViolation};
pub use wheel::symmetric_wheel_mesh;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Equispaced electrodes on a circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectrodeLayout {
    /// Number of electrodes.
    pub count: usize,
    /// Electrode width as arc length (cm).
    pub width: f64,
    /// Circle radius (cm).
    pub radius: f64,
    /// Angular position of the center of electrode 0 (radians).
    pub angular_offset: f64,
}

impl ElectrodeLayout {
    pub fn new(count: usize, width: f64, radius: f64, angular_offset: f64) -> Result<Self> {
        let layout = Self {
            count,
            width,
            radius,
            angular_offset,
        };
        layout.validate()?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<()> {
        if self.count < 2 {
            return Err(Error::GeometryInfeasible(format!(
                "need at least 2 electrodes, got {}",
                self.count
            )));
        }
        if !(self.width > 0.0) || !(self.radius > 0.0) {
            return Err(Error::GeometryInfeasible(
                "electrode width and radius must be positive".into(),
            ));
        }
        if self.width * self.count as f64 >= 2.0 * std::f64::consts::PI * self.radius {
            return Err(Error::GeometryInfeasible(format!(
                "{} electrodes of width {} cm overlap on a circle of radius {} cm",
                self.count, self.width, self.radius
            )));
        }
        Ok(())
    }

    /// Angular half-width of one electrode (radians).
    pub fn half_arc_angle(&self) -> f64 {
        0.5 * self.width / self.radius
    }

    /// Center angle of electrode `index` (radians, unnormalized).
    pub fn center_angle(&self, index: usize) -> f64 {
        self.angular_offset + 2.0 * std::f64::consts::PI * index as f64 / self.count as f64
    }

    /// Arc interval `(start, end)` of electrode `index`, with `end > start`.
    pub fn arc(&self, index: usize) -> (f64, f64) {
        let c = self.center_angle(index);
        let h = self.half_arc_angle();
        (c - h, c + h)
    }

    /// Electrode pitch: the angle between adjacent electrode centers.
    pub fn pitch(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.count as f64
    }

    /// Index of the electrode whose arc contains the angle, if any.
    pub fn electrode_at_angle(&self, theta: f64) -> Option<usize> {
        let h = self.half_arc_angle();
        for l in 0..self.count {
            let d = wrap_angle(theta - self.center_angle(l));
            if d.abs() <= h + 1e-12 {
                return Some(l);
            }
        }
        None
    }
}

/// Wrap an angle to `(-pi, pi]`.
pub(crate) fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut r = a % two_pi;
    if r <= -std::f64::consts::PI {
        r += two_pi;
    } else if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}

/// Conforming triangulation of a disk with electrode edge groups and
/// first/second-order nodal bases.
#[derive(Debug, Clone)]
pub struct Mesh2D {
    pub layout: ElectrodeLayout,
    /// Vertex coordinates (cm). These are the first-order nodes.
    pub vertices: Vec<[f64; 2]>,
    /// Positively oriented vertex-index triples.
    pub triangles: Vec<[usize; 3]>,
    /// Canonical edge list: `edges[e] = [a, b]` with `a < b`, sorted
    /// lexicographically.
    pub edges: Vec<[usize; 2]>,
    /// For each triangle, the edge ids of its local edges (01, 12, 20).
    pub triangle_edges: Vec<[usize; 3]>,
    /// Edge ids incident to exactly one triangle.
    pub boundary_edges: Vec<usize>,
    /// Per electrode, the boundary edge ids covering its arc.
    pub electrode_edges: Vec<Vec<usize>>,
    /// Second-order node id of each edge (`n_linear_nodes + edge id`).
    pub edge_midpoint_nodes: Vec<usize>,
}

impl Mesh2D {
    /// Number of first-order (vertex) nodes.
    pub fn n_linear_nodes(&self) -> usize {
        self.vertices.len()
    }

    /// Number of second-order nodes (vertices plus edge midpoints).
    pub fn n_quadratic_nodes(&self) -> usize {
        self.vertices.len() + self.edges.len()
    }

    pub fn n_elements(&self) -> usize {
        self.triangles.len()
    }

    /// Build a mesh from raw vertices and triangles, deriving edges,
    /// boundary and electrode groups. Triangle orientation is normalized to
    /// counter-clockwise.
    pub fn from_vertices_triangles(
        layout: ElectrodeLayout,
        vertices: Vec<[f64; 2]>,
        mut triangles: Vec<[usize; 3]>,
    ) -> Result<Self> {
        layout.validate()?;
        let nv = vertices.len();
        for t in &mut triangles {
            if t.iter().any(|&v| v >= nv) {
                return Err(Error::GenerationFailed("triangle vertex out of range".into()));
            }
            let a = signed_area(&vertices, *t);
            if a == 0.0 {
                return Err(Error::GenerationFailed(format!(
                    "degenerate triangle {t:?}"
                )));
            }
            if a < 0.0 {
                t.swap(1, 2);
            }
        }

        // canonical edges
        let mut edge_set: Vec<[usize; 2]> = Vec::with_capacity(triangles.len() * 3 / 2 + 8);
        for t in &triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                edge_set.push([a.min(b), a.max(b)]);
            }
        }
        edge_set.sort_unstable();
        edge_set.dedup();
        let edges = edge_set;
        let edge_id = |a: usize, b: usize| -> usize {
            let key = [a.min(b), a.max(b)];
            edges.binary_search(&key).expect("edge present")
        };

        let mut incidence = vec![0usize; edges.len()];
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for t in &triangles {
            let te = [
                edge_id(t[0], t[1]),
                edge_id(t[1], t[2]),
                edge_id(t[2], t[0]),
            ];
            for &e in &te {
                incidence[e] += 1;
            }
            triangle_edges.push(te);
        }
        let boundary_edges: Vec<usize> = (0..edges.len()).filter(|&e| incidence[e] == 1).collect();

        // electrode groups: boundary edges whose midpoint angle lies on an arc
        let mut electrode_edges = vec![Vec::new(); layout.count];
        for &e in &boundary_edges {
            let [a, b] = edges[e];
            let mid = [
                0.5 * (vertices[a][0] + vertices[b][0]),
                0.5 * (vertices[a][1] + vertices[b][1]),
            ];
            let theta = mid[1].atan2(mid[0]);
            if let Some(l) = layout.electrode_at_angle(theta) {
                electrode_edges[l].push(e);
            }
        }

        let edge_midpoint_nodes = (0..edges.len()).map(|e| nv + e).collect();

        Ok(Self {
            layout,
            vertices,
            triangles,
            edges,
            triangle_edges,
            boundary_edges,
            electrode_edges,
            edge_midpoint_nodes,
        })
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        0.5 * signed_area_x2(&self.vertices, self.triangles[t])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Position of any second-order node (vertex or edge midpoint).
    pub fn quadratic_node_position(&self, node: usize) -> [f64; 2] {
        if node < self.vertices.len() {
            self.vertices[node]
        } else {
            let [a, b] = self.edges[node - self.vertices.len()];
            [
                0.5 * (self.vertices[a][0] + self.vertices[b][0]),
                0.5 * (self.vertices[a][1] + self.vertices[b][1]),
            ]
        }
    }

    /// The six quadratic node ids of a triangle in local order
    /// (v0, v1, v2, m01, m12, m20).
    pub fn quadratic_nodes_of(&self, t: usize) -> [usize; 6] {
        let [v0, v1, v2] = self.triangles[t];
        let [e01, e12, e20] = self.triangle_edges[t];
        let nv = self.vertices.len();
        [v0, v1, v2, nv + e01, nv + e12, nv + e20]
    }

    /// Barycentric coordinates of point `p` with respect to triangle `t`.
    pub fn barycentric(&self, t: usize, p: [f64; 2]) -> [f64; 3] {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        let det = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]);
        let l1 = ((pb[0] - p[0]) * (pc[1] - p[1]) - (pc[0] - p[0]) * (pb[1] - p[1])) / det;
        let l2 = ((pc[0] - p[0]) * (pa[1] - p[1]) - (pa[0] - p[0]) * (pc[1] - p[1])) / det;
        [l1, l2, 1.0 - l1 - l2]
    }

    /// Chord length of an edge.
    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e];
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt()
    }
}

fn signed_area_x2(vertices: &[[f64; 2]], t: [usize; 3]) -> f64 {
    let (a, b, c) = (vertices[t[0]], vertices[t[1]], vertices[t[2]]);
    (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
}

fn signed_area(vertices: &[[f64; 2]], t: [usize; 3]) -> f64 {
    0.5 * signed_area_x2(vertices, t)
}
