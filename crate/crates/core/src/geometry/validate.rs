use std::collections::HashMap;
use std::fmt;

use super::Mesh2D;

/// A single violated mesh invariant with the entities involved.
#[derive(Debug, Clone, PartialEq)]
pub enum MeshViolation {
    /// Edge incident to a number of triangles other than 1 (boundary) or 2.
    NonconformingEdge { edge: [usize; 2], incident: usize },
    /// Triangle with nonpositive signed area.
    FlippedTriangle { triangle: usize, area: f64 },
    /// Electrode arc not covered by its boundary edges within the chord
    /// tolerance, or not contiguous.
    ElectrodeCoverage {
        electrode: usize,
        arc_length: f64,
        covered: f64,
    },
    /// Electrode with no boundary edges at all.
    EmptyElectrode { electrode: usize },
    /// Boundary edge claimed by more than one electrode.
    SharedElectrodeEdge { edge: usize },
    /// Second-order node numbering out of convention.
    MidpointNumbering { edge: usize, node: usize },
}

impl fmt::Display for MeshViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NonconformingEdge { edge, incident } => {
                write!(f, "edge {edge:?} incident to {incident} triangles")
            }
            Self::FlippedTriangle { triangle, area } => {
                write!(f, "triangle {triangle} has nonpositive area {area:.3e}")
            }
            Self::ElectrodeCoverage {
                electrode,
                arc_length,
                covered,
            } => write!(
                f,
                "electrode {electrode} covers {covered:.6} of arc {arc_length:.6}"
            ),
            Self::EmptyElectrode { electrode } => {
                write!(f, "electrode {electrode} has no boundary edges")
            }
            Self::SharedElectrodeEdge { edge } => {
                write!(f, "boundary edge {edge} belongs to multiple electrodes")
            }
            Self::MidpointNumbering { edge, node } => {
                write!(f, "edge {edge} maps to unexpected node {node}")
            }
        }
    }
}

/// Diagnostic report listing every violated invariant.
#[derive(Debug, Clone, Default)]
pub struct MeshReport {
    pub violations: Vec<MeshViolation>,
}

impl MeshReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for MeshReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "mesh valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Check every mesh invariant and report all violations. An empty report
/// means the mesh is valid.
pub fn validate_mesh(mesh: &Mesh2D) -> MeshReport {
    let mut violations = Vec::new();

    // orientation and degeneracy
    for t in 0..mesh.triangles.len() {
        let area = mesh.triangle_area(t);
        if area <= 0.0 {
            violations.push(MeshViolation::FlippedTriangle { triangle: t, area });
        }
    }

    // conformity: every edge incident to 1 or 2 triangles
    let mut incidence: HashMap<[usize; 2], usize> = HashMap::new();
    for t in &mesh.triangles {
        for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            *incidence.entry([a.min(b), a.max(b)]).or_insert(0) += 1;
        }
    }
    for (edge, count) in &incidence {
        if *count > 2 {
            violations.push(MeshViolation::NonconformingEdge {
                edge: *edge,
                incident: *count,
            });
        }
    }

    // second-order node numbering convention
    let nv = mesh.vertices.len();
    for (e, &node) in mesh.edge_midpoint_nodes.iter().enumerate() {
        if node != nv + e {
            violations.push(MeshViolation::MidpointNumbering { edge: e, node });
        }
    }

    // electrode groups: nonempty, disjoint, covering their arcs
    let mut edge_owner: HashMap<usize, usize> = HashMap::new();
    for (l, group) in mesh.electrode_edges.iter().enumerate() {
        if group.is_empty() {
            violations.push(MeshViolation::EmptyElectrode { electrode: l });
            continue;
        }
        for &e in group {
            if edge_owner.insert(e, l).is_some() {
                violations.push(MeshViolation::SharedElectrodeEdge { edge: e });
            }
        }
        let covered: f64 = group.iter().map(|&e| mesh.edge_length(e)).sum();
        let arc_length = mesh.layout.width;
        // chords underestimate the arc slightly; allow 1% plus rounding
        if (covered - arc_length).abs() > 0.01 * arc_length + 1e-9 {
            violations.push(MeshViolation::ElectrodeCoverage {
                electrode: l,
                arc_length,
                covered,
            });
        }
    }

    MeshReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_disk_mesh, ElectrodeLayout};

    #[test]
    fn generated_mesh_is_valid() {
        let layout = ElectrodeLayout::new(16, 2.5, 14.0, 0.0).unwrap();
        let mesh = generate_disk_mesh(&layout, 2414).unwrap();
        let report = validate_mesh(&mesh);
        assert!(report.is_empty(), "{report}");
    }

    #[test]
    fn flipped_triangle_is_named() {
        let layout = ElectrodeLayout::new(16, 2.5, 14.0, 0.0).unwrap();
        let mut mesh = generate_disk_mesh(&layout, 600).unwrap();
        mesh.triangles[7].swap(0, 1);
        let report = validate_mesh(&mesh);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, MeshViolation::FlippedTriangle { triangle: 7, .. })));
    }

    #[test]
    fn missing_electrode_edges_detected() {
        let layout = ElectrodeLayout::new(16, 2.5, 14.0, 0.0).unwrap();
        let mut mesh = generate_disk_mesh(&layout, 600).unwrap();
        mesh.electrode_edges[3].clear();
        let report = validate_mesh(&mesh);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, MeshViolation::EmptyElectrode { electrode: 3 })));
    }
}
