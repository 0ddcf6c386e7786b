use std::f64::consts::PI;

use super::{ElectrodeLayout, Mesh2D};
use crate::Result;

/// Structured disk mesh that is symmetric (as a triangle set) under the
/// dihedral group of its sector count: a center fan, one interior ring and
/// crossed quads towards the boundary.
///
/// With `sectors` a multiple of the electrode count, rotations by one
/// electrode pitch map the mesh and its electrode edge groups exactly onto
/// themselves, which the unstructured generator cannot guarantee. Intended
/// for symmetry studies and small verification problems.
pub fn symmetric_wheel_mesh(layout: &ElectrodeLayout, sectors: usize) -> Result<Mesh2D> {
    assert!(sectors >= 4, "need at least 4 sectors");
    assert_eq!(
        sectors % layout.count,
        0,
        "sector count must be a multiple of the electrode count"
    );
    // electrodes must cover whole boundary edges, otherwise the contact
    // blocks (chord integrals) and the arc-length F diagonal disagree and
    // the system can lose positive definiteness
    let sector_arc = 2.0 * PI * layout.radius / sectors as f64;
    let m = (layout.width / sector_arc).round();
    assert!(
        m >= 1.0 && (layout.width - m * sector_arc).abs() < 1e-9 * layout.radius,
        "electrode width must span a whole number of boundary edges \
         (width {}, boundary edge arc {sector_arc})",
        layout.width
    );
    let r = layout.radius;
    let r1 = 0.45 * r;
    let angle = |i: usize| 2.0 * PI * i as f64 / sectors as f64;

    let mut vertices: Vec<[f64; 2]> = Vec::with_capacity(3 * sectors + 1);
    vertices.push([0.0, 0.0]);
    for i in 0..sectors {
        let a = angle(i);
        vertices.push([r1 * a.cos(), r1 * a.sin()]);
    }
    for i in 0..sectors {
        let a = angle(i);
        vertices.push([r * a.cos(), r * a.sin()]);
    }
    let inner = |i: usize| 1 + (i % sectors);
    let outer = |i: usize| 1 + sectors + (i % sectors);

    // crossed-quad centroids keep the triangulation reflection-symmetric
    let centroid_base = vertices.len();
    for i in 0..sectors {
        let (a, b, c, d) = (
            vertices[inner(i)],
            vertices[inner(i + 1)],
            vertices[outer(i + 1)],
            vertices[outer(i)],
        );
        vertices.push([
            0.25 * (a[0] + b[0] + c[0] + d[0]),
            0.25 * (a[1] + b[1] + c[1] + d[1]),
        ]);
    }

    let mut triangles: Vec<[usize; 3]> = Vec::with_capacity(5 * sectors);
    for i in 0..sectors {
        triangles.push([0, inner(i), inner(i + 1)]);
        let c = centroid_base + i;
        triangles.push([inner(i), inner(i + 1), c]);
        triangles.push([inner(i + 1), outer(i + 1), c]);
        triangles.push([outer(i + 1), outer(i), c]);
        triangles.push([outer(i), inner(i), c]);
    }

    Mesh2D::from_vertices_triangles(layout.clone(), vertices, triangles)
}
