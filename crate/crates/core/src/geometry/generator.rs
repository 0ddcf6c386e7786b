use std::f64::consts::PI;

use super::{validate_mesh, ElectrodeLayout, Mesh2D};
use crate::{Error, Result};

/// Generate a triangular mesh of the disk described by `layout`.
///
/// Boundary vertices are placed exactly on the circle with every electrode
/// arc endpoint coinciding with a vertex; the interior is seeded on uniform
/// polar rings and triangulated by Delaunay. The construction is fully
/// deterministic, so identical inputs reproduce identical meshes.
///
/// The number of elements lands within ±20% of `target_elements` (via the
/// Euler relation `T = 2P - B - 2` for a triangulated disk the interior
/// point count is chosen to match the target almost exactly).
pub fn generate_disk_mesh(layout: &ElectrodeLayout, target_elements: usize) -> Result<Mesh2D> {
    layout.validate()?;
    if target_elements < 16 * layout.count {
        return Err(Error::GeometryInfeasible(format!(
            "target of {} elements cannot resolve {} electrodes (need at least {})",
            target_elements,
            layout.count,
            16 * layout.count
        )));
    }

    let radius = layout.radius;
    let mean_area = PI * radius * radius / target_elements as f64;
    // edge length of an equilateral triangle of the mean area
    let h = (4.0 * mean_area / 3f64.sqrt()).sqrt();

    let boundary_angles = boundary_angles(layout, h);
    let n_b = boundary_angles.len();

    // Euler: T = 2P - B - 2 for a Delaunay triangulation whose hull is the
    // boundary ring, so P is determined by the element target.
    let p_total = (target_elements + n_b + 2).div_ceil(2);
    if p_total <= n_b {
        return Err(Error::GeometryInfeasible(format!(
            "electrode layout requires {n_b} boundary vertices but the target \
             of {target_elements} elements leaves no room for interior points"
        )));
    }
    let n_interior = p_total - n_b;

    let mut points: Vec<[f64; 2]> =
        boundary_angles.iter().map(|&a| [radius * a.cos(), radius * a.sin()]).collect();
    points.extend(interior_points(radius, h, n_interior));

    let dpoints: Vec<delaunator::Point> = points
        .iter()
        .map(|p| delaunator::Point { x: p[0], y: p[1] })
        .collect();
    let tri = delaunator::triangulate(&dpoints);
    if tri.triangles.is_empty() {
        return Err(Error::GenerationFailed("triangulation is empty".into()));
    }
    let triangles: Vec<[usize; 3]> = tri
        .triangles
        .chunks_exact(3)
        .map(|c| [c[0], c[1], c[2]])
        .collect();

    let mesh = Mesh2D::from_vertices_triangles(layout.clone(), points, triangles)?;

    let report = validate_mesh(&mesh);
    if !report.is_empty() {
        return Err(Error::GenerationFailed(format!(
            "generated mesh violates invariants: {report}"
        )));
    }
    let n = mesh.n_elements() as f64;
    let t = target_elements as f64;
    if (n - t).abs() > 0.2 * t {
        return Err(Error::GenerationFailed(format!(
            "generated {} elements, outside ±20% of target {}",
            mesh.n_elements(),
            target_elements
        )));
    }
    Ok(mesh)
}

/// Boundary vertex angles: every electrode arc endpoint is included exactly,
/// and arcs/gaps are subdivided near the requested spacing `h`.
fn boundary_angles(layout: &ElectrodeLayout, h: f64) -> Vec<f64> {
    let mut angles = Vec::new();
    let half = layout.half_arc_angle();
    let gap = layout.pitch() - 2.0 * half;
    let h_angle = h / layout.radius;
    for l in 0..layout.count {
        let start = layout.center_angle(l) - half;
        // electrode arc [start, start + 2*half)
        let n_seg = ((2.0 * half / h_angle).round() as usize).max(1);
        for k in 0..n_seg {
            angles.push(start + 2.0 * half * k as f64 / n_seg as f64);
        }
        // gap arc [start + 2*half, next electrode start)
        let gstart = start + 2.0 * half;
        let n_seg = ((gap / h_angle).round() as usize).max(1);
        for k in 0..n_seg {
            angles.push(gstart + gap * k as f64 / n_seg as f64);
        }
    }
    angles
}

/// Interior seed points: `count` points on concentric rings plus the center,
/// ring capacity proportional to radius, staggered half a step per ring.
fn interior_points(radius: f64, h: f64, count: usize) -> Vec<[f64; 2]> {
    let mut pts = Vec::with_capacity(count);
    if count == 0 {
        return pts;
    }
    pts.push([0.0, 0.0]);
    let remaining = count - 1;
    if remaining == 0 {
        return pts;
    }

    let mut n_rings = (radius / h).round() as usize;
    n_rings = n_rings.max(2);
    // ring j = 1..n_rings-1 at radius r_j = radius * j / n_rings, weight ∝ j
    loop {
        let weight: usize = (1..n_rings).sum();
        if weight <= remaining || n_rings == 2 {
            break;
        }
        n_rings -= 1;
    }
    let weight: usize = (1..n_rings).sum::<usize>().max(1);

    // largest-remainder apportionment of `remaining` slots over rings
    let mut alloc: Vec<usize> = (1..n_rings)
        .map(|j| remaining * j / weight)
        .collect();
    let mut used: usize = alloc.iter().sum();
    let mut j = n_rings - 1;
    while used < remaining {
        alloc[j - 1] += 1;
        used += 1;
        j = if j > 1 { j - 1 } else { n_rings - 1 };
    }
    while used > remaining {
        if let Some(a) = alloc.iter_mut().rev().find(|a| **a > 0) {
            *a -= 1;
            used -= 1;
        }
    }

    for (idx, &n_j) in alloc.iter().enumerate() {
        if n_j == 0 {
            continue;
        }
        let ring = idx + 1;
        let r = radius * ring as f64 / n_rings as f64;
        let stagger = if ring % 2 == 0 { 0.5 } else { 0.0 };
        for k in 0..n_j {
            let a = 2.0 * PI * (k as f64 + stagger) / n_j as f64;
            pts.push([r * a.cos(), r * a.sin()]);
        }
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn paper_layout() -> ElectrodeLayout {
        ElectrodeLayout::new(16, 2.5, 14.0, 0.0).unwrap()
    }

    #[test]
    fn paper_mesh_hits_element_target() {
        let mesh = generate_disk_mesh(&paper_layout(), 2414).unwrap();
        let n = mesh.n_elements() as f64;
        assert!((n - 2414.0).abs() <= 0.2 * 2414.0, "elements = {n}");
        assert_eq!(mesh.electrode_edges.len(), 16);
        assert!(mesh.electrode_edges.iter().all(|g| !g.is_empty()));
    }

    #[test]
    fn fine_mesh_node_counts_near_reference() {
        let mesh = generate_disk_mesh(&paper_layout(), 8394).unwrap();
        let n = mesh.n_linear_nodes() as f64;
        let m = mesh.n_quadratic_nodes() as f64;
        assert!((n - 4374.0).abs() / 4374.0 < 0.05, "linear nodes = {n}");
        assert!((m - 17141.0).abs() / 17141.0 < 0.05, "quadratic nodes = {m}");
    }

    #[test]
    fn minimal_two_electrode_layout() {
        let layout = ElectrodeLayout::new(2, 0.1, 14.0, 0.0).unwrap();
        let mesh = generate_disk_mesh(&layout, 32).unwrap();
        assert_eq!(mesh.electrode_edges.len(), 2);
        assert!(mesh.electrode_edges.iter().all(|g| !g.is_empty()));
    }

    #[test]
    fn overlapping_electrodes_rejected() {
        let err = ElectrodeLayout::new(16, 6.0, 14.0, 0.0).unwrap_err();
        assert!(matches!(err, Error::GeometryInfeasible(_)));
    }

    #[test]
    fn too_few_elements_rejected() {
        let err = generate_disk_mesh(&paper_layout(), 8).unwrap_err();
        assert!(matches!(err, Error::GeometryInfeasible(_)));
    }

    #[test]
    fn area_matches_disk_within_chord_tolerance() {
        let layout = paper_layout();
        let mesh = generate_disk_mesh(&layout, 2414).unwrap();
        let area = mesh.total_area();
        let exact = PI * layout.radius * layout.radius;
        assert!(
            (area - exact).abs() / exact < 0.005,
            "area defect {:.3e}",
            (area - exact).abs() / exact
        );
    }

    #[test]
    fn refinement_shrinks_area_defect() {
        let layout = paper_layout();
        let exact = PI * layout.radius * layout.radius;
        let defect = |t: usize| {
            let m = generate_disk_mesh(&layout, t).unwrap();
            (m.total_area() - exact).abs() / exact
        };
        let coarse = defect(2000);
        let fine = defect(8000);
        assert!(
            fine * 2.0 <= coarse,
            "coarse defect {coarse:.3e}, fine defect {fine:.3e}"
        );
    }

    #[test]
    fn electrode_groups_are_disjoint() {
        let mesh = generate_disk_mesh(&paper_layout(), 2414).unwrap();
        let mut seen = std::collections::HashSet::new();
        for group in &mesh.electrode_edges {
            for &e in group {
                assert!(seen.insert(e), "edge {e} in two electrode groups");
            }
        }
    }

    #[test]
    fn electrode_endpoints_are_mesh_vertices() {
        let layout = paper_layout();
        let mesh = generate_disk_mesh(&layout, 2414).unwrap();
        for l in 0..layout.count {
            let (a, b) = layout.arc(l);
            for ang in [a, b] {
                let p = [layout.radius * ang.cos(), layout.radius * ang.sin()];
                let found = mesh
                    .vertices
                    .iter()
                    .any(|v| ((v[0] - p[0]).powi(2) + (v[1] - p[1]).powi(2)).sqrt() < 1e-9);
                assert!(found, "arc endpoint of electrode {l} is not a vertex");
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_disk_mesh(&paper_layout(), 1200).unwrap();
        let b = generate_disk_mesh(&paper_layout(), 1200).unwrap();
        assert_eq!(a.vertices, b.vertices);
        assert_eq!(a.triangles, b.triangles);
    }
}
