use nalgebra::{DMatrix, DVector};

use super::quadrature::{barycentric_gradients, edge_p2_values, p2_gradients, GAUSS4, TRI7};
use super::{ConductivityField, ContactImpedances, SystemMatrices};
use crate::geometry::Mesh2D;
use crate::linalg::{CsrMatrix, TripletBuilder};
use crate::{Error, Result};

/// Relative positivity floor applied to nodal conductivities inside
/// assembly: values below `floor_fraction * mean` are clipped so the system
/// stays positive definite when an optimizer step overshoots. The caller's
/// vector is never modified.
pub const CONDUCTIVITY_FLOOR_FRACTION: f64 = 1e-3;

/// Conductivity-weighted stiffness block
/// `B(i, j) = Σ_k α_k ∫ φ_k ∇ψ_i · ∇ψ_j dΩ`, exactly linear in the nodal
/// coefficients `α` (no positivity handling here).
pub fn stiffness_matrix(mesh: &Mesh2D, alpha: &DVector<f64>) -> Result<CsrMatrix> {
    if alpha.len() != mesh.n_linear_nodes() {
        return Err(Error::DimensionMismatch {
            context: "conductivity coefficients vs linear nodes",
            expected: mesh.n_linear_nodes(),
            got: alpha.len(),
        });
    }
    let m = mesh.n_quadratic_nodes();
    let mut trip = TripletBuilder::with_capacity(m, m, mesh.n_elements() * 36);
    for t in 0..mesh.n_elements() {
        let [v0, v1, v2] = mesh.triangles[t];
        let p = [mesh.vertices[v0], mesh.vertices[v1], mesh.vertices[v2]];
        let (g, area) = barycentric_gradients(p);
        let nodes = mesh.quadratic_nodes_of(t);
        let a_loc = [alpha[v0], alpha[v1], alpha[v2]];

        let mut local = [[0.0f64; 6]; 6];
        for &(l, w) in &TRI7 {
            let sigma_q = a_loc[0] * l[0] + a_loc[1] * l[1] + a_loc[2] * l[2];
            let grads = p2_gradients(l, &g);
            let s = w * area * sigma_q;
            for i in 0..6 {
                for j in i..6 {
                    local[i][j] += s * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
                }
            }
        }
        for i in 0..6 {
            for j in i..6 {
                trip.push(nodes[i], nodes[j], local[i][j]);
                if i != j {
                    trip.push(nodes[j], nodes[i], local[i][j]);
                }
            }
        }
    }
    Ok(trip.build())
}

/// Electrode boundary blocks: the mass block `D`, coupling block `E` and
/// the diagonal of `F`.
///
/// `D` and `E` integrate quadratic traces over the electrode chord
/// polylines; the `F` diagonal uses the exact arc length of each electrode
/// (boundary vertices sit on the circle, so the chords underestimate the
/// arc only at O(h²)).
pub fn boundary_blocks(
    mesh: &Mesh2D,
    z: &ContactImpedances,
) -> Result<(CsrMatrix, DMatrix<f64>, DVector<f64>)> {
    let l_count = mesh.layout.count;
    if z.len() != l_count {
        return Err(Error::DimensionMismatch {
            context: "contact impedances vs electrode count",
            expected: l_count,
            got: z.len(),
        });
    }
    z.validate()?;

    let m = mesh.n_quadratic_nodes();
    let nv = mesh.n_linear_nodes();
    let mut trip_d = TripletBuilder::with_capacity(m, m, mesh.boundary_edges.len() * 9);
    let mut e = DMatrix::zeros(m, l_count);

    for (l, group) in mesh.electrode_edges.iter().enumerate() {
        let inv_z = 1.0 / z.values[l];
        for &edge in group {
            let [a, b] = mesh.edges[edge];
            let nodes = [a, b, nv + edge];
            let len = mesh.edge_length(edge);
            let mut d_loc = [[0.0f64; 3]; 3];
            let mut e_loc = [0.0f64; 3];
            for &(t, w) in &GAUSS4 {
                let n = edge_p2_values(t);
                let s = w * len * inv_z;
                for i in 0..3 {
                    e_loc[i] -= s * n[i];
                    for j in i..3 {
                        d_loc[i][j] += s * n[i] * n[j];
                    }
                }
            }
            for i in 0..3 {
                e[(nodes[i], l)] += e_loc[i];
                for j in i..3 {
                    trip_d.push(nodes[i], nodes[j], d_loc[i][j]);
                    if i != j {
                        trip_d.push(nodes[j], nodes[i], d_loc[i][j]);
                    }
                }
            }
        }
    }

    let f = DVector::from_fn(l_count, |l, _| mesh.layout.width / z.values[l]);
    Ok((trip_d.build(), e, f))
}

/// Assemble the CEM system blocks for a conductivity field and contact
/// impedances. Nodal conductivities are clipped at the positivity floor
/// before entering the stiffness block.
pub fn assemble_system(
    mesh: &Mesh2D,
    sigma: &ConductivityField,
    z: &ContactImpedances,
) -> Result<SystemMatrices> {
    if sigma.len() != mesh.n_linear_nodes() {
        return Err(Error::DimensionMismatch {
            context: "conductivity coefficients vs linear nodes",
            expected: mesh.n_linear_nodes(),
            got: sigma.len(),
        });
    }
    let mean = sigma.mean();
    if !(mean > 0.0) {
        return Err(Error::NonpositiveConductivity(format!(
            "mean nodal conductivity {mean:.3e} µS/cm"
        )));
    }
    let floor = CONDUCTIVITY_FLOOR_FRACTION * mean;
    let effective = DVector::from_fn(sigma.len(), |i, _| sigma.values[i].max(floor));

    let stiffness = stiffness_matrix(mesh, &effective)?;
    let (boundary_mass, coupling, contact) = boundary_blocks(mesh, z)?;
    Ok(SystemMatrices {
        stiffness,
        boundary_mass,
        coupling,
        contact,
    })
}
