use nalgebra::{DMatrix, DVector};

use super::quadrature::{barycentric_gradients, p2_gradients, TRI7};
use super::solve::CemFactorization;
use super::{
    assemble_system, electrode_basis, ConductivityField, ContactImpedances, StimulationProtocol,
};
use crate::geometry::Mesh2D;
use crate::Result;

/// Dense Jacobian of the stacked voltages with respect to the nodal
/// conductivity coefficients, shape (measurements × linear nodes).
///
/// Computed with the adjoint method: one factorization serves the forward
/// solves of all current patterns and the adjoint solves of all measurement
/// rows, and each entry is the weighted domain integral of
/// `∇u_inj · ∇w_row` against the linear basis function of the node:
/// `J[(i,j), k] = -∫ φ_k ∇u_i · ∇w_j dΩ`.
pub fn jacobian(
    mesh: &Mesh2D,
    sigma: &ConductivityField,
    z: &ContactImpedances,
    protocol: &StimulationProtocol,
) -> Result<DMatrix<f64>> {
    let sys = assemble_system(mesh, sigma, z)?;
    protocol.validate()?;
    let factor = CemFactorization::new(&sys)?;
    let m = sys.n_potential();
    let l = sys.electrode_count();
    let n_inj = protocol.n_injections();
    let n_rows = protocol.n_meas_per_injection();

    // forward fields per injection
    let mut forward = Vec::with_capacity(n_inj);
    for i in 0..n_inj {
        let f = sys.rhs(&protocol.currents.column(i).clone_owned());
        let theta = factor.solve_checked(&sys, &f)?;
        forward.push(theta.rows(0, m).clone_owned());
    }

    // adjoint fields per measurement row: A w = [0, (M C)_rowᵀ]
    let c = electrode_basis(l);
    let mc = &protocol.measurement * &c;
    let mut adjoint = Vec::with_capacity(n_rows);
    for j in 0..n_rows {
        let mut g = DVector::zeros(sys.dim());
        g.rows_mut(m, l - 1)
            .copy_from(&mc.row(j).transpose());
        let w = factor.solve_checked(&sys, &g)?;
        adjoint.push(w.rows(0, m).clone_owned());
    }

    let n = mesh.n_linear_nodes();
    let mut jac = DMatrix::zeros(n_inj * n_rows, n);
    let mut grad_u = vec![[0.0f64; 2]; n_inj];
    let mut grad_w = vec![[0.0f64; 2]; n_rows];

    for t in 0..mesh.n_elements() {
        let [v0, v1, v2] = mesh.triangles[t];
        let p = [mesh.vertices[v0], mesh.vertices[v1], mesh.vertices[v2]];
        let (g, area) = barycentric_gradients(p);
        let nodes = mesh.quadratic_nodes_of(t);
        let linear = [v0, v1, v2];

        for &(lam, w_q) in &TRI7 {
            let grads = p2_gradients(lam, &g);
            for (i, field) in forward.iter().enumerate() {
                let mut d = [0.0; 2];
                for k in 0..6 {
                    let c = field[nodes[k]];
                    d[0] += c * grads[k][0];
                    d[1] += c * grads[k][1];
                }
                grad_u[i] = d;
            }
            for (j, field) in adjoint.iter().enumerate() {
                let mut d = [0.0; 2];
                for k in 0..6 {
                    let c = field[nodes[k]];
                    d[0] += c * grads[k][0];
                    d[1] += c * grads[k][1];
                }
                grad_w[j] = d;
            }
            let s = w_q * area;
            for i in 0..n_inj {
                let gu = grad_u[i];
                for j in 0..n_rows {
                    let gw = grad_w[j];
                    let dot = gu[0] * gw[0] + gu[1] * gw[1];
                    let row = i * n_rows + j;
                    for (k, &vk) in linear.iter().enumerate() {
                        jac[(row, vk)] -= s * lam[k] * dot;
                    }
                }
            }
        }
    }
    Ok(jac)
}
