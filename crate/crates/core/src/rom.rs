//! Reduced-order CEM: the precomputed parameter-affine matrix stack, the
//! small dense per-injection solves and the reduced Jacobian.
//!
//! The reduced system matrix for one injection is affine in the reduced
//! conductivity coefficients:
//! `A_red(α) = Σ_k α̃_k B_k + D_red` with `α̃ = [1, α]`, where index 0 tags
//! the mean conductivity and mean potential fields. The mean-potential
//! coefficient is fixed to one and its terms move to the right-hand side,
//! so the solved system has dimension `M̂ + L - 1` regardless of mesh size.

use nalgebra::{DMatrix, DVector};

use crate::fem::{
    assembly::{boundary_blocks, stiffness_matrix},
    electrode_basis, ContactImpedances, StimulationProtocol,
};
use crate::geometry::Mesh2D;
use crate::pod::{PodAmbient, PodBasis};
use crate::{Error, Result};

/// Structural fingerprint used to detect mixing artifacts from different
/// meshes or protocols.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelFingerprint {
    pub mesh: u64,
    pub electrode_count: usize,
    pub n_injections: usize,
}

/// FNV-1a over the mesh geometry.
pub fn mesh_fingerprint(mesh: &Mesh2D) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    };
    eat(&(mesh.vertices.len() as u64).to_le_bytes());
    eat(&(mesh.triangles.len() as u64).to_le_bytes());
    for v in &mesh.vertices {
        eat(&v[0].to_le_bytes());
        eat(&v[1].to_le_bytes());
    }
    for t in &mesh.triangles {
        for &i in t {
            eat(&(i as u64).to_le_bytes());
        }
    }
    h
}

#[inline]
fn matrix_axpy(y: &mut DMatrix<f64>, a: f64, x: &DMatrix<f64>) {
    for (yi, xi) in y.as_mut_slice().iter_mut().zip(x.as_slice()) {
        *yi += a * xi;
    }
}

/// Precomputed reduced-order model.
#[derive(Debug, Clone)]
pub struct ReducedModel {
    /// Conductivity POD basis (N × N̂).
    pub sigma_basis: PodBasis,
    /// Potential POD bases, one per injection (M × M̂ each).
    pub potential_bases: Vec<PodBasis>,
    /// `b_stack[i][k]`, k = 0..=N̂: projected stiffness blocks of size
    /// (M̂+1) × (M̂+1); k = 0 carries the mean conductivity field.
    pub b_stack: Vec<Vec<DMatrix<f64>>>,
    /// Projected electrode mass blocks per injection, (M̂+1) × (M̂+1).
    pub d_red: Vec<DMatrix<f64>>,
    /// Projected coupling blocks per injection, (M̂+1) × L.
    pub e_red: Vec<DMatrix<f64>>,
    /// Diagonal of F.
    pub contact: DVector<f64>,
    pub fingerprint: ModelFingerprint,
}

/// Per-injection solution of the reduced system. The mean-mode potential
/// coefficient is fixed to one and not part of the vector.
#[derive(Debug, Clone)]
pub struct ReducedSolution {
    pub potential_coeffs: DVector<f64>,
    pub electrode: DVector<f64>,
}

impl ReducedModel {
    pub fn n_sigma_modes(&self) -> usize {
        self.sigma_basis.n_modes()
    }

    pub fn n_potential_modes(&self) -> usize {
        self.potential_bases[0].n_modes()
    }

    pub fn n_injections(&self) -> usize {
        self.potential_bases.len()
    }

    pub fn electrode_count(&self) -> usize {
        self.contact.len()
    }

    /// Nodal conductivity represented by reduced coefficients.
    pub fn nodal_conductivity(&self, alpha: &DVector<f64>) -> Result<DVector<f64>> {
        self.sigma_basis.expand(alpha)
    }

    /// Restrict to the leading `n_hat` conductivity and `m_hat` potential
    /// modes. The POD bases are nested, so the projected blocks are leading
    /// submatrices of the stored ones.
    pub fn truncate(&self, n_hat: usize, m_hat: usize) -> ReducedModel {
        let n_hat = n_hat.min(self.n_sigma_modes());
        let m_hat = m_hat.min(self.n_potential_modes());
        let sub = |m: &DMatrix<f64>| m.view((0, 0), (m_hat + 1, m_hat + 1)).clone_owned();
        ReducedModel {
            sigma_basis: self.sigma_basis.truncated(n_hat),
            potential_bases: self
                .potential_bases
                .iter()
                .map(|b| b.truncated(m_hat))
                .collect(),
            b_stack: self
                .b_stack
                .iter()
                .map(|ks| ks.iter().take(n_hat + 1).map(&sub).collect())
                .collect(),
            d_red: self.d_red.iter().map(&sub).collect(),
            e_red: self
                .e_red
                .iter()
                .map(|m| m.view((0, 0), (m_hat + 1, m.ncols())).clone_owned())
                .collect(),
            contact: self.contact.clone(),
            fingerprint: self.fingerprint,
        }
    }
}

/// Assemble the reduced model: project the parameter-affine stiffness stack
/// and the electrode blocks onto the POD bases. Everything here is offline.
pub fn precompute_reduced(
    mesh: &Mesh2D,
    sigma_basis: PodBasis,
    potential_bases: Vec<PodBasis>,
    z: &ContactImpedances,
) -> Result<ReducedModel> {
    if sigma_basis.ambient != PodAmbient::Conductivity {
        return Err(Error::BasisMeshMismatch(
            "first basis must span conductivity".into(),
        ));
    }
    if sigma_basis.ambient_dim() != mesh.n_linear_nodes() {
        return Err(Error::BasisMeshMismatch(format!(
            "conductivity basis dimension {} vs {} linear nodes",
            sigma_basis.ambient_dim(),
            mesh.n_linear_nodes()
        )));
    }
    if potential_bases.is_empty() {
        return Err(Error::BasisMeshMismatch("no potential bases".into()));
    }
    let m_hat = potential_bases[0].n_modes();
    for (i, b) in potential_bases.iter().enumerate() {
        if b.ambient_dim() != mesh.n_quadratic_nodes() {
            return Err(Error::BasisMeshMismatch(format!(
                "potential basis {i} dimension {} vs {} quadratic nodes",
                b.ambient_dim(),
                mesh.n_quadratic_nodes()
            )));
        }
        if b.n_modes() != m_hat {
            return Err(Error::BasisMeshMismatch(
                "potential bases must share the mode count".into(),
            ));
        }
        match b.ambient {
            PodAmbient::Potential { injection } if injection == i => {}
            _ => {
                return Err(Error::BasisMeshMismatch(format!(
                    "potential basis {i} not tagged for injection {i}"
                )))
            }
        }
    }

    let n_inj = potential_bases.len();
    let m_quad = mesh.n_quadratic_nodes();
    let n_hat = sigma_basis.n_modes();

    // augmented trial matrices [mean, modes] per injection
    let mut w_aug = Vec::with_capacity(n_inj);
    for b in &potential_bases {
        let mut w = DMatrix::zeros(m_quad, m_hat + 1);
        w.set_column(0, &b.mean);
        w.columns_mut(1, m_hat).copy_from(&b.modes);
        w_aug.push(w);
    }

    let (d_full, e_full, contact) = boundary_blocks(mesh, z)?;
    let mut d_red = Vec::with_capacity(n_inj);
    let mut e_red = Vec::with_capacity(n_inj);
    for w in &w_aug {
        d_red.push(w.transpose() * d_full.mul_dense(w));
        e_red.push(w.transpose() * &e_full);
    }

    let mut b_stack = vec![Vec::with_capacity(n_hat + 1); n_inj];
    for k in 0..=n_hat {
        let field = if k == 0 {
            sigma_basis.mean.clone()
        } else {
            sigma_basis.modes.column(k - 1).clone_owned()
        };
        let b_full = stiffness_matrix(mesh, &field)?;
        for (i, w) in w_aug.iter().enumerate() {
            let bw = b_full.mul_dense(w);
            let mut red = w.transpose() * bw;
            // exact symmetry of the projected block
            let sym = (&red + red.transpose()) * 0.5;
            red.copy_from(&sym);
            b_stack[i].push(red);
        }
    }

    Ok(ReducedModel {
        sigma_basis,
        potential_bases,
        b_stack,
        d_red,
        e_red,
        contact,
        fingerprint: ModelFingerprint {
            mesh: mesh_fingerprint(mesh),
            electrode_count: z.len(),
            n_injections: n_inj,
        },
    })
}

struct InjectionFactor {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    solution: DVector<f64>,
}

/// Assemble and factor the reduced system of one injection.
fn factor_injection(
    model: &ReducedModel,
    injection: usize,
    alpha: &DVector<f64>,
    currents: &DVector<f64>,
) -> Result<InjectionFactor> {
    let m_hat = model.n_potential_modes();
    let l = model.electrode_count();
    let dim = m_hat + l - 1;

    let mut s = model.d_red[injection].clone();
    s += &model.b_stack[injection][0];
    for k in 0..alpha.len() {
        matrix_axpy(&mut s, alpha[k], &model.b_stack[injection][k + 1]);
    }

    let c = electrode_basis(l);
    let e = &model.e_red[injection];
    let g = e.rows(1, m_hat) * &c;
    let f = DMatrix::from_diagonal(&model.contact);
    let h = c.transpose() * f * &c;

    let mut a = DMatrix::zeros(dim, dim);
    a.view_mut((0, 0), (m_hat, m_hat))
        .copy_from(&s.view((1, 1), (m_hat, m_hat)));
    a.view_mut((0, m_hat), (m_hat, l - 1)).copy_from(&g);
    a.view_mut((m_hat, 0), (l - 1, m_hat))
        .copy_from(&g.transpose());
    a.view_mut((m_hat, m_hat), (l - 1, l - 1)).copy_from(&h);

    let mut rhs = DVector::zeros(dim);
    rhs.rows_mut(0, m_hat)
        .copy_from(&(-s.view((1, 0), (m_hat, 1))));
    let e0 = e.row(0).transpose();
    rhs.rows_mut(m_hat, l - 1)
        .copy_from(&(c.transpose() * (currents - e0)));

    let chol = a.cholesky().ok_or_else(|| {
        Error::IndefiniteReducedSystem(format!(
            "reduced system of injection {injection} lost positive definiteness"
        ))
    })?;
    let solution = chol.solve(&rhs);
    Ok(InjectionFactor { chol, solution })
}

fn check_positive_conductivity(model: &ReducedModel, alpha: &DVector<f64>) -> Result<()> {
    let nodal = model.nodal_conductivity(alpha)?;
    let min = nodal.min();
    if min <= 0.0 {
        return Err(Error::IndefiniteReducedSystem(format!(
            "reduced coefficients drive nodal conductivity to {min:.3e}"
        )));
    }
    Ok(())
}

/// Solve the reduced forward problem: per-injection solutions and the
/// stacked voltages. Runtime is independent of the mesh size.
pub fn reduced_solve(
    model: &ReducedModel,
    alpha: &DVector<f64>,
    protocol: &StimulationProtocol,
) -> Result<(DVector<f64>, Vec<ReducedSolution>)> {
    if alpha.len() != model.n_sigma_modes() {
        return Err(Error::DimensionMismatch {
            context: "reduced coefficients vs conductivity modes",
            expected: model.n_sigma_modes(),
            got: alpha.len(),
        });
    }
    if protocol.n_injections() != model.n_injections()
        || protocol.electrode_count() != model.electrode_count()
    {
        return Err(Error::ModelMismatch(
            "protocol does not match the reduced model".into(),
        ));
    }
    check_positive_conductivity(model, alpha)?;

    let m_hat = model.n_potential_modes();
    let l = model.electrode_count();
    let rows = protocol.n_meas_per_injection();
    let c = electrode_basis(l);
    let mc = &protocol.measurement * &c;

    let mut voltages = DVector::zeros(protocol.n_measurements());
    let mut solutions = Vec::with_capacity(model.n_injections());
    for i in 0..model.n_injections() {
        let fac = factor_injection(model, i, alpha, &protocol.currents.column(i).clone_owned())?;
        let gamma = fac.solution.rows(m_hat, l - 1).clone_owned();
        let v = &mc * &gamma;
        voltages.rows_mut(i * rows, rows).copy_from(&v);
        solutions.push(ReducedSolution {
            potential_coeffs: fac.solution.rows(0, m_hat).clone_owned(),
            electrode: gamma,
        });
    }
    Ok((voltages, solutions))
}

/// Stacked reduced voltages.
pub fn reduced_forward(
    model: &ReducedModel,
    alpha: &DVector<f64>,
    protocol: &StimulationProtocol,
) -> Result<DVector<f64>> {
    reduced_solve(model, alpha, protocol).map(|(v, _)| v)
}

/// Dense Jacobian of the reduced voltages with respect to the reduced
/// conductivity coefficients, via adjoint solves on the small dense system.
pub fn reduced_jacobian(
    model: &ReducedModel,
    alpha: &DVector<f64>,
    protocol: &StimulationProtocol,
) -> Result<DMatrix<f64>> {
    if alpha.len() != model.n_sigma_modes() {
        return Err(Error::DimensionMismatch {
            context: "reduced coefficients vs conductivity modes",
            expected: model.n_sigma_modes(),
            got: alpha.len(),
        });
    }
    check_positive_conductivity(model, alpha)?;

    let n_hat = model.n_sigma_modes();
    let m_hat = model.n_potential_modes();
    let l = model.electrode_count();
    let rows = protocol.n_meas_per_injection();
    let dim = m_hat + l - 1;
    let c = electrode_basis(l);
    let mc = &protocol.measurement * &c;

    let mut jac = DMatrix::zeros(protocol.n_measurements(), n_hat);
    for i in 0..model.n_injections() {
        let fac = factor_injection(model, i, alpha, &protocol.currents.column(i).clone_owned())?;
        let mut beta_aug = DVector::zeros(m_hat + 1);
        beta_aug[0] = 1.0;
        beta_aug
            .rows_mut(1, m_hat)
            .copy_from(&fac.solution.rows(0, m_hat));

        // residual derivative of mode k: B_k[1.., :] · β_aug
        let mut tangents = DMatrix::zeros(m_hat, n_hat);
        for k in 0..n_hat {
            let t = model.b_stack[i][k + 1].rows(1, m_hat) * &beta_aug;
            tangents.set_column(k, &t);
        }

        for j in 0..rows {
            let mut g = DVector::zeros(dim);
            g.rows_mut(m_hat, l - 1).copy_from(&mc.row(j).transpose());
            let w = fac.chol.solve(&g);
            let w_pot = w.rows(0, m_hat).transpose();
            let row = &w_pot * &tangents;
            let out_row = i * rows + j;
            for k in 0..n_hat {
                jac[(out_row, k)] = -row[(0, k)];
            }
        }
    }
    Ok(jac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{
        assemble_system, forward_voltages, solve_forward, ConductivityField,
    };
    use crate::geometry::{generate_disk_mesh, ElectrodeLayout};
    use crate::pod::{conductivity_pod, potential_pod};
    use crate::prior::{build_prior, sample, SmoothnessKernel};

    /// Desk-scale ROM built from an ensemble large enough for full-rank
    /// potential statistics.
    fn desk_rom(
        elements: usize,
        retain_sigma: f64,
        retain_potential: f64,
        t_ensemble: usize,
    ) -> (
        Mesh2D,
        crate::prior::GaussianPrior,
        ContactImpedances,
        StimulationProtocol,
        ReducedModel,
    ) {
        let layout = ElectrodeLayout::new(4, 1.0, 6.0, 0.0).unwrap();
        let mesh = generate_disk_mesh(&layout, elements).unwrap();
        let kernel = SmoothnessKernel::new(0.25, 1.5, 1e-8).unwrap();
        let prior = build_prior(&mesh, &kernel, 3.0).unwrap();
        let z = ContactImpedances::uniform(4, 0.01);
        let protocol = StimulationProtocol::opposite_adjacent(4, 1.0).unwrap();

        let samples = sample(&prior, t_ensemble, 5);
        let m = mesh.n_quadratic_nodes();
        let n_inj = protocol.n_injections();
        let mut snaps: Vec<DMatrix<f64>> =
            (0..n_inj).map(|_| DMatrix::zeros(m, t_ensemble)).collect();
        for (s_idx, s) in samples.iter().enumerate() {
            let sys = assemble_system(&mesh, s, &z).unwrap();
            let sols = solve_forward(&sys, &protocol).unwrap();
            for (i, sol) in sols.iter().enumerate() {
                snaps[i].set_column(s_idx, &sol.interior);
            }
        }

        let (sigma_basis, _) = conductivity_pod(&prior, retain_sigma).unwrap();
        let mut potential_bases: Vec<_> = snaps
            .iter()
            .enumerate()
            .map(|(i, s)| potential_pod(s, i, retain_potential).unwrap().0)
            .collect();
        // per-injection retention can differ by a mode or two; the stack
        // needs one shared potential dimension
        let m_hat = potential_bases.iter().map(|b| b.n_modes()).min().unwrap();
        for b in &mut potential_bases {
            *b = b.truncated(m_hat);
        }
        let rom = precompute_reduced(&mesh, sigma_basis, potential_bases, &z).unwrap();
        (mesh, prior, z, protocol, rom)
    }

    #[test]
    fn mean_field_voltages_close_to_full_order() {
        let (mesh, prior, z, protocol, rom) = desk_rom(150, 0.999, 0.999, 120);
        let alpha = DVector::zeros(rom.n_sigma_modes());
        let v_red = reduced_forward(&rom, &alpha, &protocol).unwrap();
        let v_full = forward_voltages(&mesh, &prior.mean, &z, &protocol).unwrap();
        let err = (&v_red - &v_full).norm() / v_full.norm();
        assert!(err < 1e-3, "mean-field reduction error {err:.3e}");
    }

    #[test]
    fn full_bases_reproduce_full_order_voltages() {
        // exact-subspace limit on a desk mesh: keep every mode
        let (mesh, prior, z, protocol, rom) = desk_rom(72, 1.0, 1.0, 400);
        assert_eq!(rom.n_sigma_modes(), mesh.n_linear_nodes());
        assert_eq!(rom.n_potential_modes(), mesh.n_quadratic_nodes());

        let samples = sample(&prior, 3, 99);
        for s in &samples {
            let alpha = rom.sigma_basis.project(&s.values).unwrap();
            let v_red = reduced_forward(&rom, &alpha, &protocol).unwrap();
            let v_full = forward_voltages(&mesh, s, &z, &protocol).unwrap();
            let err = (&v_red - &v_full).norm() / v_full.norm();
            assert!(err < 1e-8, "exact-subspace error {err:.3e}");
        }
    }

    #[test]
    fn projected_blocks_match_direct_quadrature() {
        // independent oracle: evaluate the reduced stiffness entries by
        // direct quadrature of the POD fields, without the projection path
        let (mesh, _, _, _, rom) = desk_rom(100, 0.9, 0.9, 80);
        let n_check = rom.n_sigma_modes().min(3);
        let m_hat = rom.n_potential_modes();
        for inj in 0..rom.n_injections() {
            let basis = &rom.potential_bases[inj];
            let mut w = DMatrix::zeros(basis.ambient_dim(), m_hat + 1);
            w.set_column(0, &basis.mean);
            w.columns_mut(1, m_hat).copy_from(&basis.modes);
            for k in 0..=n_check {
                let field = if k == 0 {
                    rom.sigma_basis.mean.clone()
                } else {
                    rom.sigma_basis.modes.column(k - 1).clone_owned()
                };
                let mut direct = DMatrix::zeros(m_hat + 1, m_hat + 1);
                for t in 0..mesh.n_elements() {
                    let [v0, v1, v2] = mesh.triangles[t];
                    let p = [mesh.vertices[v0], mesh.vertices[v1], mesh.vertices[v2]];
                    let (g, area) = crate::fem::quadrature::barycentric_gradients(p);
                    let nodes = mesh.quadratic_nodes_of(t);
                    for &(lam, wq) in &crate::fem::quadrature::TRI7 {
                        let sq = field[v0] * lam[0] + field[v1] * lam[1] + field[v2] * lam[2];
                        let grads = crate::fem::quadrature::p2_gradients(lam, &g);
                        // gradients of each projected trial function
                        let mut gw = vec![[0.0f64; 2]; m_hat + 1];
                        for (loc, &node) in nodes.iter().enumerate() {
                            for a in 0..=m_hat {
                                gw[a][0] += w[(node, a)] * grads[loc][0];
                                gw[a][1] += w[(node, a)] * grads[loc][1];
                            }
                        }
                        let s = wq * area * sq;
                        for a in 0..=m_hat {
                            for b in 0..=m_hat {
                                direct[(a, b)] += s * (gw[a][0] * gw[b][0] + gw[a][1] * gw[b][1]);
                            }
                        }
                    }
                }
                let stored = &rom.b_stack[inj][k];
                let err = (&direct - stored).amax() / stored.amax().max(1e-30);
                assert!(err < 1e-10, "injection {inj} mode {k}: {err:.3e}");
            }
        }
    }

    #[test]
    fn mean_mode_block_equals_scaled_unit_assembly() {
        // constant mean conductivity with the identity potential "basis":
        // the k = 0 block is the plain stiffness matrix scaled by the mean
        let layout = ElectrodeLayout::new(4, 1.0, 6.0, 0.0).unwrap();
        let mesh = generate_disk_mesh(&layout, 80).unwrap();
        let z = ContactImpedances::uniform(4, 0.01);
        let n = mesh.n_linear_nodes();
        let m = mesh.n_quadratic_nodes();

        let sigma0 = 3.0;
        let sigma_basis = PodBasis {
            modes: DMatrix::zeros(n, 0),
            eigenvalues: DVector::zeros(0),
            mean: DVector::from_element(n, sigma0),
            ambient: PodAmbient::Conductivity,
        };
        // identity modes, zero mean: trial space = full FE space
        let potential_bases = vec![PodBasis {
            modes: DMatrix::identity(m, m),
            eigenvalues: DVector::from_element(m, 1.0),
            mean: DVector::zeros(m),
            ambient: PodAmbient::Potential { injection: 0 },
        }];
        let rom = precompute_reduced(&mesh, sigma_basis, potential_bases, &z).unwrap();

        let unit = stiffness_matrix(&mesh, &DVector::from_element(n, 1.0))
            .unwrap()
            .to_dense();
        let block = rom.b_stack[0][0].view((1, 1), (m, m)).clone_owned();
        let err = (&block - &unit * sigma0).amax() / (unit.amax() * sigma0);
        assert!(err < 1e-12, "mean block error {err:.3e}");
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let (_, _, _, protocol, rom) = desk_rom(150, 0.99, 0.99, 150);
        let rom = rom.truncate(6, 8);
        let alpha = DVector::zeros(rom.n_sigma_modes());
        let jac = reduced_jacobian(&rom, &alpha, &protocol).unwrap();
        let eps = 1e-6;
        let mut max_err = 0.0f64;
        for k in 0..rom.n_sigma_modes() {
            let mut plus = alpha.clone();
            plus[k] += eps;
            let mut minus = alpha.clone();
            minus[k] -= eps;
            let vp = reduced_forward(&rom, &plus, &protocol).unwrap();
            let vm = reduced_forward(&rom, &minus, &protocol).unwrap();
            let fd = (vp - vm) / (2.0 * eps);
            let col = jac.column(k);
            let err = (&col - &fd).amax() / fd.amax().max(col.amax());
            max_err = max_err.max(err);
        }
        assert!(max_err < 1e-6, "max relative column error {max_err:.3e}");
    }

    #[test]
    fn forward_map_is_affine_in_the_stack() {
        // no hidden coefficient dependence: bumping one coefficient equals
        // re-solving with the explicitly shifted matrix stack
        let (_, _, _, protocol, rom) = desk_rom(100, 0.95, 0.95, 100);
        let rom = rom.truncate(4, 6);
        let alpha = DVector::from_fn(rom.n_sigma_modes(), |i, _| 0.05 * (i as f64 - 1.0));
        let delta = 0.125;
        let k = 2;

        let mut bumped = alpha.clone();
        bumped[k] += delta;
        let v_bumped = reduced_forward(&rom, &bumped, &protocol).unwrap();

        // shift the mean block by delta * B_k instead of the coefficient
        let mut shifted = rom.clone();
        for i in 0..shifted.n_injections() {
            let bk = shifted.b_stack[i][k + 1].clone();
            matrix_axpy(&mut shifted.b_stack[i][0], delta, &bk);
        }
        let v_shifted = reduced_forward(&shifted, &alpha, &protocol).unwrap();
        let err = (&v_bumped - &v_shifted).amax() / v_bumped.amax();
        assert!(err < 1e-12, "affinity defect {err:.3e}");
    }

    #[test]
    fn reduction_error_decays_with_both_mode_counts() {
        let (mesh, prior, z, protocol, rom) = desk_rom(100, 1.0, 1.0, 260);
        let samples = sample(&prior, 40, 55);
        let full: Vec<DVector<f64>> = samples
            .iter()
            .map(|s| forward_voltages(&mesh, s, &z, &protocol).unwrap())
            .collect();

        let mse = |n_hat: usize, m_hat: usize| -> f64 {
            let sub = rom.truncate(n_hat, m_hat);
            let mut total = 0.0;
            for (s, v_full) in samples.iter().zip(&full) {
                let alpha = sub.sigma_basis.project(&s.values).unwrap();
                let v = reduced_forward(&sub, &alpha, &protocol).unwrap();
                total += (v - v_full).norm_squared();
            }
            total / samples.len() as f64
        };

        let n_full = rom.n_sigma_modes();
        let m_full = rom.n_potential_modes();
        let mut prev = f64::INFINITY;
        for n_hat in [2, 5, 10, n_full] {
            let e = mse(n_hat, m_full);
            assert!(
                e <= prev * (1.0 + 1e-9),
                "voltage error rose from {prev:.3e} to {e:.3e} at N̂ = {n_hat}"
            );
            prev = e;
        }
        let mut prev = f64::INFINITY;
        for m_hat in [2, 5, 10, m_full] {
            let e = mse(n_full, m_hat);
            assert!(
                e <= prev * (1.0 + 1e-9),
                "voltage error rose from {prev:.3e} to {e:.3e} at M̂ = {m_hat}"
            );
            prev = e;
        }
    }

    #[test]
    fn negative_conductivity_is_reported() {
        let (_, _, _, protocol, rom) = desk_rom(100, 0.9, 0.9, 80);
        // drive the first coefficient far negative
        let mut alpha = DVector::zeros(rom.n_sigma_modes());
        alpha[0] = -1e4;
        assert!(matches!(
            reduced_forward(&rom, &alpha, &protocol),
            Err(Error::IndefiniteReducedSystem(_))
        ));
    }

    #[test]
    fn truncation_is_nested() {
        let (_, _, _, _, rom) = desk_rom(100, 0.99, 0.99, 80);
        let small = rom.truncate(3, 4);
        assert_eq!(small.n_sigma_modes(), 3);
        assert_eq!(small.n_potential_modes(), 4);
        for i in 0..rom.n_injections() {
            let big = &rom.b_stack[i][2];
            let sub = &small.b_stack[i][2];
            for a in 0..5 {
                for b in 0..5 {
                    assert_eq!(sub[(a, b)], big[(a, b)]);
                }
            }
        }
    }
}
