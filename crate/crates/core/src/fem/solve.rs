use nalgebra::{DMatrix, DVector};

use super::{electrode_basis, ForwardSolution, StimulationProtocol, SystemMatrices};
use crate::linalg::{reverse_cuthill_mckee, BandCholesky, CsrMatrix, TripletBuilder};
use crate::{Error, Result};

/// Relative residual accepted from a forward solve.
pub const FORWARD_RESIDUAL_TOL: f64 = 1e-10;

/// Factorization of the CEM system via block elimination.
///
/// The interior block `K = B + D` is FE-sparse and SPD, so it gets a banded
/// Cholesky under reverse Cuthill-McKee ordering; the `L - 1` electrode
/// unknowns are eliminated through the (dense, tiny) Schur complement. One
/// factorization serves every current pattern.
pub struct CemFactorization {
    k_chol: BandCholesky,
    /// `G = E C`, the interior-to-electrode coupling.
    coupling: DMatrix<f64>,
    /// `K⁻¹ G`, reused on every solve.
    k_inv_g: DMatrix<f64>,
    schur: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    m: usize,
    l: usize,
}

impl CemFactorization {
    pub fn new(sys: &SystemMatrices) -> Result<Self> {
        let m = sys.n_potential();
        let l = sys.electrode_count();
        let k = csr_add(&sys.stiffness, &sys.boundary_mass);
        let order = reverse_cuthill_mckee(&k);
        let k_chol = BandCholesky::factor(&k, order)?;

        let c = electrode_basis(l);
        let coupling = &sys.coupling * &c;
        let mut k_inv_g = DMatrix::zeros(m, l - 1);
        for j in 0..l - 1 {
            let col: Vec<f64> = coupling.column(j).iter().copied().collect();
            let x = k_chol.solve(&col);
            k_inv_g.set_column(j, &DVector::from_vec(x));
        }
        let f = DMatrix::from_diagonal(&sys.contact);
        let h = c.transpose() * f * &c;
        let s = h - coupling.transpose() * &k_inv_g;
        let schur = s.cholesky().ok_or_else(|| {
            Error::SingularSystem("Schur complement not positive definite".into())
        })?;
        Ok(Self {
            k_chol,
            coupling,
            k_inv_g,
            schur,
            m,
            l,
        })
    }

    /// Solve the full system for a stacked right-hand side
    /// `[f_interior, f_electrode]`.
    pub fn solve(&self, f: &DVector<f64>) -> DVector<f64> {
        assert_eq!(f.len(), self.m + self.l - 1);
        let f_beta: Vec<f64> = f.rows(0, self.m).iter().copied().collect();
        let f_gamma = f.rows(self.m, self.l - 1).clone_owned();

        let all_zero = f_beta.iter().all(|&v| v == 0.0);
        let z = if all_zero {
            DVector::zeros(self.m)
        } else {
            DVector::from_vec(self.k_chol.solve(&f_beta))
        };
        let rhs_gamma = f_gamma - self.coupling.transpose() * &z;
        let gamma = self.schur.solve(&rhs_gamma);
        let beta = z - &self.k_inv_g * &gamma;

        let mut theta = DVector::zeros(self.m + self.l - 1);
        theta.rows_mut(0, self.m).copy_from(&beta);
        theta.rows_mut(self.m, self.l - 1).copy_from(&gamma);
        theta
    }

    /// Solve with residual verification against the assembled blocks,
    /// applying iterative refinement if needed.
    pub fn solve_checked(&self, sys: &SystemMatrices, f: &DVector<f64>) -> Result<DVector<f64>> {
        let f_norm = f.norm();
        let mut theta = self.solve(f);
        if f_norm == 0.0 {
            return Ok(theta);
        }
        for _ in 0..2 {
            let residual = sys.apply(&theta) - f;
            if residual.norm() <= FORWARD_RESIDUAL_TOL * f_norm {
                return Ok(theta);
            }
            theta -= self.solve(&residual);
        }
        let rel = (sys.apply(&theta) - f).norm() / f_norm;
        if rel <= FORWARD_RESIDUAL_TOL {
            Ok(theta)
        } else {
            Err(Error::SingularSystem(format!(
                "forward solve stalled at relative residual {rel:.3e}"
            )))
        }
    }
}

fn csr_add(a: &CsrMatrix, b: &CsrMatrix) -> CsrMatrix {
    assert_eq!(a.nrows(), b.nrows());
    assert_eq!(a.ncols(), b.ncols());
    let mut trip = TripletBuilder::with_capacity(a.nrows(), a.ncols(), a.nnz() + b.nnz());
    for (r, c, v) in a.iter().chain(b.iter()) {
        trip.push(r, c, v);
    }
    trip.build()
}

/// Solve the forward problem for every current pattern of the protocol,
/// reusing one factorization.
pub fn solve_forward(
    sys: &SystemMatrices,
    protocol: &StimulationProtocol,
) -> Result<Vec<ForwardSolution>> {
    if protocol.electrode_count() != sys.electrode_count() {
        return Err(Error::DimensionMismatch {
            context: "protocol electrode count vs system",
            expected: sys.electrode_count(),
            got: protocol.electrode_count(),
        });
    }
    protocol.validate()?;
    let factor = CemFactorization::new(sys)?;
    let m = sys.n_potential();
    let l = sys.electrode_count();
    let mut out = Vec::with_capacity(protocol.n_injections());
    for i in 0..protocol.n_injections() {
        let f = sys.rhs(&protocol.currents.column(i).clone_owned());
        let theta = factor.solve_checked(sys, &f)?;
        out.push(ForwardSolution {
            interior: theta.rows(0, m).clone_owned(),
            electrode: theta.rows(m, l - 1).clone_owned(),
        });
    }
    Ok(out)
}

/// Stack the measured voltages of all injections in injection order.
pub fn compute_voltages(
    solutions: &[ForwardSolution],
    protocol: &StimulationProtocol,
) -> Result<DVector<f64>> {
    if solutions.len() != protocol.n_injections() {
        return Err(Error::DimensionMismatch {
            context: "forward solutions vs current patterns",
            expected: protocol.n_injections(),
            got: solutions.len(),
        });
    }
    let rows = protocol.n_meas_per_injection();
    let mut v = DVector::zeros(protocol.n_measurements());
    for (i, sol) in solutions.iter().enumerate() {
        let u = sol.electrode_potentials();
        let vi = &protocol.measurement * u;
        v.rows_mut(i * rows, rows).copy_from(&vi);
    }
    Ok(v)
}

/// Assemble, solve and extract stacked voltages in one call.
pub fn forward_voltages(
    mesh: &crate::geometry::Mesh2D,
    sigma: &super::ConductivityField,
    z: &super::ContactImpedances,
    protocol: &StimulationProtocol,
) -> Result<DVector<f64>> {
    let sys = super::assemble_system(mesh, sigma, z)?;
    let sols = solve_forward(&sys, protocol)?;
    compute_voltages(&sols, protocol)
}
