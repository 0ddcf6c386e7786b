//! Full-order finite element forward model of the complete electrode model:
//! system assembly, linear solve, voltage extraction, adjoint Jacobian and
//! synthetic measurement simulation.

pub mod assembly;
pub mod jacobian;
pub mod quadrature;
pub mod simulate;
pub mod solve;

pub use assembly::{assemble_system, boundary_blocks, stiffness_matrix};
pub use jacobian::jacobian;
pub use simulate::{draw_noise, simulate_measurements, SimulatedData};
pub use solve::{compute_voltages, forward_voltages, solve_forward, CemFactorization};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::CsrMatrix;
use crate::{Error, Result};

/// Nodal conductivity coefficients on the piecewise-linear basis (µS/cm).
#[derive(Debug, Clone, PartialEq)]
pub struct ConductivityField {
    pub values: DVector<f64>,
}

impl ConductivityField {
    pub fn new(values: DVector<f64>) -> Self {
        Self { values }
    }

    pub fn homogeneous(n: usize, value: f64) -> Self {
        Self {
            values: DVector::from_element(n, value),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.len() == 0
    }

    pub fn mean(&self) -> f64 {
        self.values.mean()
    }
}

/// Per-electrode contact impedances (Ω·cm²).
#[derive(Debug, Clone, PartialEq)]
pub struct ContactImpedances {
    pub values: DVector<f64>,
}

impl ContactImpedances {
    pub fn uniform(count: usize, value: f64) -> Self {
        Self {
            values: DVector::from_element(count, value),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (l, &z) in self.values.iter().enumerate() {
            if !(z > 0.0) {
                return Err(Error::NonpositiveImpedance(l));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.len() == 0
    }
}

/// Injection currents and the measurement pattern.
///
/// `currents` holds one pattern per column (mA); each column sums to zero.
/// `measurement` maps electrode potentials to measured voltages; each row
/// sums to zero so measurements are potential differences.
#[derive(Debug, Clone, PartialEq)]
pub struct StimulationProtocol {
    pub currents: DMatrix<f64>,
    pub measurement: DMatrix<f64>,
}

impl StimulationProtocol {
    /// Opposite current injection with adjacent-difference voltage
    /// measurements: `L/2` patterns driving electrode `i` against
    /// `i + L/2`, and `L` wrap-around adjacent voltage pairs per injection.
    pub fn opposite_adjacent(electrode_count: usize, amplitude: f64) -> Result<Self> {
        if electrode_count < 2 || electrode_count % 2 != 0 {
            return Err(Error::AsymmetricConfiguration(format!(
                "opposite injection needs an even electrode count, got {electrode_count}"
            )));
        }
        let l = electrode_count;
        let n_inj = l / 2;
        let mut currents = DMatrix::zeros(l, n_inj);
        for i in 0..n_inj {
            currents[(i, i)] = amplitude;
            currents[(i + n_inj, i)] = -amplitude;
        }
        let mut measurement = DMatrix::zeros(l, l);
        for j in 0..l {
            measurement[(j, j)] = 1.0;
            measurement[(j, (j + 1) % l)] = -1.0;
        }
        Ok(Self {
            currents,
            measurement,
        })
    }

    pub fn electrode_count(&self) -> usize {
        self.currents.nrows()
    }

    pub fn n_injections(&self) -> usize {
        self.currents.ncols()
    }

    pub fn n_meas_per_injection(&self) -> usize {
        self.measurement.nrows()
    }

    pub fn n_measurements(&self) -> usize {
        self.n_injections() * self.n_meas_per_injection()
    }

    pub fn validate(&self) -> Result<()> {
        let tol = 1e-12;
        for i in 0..self.n_injections() {
            let s: f64 = self.currents.column(i).sum();
            if s.abs() > tol {
                return Err(Error::AsymmetricConfiguration(format!(
                    "current pattern {i} sums to {s:.3e}, violating charge conservation"
                )));
            }
        }
        for j in 0..self.measurement.nrows() {
            let s: f64 = self.measurement.row(j).sum();
            if s.abs() > tol {
                return Err(Error::AsymmetricConfiguration(format!(
                    "measurement row {j} sums to {s:.3e}"
                )));
            }
        }
        Ok(())
    }
}

/// Solution of one forward problem: quadratic interior potential
/// coefficients and the `L - 1` free electrode potential coefficients.
#[derive(Debug, Clone)]
pub struct ForwardSolution {
    pub interior: DVector<f64>,
    pub electrode: DVector<f64>,
}

impl ForwardSolution {
    /// Electrode potentials `U`; they sum to zero by construction of the
    /// zero-mean electrode basis.
    pub fn electrode_potentials(&self) -> DVector<f64> {
        let l = self.electrode.len() + 1;
        let c = electrode_basis(l);
        &c * &self.electrode
    }
}

/// The `L × (L-1)` zero-sum electrode basis: column `k` is
/// `e_0 - e_{k+1}`.
pub fn electrode_basis(electrode_count: usize) -> DMatrix<f64> {
    let l = electrode_count;
    let mut c = DMatrix::zeros(l, l - 1);
    for k in 0..l - 1 {
        c[(0, k)] = 1.0;
        c[(k + 1, k)] = -1.0;
    }
    c
}

/// Assembled CEM system blocks, kept separately for reuse.
///
/// The full system matrix is
/// `A = [[B + D, E C], [Cᵀ Eᵀ, Cᵀ F C]]` with `C` the zero-sum electrode
/// basis; `A` is symmetric and positive definite for positive conductivity
/// and contact impedances.
#[derive(Debug, Clone)]
pub struct SystemMatrices {
    /// Conductivity-weighted stiffness block `B` (quadratic × quadratic).
    pub stiffness: CsrMatrix,
    /// Electrode boundary mass block `D`.
    pub boundary_mass: CsrMatrix,
    /// Electrode coupling block `E` (quadratic × L).
    pub coupling: DMatrix<f64>,
    /// Diagonal of `F`: electrode arc length over contact impedance.
    pub contact: DVector<f64>,
}

impl SystemMatrices {
    pub fn n_potential(&self) -> usize {
        self.stiffness.nrows()
    }

    pub fn electrode_count(&self) -> usize {
        self.contact.len()
    }

    /// Dimension of the full system, `M + L - 1`.
    pub fn dim(&self) -> usize {
        self.n_potential() + self.electrode_count() - 1
    }

    /// Apply the full system matrix to a stacked vector
    /// `[interior, electrode]`.
    pub fn apply(&self, theta: &DVector<f64>) -> DVector<f64> {
        let m = self.n_potential();
        let l = self.electrode_count();
        assert_eq!(theta.len(), self.dim());
        let beta = theta.rows(0, m).clone_owned();
        let gamma = theta.rows(m, l - 1).clone_owned();
        let c = electrode_basis(l);

        let mut top = self.stiffness.mul_vec(&beta) + self.boundary_mass.mul_vec(&beta);
        top += &self.coupling * (&c * &gamma);

        let f_c_gamma = DVector::from_fn(l, |i, _| self.contact[i] * (&c * &gamma)[i]);
        let bottom = c.transpose() * (self.coupling.transpose() * beta + f_c_gamma);

        let mut out = DVector::zeros(self.dim());
        out.rows_mut(0, m).copy_from(&top);
        out.rows_mut(m, l - 1).copy_from(&bottom);
        out
    }

    /// Right-hand side for a current pattern: `[0, Cᵀ I]`.
    pub fn rhs(&self, currents: &DVector<f64>) -> DVector<f64> {
        let m = self.n_potential();
        let l = self.electrode_count();
        assert_eq!(currents.len(), l);
        let c = electrode_basis(l);
        let mut f = DVector::zeros(self.dim());
        f.rows_mut(m, l - 1).copy_from(&(c.transpose() * currents));
        f
    }

    /// Materialize the dense system matrix. Intended for small meshes.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let m = self.n_potential();
        let l = self.electrode_count();
        let n = self.dim();
        let c = electrode_basis(l);
        let mut a = DMatrix::zeros(n, n);
        for (r, cidx, v) in self.stiffness.iter() {
            a[(r, cidx)] += v;
        }
        for (r, cidx, v) in self.boundary_mass.iter() {
            a[(r, cidx)] += v;
        }
        let ec = &self.coupling * &c;
        a.view_mut((0, m), (m, l - 1)).copy_from(&ec);
        a.view_mut((m, 0), (l - 1, m)).copy_from(&ec.transpose());
        let f = DMatrix::from_diagonal(&self.contact);
        let h = c.transpose() * f * &c;
        a.view_mut((m, m), (l - 1, l - 1)).copy_from(&h);
        a
    }
}

/// Additive Gaussian measurement-noise specification: per-component standard
/// deviation `relative · |V_i|` plus an i.i.d. component with standard
/// deviation `spread · (max V - min V)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub relative: f64,
    pub spread: f64,
}

impl NoiseSpec {
    pub fn new(relative: f64, spread: f64) -> Self {
        Self { relative, spread }
    }

    pub fn noiseless() -> Self {
        Self {
            relative: 0.0,
            spread: 0.0,
        }
    }

    /// Paper-style default: 1% relative, 0.1% of the voltage range.
    pub fn standard() -> Self {
        Self {
            relative: 0.01,
            spread: 0.001,
        }
    }
}
