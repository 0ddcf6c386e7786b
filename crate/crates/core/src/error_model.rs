//! Additive Gaussian error models: measurement noise, the model-reduction
//! error estimated from paired full/reduced evaluations over the prior
//! ensemble, and their composition into the total error budget.

use nalgebra::{DMatrix, DVector};

use crate::fem::{ConductivityField, ContactImpedances, NoiseSpec, StimulationProtocol};
use crate::geometry::Mesh2D;
use crate::linalg::lower_triangular_inverse;
use crate::rom::{mesh_fingerprint, reduced_forward, ReducedModel};
use crate::{Error, Result};

/// Gaussian error statistics with a regularized precision factor.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    pub mean: DVector<f64>,
    /// Symmetric PSD covariance.
    pub covariance: DMatrix<f64>,
    /// Lower factor `L` with `Lᵀ L ≈ Γ⁻¹` after diagonal jitter.
    pub chol_prec: DMatrix<f64>,
}

/// Relative jitter added to the covariance diagonal before inversion.
pub const PRECISION_JITTER: f64 = 1e-10;

impl NoiseModel {
    /// Build from mean and covariance, regularizing the precision with
    /// relative jitter `1e-10 · trace / n`.
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let n = covariance.nrows();
        if covariance.ncols() != n || mean.len() != n {
            return Err(Error::DimensionMismatch {
                context: "noise mean vs covariance",
                expected: n,
                got: mean.len(),
            });
        }
        let jitter = (PRECISION_JITTER * covariance.trace() / n as f64).max(f64::MIN_POSITIVE);
        let mut reg = covariance.clone();
        for i in 0..n {
            reg[(i, i)] += jitter;
        }
        let chol = reg.cholesky().ok_or_else(|| {
            Error::FactorizationFailed("noise covariance not positive semidefinite".into())
        })?;
        let chol_prec = lower_triangular_inverse(&chol.l());
        Ok(Self {
            mean,
            covariance,
            chol_prec,
        })
    }

    /// Diagonal measurement-noise model implied by a noise specification and
    /// a voltage vector: per-component variance
    /// `(relative · |V_i|)² + (spread · range)²`, floored away from zero so
    /// a noiseless specification still yields a usable whitener.
    pub fn from_measurement_spec(spec: &NoiseSpec, voltages: &DVector<f64>) -> Result<Self> {
        let n = voltages.len();
        let range = voltages.max() - voltages.min();
        let scale = voltages.amax().max(1e-300);
        let floor = (1e-9 * scale).powi(2);
        let mut cov = DMatrix::zeros(n, n);
        for i in 0..n {
            let v = (spec.relative * voltages[i].abs()).powi(2)
                + (spec.spread * range).powi(2);
            cov[(i, i)] = v.max(floor);
        }
        Self::new(DVector::zeros(n), cov)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Whitened residual `L x`.
    pub fn whiten(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.chol_prec * x
    }

    /// Regularized precision application `Lᵀ (L x)`.
    pub fn precision_apply(&self, x: &DVector<f64>) -> DVector<f64> {
        self.chol_prec.transpose() * (&self.chol_prec * x)
    }

    /// Dense regularized precision `Lᵀ L`.
    pub fn precision(&self) -> DMatrix<f64> {
        self.chol_prec.transpose() * &self.chol_prec
    }
}

/// Sample mean and covariance of paired discrepancies
/// `ε′ = V_full - V_reduced`.
pub fn estimate_reduction_error_from_pairs(
    full: &[DVector<f64>],
    reduced: &[DVector<f64>],
) -> Result<NoiseModel> {
    if full.len() != reduced.len() {
        return Err(Error::DimensionMismatch {
            context: "full vs reduced evaluation counts",
            expected: full.len(),
            got: reduced.len(),
        });
    }
    let t = full.len();
    if t < 2 {
        return Err(Error::EnsembleTooSmall { min: 2, got: t });
    }
    let n = full[0].len();
    let mut mean = DVector::zeros(n);
    let discrepancies: Vec<DVector<f64>> = full
        .iter()
        .zip(reduced)
        .map(|(f, r)| f - r)
        .collect();
    for d in &discrepancies {
        mean += d;
    }
    mean /= t as f64;
    let mut cov = DMatrix::zeros(n, n);
    for d in &discrepancies {
        let c = d - &mean;
        cov.ger(1.0 / (t as f64 - 1.0), &c, &c, 1.0);
    }
    NoiseModel::new(mean, cov)
}

/// Estimate the reduction-error statistics by pairing full forward solves
/// with reduced evaluations of the projected samples.
///
/// `full_voltages` are the ensemble's already-computed full forward
/// solutions (the dominant offline cost is shared with the POD build).
pub fn estimate_reduction_error(
    mesh: &Mesh2D,
    _z: &ContactImpedances,
    protocol: &StimulationProtocol,
    samples: &[ConductivityField],
    full_voltages: &[DVector<f64>],
    rom: &ReducedModel,
) -> Result<NoiseModel> {
    if rom.fingerprint.mesh != mesh_fingerprint(mesh) {
        return Err(Error::ModelMismatch(
            "reduced model was built on a different mesh".into(),
        ));
    }
    if rom.fingerprint.n_injections != protocol.n_injections() {
        return Err(Error::ModelMismatch(
            "reduced model was built for a different protocol".into(),
        ));
    }
    if samples.len() != full_voltages.len() {
        return Err(Error::DimensionMismatch {
            context: "ensemble samples vs full voltages",
            expected: samples.len(),
            got: full_voltages.len(),
        });
    }
    let mut reduced = Vec::with_capacity(samples.len());
    for s in samples {
        let alpha = rom.sigma_basis.project(&s.values)?;
        reduced.push(reduced_forward(rom, &alpha, protocol)?);
    }
    estimate_reduction_error_from_pairs(full_voltages, &reduced)
}

/// Total error model: means and covariances add, the precision factor is
/// recomputed with the standard jitter.
pub fn compose_total_error(measurement: &NoiseModel, reduction: &NoiseModel) -> Result<NoiseModel> {
    if measurement.dim() != reduction.dim() {
        return Err(Error::DimensionMismatch {
            context: "measurement vs reduction error dimensions",
            expected: measurement.dim(),
            got: reduction.dim(),
        });
    }
    NoiseModel::new(
        &measurement.mean + &reduction.mean,
        &measurement.covariance + &reduction.covariance,
    )
}
