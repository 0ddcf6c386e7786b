//! Proper orthogonal decomposition bases for conductivity and potential.
//!
//! The conductivity basis comes from the eigendecomposition of the prior
//! covariance; the potential basis from the sample covariance of forward
//! solutions of a prior ensemble, via the method of snapshots whenever the
//! ensemble is smaller than the ambient dimension. On rotationally symmetric
//! configurations the potential bases of the remaining injections are
//! obtained by rotating the first one.

use nalgebra::{DMatrix, DVector};

use crate::fem::quadrature::p2_values;
use crate::geometry::{Mesh2D, PointLocator};
use crate::linalg::{orthonormalize_columns, sorted_symmetric_eigen};
use crate::prior::GaussianPrior;
use crate::{Error, Result};

/// What a POD basis spans.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PodAmbient {
    /// Nodal conductivity coefficients (linear basis).
    Conductivity,
    /// Interior potential coefficients (quadratic basis) for one injection,
    /// zero-based.
    Potential { injection: usize },
}

/// Orthonormal modes, their eigenvalues and the ambient mean.
#[derive(Debug, Clone)]
pub struct PodBasis {
    /// Columns are the modes (ambient dim × n_modes), orthonormal.
    pub modes: DMatrix<f64>,
    /// Eigenvalues of the kept modes, nonincreasing.
    pub eigenvalues: DVector<f64>,
    /// Ambient mean (prior mean or ensemble mean).
    pub mean: DVector<f64>,
    pub ambient: PodAmbient,
}

impl PodBasis {
    pub fn ambient_dim(&self) -> usize {
        self.modes.nrows()
    }

    pub fn n_modes(&self) -> usize {
        self.modes.ncols()
    }

    /// Coefficients of a field in this basis: `modesᵀ (field - mean)`.
    pub fn project(&self, field: &DVector<f64>) -> Result<DVector<f64>> {
        if field.len() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                context: "field vs POD ambient dimension",
                expected: self.ambient_dim(),
                got: field.len(),
            });
        }
        Ok(self.modes.transpose() * (field - &self.mean))
    }

    /// Reconstruction `mean + modes · coefficients`.
    pub fn expand(&self, coefficients: &DVector<f64>) -> Result<DVector<f64>> {
        if coefficients.len() != self.n_modes() {
            return Err(Error::DimensionMismatch {
                context: "coefficients vs POD modes",
                expected: self.n_modes(),
                got: coefficients.len(),
            });
        }
        Ok(&self.mean + &self.modes * coefficients)
    }

    /// Leading `k` modes (the bases are nested under truncation).
    pub fn truncated(&self, k: usize) -> PodBasis {
        let k = k.min(self.n_modes());
        PodBasis {
            modes: self.modes.columns(0, k).clone_owned(),
            eigenvalues: self.eigenvalues.rows(0, k).clone_owned(),
            mean: self.mean.clone(),
            ambient: self.ambient,
        }
    }
}

/// Cumulative retained-variance fractions `χ(k)`, `k = 1..n`.
#[derive(Debug, Clone)]
pub struct RetainedVarianceCurve {
    pub values: Vec<f64>,
}

impl RetainedVarianceCurve {
    /// Build from eigenvalues sorted nonincreasing (negatives are clamped,
    /// they only arise as rounding of the zero tail).
    pub fn from_eigenvalues(eigenvalues: &DVector<f64>) -> Self {
        let clamped: Vec<f64> = eigenvalues.iter().map(|&v| v.max(0.0)).collect();
        let total: f64 = clamped.iter().sum();
        let mut values = Vec::with_capacity(clamped.len());
        let mut cum = 0.0;
        for v in &clamped {
            cum += v;
            values.push(if total > 0.0 { cum / total } else { 1.0 });
        }
        if let Some(last) = values.last_mut() {
            *last = 1.0;
        }
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Smallest dimension retaining at least `retain` of the variance;
    /// `retain >= 1` keeps the full spectrum.
    pub fn dimension_for(&self, retain: f64) -> usize {
        if retain >= 1.0 {
            return self.values.len();
        }
        self.values
            .iter()
            .position(|&v| v >= retain)
            .map(|k| k + 1)
            .unwrap_or(self.values.len())
    }

    /// Threshold → smallest retaining dimension, for a list of thresholds.
    pub fn threshold_dims(&self, thresholds: &[f64]) -> Vec<(f64, usize)> {
        thresholds
            .iter()
            .map(|&t| (t, self.dimension_for(t)))
            .collect()
    }
}

/// Make each mode's entry of largest magnitude positive, for deterministic
/// bases across eigensolver runs.
fn fix_signs(modes: &mut DMatrix<f64>) {
    for mut col in modes.column_iter_mut() {
        let mut idx = 0;
        let mut best = 0.0f64;
        for (i, &v) in col.iter().enumerate() {
            if v.abs() > best {
                best = v.abs();
                idx = i;
            }
        }
        if col[idx] < 0.0 {
            col.neg_mut();
        }
    }
}

/// POD basis of the conductivity from the prior covariance, truncated at
/// the smallest dimension retaining `retain` of the variance.
pub fn conductivity_pod(
    prior: &GaussianPrior,
    retain: f64,
) -> Result<(PodBasis, RetainedVarianceCurve)> {
    if !(retain > 0.0) {
        return Err(Error::EigensolveFailed(format!(
            "retained fraction must be positive, got {retain}"
        )));
    }
    let (values, mut vectors) = sorted_symmetric_eigen(prior.covariance.clone())?;
    fix_signs(&mut vectors);
    let curve = RetainedVarianceCurve::from_eigenvalues(&values);
    let k = curve.dimension_for(retain);
    let basis = PodBasis {
        modes: vectors.columns(0, k).clone_owned(),
        eigenvalues: DVector::from_iterator(k, values.iter().take(k).map(|&v| v.max(0.0))),
        mean: prior.mean.values.clone(),
        ambient: PodAmbient::Conductivity,
    };
    Ok((basis, curve))
}

/// POD basis of the potential for one injection from an ensemble of forward
/// solutions (columns of `snapshots`).
///
/// Uses the dense eigendecomposition of the sample covariance when the
/// ensemble is at least as large as the ambient dimension (the eigenbasis is
/// then complete, which the exact-subspace limit needs), and the method of
/// snapshots (T × T Gram eigenproblem) otherwise.
pub fn potential_pod(
    snapshots: &DMatrix<f64>,
    injection: usize,
    retain: f64,
) -> Result<(PodBasis, RetainedVarianceCurve)> {
    let ambient = snapshots.nrows();
    let t = snapshots.ncols();
    if t < 2 {
        return Err(Error::EnsembleTooSmall { min: 2, got: t });
    }
    let mean = snapshots.column_mean();
    let mut centered = snapshots.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    let fluctuation = centered.norm();
    if fluctuation == 0.0 {
        return Err(Error::DegenerateEnsemble(
            "all ensemble snapshots identical".into(),
        ));
    }

    let ambient_tag = PodAmbient::Potential { injection };
    if t >= ambient {
        // dense covariance route: complete orthonormal eigenbasis
        let cov = &centered * centered.transpose() / (t as f64 - 1.0);
        let (values, mut vectors) = sorted_symmetric_eigen(cov)?;
        fix_signs(&mut vectors);
        let curve = RetainedVarianceCurve::from_eigenvalues(&values);
        let k = curve.dimension_for(retain);
        let basis = PodBasis {
            modes: vectors.columns(0, k).clone_owned(),
            eigenvalues: DVector::from_iterator(k, values.iter().take(k).map(|&v| v.max(0.0))),
            mean,
            ambient: ambient_tag,
        };
        Ok((basis, curve))
    } else {
        // method of snapshots: T × T Gram eigenproblem
        let gram = centered.transpose() * &centered / (t as f64 - 1.0);
        let (values, vectors) = sorted_symmetric_eigen(gram)?;
        let curve = RetainedVarianceCurve::from_eigenvalues(&values);
        let k_retain = curve.dimension_for(retain);
        // modes with eigenvalues at the zero tail cannot be normalized
        let lead = values[0].max(0.0);
        let k_valid = values
            .iter()
            .take_while(|&&v| v > 1e-13 * lead && v > 0.0)
            .count();
        let k = k_retain.min(k_valid).max(1);
        let mut modes = DMatrix::zeros(ambient, k);
        for i in 0..k {
            let col = &centered * vectors.column(i);
            let scale = 1.0 / ((t as f64 - 1.0) * values[i]).sqrt();
            modes.set_column(i, &(col * scale));
        }
        // Gram rounding can leave the near-null modes slightly oblique
        let gram_dev = (modes.transpose() * &modes - DMatrix::identity(k, k)).amax();
        if gram_dev > 1e-11 {
            orthonormalize_columns(&mut modes, 1e-12)?;
        }
        fix_signs(&mut modes);
        let basis = PodBasis {
            modes,
            eigenvalues: DVector::from_iterator(k, values.iter().take(k).copied()),
            mean,
            ambient: ambient_tag,
        };
        Ok((basis, curve))
    }
}

/// Potential basis for `injection` obtained by rotating the injection-0
/// basis by `injection` electrode pitches, re-interpolated onto the mesh and
/// re-orthonormalized. Requires a rotationally symmetric configuration
/// (equispaced electrodes, rotation-invariant prior and protocol) — the
/// caller is responsible for per-injection ensembles otherwise.
pub fn rotate_potential_basis(
    basis: &PodBasis,
    mesh: &Mesh2D,
    injection: usize,
) -> Result<PodBasis> {
    match basis.ambient {
        PodAmbient::Potential { injection: 0 } => {}
        _ => {
            return Err(Error::AsymmetricConfiguration(
                "rotation starts from the injection-0 potential basis".into(),
            ))
        }
    }
    if basis.ambient_dim() != mesh.n_quadratic_nodes() {
        return Err(Error::BasisMeshMismatch(format!(
            "basis ambient {} vs {} quadratic nodes",
            basis.ambient_dim(),
            mesh.n_quadratic_nodes()
        )));
    }
    if injection == 0 {
        return Ok(basis.clone());
    }

    let angle = mesh.layout.pitch() * injection as f64;
    let (sin, cos) = angle.sin_cos();
    let locator = PointLocator::new(mesh);
    let m = basis.ambient_dim();
    let k = basis.n_modes();
    let mut modes = DMatrix::zeros(m, k);
    let mut mean = DVector::zeros(m);

    for node in 0..m {
        let p = mesh.quadratic_node_position(node);
        // rotated field: value at p equals the original field at R(-angle) p
        let src = [p[0] * cos + p[1] * sin, -p[0] * sin + p[1] * cos];
        let (tri, bary) = locator.locate(src);
        let nodes = mesh.quadratic_nodes_of(tri);
        let shape = p2_values(bary);
        let mut mv = 0.0;
        for (loc, &g) in nodes.iter().enumerate() {
            mv += shape[loc] * basis.mean[g];
        }
        mean[node] = mv;
        for j in 0..k {
            let mut v = 0.0;
            for (loc, &g) in nodes.iter().enumerate() {
                v += shape[loc] * basis.modes[(g, j)];
            }
            modes[(node, j)] = v;
        }
    }
    orthonormalize_columns(&mut modes, 1e-10)?;

    Ok(PodBasis {
        modes,
        eigenvalues: basis.eigenvalues.clone(),
        mean,
        ambient: PodAmbient::Potential { injection },
    })
}
