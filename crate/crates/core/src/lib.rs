//! Reduced-order Bayesian image reconstruction for 2D electrical impedance
//! tomography (EIT).

pub mod fem;
pub mod pod;
pub mod rom;
pub mod prior;
pub mod geometry;
pub mod linalg;

mod error;

pub use error::{Error, Result};

pub use fem::{
    ConductivityField, ContactImpedances, ForwardSolution, NoiseSpec, StimulationProtocol,
    SystemMatrices,
};
pub use geometry::{ElectrodeLayout, Mesh2D};
pub use pod::{PodBasis, RetainedVarianceCurve};
pub use prior::{GaussianPrior, SmoothnessKernel};
pub use rom::{ReducedModel, ReducedSolution};
