use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the reconstruction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("geometry infeasible: {0}")]
    GeometryInfeasible(String),

    #[error("mesh generation failed: {0}")]
    GenerationFailed(String),

    #[error("dimension mismatch: {context} (expected {expected}, got {got})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("nonpositive conductivity: {0}")]
    NonpositiveConductivity(String),

    #[error("nonpositive contact impedance at electrode {0}")]
    NonpositiveImpedance(usize),

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("prior factorization failed: {0}")]
    FactorizationFailed(String),

    #[error("eigendecomposition failed: {0}")]
    EigensolveFailed(String),

    #[error("degenerate ensemble: {0}")]
    DegenerateEnsemble(String),

    #[error("asymmetric configuration: {0}")]
    AsymmetricConfiguration(String),

    #[error("basis/mesh mismatch: {0}")]
    BasisMeshMismatch(String),

    #[error("reduced system indefinite: {0}")]
    IndefiniteReducedSystem(String),

    #[error("ensemble too small: need at least {min}, got {got}")]
    EnsembleTooSmall { min: usize, got: usize },

    #[error("model mismatch: {0}")]
    ModelMismatch(String),

    #[error("solver diverged: {0}")]
    Diverged(String),

    #[error("solver did not converge: {0}")]
    NotConverged(String),

    #[error("phantom outside domain: {0}")]
    PhantomOutsideDomain(String),

    #[error("artifact format error: {0}")]
    ArtifactFormat(String),

    #[error("stale artifact: {0}")]
    StaleArtifact(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
