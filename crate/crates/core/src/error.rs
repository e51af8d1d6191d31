use thiserror::Error;

/// Errors raised by the spectral routines.
///
/// Validation problems (bad input shapes, parameters outside their domain)
/// are kept separate from numerical failures so that front ends can map them
/// to different exit codes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid interval: {0}")]
    InvalidInterval(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is not an involution: {0}")]
    NotAnInvolution(String),

    #[error("{0} is not an eigenvalue (smallest singular value {1:e})")]
    NotAnEigenvalue(String, f64),

    #[error("cannot isolate spectral cluster: {0}")]
    ClusterIsolation(String),

    #[error("eigenvalue too close to the integration contour: {0}")]
    EigenvalueOnContour(String),

    #[error("contour quadrature under-resolved: {0}")]
    UnderResolved(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("invalid projection family: {0}")]
    InvalidProjections(String),

    #[error("subspace is not uniformly definite: {0}")]
    NotUniformlyDefinite(String),

    #[error("untyped eigenvalue: {0}")]
    Untyped(String),

    #[error("missing definiteness certificate: {0}")]
    MissingCertificate(String),

    #[error("dimension cap exceeded: {0}")]
    DimensionCap(String),

    #[error("winding number computation unstable: {0}")]
    WindingUnstable(String),

    #[error("branch continuation failed: {0}")]
    BranchCollision(String),

    #[error("energy window exceeds transversal cutoff: {0}")]
    WindowExceedsCutoff(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
}

impl Error {
    /// True for input-validation errors as opposed to numerical failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidInterval(_)
                | Error::DimensionMismatch(_)
                | Error::InvalidParameter(_)
                | Error::NotAnInvolution(_)
                | Error::InvalidProjections(_)
                | Error::DimensionCap(_)
                | Error::WindowExceedsCutoff(_)
                | Error::MissingCertificate(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
