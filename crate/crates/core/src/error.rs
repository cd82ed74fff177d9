use thiserror::Error;

pub type Result<T> = std::result::Result<T, LieError>;

#[derive(Debug, Error)]
pub enum LieError {
    #[error("invalid algebra spec: {0}")]
    InvalidSpec(String),
    #[error("elements belong to different algebras")]
    AlgebraMismatch,
    #[error("expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("Killing form is not negative definite")]
    NotNegativeDefinite,

    #[error("operator is not skew-adjoint (residual {0:e})")]
    NotSkewAdjoint(f64),
    #[error("odd-dimensional eigenspace at frequency {0:e}; tolerance too small")]
    PairingFailure(f64),

    #[error("no abelian centralizer found after {0} tries")]
    CsaNotFound(usize),
    #[error("no generic reference element found after {0} tries")]
    DegenerateReference(usize),
    #[error("subspace of dimension {dim} is not a Cartan subalgebra (centralizer dimension {centralizer})")]
    NotACsa { dim: usize, centralizer: usize },
    #[error("element is not in the Cartan subalgebra (residual {0:e})")]
    NotInCsa(f64),
    #[error("root frame check failed: {0}")]
    BrokenFrame(String),

    #[error("degenerate root: gamma(Y) = {0:e}")]
    DegenerateRoot(f64),
    #[error("coroot component is zero; nothing to rotate")]
    ZeroH,
    #[error("sweep precondition violated: |A_0| = {0:e}")]
    PreconditionViolated(f64),
    #[error("descent did not converge within {} iterations", .0.trace.len())]
    MaxIterationsExceeded(Box<crate::rotate::JacobiResult>),

    #[error("no regular element found in the Cartan subalgebra")]
    RegularNotFound,
    #[error("element is not regular (margin {0:e})")]
    NotRegular(f64),
    #[error("target is not in the image of ad(X): h-projection {0:e}")]
    NotInImage(f64),
    #[error("certificate residuals too large: A {residual_a:e}, B {residual_b:e}")]
    CertificateInvalid { residual_a: f64, residual_b: f64 },
}
