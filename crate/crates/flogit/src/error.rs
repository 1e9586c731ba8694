use thiserror::Error;

/// Errors surfaced by the fitting pipeline.
///
/// Variants are deliberately coarse: callers (in particular the CLI) route
/// them to distinct exit codes, so each variant marks a different class of
/// failure rather than a different call site.
#[derive(Debug, Clone, Error)]
pub enum FlogitError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("point outside basis domain: {0}")]
    OutOfDomain(String),

    #[error("singular design: {0}")]
    SingularDesign(String),

    #[error("degenerate scores: {0}")]
    DegenerateScores(String),

    #[error("response contains a single class: {0}")]
    SingleClass(String),

    #[error("separation detected: {0}")]
    Separation(String),

    /// Iteration limit hit; `last_iterate` holds the final state so callers
    /// can inspect how far the solver got.
    #[error("no convergence after {iterations} iterations: {context}")]
    NonConvergence {
        iterations: usize,
        context: String,
        last_iterate: Vec<f64>,
    },
}
