use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A scalar argument lies outside its admissible range.
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    /// A field value is NaN or infinite.
    #[error("invalid field: {0}")]
    InvalidField(String),

    /// Two fields live on different grids.
    #[error("grid mismatch: {0}")]
    ShapeMismatch(String),

    /// A nodewise domain requirement is violated (e.g. negative node where
    /// a nonnegative representative is required).
    #[error("domain error: {0}")]
    Domain(String),

    /// The scale-balancing projection has no solution for this input
    /// (nonpositive coupling or a zero-energy field).
    #[error("projection infeasible: {0}")]
    ProjectionInfeasible(String),

    /// The solver could not produce a feasible starting pair.
    #[error("solver failed: {0}")]
    SolverFailed(String),

    /// Alignment against a zero field.
    #[error("degenerate alignment: {0}")]
    DegenerateAlignment(String),

    /// No start of a multi-start run converged.
    #[error("all starts failed: {0}")]
    AllFailed(String),

    /// Reference eigensolve did not converge.
    #[error("oracle failed: {0}")]
    OracleFailed(String),

    /// An operation's precondition does not hold (e.g. pair not on the
    /// constraint set).
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Configuration text could not be parsed.
    #[error("config error{}: {msg}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Parse { line: Option<usize>, msg: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
