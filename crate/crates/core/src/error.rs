use thiserror::Error;

/// Errors raised by the simulator and its validators.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of a function (e.g. a non-positive temperature).
    #[error("domain error: {0}")]
    Domain(String),

    /// A caller broke a structural precondition (asymmetric tensor, mismatched lengths).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Invalid configuration; carries every problem found, not only the first.
    #[error("configuration error: {}", .0.join("; "))]
    Config(Vec<String>),

    /// A linear or nonlinear solve failed to converge.
    #[error("solver error: {message} (last residual {residual:.3e})")]
    Solver { message: String, residual: f64 },

    /// The temperature became non-positive at a quadrature point.
    #[error("positivity fault: theta = {value:.6e} at quadrature point {index}")]
    Positivity { index: usize, value: f64 },

    /// Input data does not satisfy the hypothesis of a checked lemma.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    /// Fit window empty or containing non-positive samples.
    #[error("window error: {0}")]
    Window(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(vec![msg.into()])
    }
}

pub type Result<T> = std::result::Result<T, Error>;
