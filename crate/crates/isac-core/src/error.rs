use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Feasibility search exhausted its rounds; carries the best residual
    /// max_k ||X J_k F^H||_F observed against the threshold xi.
    #[error("no feasible point found: best max sidelobe {best_residual} > xi {xi}")]
    Infeasible { best_residual: f64, xi: f64 },

    /// The filter majorizer direction collapsed to zero; the caller keeps
    /// the previous filter.
    #[error("degenerate update direction (zero matrix)")]
    DegenerateDirection,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
