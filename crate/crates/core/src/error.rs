use thiserror::Error;

/// Errors raised by the modelling library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A control was set that the architecture has no hardware for.
    #[error("invalid control for {kind}: {detail}")]
    InvalidControl { kind: String, detail: String },

    /// More independent targets than the architecture has degrees of freedom.
    #[error(
        "infeasible steering problem: {targets} targets but the DoF matrix has rank {rank} \
         (best residual {residual_rad:.3e} rad)"
    )]
    Infeasible {
        rank: usize,
        targets: usize,
        residual_rad: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
