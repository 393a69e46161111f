use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian (deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not unitary (deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("operator is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "symmetric space for d={d}, N={n} needs {amplitudes} amplitudes (cap {cap}); \
         use a larger-scale method"
    )]
    CapExceeded {
        d: usize,
        n: usize,
        amplitudes: u128,
        cap: u128,
    },

    #[error("cut ({0}, {1}) was not registered when the symmetric maps were built")]
    UnregisteredCut(usize, usize),

    #[error("block handle {0} does not belong to this program")]
    WrongHandle(usize),

    #[error("solver capability exceeded: {0}")]
    Capability(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("solver stopped without a usable answer (status {0})")]
    Indeterminate(String),

    #[error("A-marginal differs from identity by {distance:.3e} in trace norm")]
    MarginalNotIdentity { distance: f64 },

    #[error("zero extension: nothing to decompose")]
    ZeroExtension,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
