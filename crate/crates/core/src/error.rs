use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain: {0}")]
    Domain(String),

    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("grid depth {have} too small, need at least {need}")]
    DepthTooSmall { have: u32, need: u32 },

    #[error("unsupported wavelet order {0}")]
    UnsupportedOrder(u32),

    #[error("unsupported pairing: {0}")]
    UnsupportedPairing(String),

    #[error("level {r} too small for order {p}: need 2^r >= 2p+1")]
    LevelTooSmall { r: u32, p: u32 },

    #[error("rank deficient: sigma_min = {sigma_min:.3e}")]
    RankDeficient { sigma_min: f64 },

    #[error("basis construction numerically singular: relative gram floor {0:.3e}")]
    SingularConstruction(f64),

    #[error("infeasible constraints: least-squares residual {residual:.3e}")]
    Infeasible { residual: f64 },

    #[error("no convergence after {iterations} iterations: residual {residual:.3e}")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("malformed pgm: {0}")]
    PgmFormat(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
