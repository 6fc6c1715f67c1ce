use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("supersonic steady state undefined: |v| = {speed} >= c_s = {sound_speed}")]
    Supersonic { speed: f64, sound_speed: f64 },

    #[error("left subsonic domain at t = {time}: |v| = {speed} >= c_s = {sound_speed}")]
    LeftSubsonic {
        time: f64,
        speed: f64,
        sound_speed: f64,
        position: [f64; 3],
        momentum: [f64; 3],
    },

    #[error("no samples")]
    NoSamples,

    #[error("incompatible grids: {0}")]
    GridMismatch(String),

    #[error("quadrature did not converge after {refinements} refinements: estimate {estimate}, change {change} > bound {bound}")]
    QuadratureNonConvergence {
        refinements: usize,
        estimate: f64,
        change: f64,
        bound: f64,
    },

    #[error("recipe denominator not positive ({value}) at rho = {rho}, drift term = {drift}")]
    DenominatorNotPositive { rho: f64, drift: f64, value: f64 },

    #[error("fixed point did not converge at t = {time} after {iterations} iterations (last change {change}, contraction estimate {contraction})")]
    FixedPointNonConvergence {
        time: f64,
        iterations: usize,
        change: f64,
        contraction: f64,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("tail not decayed: {0}; run longer")]
    TailNotDecayed(String),

    #[error("bad snapshot: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable tag for error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::Supersonic { .. } => "supersonic",
            Error::LeftSubsonic { .. } => "left_subsonic",
            Error::NoSamples => "no_samples",
            Error::GridMismatch(_) => "grid_mismatch",
            Error::QuadratureNonConvergence { .. } => "quadrature_nonconvergence",
            Error::DenominatorNotPositive { .. } => "denominator_not_positive",
            Error::FixedPointNonConvergence { .. } => "fixed_point_nonconvergence",
            Error::InsufficientData(_) => "insufficient_data",
            Error::TailNotDecayed(_) => "tail_not_decayed",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
        }
    }
}
