use thiserror::Error;

/// Every failure the library can surface. Variants are grouped by the exit
/// code the CLI maps them to (see [`Error::exit_code`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("potential floor violated at t = {t}: min {min} < floor {floor}")]
    FloorViolated { t: f64, min: f64, floor: f64 },

    #[error("grid misaligned: {0}")]
    GridMisaligned(String),

    #[error("amplitude overflow while integrating (log scale {log_scale})")]
    Overflow { log_scale: f64 },

    #[error("wronskian drifts by {drift:e} across the barrier (tolerance {tol:e})")]
    WronskianDrift { drift: f64, tol: f64 },

    #[error("near-singular interface matrix at k = {k}: |det| scaled = {det_scaled:e}")]
    SingularMomentum { k: f64, det_scaled: f64 },

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("tail mass {mass:e} at box ends exceeds {tol:e}")]
    TailMass { mass: f64, tol: f64 },

    #[error("inverse wave operator failed: {0}")]
    InverseFailed(String),

    #[error("dense cap exceeded: n = {n} > cap {cap}")]
    DenseCap { n: usize, cap: usize },

    #[error("fit needs at least 4 usable points, got {0}")]
    InsufficientPoints(usize),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{context}: {source}")]
    Context { context: String, source: Box<Error> },
}

impl Error {
    /// CLI exit code: 2 for configuration problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_)
            | Error::Config(_)
            | Error::FloorViolated { .. }
            | Error::GridMisaligned(_)
            | Error::DenseCap { .. }
            | Error::InsufficientPoints(_)
            | Error::Io(_)
            | Error::Json(_) => 2,
            Error::Overflow { .. }
            | Error::WronskianDrift { .. }
            | Error::SingularMomentum { .. }
            | Error::SingularSystem(_)
            | Error::TailMass { .. }
            | Error::InverseFailed(_) => 3,
            Error::Context { source, .. } => source.exit_code(),
        }
    }
}

/// Attaches a location to an error without changing its exit code.
pub trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T>;
}

impl<T> Context<T> for Result<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|e| Error::Context { context: what(), source: Box::new(e) })
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
