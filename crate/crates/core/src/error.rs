use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure classes surfaced by the library.
///
/// The CLI maps the three broad kinds (configuration, data, numerical) onto
/// distinct exit codes, see [`Error::kind`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input data: {0}")]
    Data(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: u64,
        msg: String,
    },

    #[error("source point is at or above the free surface (x3 = {0})")]
    SourceAboveSurface(f64),

    #[error("slip direction is not tangential to the fault (slip . normal = {0:e})")]
    NonTangentialSlip(f64),

    #[error("singular point: evaluation within {0:e} km of the source")]
    SingularPoint(f64),

    #[error("rake undefined on horizontal plane")]
    RakeUndefined,

    #[error("fault intersects guard zone: node depth {depth} km exceeds -{guard} km")]
    DepthGuard { depth: f64, guard: f64 },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("regularization constant must be positive, got {0}")]
    NonPositiveC(f64),

    #[error("tau must be positive, got {0}")]
    NonPositiveTau(f64),

    #[error("error target {target} outside (0, {upper})")]
    ErrTargetOutOfRange { target: f64, upper: f64 },

    #[error("all cells selected C = 0; the error target is below every attainable misfit")]
    DegenerateC,

    #[error("cell ({i},{j},{k}): {source}")]
    Cell {
        i: usize,
        j: usize,
        k: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_)
            | Error::RakeUndefined
            | Error::DepthGuard { .. }
            | Error::NonPositiveC(_)
            | Error::NonPositiveTau(_)
            | Error::ErrTargetOutOfRange { .. }
            | Error::DegenerateC
            | Error::SourceAboveSurface(_)
            | Error::NonTangentialSlip(_) => ErrorKind::Config,
            Error::Data(_)
            | Error::Parse { .. }
            | Error::LengthMismatch { .. }
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => ErrorKind::Data,
            Error::SingularPoint(_) | Error::Numerical(_) => ErrorKind::Numerical,
            Error::Cell { source, .. } | Error::Stage { source, .. } => source.kind(),
        }
    }

    pub(crate) fn at_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
