use thiserror::Error;

/// Errors raised by grid construction, sampling, stepping and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("support reached boundary: {0}")]
    SupportBoundary(String),

    #[error("neutrality violated: {0}")]
    Neutrality(String),

    #[error("light-cone alignment required: dt = {dt}, dx = {dx}")]
    LightConeAlignment { dt: f64, dx: f64 },

    #[error("CFL violation: max|K| = {max_force} gives a shift of {shift_cells} cells (limit {limit})")]
    Cfl {
        max_force: f64,
        shift_cells: f64,
        limit: f64,
    },

    #[error("negative density {value:e} at {index:?} below abort tolerance {tolerance:e}")]
    Negative {
        value: f64,
        index: (usize, usize, usize),
        tolerance: f64,
    },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("characteristic escaped domain at s = {s}, X = {x}")]
    Escaped { s: f64, x: f64 },

    #[error("field history: {0}")]
    History(String),

    #[error("symmetry precondition: {0}")]
    Symmetry(String),

    #[error("unknown profile preset `{0}`")]
    UnknownProfile(String),

    #[error("unknown run mode `{0}`")]
    UnknownMode(String),

    #[error("unknown quantity `{0}`")]
    UnknownQuantity(String),

    #[error("config: {0}")]
    Config(String),

    #[error("snapshot format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Process exit categories used by the command-line runner.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitKind {
    Ok,
    Config,
    Numerical,
    SupportBoundary,
}

impl ExitKind {
    pub fn code(self) -> i32 {
        match self {
            ExitKind::Ok => 0,
            ExitKind::Config => 2,
            ExitKind::Numerical => 3,
            ExitKind::SupportBoundary => 4,
        }
    }
}

impl Error {
    pub fn exit_kind(&self) -> ExitKind {
        match self {
            Error::SupportBoundary(_) | Error::Escaped { .. } => ExitKind::SupportBoundary,
            Error::Cfl { .. }
            | Error::Negative { .. }
            | Error::NonFinite(_)
            | Error::History(_)
            | Error::LightConeAlignment { .. } => ExitKind::Numerical,
            Error::Io(_) => ExitKind::Numerical,
            _ => ExitKind::Config,
        }
    }

    /// Short machine-readable reason tag written to the run manifest on abort.
    pub fn reason(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) => "invalid-grid",
            Error::GridMismatch(_) => "grid-mismatch",
            Error::SupportBoundary(_) => "support-boundary",
            Error::Neutrality(_) => "neutrality",
            Error::LightConeAlignment { .. } => "light-cone-alignment",
            Error::Cfl { .. } => "cfl",
            Error::Negative { .. } => "negative-density",
            Error::NonFinite(_) => "nan",
            Error::Escaped { .. } => "characteristic-escaped",
            Error::History(_) => "field-history",
            Error::Symmetry(_) => "symmetry precondition",
            Error::UnknownProfile(_) => "unknown-profile",
            Error::UnknownMode(_) => "unknown-mode",
            Error::UnknownQuantity(_) => "unknown-quantity",
            Error::Config(_) => "config",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
        }
    }
}
