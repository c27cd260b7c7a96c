use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("query ({x:.4}, {y:.4}) is outside the map bounds")]
    OutOfBounds { x: f64, y: f64 },

    #[error("cell ({i}, {j}) is outside the valid index range")]
    CellOutOfRange { i: isize, j: isize },

    #[error("query ({x:.4}, {y:.4}) is too close to the map boundary; enlarge the map")]
    Boundary { x: f64, y: f64 },

    #[error("degenerate surface at cell ({i}, {j})")]
    DegenerateSurface { i: usize, j: usize },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("slope of {0:.3} rad or more leaves no finite projection length")]
    InfiniteProjection(f64),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("position ({x:.4}, {y:.4}) lies outside the window's domain")]
    Domain { x: f64, y: f64 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io error: {0}")]
    Io(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("no feasible plan; blocking cells: {cells:?}")]
    Infeasible { cells: Vec<(usize, usize)> },

    #[error("tracking lost: robot is {distance:.3} m from the trajectory")]
    TrackingLost { distance: f64 },
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
