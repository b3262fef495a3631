use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        /// 1-based data row (the header is row 0).
        row: usize,
        /// 1-based column index.
        column: usize,
        message: String,
    },

    #[error("no data rows")]
    NoData,

    #[error("degenerate factor '{0}': zero half-range")]
    DegenerateFactor(String),

    #[error("invalid factor '{name}': {reason}")]
    InvalidFactor { name: String, reason: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("rank deficient: rank {rank} < {required} required")]
    RankDeficient { rank: usize, required: usize },

    #[error("underdetermined system: {rows} rows but rank(X) = {rank}")]
    Underdetermined { rows: usize, rank: usize },

    #[error("saturated model: no residual degrees of freedom (n = rank(Psi) = {0}); sigma^2 is not estimable without replicate runs")]
    Saturated(usize),

    #[error("lack-of-fit test unavailable: no replicated runs")]
    NoReplicates,

    #[error("R^2 undefined: response is constant")]
    ConstantResponse,

    #[error("internal inconsistency: {0}")]
    Inconsistent(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no solution on bracket: residual {low_residual:e} at {low:.6} kPa, {high_residual:e} at {high:.6} kPa")]
    NoRoot {
        low: f64,
        high: f64,
        low_residual: f64,
        high_residual: f64,
    },

    #[error("row {row}: {source}")]
    AtRow {
        /// 1-based run number.
        row: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at_row(row: usize, source: Error) -> Self {
        Error::AtRow {
            row,
            source: Box::new(source),
        }
    }
}
