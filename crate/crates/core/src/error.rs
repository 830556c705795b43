use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("data has rank {rank}, fewer than the {requested} requested components")]
    RankDeficient { rank: usize, requested: usize },

    #[error("bad magic number in {what}: expected {expected:#010x}, found {found:#010x}")]
    BadMagic {
        what: &'static str,
        expected: u32,
        found: u32,
    },

    #[error("truncated {what}: expected {expected} bytes, found {found}")]
    Truncated {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("schema mismatch in {path}: column `{column}` {problem}")]
    Schema {
        path: PathBuf,
        column: String,
        problem: String,
    },

    #[error("row {row} is a source-domain row; its treatment and outcome are masked")]
    MaskedLabel { row: usize },

    #[error("non-finite activation in {block} layer {layer}")]
    NonFinite { block: &'static str, layer: usize },

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },

    #[error("target data has a single treatment arm ({0}); both treated and control rows are required")]
    SingleArm(&'static str),

    #[error("covariate dimensions differ between target ({target_dim}) and source ({source_dim}); both domains must share one feature space")]
    FeatureSpace { target_dim: usize, source_dim: usize },

    #[error("linear algebra failure: {0}")]
    Numerical(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
