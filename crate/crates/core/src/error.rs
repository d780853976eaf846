use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("partition of size {size} exceeds the enumeration cap {cap}")]
    PartitionTooLarge { size: usize, cap: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("partition {index}: {source}")]
    InPartition {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid preference: {0}")]
    InvalidPreference(String),

    #[error("invalid ranking: {0}")]
    InvalidRanking(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("relevant set is empty")]
    EmptyRelevantSet,

    #[error("pair set is empty")]
    EmptyPairSet,

    #[error("sample has no labels")]
    EmptyLabelSet,

    #[error("sample labels every item, so the lower partition would be empty")]
    FullLabelSet,

    #[error("index {index} out of range (bound {bound}){}", line_suffix(*.line))]
    IndexOutOfRange {
        index: usize,
        bound: usize,
        line: Option<usize>,
    },

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("malformed line {line}: {msg}")]
    MalformedLine { line: usize, msg: String },

    #[error("training diverged at epoch {epoch}: {msg}")]
    Diverged { epoch: usize, msg: String },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

fn line_suffix(line: Option<usize>) -> String {
    match line {
        Some(l) => format!(" at line {l}"),
        None => String::new(),
    }
}

impl Error {
    pub fn in_partition(self, index: usize) -> Self {
        Error::InPartition {
            index,
            source: Box::new(self),
        }
    }

    /// True for errors caused by reading or parsing input data.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Io(_)
                | Error::MalformedHeader(_)
                | Error::MalformedLine { .. }
                | Error::IndexOutOfRange { .. }
                | Error::Json(_)
        )
    }
}
