use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unknown node type {0:?}")]
    UnknownNodeType(String),

    #[error("unknown relation {0:?}")]
    UnknownRelation(String),

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("duplicate node id {0:?}")]
    DuplicateNode(String),

    #[error("missing endpoint {id:?} for relation {relation:?}")]
    MissingEndpoint { id: String, relation: String },

    #[error("endpoint {id:?} has type {actual:?}, relation {relation:?} expects {expected:?}")]
    EndpointType {
        id: String,
        relation: String,
        expected: String,
        actual: String,
    },

    #[error("duplicate edge {0}")]
    DuplicateEdge(String),

    #[error("self-loop on {relation:?} at node {id:?}")]
    SelfLoop { id: String, relation: String },

    #[error("unknown node id {0:?}")]
    UnknownNode(String),

    #[error("invalid split: test start year {test_start} must be after cutoff {cutoff}")]
    SplitYears { cutoff: i32, test_start: i32 },

    #[error("leakage: {0}")]
    Leakage(String),

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },

    #[error("unsupported version {found} (expected {expected})")]
    Version { expected: u32, found: u32 },

    #[error("truncated record: {0}")]
    Truncated(String),

    #[error("non-finite component in {0:?}")]
    NonFinite(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("zero vector for {0:?}")]
    ZeroVector(String),

    #[error("missing embedding for {0:?}")]
    MissingEmbedding(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("index is not frozen")]
    NotFrozen,

    #[error("ef ({ef}) must be at least k ({k})")]
    EfTooSmall { ef: usize, k: usize },
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }
}
