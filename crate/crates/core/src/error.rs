use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("meshes belong to different bisection forests ({0} vs {1})")]
    ForestMismatch(u64, u64),

    #[error("vertex {0} is not a vertex of the mesh")]
    UnknownVertex(usize),

    #[error("element {0} is not an element of the mesh")]
    UnknownElement(usize),

    #[error("mesh is not a refinement of the given coarse mesh")]
    NotARefinement,

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("mesh file parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("time {t} lies outside the interval [{a}, {b}]")]
    TimeOutOfRange { t: f64, a: f64, b: f64 },

    #[error("invalid time partition: {0}")]
    InvalidPartition(String),

    #[error("index {index} out of range (valid: {valid})")]
    IndexOutOfRange { index: usize, valid: String },

    #[error("unsupported polynomial degree {0}")]
    UnsupportedDegree(usize),

    #[error("linear solve failed: {0}")]
    Solve(String),

    #[error("vertex {0} is a boundary vertex; the operation requires an interior vertex")]
    NotInterior(usize),

    #[error("incompatible patch data at vertex {vertex}, mode {mode}: relative mean {mean:e}")]
    IncompatiblePatchData { vertex: usize, mode: usize, mean: f64 },

    #[error("degree bookkeeping violation: {0}")]
    DegreeMismatch(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
