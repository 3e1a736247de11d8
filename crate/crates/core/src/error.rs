use crate::graph::{EdgeId, VertexId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),
    #[error("unknown edge {0}")]
    UnknownEdge(EdgeId),
    #[error("offset {offset} out of range [0, {len}] on edge {edge}")]
    OffsetOutOfRange { edge: EdgeId, offset: f64, len: f64 },
    #[error("points are not connected; distance undefined")]
    Unreachable,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("graph carries no edge weights")]
    MissingWeights,
    #[error("edge weight {value} on edge {edge} outside [1/{lambda}, {lambda}]")]
    WeightOutOfBounds { edge: EdgeId, value: f64, lambda: f64 },
    #[error("empty region: {0}")]
    EmptyRegion(String),
    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
