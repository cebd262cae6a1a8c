use std::collections::BTreeSet;

use thiserror::Error;

use crate::graph::VertexId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cycle detected through vertex {0}")]
    CycleDetected(VertexId),
    #[error("vertex {vertex}: function expects {expected} inputs, got {got}")]
    ArityMismatch { vertex: VertexId, expected: usize, got: usize },
    #[error("vertex {0} is not reachable from the output")]
    UnreachableVertex(VertexId),
    #[error("vertex {vertex} references missing vertex {missing}")]
    DanglingId { vertex: VertexId, missing: usize },
    #[error("vertex ids must be dense and ordered: expected id {expected}, found {found}")]
    BadVertexId { expected: usize, found: usize },
    #[error("output vertex {0} has parents")]
    OutputHasParents(VertexId),
    #[error("bad tie group {group}: {reason}")]
    BadTieGroup { group: usize, reason: String },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("domain error at vertex {vertex}: input {value} is outside the function's domain")]
    Domain { vertex: VertexId, value: f64 },
    #[error("missing value for leaf {0}")]
    MissingParam(VertexId),
    #[error("tied leaves {0} and {1} hold different values")]
    TieMismatch(VertexId, VertexId),
    #[error("graph is not levelled: vertex {vertex} has root-path lengths {lengths:?}")]
    NotLevelled { vertex: VertexId, lengths: BTreeSet<usize> },
    #[error("graph has {count} vertices, exhaustive audit limit is {limit}")]
    TooLarge { count: usize, limit: usize },
    #[error("Z-IL requires gamma = 1 (got {0}); use the ablation entry point for other values")]
    BadGamma(f64),
    #[error("output vertex must be internal for predictive-coding dynamics")]
    OutputIsLeaf,
    #[error("bad model spec: {0}")]
    BadSpec(String),
    #[error("bad config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
