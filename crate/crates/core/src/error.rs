use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("value out of representable range: {0}")]
    Range(String),

    #[error("invalid embedding: {0}")]
    InvalidEmbedding(String),

    #[error("not a planar embedding: V - E + F = {euler} (expected 2)")]
    NotPlanarEmbedding { euler: i64 },

    #[error("graph is disconnected ({components} components)")]
    Disconnected { components: usize },

    #[error("invalid matching graph: {0}")]
    InvalidGraph(String),

    #[error("no perfect matching exists")]
    NoPerfectMatching,

    #[error("invalid rewarm: {0}")]
    InvalidRewarm(String),

    #[error("instance too large for exhaustive search: {size} > {cap}")]
    TooLarge { size: usize, cap: usize },

    #[error("weights must be integers: {0}")]
    NonInteger(String),

    #[error("internal consistency check failed: {0}")]
    Internal(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
