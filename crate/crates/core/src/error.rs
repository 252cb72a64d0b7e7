use thiserror::Error;

use crate::engine::EngineError;
use crate::text::TextError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("corrupted rank dataset: {0}")]
    CorruptIsa(String),
    #[error("internal error: {ties} tied ranks remain after the {cap}-pass cap")]
    IterationCap { cap: u32, ties: u64 },
    #[error("not a permutation: {0}")]
    NotPermutation(String),
    #[error("oracle refuses text of {n} bytes (cap {cap})")]
    OracleCap { n: usize, cap: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
