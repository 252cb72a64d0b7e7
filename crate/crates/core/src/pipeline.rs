//! The end-to-end build: ranks, suffix array, BWT.

use std::time::{Duration, Instant};

use crate::bwt::{bwt_from_sa, BwtResult};
use crate::engine::Engine;
use crate::error::Result;
use crate::suffix::{build_isa, invert_isa, DoublingPass};
use crate::text::Text;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StageTimings {
    pub init: Duration,
    pub passes: Vec<Duration>,
    pub invert: Duration,
    pub bwt: Duration,
    pub total: Duration,
}

#[derive(Debug, Clone)]
pub struct IndexBuild {
    pub result: BwtResult,
    pub passes: Vec<DoublingPass>,
    pub timings: StageTimings,
}

impl IndexBuild {
    pub fn iterations(&self) -> u32 {
        self.passes.len() as u32
    }
}

/// Runs `build_isa`, `invert_isa` and `bwt_from_sa` on `engine`.
pub fn build_index(engine: &Engine, text: &Text, keep_sa: bool) -> Result<IndexBuild> {
    let start = Instant::now();
    let built = build_isa(engine, text)?;
    let t = Instant::now();
    let sa = invert_isa(engine, built.isa)?;
    let invert = t.elapsed();
    let t = Instant::now();
    let result = bwt_from_sa(engine, text, sa, keep_sa)?;
    let bwt = t.elapsed();
    let timings = StageTimings {
        init: built.init_elapsed,
        passes: built.passes.iter().map(|p| p.elapsed).collect(),
        invert,
        bwt,
        total: start.elapsed(),
    };
    Ok(IndexBuild {
        result,
        passes: built.passes,
        timings,
    })
}
