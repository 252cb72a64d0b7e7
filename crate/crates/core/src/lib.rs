//! Suffix arrays and Burrows-Wheeler transforms by distributed prefix doubling.
//!
//! The construction is written against [`engine`], a small partitioned
//! dataflow engine with map, reduce-by-key, union, range-partitioned sort and
//! offset scans. [`oracle`] holds brute-force references used by the tests.
//!
//! ```
//! use dbwt::{build_index, Engine, EngineConfig, SentinelPolicy, Text};
//!
//! let engine = Engine::new(EngineConfig::new(2, 3)).unwrap();
//! let text = Text::new(b"BANANA", SentinelPolicy::PaperCompat).unwrap();
//! let built = build_index(&engine, &text, true).unwrap();
//! assert_eq!(built.result.bwt, b"BNN$AAA");
//! assert_eq!(built.result.index_i, 3);
//! ```

pub mod bwt;
pub mod cli;
pub mod corpus;
pub mod engine;
pub mod error;
pub mod oracle;
pub mod pipeline;
pub mod suffix;
pub mod text;

pub use bwt::{bwt_from_sa, inverse_bwt, BwtResult};
pub use engine::{Dataset, Engine, EngineConfig, EngineError, RangePartitioner};
pub use error::{Error, Result};
pub use pipeline::{build_index, IndexBuild, StageTimings};
pub use suffix::{build_isa, invert_isa, PairRecord, RankEntry, SaEntry};
pub use text::{CharOrder, SentinelPolicy, Text, TextError};
