//! Least-information retrieval: an information distance between probability
//! distributions, the term weights and ranking functions built on it, classic
//! TF*IDF / BM25 baselines, and a TREC-style experiment harness.
//!
//! ```
//! use lit_core::analysis::AnalyzerConfig;
//! use lit_core::index::build_index;
//! use lit_core::scoring::{rank, Query, ScorerKind, ScorerSpec};
//!
//! let docs = vec![
//!     ("d1".to_string(), "cat cat dog".to_string()),
//!     ("d2".to_string(), "dog mouse".to_string()),
//! ];
//! let cfg = AnalyzerConfig::plain();
//! let ix = build_index(docs, &cfg).unwrap();
//! let q = Query::from_text("1", "mouse", &cfg);
//! let hits = rank(&ScorerSpec::new(ScorerKind::LiCos), &ix, &q, 10);
//! assert_eq!(hits[0].doc_id, "d2");
//! ```

#![forbid(unsafe_code)]

pub mod analysis;
pub mod eval;
pub mod harness;
pub mod index;
pub mod li;
mod porter;
pub mod scoring;
pub mod trec;

pub use analysis::{analyze, AnalyzerConfig};
pub use eval::{evaluate_run, Qrels, RunReport, TopicReport};
pub use index::{build_index, load_index, save_index, Index};
pub use li::{least_information, LiBreakdown, ProbDistribution};
pub use scoring::{rank, score, Query, ScoredDoc, ScorerKind, ScorerSpec};
pub use trec::{RankedRun, Topic};
