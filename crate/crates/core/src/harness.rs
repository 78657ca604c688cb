//! Batch retrieval over a topic set: topics in, TREC run out.

use rayon::prelude::*;

use crate::analysis::AnalyzerConfig;
use crate::index::Index;
use crate::scoring::{rank, Query, ScorerSpec};
use crate::trec::{topic_to_query_text, RankedRun, Topic, TopicField};

/// Result of [`run_topics`].
#[derive(Debug, Clone, PartialEq)]
pub struct BatchRun {
    pub run: RankedRun,
    /// Topics whose selected fields analyzed to no tokens.
    pub empty_queries: Vec<String>,
}

pub fn topic_query(topic: &Topic, fields: &[TopicField], cfg: &AnalyzerConfig) -> Query {
    Query::from_text(topic.qid(), &topic_to_query_text(topic, fields), cfg)
}

/// Ranks the top `k` documents for every topic. Topics are scored in
/// parallel; the resulting run is identical to a sequential evaluation.
pub fn run_topics(
    ix: &Index,
    topics: &[Topic],
    fields: &[TopicField],
    spec: &ScorerSpec,
    k: usize,
    tag: &str,
    cfg: &AnalyzerConfig,
) -> BatchRun {
    let queries: Vec<Query> = topics.iter().map(|t| topic_query(t, fields, cfg)).collect();
    let rankings: Vec<_> = queries.par_iter().map(|q| rank(spec, ix, q, k)).collect();
    let mut run = RankedRun::new(tag);
    let mut empty_queries = Vec::new();
    for (q, hits) in queries.iter().zip(&rankings) {
        if q.is_empty() {
            log::warn!("topic {}: query is empty after analysis", q.qid);
            empty_queries.push(q.qid.clone());
        }
        run.push_topic(&q.qid, hits);
    }
    BatchRun { run, empty_queries }
}
