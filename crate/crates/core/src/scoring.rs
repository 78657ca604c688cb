//! Ranking functions: least-information scorers (LIB, LIF, their
//! two-inference forms and fusions, LICos) and the TF*IDF / BM25 baselines.
//!
//! Every additive scorer is evaluated as
//!
//! ```text
//! score(q, d) = sum_t c_t * absent(t) + sum_{t in d} c_t * gain(t, d)
//! ```
//!
//! where `c_t` is the query count of `t`, `absent(t)` is the per-term value
//! when the document lacks `t`, and `gain = present - absent`. For LIB and
//! LIB2 the gain is the exact constant 1 or 2, so documents matching the same
//! number of query tokens receive bit-identical scores. [`score`] and [`rank`]
//! share this evaluation order and therefore agree bit for bit.
//!
//! Query terms absent from the vocabulary contribute nothing to any scorer.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::analysis::{analyze, AnalyzerConfig};
use crate::index::{Index, TermStats};
use crate::li::g;

pub const DEFAULT_BM25_B: f64 = 0.75;
pub const DEFAULT_BM25_K1: f64 = 1.5;

#[derive(Debug, Error, PartialEq)]
pub enum ScoringError {
    #[error("unknown scorer {0:?} (expected one of lib, lif, lib2, lif2, lib+lif, lib*lif, licos, tfidf, tfnidf, bm25)")]
    UnknownScorer(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("document ordinal {0} is out of range")]
    InvalidDoc(u32),
    #[error("term {term:?} does not occur in document {doc}")]
    TermAbsent { term: String, doc: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScorerKind {
    Lib,
    Lif,
    Lib2,
    Lif2,
    LibPlusLif,
    LibTimesLif,
    LiCos,
    TfIdf,
    TfNIdf,
    Bm25,
}

impl ScorerKind {
    pub const ALL: [ScorerKind; 10] = [
        ScorerKind::Lib,
        ScorerKind::Lif,
        ScorerKind::Lib2,
        ScorerKind::Lif2,
        ScorerKind::LibPlusLif,
        ScorerKind::LibTimesLif,
        ScorerKind::LiCos,
        ScorerKind::TfIdf,
        ScorerKind::TfNIdf,
        ScorerKind::Bm25,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScorerKind::Lib => "lib",
            ScorerKind::Lif => "lif",
            ScorerKind::Lib2 => "lib2",
            ScorerKind::Lif2 => "lif2",
            ScorerKind::LibPlusLif => "lib+lif",
            ScorerKind::LibTimesLif => "lib*lif",
            ScorerKind::LiCos => "licos",
            ScorerKind::TfIdf => "tfidf",
            ScorerKind::TfNIdf => "tfnidf",
            ScorerKind::Bm25 => "bm25",
        }
    }
}

impl fmt::Display for ScorerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScorerKind {
    type Err = ScoringError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.trim().to_ascii_lowercase();
        ScorerKind::ALL
            .into_iter()
            .find(|k| k.name() == wanted)
            .ok_or_else(|| ScoringError::UnknownScorer(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScorerSpec {
    pub kind: ScorerKind,
    pub bm25_b: f64,
    pub bm25_k1: f64,
}

impl ScorerSpec {
    pub fn new(kind: ScorerKind) -> Self {
        Self {
            kind,
            bm25_b: DEFAULT_BM25_B,
            bm25_k1: DEFAULT_BM25_K1,
        }
    }

    pub fn with_bm25(mut self, b: f64, k1: f64) -> Result<Self, ScoringError> {
        if !(0.0..=1.0).contains(&b) {
            return Err(ScoringError::InvalidParameter(format!(
                "b = {b} not in [0, 1]"
            )));
        }
        if !(k1 >= 0.0 && k1.is_finite()) {
            return Err(ScoringError::InvalidParameter(format!(
                "k1 = {k1} must be >= 0"
            )));
        }
        self.bm25_b = b;
        self.bm25_k1 = k1;
        Ok(self)
    }
}

impl FromStr for ScorerSpec {
    type Err = ScoringError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse().map(ScorerSpec::new)
    }
}

/// An analyzed query. Token multiplicity is kept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub qid: String,
    pub tokens: Vec<String>,
    pub unique_terms: BTreeMap<String, u32>,
}

impl Query {
    pub fn new(qid: impl Into<String>, tokens: Vec<String>) -> Self {
        let mut unique_terms = BTreeMap::new();
        for t in &tokens {
            *unique_terms.entry(t.clone()).or_insert(0) += 1;
        }
        Self {
            qid: qid.into(),
            tokens,
            unique_terms,
        }
    }

    pub fn from_text(qid: impl Into<String>, text: &str, cfg: &AnalyzerConfig) -> Self {
        Self::new(qid, analyze(text, cfg))
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredDoc {
    pub doc_id: String,
    pub score: f64,
    pub rank: u32,
}

/// Collection-side quantities for one in-vocabulary term.
#[derive(Debug, Clone, Copy)]
struct TermCtx {
    /// `n / N`
    p_doc: f64,
    /// `F / L`
    p_coll: f64,
    /// `ln(N / n)`
    idf: f64,
    /// `ln((N - n + 0.5) / (n + 0.5))`
    bm25_idf: f64,
}

impl TermCtx {
    fn new(n_docs: u32, stats: TermStats, total_len: u64) -> Self {
        let n = n_docs as f64;
        let df = stats.df as f64;
        Self {
            p_doc: if n_docs == 0 { 0.0 } else { (df / n).min(1.0) },
            p_coll: if total_len == 0 {
                0.0
            } else {
                (stats.cf as f64 / total_len as f64).min(1.0)
            },
            idf: if stats.df == 0 { 0.0 } else { (n / df).ln() },
            bm25_idf: ((n - df + 0.5) / (df + 0.5)).ln(),
        }
    }

    fn of(ix: &Index, term: &str) -> Option<Self> {
        ix.term_stats(term)
            .map(|s| Self::new(ix.num_docs(), s, ix.total_len()))
    }
}

/// `p(t|d) = tf / L_d`, taken as 0 for empty documents.
fn p_in_doc(tf: u32, doc_len: u32) -> f64 {
    if doc_len == 0 {
        0.0
    } else {
        (tf as f64 / doc_len as f64).min(1.0)
    }
}

fn lib_value(ctx: &TermCtx, present: bool) -> f64 {
    let prior = g(ctx.p_doc);
    if present {
        1.0 - prior
    } else {
        -prior
    }
}

fn lif_value(ctx: &TermCtx, p_doc_term: f64) -> f64 {
    g(p_doc_term) - g(ctx.p_coll)
}

fn lib2_value(ctx: &TermCtx, present: bool) -> f64 {
    let (p_d, p_not_d) = if present { (1.0, 0.0) } else { (0.0, 1.0) };
    g(p_d) - g(ctx.p_doc) - g(p_not_d) - g(1.0 - ctx.p_doc)
}

fn lif2_value(ctx: &TermCtx, p_doc_term: f64) -> f64 {
    g(p_doc_term) - g(ctx.p_coll) + g(1.0 - ctx.p_coll) - g(1.0 - p_doc_term)
}

/// Per-term value for a document that lacks the term.
fn absent_value(spec: &ScorerSpec, ctx: &TermCtx) -> f64 {
    match spec.kind {
        ScorerKind::Lib => lib_value(ctx, false),
        ScorerKind::Lif => lif_value(ctx, 0.0),
        ScorerKind::Lib2 => lib2_value(ctx, false),
        ScorerKind::Lif2 => lif2_value(ctx, 0.0),
        ScorerKind::LibPlusLif => lib_value(ctx, false) + lif_value(ctx, 0.0),
        ScorerKind::LibTimesLif => (lib_value(ctx, false) + 1.0) * (lif_value(ctx, 0.0) + 1.0),
        ScorerKind::LiCos | ScorerKind::TfIdf | ScorerKind::TfNIdf | ScorerKind::Bm25 => 0.0,
    }
}

/// `present - absent` for a document containing the term `tf >= 1` times.
fn gain_value(spec: &ScorerSpec, ctx: &TermCtx, tf: u32, doc_len: u32, avgdl: f64) -> f64 {
    let p = p_in_doc(tf, doc_len);
    match spec.kind {
        ScorerKind::Lib => 1.0,
        ScorerKind::Lib2 => 2.0,
        ScorerKind::Lif => g(p),
        ScorerKind::Lif2 => g(p) + 1.0 - g(1.0 - p),
        ScorerKind::LibPlusLif => 1.0 + g(p),
        ScorerKind::LibTimesLif => {
            (lib_value(ctx, true) + 1.0) * (lif_value(ctx, p) + 1.0) - absent_value(spec, ctx)
        }
        ScorerKind::TfIdf => tf as f64 * ctx.idf,
        ScorerKind::TfNIdf => p * ctx.idf,
        ScorerKind::Bm25 => {
            let tf = tf as f64;
            let k1 = spec.bm25_k1;
            let b = spec.bm25_b;
            let norm = if avgdl > 0.0 {
                doc_len as f64 / avgdl
            } else {
                0.0
            };
            ctx.bm25_idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * norm))
        }
        ScorerKind::LiCos => unreachable!("licos is not additive"),
    }
}

fn licos_weight_ctx(ctx: &TermCtx, tf: u32, doc_len: u32) -> f64 {
    lib_value(ctx, true) + lif_value(ctx, p_in_doc(tf, doc_len))
}

/// LIB+LIF weight from raw counts; used to precompute document norms.
pub(crate) fn licos_weight_from_counts(
    n_docs: u32,
    stats: TermStats,
    total_len: u64,
    tf: u32,
    doc_len: u32,
) -> f64 {
    licos_weight_ctx(&TermCtx::new(n_docs, stats, total_len), tf, doc_len)
}

fn check_doc(ix: &Index, doc: u32) -> Result<u32, ScoringError> {
    ix.doc(doc)
        .map(|d| d.len)
        .ok_or(ScoringError::InvalidDoc(doc))
}

/// LIB for one term: `1 - g(n/N)` if present, `-g(n/N)` if absent.
pub fn lib_term(ix: &Index, term: &str, present: bool) -> f64 {
    TermCtx::of(ix, term).map_or(0.0, |ctx| lib_value(&ctx, present))
}

/// LIF for one term: `g(tf/L_d) - g(F/L)`.
pub fn lif_term(ix: &Index, term: &str, doc: u32) -> Result<f64, ScoringError> {
    let len = check_doc(ix, doc)?;
    Ok(TermCtx::of(ix, term).map_or(0.0, |ctx| lif_value(&ctx, p_in_doc(ix.tf(term, doc), len))))
}

/// Two-inference LIB: `g(t|d) - g(t|C) - g(!t|d) - g(!t|C)`.
pub fn lib2_term(ix: &Index, term: &str, present: bool) -> f64 {
    TermCtx::of(ix, term).map_or(0.0, |ctx| lib2_value(&ctx, present))
}

/// Two-inference LIF: `g(t|d) - g(t|C) + g(!t|C) - g(!t|d)`.
pub fn lif2_term(ix: &Index, term: &str, doc: u32) -> Result<f64, ScoringError> {
    let len = check_doc(ix, doc)?;
    Ok(TermCtx::of(ix, term).map_or(0.0, |ctx| lif2_value(&ctx, p_in_doc(ix.tf(term, doc), len))))
}

/// LIB+LIF weight of a term that occurs in `doc`.
pub fn licos_weight(ix: &Index, term: &str, doc: u32) -> Result<f64, ScoringError> {
    let len = check_doc(ix, doc)?;
    let tf = ix.tf(term, doc);
    match (tf, TermCtx::of(ix, term)) {
        (1.., Some(ctx)) => Ok(licos_weight_ctx(&ctx, tf, len)),
        _ => Err(ScoringError::TermAbsent {
            term: term.to_string(),
            doc,
        }),
    }
}

/// Number of distinct query terms present in the vocabulary.
fn licos_query_norm(ix: &Index, q: &Query) -> f64 {
    (q.unique_terms
        .keys()
        .filter(|t| ix.term_stats(t).is_some())
        .count() as f64)
        .sqrt()
}

fn licos_finish(dot: f64, doc_norm: f64, query_norm: f64) -> f64 {
    if dot == 0.0 || doc_norm == 0.0 || query_norm == 0.0 {
        0.0
    } else {
        dot / (doc_norm * query_norm)
    }
}

/// Cosine between the document's LIB+LIF vector and the binary query vector.
pub fn licos_score(ix: &Index, q: &Query, doc: u32) -> Result<f64, ScoringError> {
    let len = check_doc(ix, doc)?;
    let mut dot = 0.0;
    for term in q.unique_terms.keys() {
        if let Some(ctx) = TermCtx::of(ix, term) {
            let tf = ix.tf(term, doc);
            if tf > 0 {
                dot += licos_weight_ctx(&ctx, tf, len);
            }
        }
    }
    Ok(licos_finish(
        dot,
        ix.docs()[doc as usize].licos_norm,
        licos_query_norm(ix, q),
    ))
}

/// Score of document `doc` for query `q`.
pub fn score(spec: &ScorerSpec, ix: &Index, q: &Query, doc: u32) -> Result<f64, ScoringError> {
    if spec.kind == ScorerKind::LiCos {
        return licos_score(ix, q, doc);
    }
    let len = check_doc(ix, doc)?;
    let avgdl = ix.avg_doc_len();
    let mut base = 0.0;
    let mut acc = 0.0;
    for (term, &count) in &q.unique_terms {
        let Some(ctx) = TermCtx::of(ix, term) else {
            continue;
        };
        let c = count as f64;
        base += c * absent_value(spec, &ctx);
        let tf = ix.tf(term, doc);
        if tf > 0 {
            acc += c * gain_value(spec, &ctx, tf, len, avgdl);
        }
    }
    Ok(base + acc)
}

/// Total order used for rankings: score descending, then doc id ascending.
pub fn ranking_order(a: &ScoredDoc, b: &ScoredDoc) -> std::cmp::Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.doc_id.cmp(&b.doc_id))
}

/// Top-`k` documents among those matching at least one query term.
pub fn rank(spec: &ScorerSpec, ix: &Index, q: &Query, k: usize) -> Vec<ScoredDoc> {
    if k == 0 {
        return Vec::new();
    }
    let avgdl = ix.avg_doc_len();
    let mut base = 0.0;
    let mut acc: HashMap<u32, f64> = HashMap::new();
    for (term, &count) in &q.unique_terms {
        let Some(ctx) = TermCtx::of(ix, term) else {
            continue;
        };
        let c = count as f64;
        if spec.kind != ScorerKind::LiCos {
            base += c * absent_value(spec, &ctx);
        }
        for p in ix.postings(term) {
            let len = ix.docs()[p.doc as usize].len;
            let v = if spec.kind == ScorerKind::LiCos {
                licos_weight_ctx(&ctx, p.tf, len)
            } else {
                c * gain_value(spec, &ctx, p.tf, len, avgdl)
            };
            *acc.entry(p.doc).or_insert(0.0) += v;
        }
    }
    let query_norm = licos_query_norm(ix, q);
    let mut hits: Vec<ScoredDoc> = acc
        .into_iter()
        .map(|(doc, v)| {
            let entry = &ix.docs()[doc as usize];
            let score = if spec.kind == ScorerKind::LiCos {
                licos_finish(v, entry.licos_norm, query_norm)
            } else {
                base + v
            };
            ScoredDoc {
                doc_id: entry.id.clone(),
                score,
                rank: 0,
            }
        })
        .collect();
    if hits.len() > k {
        hits.select_nth_unstable_by(k - 1, ranking_order);
        hits.truncate(k);
    }
    hits.sort_by(ranking_order);
    for (i, h) in hits.iter_mut().enumerate() {
        h.rank = i as u32 + 1;
    }
    hits
}

/// Ranks many queries in parallel; output order follows `queries`.
pub fn rank_many(
    spec: &ScorerSpec,
    ix: &Index,
    queries: &[Query],
    k: usize,
) -> Vec<Vec<ScoredDoc>> {
    queries.par_iter().map(|q| rank(spec, ix, q, k)).collect()
}
