//! Retrieval-effectiveness metrics: AP / MAP, gMAP, P@k, nDCG@k, R-precision.
//!
//! Unjudged documents count as non-relevant; a document is relevant when its
//! grade is at least 1. Topics without relevant documents are reported but
//! excluded from every aggregate.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;

use thiserror::Error;

use crate::trec::RankedRun;

/// TREC evaluation depth.
pub const EVAL_DEPTH: usize = 1000;
/// Floor applied to AP before taking logs for gMAP.
pub const GMAP_FLOOR: f64 = 1e-5;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("document {doc:?} appears more than once in the ranking for topic {qid}")]
    DuplicateDoc { qid: String, doc: String },
    #[error("nothing to aggregate")]
    EmptyInput,
    #[error("run is empty")]
    EmptyRun,
    #[error("no topic in the run has relevant documents in the qrels")]
    NoJudgedTopics,
}

/// Graded relevance judgments keyed by topic and document.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a judgment, returning the previous grade if the pair existed.
    pub fn insert(&mut self, qid: &str, doc_id: &str, grade: u32) -> Option<u32> {
        self.judgments
            .entry(qid.to_string())
            .or_default()
            .insert(doc_id.to_string(), grade)
    }

    pub fn grade(&self, qid: &str, doc_id: &str) -> u32 {
        self.judgments
            .get(qid)
            .and_then(|m| m.get(doc_id))
            .copied()
            .unwrap_or(0)
    }

    pub fn contains_topic(&self, qid: &str) -> bool {
        self.judgments.contains_key(qid)
    }

    pub fn topics(&self) -> impl Iterator<Item = &str> {
        self.judgments.keys().map(String::as_str)
    }

    pub fn num_relevant(&self, qid: &str) -> usize {
        self.judgments
            .get(qid)
            .map_or(0, |m| m.values().filter(|&&g| g >= 1).count())
    }

    /// All grades for a topic, including zeros.
    pub fn grades(&self, qid: &str) -> impl Iterator<Item = u32> + '_ {
        self.judgments
            .get(qid)
            .into_iter()
            .flat_map(|m| m.values().copied())
    }

    pub fn len(&self) -> usize {
        self.judgments.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn is_relevant(qrels: &Qrels, qid: &str, doc: &str) -> bool {
    qrels.grade(qid, doc) >= 1
}

fn check_unique<S: AsRef<str>>(ranked: &[S], qid: &str) -> Result<(), EvalError> {
    let mut seen = HashSet::with_capacity(ranked.len());
    for d in ranked {
        if !seen.insert(d.as_ref()) {
            return Err(EvalError::DuplicateDoc {
                qid: qid.to_string(),
                doc: d.as_ref().to_string(),
            });
        }
    }
    Ok(())
}

/// Non-interpolated average precision over the whole ranking. Returns 0 when
/// the topic has no relevant documents.
pub fn average_precision<S: AsRef<str>>(
    ranked: &[S],
    qid: &str,
    qrels: &Qrels,
) -> Result<f64, EvalError> {
    check_unique(ranked, qid)?;
    let r = qrels.num_relevant(qid);
    if r == 0 {
        return Ok(0.0);
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, d) in ranked.iter().enumerate() {
        if is_relevant(qrels, qid, d.as_ref()) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Ok(sum / r as f64)
}

fn relevant_in_prefix<S: AsRef<str>>(ranked: &[S], qid: &str, qrels: &Qrels, k: usize) -> usize {
    ranked
        .iter()
        .take(k)
        .filter(|d| is_relevant(qrels, qid, d.as_ref()))
        .count()
}

/// Precision at cut-off `k`; short rankings are padded with non-relevant docs.
pub fn p_at_k<S: AsRef<str>>(ranked: &[S], qid: &str, qrels: &Qrels, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    relevant_in_prefix(ranked, qid, qrels, k) as f64 / k as f64
}

/// nDCG@k with gain `2^grade - 1` and discount `log2(i + 1)`.
pub fn ndcg_at_k<S: AsRef<str>>(ranked: &[S], qid: &str, qrels: &Qrels, k: usize) -> f64 {
    let gain = |grade: u32| 2f64.powi(grade as i32) - 1.0;
    let discount = |i: usize| ((i + 2) as f64).log2();
    let dcg: f64 = ranked
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, d)| gain(qrels.grade(qid, d.as_ref())) / discount(i))
        .sum();
    let mut ideal: Vec<u32> = qrels.grades(qid).collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| gain(g) / discount(i))
        .sum();
    if idcg == 0.0 {
        0.0
    } else {
        dcg / idcg
    }
}

/// Precision at rank R, where R is the number of relevant documents.
pub fn r_precision<S: AsRef<str>>(ranked: &[S], qid: &str, qrels: &Qrels) -> f64 {
    let r = qrels.num_relevant(qid);
    if r == 0 {
        return 0.0;
    }
    relevant_in_prefix(ranked, qid, qrels, r) as f64 / r as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicReport {
    pub qid: String,
    pub ap: f64,
    pub p10: f64,
    pub ndcg10: f64,
    pub rprec: f64,
    pub num_rel: usize,
    pub num_ret: usize,
    /// Set when the topic has no relevant judgments; such topics do not
    /// enter the aggregates.
    pub unjudged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub per_topic: Vec<TopicReport>,
    /// Number of topics entering the aggregates.
    pub num_topics: usize,
    pub map: f64,
    pub gmap: f64,
    pub mean_p10: f64,
    pub mean_ndcg10: f64,
    pub mean_rprec: f64,
}

impl RunReport {
    pub fn unjudged_topics(&self) -> impl Iterator<Item = &TopicReport> {
        self.per_topic.iter().filter(|t| t.unjudged)
    }
}

pub fn evaluate_topic<S: AsRef<str>>(
    ranked: &[S],
    qid: &str,
    qrels: &Qrels,
) -> Result<TopicReport, EvalError> {
    let ranked = &ranked[..ranked.len().min(EVAL_DEPTH)];
    let num_rel = qrels.num_relevant(qid);
    Ok(TopicReport {
        qid: qid.to_string(),
        ap: average_precision(ranked, qid, qrels)?,
        p10: p_at_k(ranked, qid, qrels, 10),
        ndcg10: ndcg_at_k(ranked, qid, qrels, 10),
        rprec: r_precision(ranked, qid, qrels),
        num_rel,
        num_ret: ranked.len(),
        unjudged: num_rel == 0,
    })
}

/// Aggregates every given report (callers filter out unjudged topics).
pub fn aggregate(reports: &[TopicReport]) -> Result<RunReport, EvalError> {
    if reports.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let n = reports.len() as f64;
    let mean = |f: fn(&TopicReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    let log_mean = reports
        .iter()
        .map(|r| r.ap.max(GMAP_FLOOR).ln())
        .sum::<f64>()
        / n;
    Ok(RunReport {
        per_topic: reports.to_vec(),
        num_topics: reports.len(),
        map: mean(|r| r.ap),
        gmap: log_mean.exp(),
        mean_p10: mean(|r| r.p10),
        mean_ndcg10: mean(|r| r.ndcg10),
        mean_rprec: mean(|r| r.rprec),
    })
}

/// Evaluates every topic of `run` (truncated to [`EVAL_DEPTH`]) against
/// `qrels`. Topics in the qrels but absent from the run are ignored.
pub fn evaluate_run(run: &RankedRun, qrels: &Qrels) -> Result<RunReport, EvalError> {
    if run.entries.is_empty() {
        return Err(EvalError::EmptyRun);
    }
    let mut reports = Vec::new();
    for (qid, entries) in run.by_topic() {
        let ranked: Vec<&str> = entries.iter().map(|e| e.doc_id.as_str()).collect();
        let report = evaluate_topic(&ranked, qid, qrels)?;
        if report.unjudged {
            log::warn!("topic {qid} has no relevant judgments; excluded from aggregates");
        }
        reports.push(report);
    }
    let judged: Vec<TopicReport> = reports.iter().filter(|r| !r.unjudged).cloned().collect();
    if judged.is_empty() {
        return Err(EvalError::NoJudgedTopics);
    }
    let mut out = aggregate(&judged)?;
    out.per_topic = reports;
    Ok(out)
}

/// Per-topic CSV: `qid,ap,p10,ndcg10,rprec,num_rel,num_ret`, four decimals.
pub fn write_per_topic_csv<W: Write>(report: &RunReport, mut out: W) -> std::io::Result<()> {
    writeln!(out, "qid,ap,p10,ndcg10,rprec,num_rel,num_ret")?;
    for t in &report.per_topic {
        writeln!(
            out,
            "{},{:.4},{:.4},{:.4},{:.4},{},{}",
            t.qid, t.ap, t.p10, t.ndcg10, t.rprec, t.num_rel, t.num_ret
        )?;
    }
    Ok(())
}

/// Aggregate summary block, four decimals.
pub fn write_summary<W: Write>(report: &RunReport, mut out: W) -> std::io::Result<()> {
    let unjudged = report.unjudged_topics().count();
    writeln!(out, "topics\t{}", report.num_topics)?;
    if unjudged > 0 {
        writeln!(out, "unjudged\t{unjudged}")?;
    }
    writeln!(out, "map\t{:.4}", report.map)?;
    writeln!(out, "gmap\t{:.4}", report.gmap)?;
    writeln!(out, "p10\t{:.4}", report.mean_p10)?;
    writeln!(out, "ndcg10\t{:.4}", report.mean_ndcg10)?;
    writeln!(out, "rprec\t{:.4}", report.mean_rprec)
}
