//! Acceptance suite. Prints one PASS/FAIL/SKIP line per criterion and fails
//! if any criterion fails.
//!
//! The TREC reproduction check runs only when these variables are set:
//! `LIT_TREC_DOCS` (colon-separated files or directories of TREC SGML,
//! optionally gzipped), `LIT_TREC_TOPICS` and `LIT_TREC_QRELS`.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use lit_core::analysis::{analyze, AnalyzerConfig};
use lit_core::eval::{
    aggregate, average_precision, evaluate_run, ndcg_at_k, p_at_k, r_precision, Qrels, TopicReport,
};
use lit_core::harness::{run_topics, topic_query};
use lit_core::index::build_index;
use lit_core::li::{binary_li_curve, least_information, ProbDistribution};
use lit_core::scoring::{rank, score, Query, ScorerKind, ScorerSpec};
use lit_core::trec::{self, parse_qrels, parse_topics, parse_trec_docs, write_run, TopicField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

enum Status {
    Pass(String),
    Fail(String),
    Skip(String),
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures");

fn dist(v: Vec<f64>) -> ProbDistribution {
    ProbDistribution::new(v).expect("valid distribution")
}

fn unit_information() -> Outcome {
    let x = dist(vec![0.5, 0.5]);
    let y = dist(vec![1.0, 0.0]);
    let start = Instant::now();
    let total = least_information(&x, &y).unwrap().total;
    let elapsed = start.elapsed();
    ensure!((total - 1.0).abs() < 1e-9, "total = {total}");
    ensure!(elapsed < Duration::from_millis(1), "took {elapsed:?}");
    Ok(format!("total = {total:.12} in {elapsed:?}"))
}

fn li_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let start = Instant::now();
    let trials = 1500;
    for _ in 0..trials {
        let n = rng.gen_range(1..=16);
        let xv = common::random_dist(&mut rng, n);
        let yv = common::random_dist(&mut rng, n);
        let t: f64 = rng.gen();
        let zv: Vec<f64> = xv.iter().zip(&yv).map(|(a, b)| a + t * (b - a)).collect();
        let (x, y, z) = (dist(xv.clone()), dist(yv.clone()), dist(zv));

        let xy = least_information(&x, &y).unwrap();
        let yx = least_information(&y, &x).unwrap();
        ensure!(
            xy.total == yx.total,
            "asymmetric: {} vs {}",
            xy.total,
            yx.total
        );

        let xz = least_information(&x, &z).unwrap().total;
        let zy = least_information(&z, &y).unwrap().total;
        ensure!(
            (xy.total - xz - zy).abs() < 1e-9,
            "path: {} vs {} + {}",
            xy.total,
            xz,
            zy
        );

        let xx = least_information(&x, &x).unwrap().total;
        ensure!(xx == 0.0, "I(x, x) = {xx}");
        let max_diff = xv
            .iter()
            .zip(&yv)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        ensure!(
            (xy.total < 1e-12) == (max_diff < 1e-12),
            "zero law: total {} with max diff {max_diff}",
            xy.total
        );
        ensure!(xy.total >= 0.0, "negative total");
        ensure!(
            xy.total.is_finite() && xy.total <= n as f64,
            "total {} exceeds n = {n}",
            xy.total
        );

        for (i, (&a, &b)) in xv.iter().zip(&yv).enumerate() {
            let q = common::li_by_quadrature(a, b);
            let v = xy.per_inference[i];
            ensure!((v - q).abs() < 1e-6, "inference {i}: {v} vs quadrature {q}");
        }
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(format!("{trials} random pairs/triples in {elapsed:?}"))
}

fn finiteness() -> Outcome {
    let x = dist(vec![1e-12, 1.0 - 1e-12]);
    let y = dist(vec![1.0, 0.0]);
    let total = least_information(&x, &y).unwrap().total;
    let kl: f64 = [1.0f64, 0.0]
        .iter()
        .zip(x.probs())
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, q)| p * (p / q).ln())
        .sum();
    ensure!(total.is_finite() && total <= 2.0, "total = {total}");
    ensure!(total > 1.99, "total = {total}, expected about 2");
    Ok(format!(
        "total = {total:.9} (KL for the same change = {kl:.3}, unbounded as p -> 0)"
    ))
}

fn curve_shape() -> Outcome {
    let pts = binary_li_curve(1000).map_err(|e| e.to_string())?;
    ensure!(pts.len() == 1000, "{} rows", pts.len());
    for w in pts.windows(2) {
        ensure!(w[1].li < w[0].li, "not decreasing at p = {}", w[1].p);
    }
    let mid = pts.iter().find(|p| p.p == 0.5).ok_or("no p = 0.5 sample")?;
    ensure!((mid.li - 1.0).abs() < 1e-9, "li(0.5) = {}", mid.li);
    let last = pts.last().unwrap();
    ensure!(last.p == 1.0 && last.li == 0.0, "li(1) = {}", last.li);
    let near = &pts[pts.len() - 2];
    ensure!(near.li < 1e-2, "li({}) = {}", near.p, near.li);
    Ok(format!(
        "1000 points, li(0.5) = {:.9}, li(0.999) = {:.2e}",
        mid.li, near.li
    ))
}

fn all_specs() -> Vec<ScorerSpec> {
    ScorerKind::ALL
        .iter()
        .map(|&k| ScorerSpec::new(k))
        .collect()
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let start = Instant::now();
    let mut checks = 0usize;
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let c = common::random_corpus(&mut rng, 100, 500);
        let ix = c.index();
        let stats = common::Stats::new(&c);
        for _ in 0..20 {
            let tokens = common::random_query(&mut rng, &c);
            let q = Query::new("q", tokens.clone());
            let matching = stats.matches(&tokens);
            for spec in all_specs() {
                let mut expected = BTreeMap::new();
                for (d, (id, _)) in c.docs.iter().enumerate() {
                    let want = stats.score(spec.kind, d, &tokens, spec.bm25_b, spec.bm25_k1);
                    let got = score(&spec, &ix, &q, d as u32).map_err(|e| e.to_string())?;
                    let err = (got - want).abs();
                    worst = worst.max(err);
                    ensure!(
                        err <= 1e-9,
                        "{} doc {id}: {got} vs oracle {want}",
                        spec.kind
                    );
                    expected.insert(id.clone(), got);
                    checks += 1;
                }
                let hits = rank(&spec, &ix, &q, usize::MAX);
                let ids: BTreeSet<String> = hits.iter().map(|h| h.doc_id.clone()).collect();
                ensure!(ids == matching, "{}: candidate set differs", spec.kind);
                for h in &hits {
                    ensure!(
                        h.score.to_bits() == expected[&h.doc_id].to_bits(),
                        "{}: rank and score disagree for {}",
                        spec.kind,
                        h.doc_id
                    );
                }
            }
        }
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    Ok(format!(
        "{checks} document scores, max error {worst:.1e}, in {elapsed:?}"
    ))
}

fn coordination_law() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let spec = ScorerSpec::new(ScorerKind::Lib);
    let mut queries = 0;
    for _ in 0..50 {
        let c = common::random_corpus(&mut rng, 100, 500);
        let ix = c.index();
        let stats = common::Stats::new(&c);
        for _ in 0..20 {
            let tokens = common::random_query(&mut rng, &c);
            let q = Query::new("q", tokens.clone());
            let n = c.docs.len();
            let scores: Vec<f64> = (0..n)
                .map(|d| score(&spec, &ix, &q, d as u32).unwrap())
                .collect();
            let coord: Vec<usize> = (0..n).map(|d| stats.coordination(d, &tokens)).collect();
            for a in 0..n {
                for b in 0..n {
                    let ds = scores[a] - scores[b];
                    let dc = coord[a] as f64 - coord[b] as f64;
                    ensure!(
                        (ds - dc).abs() < 1e-12,
                        "score diff {ds} vs match diff {dc}"
                    );
                    if coord[a] == coord[b] {
                        ensure!(scores[a].to_bits() == scores[b].to_bits(), "inexact tie");
                    }
                }
            }
            let mut by_coord: Vec<(usize, &String)> = (0..n)
                .filter(|&d| coord[d] > 0)
                .map(|d| (coord[d], &c.docs[d].0))
                .collect();
            by_coord.sort_by(|x, y| y.0.cmp(&x.0).then_with(|| x.1.cmp(y.1)));
            let hits = rank(&spec, &ix, &q, usize::MAX);
            let ranked: Vec<&String> = hits.iter().map(|h| &h.doc_id).collect();
            let expected: Vec<&String> = by_coord.into_iter().map(|(_, id)| id).collect();
            ensure!(
                ranked == expected,
                "LIB order differs from coordination order"
            );
            queries += 1;
        }
    }
    Ok(format!("{queries} queries over 50 corpora"))
}

fn metric_fixtures() -> Outcome {
    let mut qrels = Qrels::new();
    for d in ["r1", "r2", "r3"] {
        qrels.insert("ap", d, 1);
    }
    let ap = average_precision(&["r1", "n1", "r2", "n2", "r3"], "ap", &qrels).unwrap();
    ensure!((ap - 0.755556).abs() < 1e-6, "AP = {ap}");

    qrels.insert("nd", "a", 2);
    qrels.insert("nd", "c", 1);
    let ndcg = ndcg_at_k(&["a", "b", "c"], "nd", &qrels, 10);
    ensure!((ndcg - 0.963940).abs() < 1e-6, "nDCG@10 = {ndcg}");

    let reports: Vec<TopicReport> = [0.5, 0.005, 0.0]
        .iter()
        .enumerate()
        .map(|(i, &ap)| TopicReport {
            qid: i.to_string(),
            ap,
            p10: 0.0,
            ndcg10: 0.0,
            rprec: 0.0,
            num_rel: 1,
            num_ret: 1,
            unjudged: false,
        })
        .collect();
    let gmap = aggregate(&reports).unwrap().gmap;
    ensure!((gmap - 0.002924).abs() < 1e-6, "gMAP = {gmap}");

    for d in ["x1", "x2", "x3", "x4"] {
        qrels.insert("rp", d, 1);
    }
    let rp = r_precision(&["x1", "y1", "x2", "y2", "x3"], "rp", &qrels);
    ensure!(rp == 0.5, "R-precision = {rp}");
    let ranking = [
        "x1", "y1", "x2", "y2", "x3", "y3", "y4", "x4", "y5", "y6", "y7",
    ];
    let p10 = p_at_k(&ranking, "rp", &qrels, 10);
    ensure!(p10 == 0.4, "P@10 = {p10}");
    ensure!(
        p_at_k(&[] as &[&str], "rp", &qrels, 10) == 0.0,
        "empty P@10"
    );
    Ok(format!(
        "AP {ap:.6}, nDCG@10 {ndcg:.6}, gMAP {gmap:.6}, R-prec {rp}, P@10 {p10}"
    ))
}

fn run_file_name(kind: ScorerKind) -> String {
    kind.name().replace('+', "_plus_").replace('*', "_times_")
}

fn open(path: impl AsRef<Path>) -> BufReader<File> {
    BufReader::new(
        File::open(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display())),
    )
}

fn golden_end_to_end() -> Outcome {
    let dir = format!("{FIXTURES}/golden");
    let cfg = AnalyzerConfig::default().with_stemming(true);
    let docs: Vec<trec::TrecDoc> = parse_trec_docs(open(format!("{dir}/docs.trec")))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    ensure!(docs.len() == 20, "{} documents", docs.len());
    let texts: BTreeMap<String, String> = docs
        .iter()
        .map(|d| (d.id.clone(), d.text.clone()))
        .collect();
    let ix =
        build_index(docs.into_iter().map(|d| (d.id, d.text)), &cfg).map_err(|e| e.to_string())?;
    let topics = parse_topics(open(format!("{dir}/topics.txt")))
        .unwrap()
        .topics;
    ensure!(topics.len() == 5, "{} topics", topics.len());
    let qrels = parse_qrels(open(format!("{dir}/qrels.txt"))).unwrap().qrels;
    let fields = [TopicField::Title];

    let mut best = BTreeMap::new();
    for t in &topics {
        let q = topic_query(t, &fields, &cfg);
        let ideal: Vec<&String> = texts
            .keys()
            .filter(|d| qrels.grade(&q.qid, d) == 2)
            .collect();
        ensure!(
            ideal.len() == 1,
            "topic {} needs exactly one best document",
            q.qid
        );
        let id = ideal[0].clone();
        let mut best_toks = analyze(&texts[&id], &cfg);
        best_toks.sort();
        let mut query_toks = q.tokens.clone();
        query_toks.sort();
        ensure!(
            best_toks == query_toks,
            "{id} is not exactly the query terms of {}",
            q.qid
        );
        for (doc, text) in &texts {
            let toks = analyze(text, &cfg);
            for term in q.unique_terms.keys() {
                ensure!(
                    toks.iter().filter(|t| *t == term).count() <= 1,
                    "{doc} repeats query term {term}"
                );
            }
        }
        best.insert(q.qid, id);
    }

    for kind in ScorerKind::ALL {
        let spec = ScorerSpec::new(kind);
        let batch = run_topics(&ix, &topics, &fields, &spec, 1000, "golden", &cfg);
        let mut bytes = Vec::new();
        write_run(&batch.run, &mut bytes).unwrap();
        let path = format!("{dir}/runs/{}.run", run_file_name(kind));
        let committed = std::fs::read(&path).map_err(|e| format!("{path}: {e}"))?;
        ensure!(bytes == committed, "{kind}: run differs from {path}");
        for (qid, id) in &best {
            let top = batch
                .run
                .entries
                .iter()
                .find(|e| &e.qid == qid && e.rank == 1);
            ensure!(
                top.is_some_and(|e| &e.doc_id == id),
                "{kind}: topic {qid} does not rank {id} first"
            );
        }
        let report = evaluate_run(&batch.run, &qrels).map_err(|e| e.to_string())?;
        ensure!(
            report.num_topics == 5,
            "{kind}: {} judged topics",
            report.num_topics
        );
    }

    let f3 = format!("{FIXTURES}/f3");
    let plain = AnalyzerConfig::plain();
    let docs = parse_trec_docs(open(format!("{f3}/docs.trec")))
        .map(|d| d.map(|d| (d.id, d.text)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let ix = build_index(docs, &plain).map_err(|e| e.to_string())?;
    let topics = parse_topics(open(format!("{f3}/topics.txt")))
        .unwrap()
        .topics;
    let spec = ScorerSpec::new(ScorerKind::LiCos);
    let batch = run_topics(&ix, &topics, &fields, &spec, 1000, "golden", &plain);
    let mut bytes = Vec::new();
    write_run(&batch.run, &mut bytes).unwrap();
    ensure!(
        bytes == std::fs::read(format!("{f3}/licos.run")).unwrap(),
        "F3 LICos run differs from the committed file"
    );
    Ok("10 scorer runs byte-identical, best document first for 5/5 topics".into())
}

fn trec_paths(var: &str) -> Option<Vec<PathBuf>> {
    let v = std::env::var_os(var)?;
    Some(std::env::split_paths(&v).collect())
}

fn walk(path: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(path)?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()?;
        entries.sort();
        for e in entries {
            walk(&e, out)?;
        }
    } else {
        out.push(path.to_path_buf());
    }
    Ok(())
}

fn trec_reproduction() -> Status {
    let (Some(docs), Some(topics), Some(qrels)) = (
        trec_paths("LIT_TREC_DOCS"),
        std::env::var_os("LIT_TREC_TOPICS"),
        std::env::var_os("LIT_TREC_QRELS"),
    ) else {
        return Status::Skip("LIT_TREC_DOCS / LIT_TREC_TOPICS / LIT_TREC_QRELS not set".into());
    };
    match reproduce(&docs, Path::new(&topics), Path::new(&qrels)) {
        Ok(msg) => Status::Pass(msg),
        Err(msg) => Status::Fail(msg),
    }
}

fn reproduce(doc_paths: &[PathBuf], topics: &Path, qrels: &Path) -> Outcome {
    let mut files = Vec::new();
    for p in doc_paths {
        walk(p, &mut files).map_err(|e| format!("{}: {e}", p.display()))?;
    }
    let cfg = AnalyzerConfig::default().with_stemming(true);
    let mut failure = None;
    let stream = files.iter().flat_map(|f| {
        let reader = trec::open_input(f).unwrap_or_else(|e| panic!("{}: {e}", f.display()));
        parse_trec_docs(reader)
    });
    let docs = stream.map_while(|d| match d {
        Ok(d) => Some((d.id, d.text)),
        Err(e) => {
            failure = Some(e.to_string());
            None
        }
    });
    let ix = build_index(docs, &cfg).map_err(|e| e.to_string())?;
    if let Some(e) = failure {
        return Err(e);
    }
    let topics: Vec<_> = parse_topics(trec::open_input(topics).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?
        .topics
        .into_iter()
        .filter(|t| {
            t.qid()
                .parse::<u32>()
                .is_ok_and(|n| (51..=100).contains(&n))
        })
        .collect();
    ensure!(!topics.is_empty(), "no topics 51-100 found");
    let qrels = parse_qrels(trec::open_input(qrels).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?
        .qrels;
    let fields = [TopicField::Concepts];
    let map = |kind| -> Result<f64, String> {
        let run = run_topics(
            &ix,
            &topics,
            &fields,
            &ScorerSpec::new(kind),
            1000,
            "repro",
            &cfg,
        );
        Ok(evaluate_run(&run.run, &qrels)
            .map_err(|e| e.to_string())?
            .map)
    };
    let licos = map(ScorerKind::LiCos)?;
    let bm25 = map(ScorerKind::Bm25)?;
    let times = map(ScorerKind::LibTimesLif)?;
    let plus = map(ScorerKind::LibPlusLif)?;
    let summary = format!(
        "N={} topics={} MAP licos {licos:.4} (target 0.423), bm25 {bm25:.4} (target 0.399), lib*lif {times:.4}, lib+lif {plus:.4}",
        ix.num_docs(),
        topics.len()
    );
    ensure!(
        licos > bm25 && bm25 > times && times > plus,
        "ordering not reproduced: {summary}"
    );
    if std::env::var_os("LIT_TREC_STRICT").is_some() {
        ensure!(
            (licos - 0.423).abs() <= 0.02 && (bm25 - 0.399).abs() <= 0.02,
            "outside +/-0.02 of targets: {summary}"
        );
    }
    Ok(summary)
}

fn main() {
    let suite_start = Instant::now();
    let criteria: Vec<Criterion> = vec![
        ("unit information", unit_information),
        ("least-information property suite", li_properties),
        ("finiteness where KL diverges", finiteness),
        ("binary curve shape", curve_shape),
        ("scorer oracle equivalence", oracle_equivalence),
        ("LIB coordination law", coordination_law),
        ("metric fixtures", metric_fixtures),
        ("end-to-end golden runs", golden_end_to_end),
    ];
    let mut results: Vec<(usize, &str, Status)> = criteria
        .into_iter()
        .enumerate()
        .map(|(i, (name, f))| {
            let status = match std::panic::catch_unwind(f) {
                Ok(Ok(msg)) => Status::Pass(msg),
                Ok(Err(msg)) => Status::Fail(msg),
                Err(_) => Status::Fail("panicked".into()),
            };
            (i + 1, name, status)
        })
        .collect();
    let suite = suite_start.elapsed();
    if suite >= Duration::from_secs(60) {
        if let Some((_, _, s @ Status::Pass(_))) = results.last_mut() {
            *s = Status::Fail(format!("criteria 1-8 took {suite:?}"));
        }
    }
    results.push((9, "TREC reproduction", trec_reproduction()));

    let mut failed = 0;
    for (n, name, status) in &results {
        let (tag, msg) = match status {
            Status::Pass(m) => ("PASS", m),
            Status::Fail(m) => {
                failed += 1;
                ("FAIL", m)
            }
            Status::Skip(m) => ("SKIP", m),
        };
        println!("criterion {n} [{tag}] {name}: {msg}");
    }
    println!("criteria 1-8 completed in {suite:?}");
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
