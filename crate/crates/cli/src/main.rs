mod config;
mod corpus;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use lit_core::analysis::{read_stopwords, AnalyzerConfig};
use lit_core::eval::{self, EvalError, Qrels, RunReport};
use lit_core::harness::run_topics;
use lit_core::index::{self, Index, IndexError};
use lit_core::li;
use lit_core::scoring::{ScorerKind, ScorerSpec, ScoringError, DEFAULT_BM25_B, DEFAULT_BM25_K1};
use lit_core::trec::{self, RankedRun, Topic, TopicField, TrecError};

const EXIT_FAILURE: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_DUPLICATE_DOC: u8 = 3;
const EXIT_UNKNOWN_SCORER: u8 = 4;
const EXIT_DISJOINT_QIDS: u8 = 5;

/// Least-information retrieval experiments over TREC-style collections.
#[derive(Parser, Debug)]
#[command(name = "lit", version, args_override_self = true)]
struct Cli {
    /// key=value file pre-setting any flag of the chosen subcommand
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Build an index from TREC SGML files or directories.
    Index(IndexArgs),
    /// Rank documents for every topic and write a TREC run file.
    Run(RunArgs),
    /// Score a run file against qrels.
    Eval(EvalArgs),
    /// Run several scorers and report metrics relative to the first.
    Compare(CompareArgs),
    /// Emit the binary least-information vs entropy curve as CSV.
    LiCurve(CurveArgs),
}

#[derive(Args, Debug, Clone, Default)]
struct AnalyzerArgs {
    /// Apply Porter stemming
    #[arg(long)]
    stem: bool,
    /// Stopword list file (one word per line); `smart` or `none` for built-ins
    #[arg(long, value_name = "FILE")]
    stopwords: Option<String>,
    /// Drop tokens shorter than this many characters
    #[arg(long, value_name = "N")]
    min_len: Option<usize>,
}

impl AnalyzerArgs {
    fn given(&self) -> bool {
        self.stem || self.stopwords.is_some() || self.min_len.is_some()
    }

    fn build(&self) -> Result<AnalyzerConfig, Failure> {
        let min_len = self.min_len.unwrap_or(1);
        let words = match self.stopwords.as_deref() {
            None | Some("smart") => AnalyzerConfig::default().stopwords().clone(),
            Some("none") => Default::default(),
            Some(path) => trec::open_input(path)
                .and_then(read_stopwords)
                .map_err(|e| Failure::new(EXIT_IO, anyhow!("stopwords {path}: {e}")))?,
        };
        Ok(AnalyzerConfig::new(self.stem, words, min_len))
    }
}

#[derive(Args, Debug)]
struct IndexArgs {
    /// Corpus files or directories (gzip is detected automatically)
    #[arg(required = true)]
    paths: Vec<PathBuf>,
    /// Output index file
    #[arg(long, short)]
    out: PathBuf,
    #[command(flatten)]
    analyzer: AnalyzerArgs,
    /// Only index files under a directory matching this glob (repeatable)
    #[arg(long, value_name = "GLOB")]
    include: Vec<String>,
    /// Skip files under a directory matching this glob (repeatable)
    #[arg(long, value_name = "GLOB")]
    exclude: Vec<String>,
}

#[derive(Args, Debug)]
struct ScorerArgs {
    /// BM25 length normalisation
    #[arg(long, default_value_t = DEFAULT_BM25_B)]
    b: f64,
    /// BM25 term-frequency saturation
    #[arg(long, default_value_t = DEFAULT_BM25_K1)]
    k1: f64,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    index: PathBuf,
    /// TREC topic file
    #[arg(long, required_unless_present = "query", conflicts_with = "query")]
    topics: Option<PathBuf>,
    /// Run a single ad hoc query instead of a topic file
    #[arg(long)]
    query: Option<String>,
    /// Topic fields combined into the query
    #[arg(long, default_value = "title")]
    fields: String,
    #[arg(long, default_value = "licos")]
    scorer: String,
    #[command(flatten)]
    params: ScorerArgs,
    /// Documents retrieved per topic
    #[arg(long, default_value_t = 1000)]
    k: usize,
    /// Run tag (defaults to `lit-<scorer>`)
    #[arg(long)]
    tag: Option<String>,
    /// Output run file (stdout when absent)
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[command(flatten)]
    analyzer: AnalyzerArgs,
    /// Proceed even if the analyzer flags differ from the index's
    #[arg(long)]
    force: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    run: PathBuf,
    qrels: PathBuf,
    /// Also print per-topic CSV
    #[arg(long)]
    per_topic: bool,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    topics: PathBuf,
    #[arg(long)]
    qrels: PathBuf,
    /// Comma-separated scorers; the first is the baseline
    #[arg(long, default_value = "tfnidf,licos")]
    scorers: String,
    #[arg(long, default_value = "title")]
    fields: String,
    #[command(flatten)]
    params: ScorerArgs,
    #[arg(long, default_value_t = 1000)]
    k: usize,
    /// Also write the comparison table as CSV
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
    #[command(flatten)]
    analyzer: AnalyzerArgs,
    #[arg(long)]
    force: bool,
}

#[derive(Args, Debug)]
struct CurveArgs {
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    /// Output CSV (stdout when absent)
    #[arg(long, short)]
    out: Option<PathBuf>,
}

/// An error paired with the process exit status it maps to.
#[derive(Debug)]
struct Failure {
    code: u8,
    err: anyhow::Error,
}

impl Failure {
    fn new(code: u8, err: anyhow::Error) -> Self {
        Self { code, err }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(err: anyhow::Error) -> Self {
        Self::new(EXIT_FAILURE, err)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Self::new(EXIT_IO, e.into())
    }
}

impl From<IndexError> for Failure {
    fn from(e: IndexError) -> Self {
        let code = match e {
            IndexError::Io(_) => EXIT_IO,
            IndexError::DuplicateDocId(_) => EXIT_DUPLICATE_DOC,
            _ => EXIT_FAILURE,
        };
        Self::new(code, e.into())
    }
}

impl From<TrecError> for Failure {
    fn from(e: TrecError) -> Self {
        let code = match e {
            TrecError::Io(_) => EXIT_IO,
            _ => EXIT_FAILURE,
        };
        Self::new(code, e.into())
    }
}

impl From<ScoringError> for Failure {
    fn from(e: ScoringError) -> Self {
        let code = match e {
            ScoringError::UnknownScorer(_) => EXIT_UNKNOWN_SCORER,
            _ => EXIT_FAILURE,
        };
        Self::new(code, e.into())
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        let code = match e {
            EvalError::NoJudgedTopics => EXIT_DISJOINT_QIDS,
            _ => EXIT_FAILURE,
        };
        Self::new(code, e.into())
    }
}

type CmdResult = Result<(), Failure>;

trait Ctx<T> {
    fn ctx(self, what: impl std::fmt::Display) -> Result<T, Failure>;
}

impl<T, E: Into<Failure>> Ctx<T> for Result<T, E> {
    fn ctx(self, what: impl std::fmt::Display) -> Result<T, Failure> {
        self.map_err(|e| {
            let f: Failure = e.into();
            Failure::new(f.code, f.err.context(what.to_string()))
        })
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    match dispatch(std::env::args_os().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(mut args: Vec<OsString>) -> CmdResult {
    let root = Cli::command();
    if let Some(path) = config::take_config_path(&mut args)? {
        config::apply(&mut args, Path::new(&path), &root).map_err(|e| Failure::new(EXIT_IO, e))?;
    }
    let matches = root.try_get_matches_from(args).unwrap_or_else(|e| e.exit());
    let cli = Cli::from_arg_matches(&matches).unwrap_or_else(|e| e.exit());
    match cli.cmd {
        Cmd::Index(a) => cmd_index(a),
        Cmd::Run(a) => cmd_run(a),
        Cmd::Eval(a) => cmd_eval(a),
        Cmd::Compare(a) => cmd_compare(a),
        Cmd::LiCurve(a) => cmd_li_curve(a),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).ctx(format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn cmd_index(a: IndexArgs) -> CmdResult {
    let cfg = a.analyzer.build()?;
    let files = corpus::collect_files(&a.paths, &a.include, &a.exclude)?;
    if files.is_empty() {
        return Err(anyhow!("no corpus files matched").into());
    }
    let mut docs = corpus::DocStream::new(files);
    let ix = index::build_index(&mut docs, &cfg);
    docs.finish()?;
    let ix = ix?;
    index::save_index(&ix, &a.out).ctx(format!("writing {}", a.out.display()))?;
    println!(
        "N={} L={} vocab={} skipped={}",
        ix.num_docs(),
        ix.total_len(),
        ix.vocab_size(),
        docs.skipped()
    );
    Ok(())
}

fn load_checked_index(path: &Path, analyzer: &AnalyzerArgs, force: bool) -> Result<Index, Failure> {
    let ix = index::load_index(path).ctx(format!("loading {}", path.display()))?;
    if analyzer.given() {
        let wanted = analyzer.build()?;
        if wanted.fingerprint() != ix.analyzer_fingerprint() {
            let msg = format!(
                "analyzer mismatch: index built with {:?}, flags give {:?}",
                ix.analyzer_fingerprint(),
                wanted.fingerprint()
            );
            if !force {
                return Err(anyhow!("{msg} (use --force to override)").into());
            }
            log::warn!("{msg}; continuing because of --force");
        }
    }
    Ok(ix)
}

fn scorer_spec(name: &str, p: &ScorerArgs) -> Result<ScorerSpec, Failure> {
    let kind: ScorerKind = name.parse()?;
    Ok(ScorerSpec::new(kind).with_bm25(p.b, p.k1)?)
}

fn parse_fields(s: &str) -> Result<Vec<TopicField>, Failure> {
    TopicField::parse_list(s).map_err(|e| anyhow!(e).into())
}

fn load_topics(path: &Path) -> Result<Vec<Topic>, Failure> {
    let reader = trec::open_input(path).ctx(format!("opening {}", path.display()))?;
    let parsed = trec::parse_topics(reader).ctx(format!("parsing {}", path.display()))?;
    if parsed.skipped > 0 {
        log::warn!(
            "{}: skipped {} malformed topics",
            path.display(),
            parsed.skipped
        );
    }
    Ok(parsed.topics)
}

fn load_qrels(path: &Path) -> Result<(Qrels, usize), Failure> {
    let reader = trec::open_input(path).ctx(format!("opening {}", path.display()))?;
    let parsed = trec::parse_qrels(reader).ctx(format!("parsing {}", path.display()))?;
    if parsed.skipped_lines > 0 {
        log::warn!(
            "{}: skipped {} malformed lines",
            path.display(),
            parsed.skipped_lines
        );
    }
    if parsed.duplicates > 0 {
        log::warn!(
            "{}: {} duplicate judgments (last wins)",
            path.display(),
            parsed.duplicates
        );
    }
    Ok((parsed.qrels, parsed.skipped_lines))
}

fn check_k(k: usize) -> CmdResult {
    if k == 0 {
        return Err(anyhow!("--k must be at least 1").into());
    }
    Ok(())
}

fn cmd_run(a: RunArgs) -> CmdResult {
    check_k(a.k)?;
    let spec = scorer_spec(&a.scorer, &a.params)?;
    let fields = parse_fields(&a.fields)?;
    let tag = a
        .tag
        .clone()
        .unwrap_or_else(|| format!("lit-{}", spec.kind));
    if tag.is_empty() || tag.contains(char::is_whitespace) {
        return Err(anyhow!("--tag must be non-empty and contain no whitespace").into());
    }
    let ix = load_checked_index(&a.index, &a.analyzer, a.force)?;
    let topics = match (&a.topics, &a.query) {
        (Some(path), _) => load_topics(path)?,
        (None, Some(text)) => vec![Topic {
            number: "1".into(),
            title: Some(text.clone()),
            ..Default::default()
        }],
        (None, None) => unreachable!("clap requires one of --topics/--query"),
    };
    let fields = if a.query.is_some() {
        vec![TopicField::Title]
    } else {
        fields
    };
    let batch = run_topics(&ix, &topics, &fields, &spec, a.k, &tag, ix.analyzer());
    let mut out = output(a.out.as_deref())?;
    trec::write_run(&batch.run, &mut out)?;
    out.flush()?;
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> CmdResult {
    let run = trec::read_run(trec::open_input(&a.run).ctx(format!("opening {}", a.run.display()))?)
        .ctx(format!("parsing {}", a.run.display()))?;
    let (qrels, skipped) = load_qrels(&a.qrels)?;
    let report = evaluate(&run, &qrels)?;
    let mut out = output(None)?;
    if a.per_topic {
        eval::write_per_topic_csv(&report, &mut out)?;
    }
    eval::write_summary(&report, &mut out)?;
    if skipped > 0 {
        writeln!(out, "qrels_skipped\t{skipped}")?;
    }
    out.flush()?;
    Ok(())
}

fn evaluate(run: &RankedRun, qrels: &Qrels) -> Result<RunReport, Failure> {
    if !run.entries.is_empty() && !run.entries.iter().any(|e| qrels.contains_topic(&e.qid)) {
        return Err(Failure::new(
            EXIT_DISJOINT_QIDS,
            anyhow!("run and qrels share no topic ids"),
        ));
    }
    Ok(eval::evaluate_run(run, qrels)?)
}

fn ratio(x: f64, base: f64) -> String {
    if base == 0.0 {
        "inf".to_string()
    } else {
        format!("{:.4}", x / base)
    }
}

fn metrics(r: &RunReport) -> [f64; 5] {
    [r.map, r.gmap, r.mean_p10, r.mean_ndcg10, r.mean_rprec]
}

const METRIC_NAMES: [&str; 5] = ["map", "gmap", "p10", "ndcg10", "rprec"];

fn cmd_compare(a: CompareArgs) -> CmdResult {
    check_k(a.k)?;
    let specs: Vec<ScorerSpec> = a
        .scorers
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| scorer_spec(s, &a.params))
        .collect::<Result<_, _>>()?;
    if specs.len() < 2 {
        return Err(anyhow!("--scorers needs at least two scorers").into());
    }
    let fields = parse_fields(&a.fields)?;
    let ix = load_checked_index(&a.index, &a.analyzer, a.force)?;
    let topics = load_topics(&a.topics)?;
    let (qrels, _) = load_qrels(&a.qrels)?;

    let mut rows = Vec::with_capacity(specs.len());
    for spec in &specs {
        let tag = format!("lit-{}", spec.kind);
        let batch = run_topics(&ix, &topics, &fields, spec, a.k, &tag, ix.analyzer());
        rows.push((spec.kind, metrics(&evaluate(&batch.run, &qrels)?)));
    }
    let base = rows[0].1;

    let mut out = output(None)?;
    write!(out, "{:<8}", "scorer")?;
    for m in METRIC_NAMES {
        write!(out, " {m:>8}")?;
    }
    for m in METRIC_NAMES {
        write!(out, " {:>9}", format!("{m}/base"))?;
    }
    writeln!(out)?;
    for (kind, vals) in &rows {
        write!(out, "{:<8}", kind.name())?;
        for v in vals {
            write!(out, " {v:>8.4}")?;
        }
        for (v, b) in vals.iter().zip(base) {
            write!(out, " {:>9}", ratio(*v, b))?;
        }
        writeln!(out)?;
    }
    out.flush()?;

    if let Some(path) = &a.csv {
        let mut csv = output(Some(path))?;
        let header: Vec<String> = METRIC_NAMES
            .iter()
            .map(|m| m.to_string())
            .chain(METRIC_NAMES.iter().map(|m| format!("{m}_ratio")))
            .collect();
        writeln!(csv, "scorer,{}", header.join(","))?;
        for (kind, vals) in &rows {
            let abs = vals.iter().map(|v| format!("{v:.4}"));
            let rel = vals.iter().zip(base).map(|(v, b)| ratio(*v, b));
            let cells: Vec<String> = abs.chain(rel).collect();
            writeln!(csv, "{},{}", kind.name(), cells.join(","))?;
        }
        csv.flush()?;
    }
    Ok(())
}

fn cmd_li_curve(a: CurveArgs) -> CmdResult {
    let points = li::binary_li_curve(a.steps).map_err(|e| anyhow!(e))?;
    let mut out = output(a.out.as_deref())?;
    li::write_curve_csv(&points, &mut out)?;
    out.flush()?;
    Ok(())
}
