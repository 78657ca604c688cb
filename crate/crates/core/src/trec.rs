//! TREC formats: SGML document collections, topic files, qrels, run files.
//!
//! The SGML handling is tolerant. Unknown tags contribute their text, no DTD
//! is processed, and malformed records are skipped and counted rather than
//! aborting a long ingestion.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::eval::Qrels;
use crate::scoring::ScoredDoc;

#[derive(Debug, Error)]
pub enum TrecError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("unbalanced markup at byte {offset}: {message}")]
    Unbalanced { offset: u64, message: String },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
}

/// Opens a file for buffered reading, transparently decompressing gzip
/// (detected by its magic bytes).
pub fn open_input(path: impl AsRef<Path>) -> io::Result<Box<dyn BufRead + Send>> {
    let mut reader = BufReader::new(File::open(path)?);
    let head = reader.fill_buf()?;
    if head.starts_with(&[0x1f, 0x8b]) {
        Ok(Box::new(BufReader::new(
            flate2::bufread::MultiGzDecoder::new(reader),
        )))
    } else {
        Ok(Box::new(reader))
    }
}

// ---------------------------------------------------------------------------
// Markup scanning

#[derive(Debug, PartialEq)]
enum Event {
    Text(Vec<u8>),
    /// Raw tag including angle brackets, with its byte offset.
    Tag(Vec<u8>, u64),
}

/// Splits a byte stream into text runs and `<...>` tags. Memory use is
/// bounded by the distance between consecutive `>` characters.
struct Scanner<R> {
    reader: R,
    offset: u64,
    pending: Option<Event>,
}

impl<R: BufRead> Scanner<R> {
    fn new(reader: R) -> Self {
        Self {
            reader,
            offset: 0,
            pending: None,
        }
    }

    fn next_event(&mut self) -> io::Result<Option<Event>> {
        if let Some(ev) = self.pending.take() {
            return Ok(Some(ev));
        }
        let mut seg = Vec::new();
        let n = self.reader.read_until(b'>', &mut seg)?;
        if n == 0 {
            return Ok(None);
        }
        let start = self.offset;
        self.offset += n as u64;
        let tag_at = if seg.last() == Some(&b'>') {
            seg.iter().rposition(|&c| c == b'<')
        } else {
            None
        };
        match tag_at {
            Some(i) => {
                let tag = seg.split_off(i);
                let ev = Event::Tag(tag, start + i as u64);
                if seg.is_empty() {
                    Ok(Some(ev))
                } else {
                    self.pending = Some(ev);
                    Ok(Some(Event::Text(seg)))
                }
            }
            None => Ok(Some(Event::Text(seg))),
        }
    }
}

/// Tag name (uppercased) and whether it is a closing tag.
fn tag_name(raw: &[u8]) -> (String, bool) {
    let inner = &raw[1..raw.len() - 1];
    let (closing, inner) = match inner.first() {
        Some(b'/') => (true, &inner[1..]),
        _ => (false, inner),
    };
    let name: Vec<u8> = inner
        .iter()
        .copied()
        .take_while(|c| !c.is_ascii_whitespace() && *c != b'/')
        .collect();
    (String::from_utf8_lossy(&name).to_ascii_uppercase(), closing)
}

fn decode_entities(s: &str) -> String {
    if !s.contains('&') {
        return s.to_string();
    }
    s.replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&amp;", "&")
}

// ---------------------------------------------------------------------------
// Documents

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrecDoc {
    pub id: String,
    pub text: String,
}

/// Streaming reader over concatenated `<DOC>...</DOC>` records.
///
/// Records without `<DOCNO>` are skipped and counted in [`skipped`]. Nested
/// or stray `<DOC>`/`</DOC>` tags and unterminated records are fatal.
///
/// [`skipped`]: TrecDocReader::skipped
pub struct TrecDocReader<R> {
    scanner: Scanner<R>,
    skipped: usize,
    failed: bool,
}

impl<R: BufRead> TrecDocReader<R> {
    pub fn new(reader: R) -> Self {
        Self {
            scanner: Scanner::new(reader),
            skipped: 0,
            failed: false,
        }
    }

    pub fn skipped(&self) -> usize {
        self.skipped
    }

    fn read_record(&mut self) -> Result<Option<TrecDoc>, TrecError> {
        // Find the next <DOC>.
        let doc_start = loop {
            match self.scanner.next_event()? {
                None => return Ok(None),
                Some(Event::Text(_)) => {}
                Some(Event::Tag(raw, offset)) => match tag_name(&raw) {
                    (name, false) if name == "DOC" => break offset,
                    (name, true) if name == "DOC" => {
                        return Err(TrecError::Unbalanced {
                            offset,
                            message: "</DOC> without matching <DOC>".into(),
                        })
                    }
                    _ => {}
                },
            }
        };

        let mut docno: Option<String> = None;
        let mut in_docno = false;
        let mut docno_buf = String::new();
        let mut pieces: Vec<String> = Vec::new();
        loop {
            match self.scanner.next_event()? {
                None => {
                    return Err(TrecError::Unbalanced {
                        offset: doc_start,
                        message: "<DOC> not terminated before end of input".into(),
                    })
                }
                Some(Event::Text(bytes)) => {
                    let text = String::from_utf8_lossy(&bytes);
                    if in_docno {
                        docno_buf.push_str(&text);
                    } else {
                        let t = text.trim();
                        if !t.is_empty() {
                            pieces.push(decode_entities(t));
                        }
                    }
                }
                Some(Event::Tag(raw, offset)) => {
                    let (name, closing) = tag_name(&raw);
                    match (name.as_str(), closing) {
                        ("DOC", false) => {
                            return Err(TrecError::Unbalanced {
                                offset,
                                message: "<DOC> opened inside another <DOC>".into(),
                            })
                        }
                        ("DOC", true) => break,
                        ("DOCNO", false) => {
                            in_docno = true;
                            docno_buf.clear();
                        }
                        ("DOCNO", true) => {
                            if in_docno && docno.is_none() {
                                docno = Some(decode_entities(docno_buf.trim()));
                            }
                            in_docno = false;
                        }
                        _ => {}
                    }
                }
            }
        }

        match docno.filter(|d| !d.is_empty()) {
            Some(id) => Ok(Some(TrecDoc {
                id,
                text: pieces.join(" "),
            })),
            None => {
                self.skipped += 1;
                log::warn!("skipping <DOC> at byte {doc_start}: no <DOCNO>");
                self.read_record()
            }
        }
    }
}

impl<R: BufRead> Iterator for TrecDocReader<R> {
    type Item = Result<TrecDoc, TrecError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        match self.read_record() {
            Ok(doc) => doc.map(Ok),
            Err(e) => {
                self.failed = true;
                Some(Err(e))
            }
        }
    }
}

pub fn parse_trec_docs<R: BufRead>(reader: R) -> TrecDocReader<R> {
    TrecDocReader::new(reader)
}

// ---------------------------------------------------------------------------
// Topics

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TopicField {
    Title,
    Desc,
    Smry,
    Narr,
    Concepts,
}

impl TopicField {
    /// Fixed concatenation order for query construction.
    pub const ORDER: [TopicField; 5] = [
        TopicField::Title,
        TopicField::Desc,
        TopicField::Smry,
        TopicField::Narr,
        TopicField::Concepts,
    ];

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "title" => Some(TopicField::Title),
            "desc" | "description" => Some(TopicField::Desc),
            "smry" | "summary" => Some(TopicField::Smry),
            "narr" | "narrative" => Some(TopicField::Narr),
            "con" | "concepts" => Some(TopicField::Concepts),
            _ => None,
        }
    }

    /// Parses a comma-separated field list such as `title,desc`.
    pub fn parse_list(s: &str) -> Result<Vec<Self>, String> {
        let fields: Vec<Self> = s
            .split(',')
            .filter(|p| !p.trim().is_empty())
            .map(|p| Self::parse(p).ok_or_else(|| format!("unknown topic field {:?}", p.trim())))
            .collect::<Result<_, _>>()?;
        if fields.is_empty() {
            return Err("no topic fields given".into());
        }
        Ok(fields)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Topic {
    pub number: String,
    pub title: Option<String>,
    pub desc: Option<String>,
    pub narr: Option<String>,
    pub smry: Option<String>,
    pub concepts: Option<String>,
}

impl Topic {
    pub fn field(&self, f: TopicField) -> Option<&str> {
        match f {
            TopicField::Title => self.title.as_deref(),
            TopicField::Desc => self.desc.as_deref(),
            TopicField::Smry => self.smry.as_deref(),
            TopicField::Narr => self.narr.as_deref(),
            TopicField::Concepts => self.concepts.as_deref(),
        }
    }

    /// Identifier used in run files: numeric topic numbers lose leading
    /// zeros so that `051` matches qrels written as `51`.
    pub fn qid(&self) -> String {
        canonical_qid(&self.number)
    }
}

pub fn canonical_qid(number: &str) -> String {
    let n = number.trim();
    if !n.is_empty() && n.bytes().all(|c| c.is_ascii_digit()) {
        let stripped = n.trim_start_matches('0');
        if stripped.is_empty() { "0" } else { stripped }.to_string()
    } else {
        n.to_string()
    }
}

/// Concatenates the requested fields in [`TopicField::ORDER`], separated by
/// single spaces. Absent fields are skipped.
pub fn topic_to_query_text(topic: &Topic, fields: &[TopicField]) -> String {
    TopicField::ORDER
        .iter()
        .filter(|f| fields.contains(f))
        .filter_map(|&f| topic.field(f))
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

const LABELS: [&str; 10] = [
    "number:",
    "topic:",
    "title:",
    "description:",
    "narrative:",
    "summary:",
    "concept(s):",
    "concepts:",
    "concept:",
    "definition(s):",
];

fn strip_label(value: &str) -> &str {
    let v = value.trim();
    for label in LABELS {
        if v.len() >= label.len()
            && v.is_char_boundary(label.len())
            && v[..label.len()].eq_ignore_ascii_case(label)
        {
            return v[label.len()..].trim();
        }
    }
    v
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TopicParse {
    pub topics: Vec<Topic>,
    /// Records skipped because they lacked `<num>` or any content field.
    pub skipped: usize,
}

#[derive(Clone, Copy, PartialEq)]
enum Slot {
    Num,
    Field(TopicField),
}

fn finish_topic(slots: &BTreeMap<u8, String>) -> Option<Topic> {
    let get = |k: u8| {
        slots
            .get(&k)
            .map(|s| strip_label(s).to_string())
            .filter(|s| !s.is_empty())
    };
    let topic = Topic {
        number: get(0)?,
        title: get(1),
        desc: get(2),
        smry: get(3),
        narr: get(4),
        concepts: get(5),
    };
    let has_content = TopicField::ORDER.iter().any(|&f| topic.field(f).is_some());
    has_content.then_some(topic)
}

fn slot_key(s: Slot) -> u8 {
    match s {
        Slot::Num => 0,
        Slot::Field(TopicField::Title) => 1,
        Slot::Field(TopicField::Desc) => 2,
        Slot::Field(TopicField::Smry) => 3,
        Slot::Field(TopicField::Narr) => 4,
        Slot::Field(TopicField::Concepts) => 5,
    }
}

/// Parses `<top>`-delimited topic records. A field runs from its tag to the
/// next tag of any kind; field labels such as `Number:` are stripped.
pub fn parse_topics<R: BufRead>(reader: R) -> Result<TopicParse, TrecError> {
    let mut scanner = Scanner::new(reader);
    let mut out = TopicParse::default();
    let mut in_top = false;
    let mut current: Option<Slot> = None;
    let mut slots: BTreeMap<u8, String> = BTreeMap::new();
    while let Some(ev) = scanner.next_event()? {
        match ev {
            Event::Text(bytes) => {
                if let (true, Some(slot)) = (in_top, current) {
                    slots
                        .entry(slot_key(slot))
                        .or_default()
                        .push_str(&String::from_utf8_lossy(&bytes));
                }
            }
            Event::Tag(raw, _) => {
                let (name, closing) = tag_name(&raw);
                current = None;
                match (name.as_str(), closing) {
                    ("TOP", false) => {
                        in_top = true;
                        slots.clear();
                    }
                    ("TOP", true) => {
                        if in_top {
                            match finish_topic(&slots) {
                                Some(t) => out.topics.push(t),
                                None => {
                                    out.skipped += 1;
                                    log::warn!("skipping topic record without <num> or content");
                                }
                            }
                        }
                        in_top = false;
                    }
                    (_, true) => {}
                    ("NUM", false) => current = Some(Slot::Num),
                    ("TITLE", false) => current = Some(Slot::Field(TopicField::Title)),
                    ("DESC", false) => current = Some(Slot::Field(TopicField::Desc)),
                    ("NARR", false) => current = Some(Slot::Field(TopicField::Narr)),
                    ("SMRY", false) => current = Some(Slot::Field(TopicField::Smry)),
                    ("CON", false) => current = Some(Slot::Field(TopicField::Concepts)),
                    _ => {}
                }
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Qrels

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QrelsParse {
    pub qrels: Qrels,
    /// Malformed or negative-grade lines that were skipped.
    pub skipped_lines: usize,
    /// `(qid, doc)` pairs that appeared more than once (last one wins).
    pub duplicates: usize,
}

/// Parses `qid iter doc_id grade` lines. The iteration column is ignored.
pub fn parse_qrels<R: BufRead>(reader: R) -> Result<QrelsParse, TrecError> {
    let mut out = QrelsParse::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.is_empty() {
            continue;
        }
        let grade = match (cols.len(), cols.get(3).map(|g| g.parse::<i64>())) {
            (4, Some(Ok(g))) if g >= 0 => g.min(u32::MAX as i64) as u32,
            _ => {
                out.skipped_lines += 1;
                log::warn!(
                    "qrels line {}: malformed or negative grade: {line:?}",
                    i + 1
                );
                continue;
            }
        };
        if out.qrels.insert(cols[0], cols[2], grade).is_some() {
            out.duplicates += 1;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Run files

#[derive(Debug, Clone, PartialEq)]
pub struct RunEntry {
    pub qid: String,
    pub doc_id: String,
    pub rank: u32,
    pub score: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RankedRun {
    pub tag: String,
    pub entries: Vec<RunEntry>,
}

/// Topic ordering for run files: numeric ids by value, then other ids
/// lexicographically.
pub fn qid_order(a: &str, b: &str) -> Ordering {
    let num = |s: &str| {
        (!s.is_empty() && s.bytes().all(|c| c.is_ascii_digit()))
            .then(|| s.trim_start_matches('0').to_string())
    };
    match (num(a), num(b)) {
        (Some(x), Some(y)) => x.len().cmp(&y.len()).then(x.cmp(&y)).then(a.cmp(b)),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => a.cmp(b),
    }
}

impl RankedRun {
    pub fn new(tag: impl Into<String>) -> Self {
        Self {
            tag: tag.into(),
            entries: Vec::new(),
        }
    }

    /// Appends one topic's ranking.
    pub fn push_topic(&mut self, qid: &str, hits: &[ScoredDoc]) {
        self.entries.extend(hits.iter().map(|h| RunEntry {
            qid: qid.to_string(),
            doc_id: h.doc_id.clone(),
            rank: h.rank,
            score: h.score,
        }));
    }

    /// Entries grouped by topic in [`qid_order`], each sorted by rank.
    pub fn by_topic(&self) -> Vec<(&str, Vec<&RunEntry>)> {
        let mut groups: BTreeMap<&str, Vec<&RunEntry>> = BTreeMap::new();
        for e in &self.entries {
            groups.entry(e.qid.as_str()).or_default().push(e);
        }
        let mut out: Vec<(&str, Vec<&RunEntry>)> = groups.into_iter().collect();
        out.sort_by(|a, b| qid_order(a.0, b.0));
        for (_, es) in &mut out {
            es.sort_by_key(|e| e.rank);
        }
        out
    }

    /// Checks that ranks are dense from 1 and scores non-increasing per topic.
    pub fn validate(&self) -> Result<(), String> {
        for (qid, entries) in self.by_topic() {
            for (i, e) in entries.iter().enumerate() {
                if e.rank as usize != i + 1 {
                    return Err(format!(
                        "topic {qid}: rank {} at position {}",
                        e.rank,
                        i + 1
                    ));
                }
                if i > 0 && e.score > entries[i - 1].score {
                    return Err(format!("topic {qid}: score increases at rank {}", e.rank));
                }
            }
        }
        Ok(())
    }
}

/// Writes `qid Q0 doc_id rank score tag` lines, topics in [`qid_order`].
pub fn write_run<W: Write>(run: &RankedRun, mut sink: W) -> io::Result<()> {
    for (qid, entries) in run.by_topic() {
        for e in entries {
            writeln!(
                sink,
                "{} Q0 {} {} {:.6} {}",
                qid, e.doc_id, e.rank, e.score, run.tag
            )?;
        }
    }
    sink.flush()
}

pub fn read_run<R: BufRead>(reader: R) -> Result<RankedRun, TrecError> {
    let mut run = RankedRun::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.is_empty() {
            continue;
        }
        let err = |message: String| TrecError::Line {
            line: i + 1,
            message,
        };
        if cols.len() != 6 {
            return Err(err(format!("expected 6 columns, found {}", cols.len())));
        }
        let rank = cols[3]
            .parse()
            .map_err(|_| err(format!("bad rank {:?}", cols[3])))?;
        let score = cols[4]
            .parse()
            .map_err(|_| err(format!("bad score {:?}", cols[4])))?;
        if run.entries.is_empty() {
            run.tag = cols[5].to_string();
        }
        run.entries.push(RunEntry {
            qid: cols[0].to_string(),
            doc_id: cols[2].to_string(),
            rank,
            score,
        });
    }
    Ok(run)
}

/// Reads a whole stream into memory; small helper for tests and the CLI.
pub fn read_to_string<R: Read>(mut r: R) -> io::Result<String> {
    let mut s = String::new();
    r.read_to_string(&mut s)?;
    Ok(s)
}
