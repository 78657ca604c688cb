//! Immutable in-memory inverted index with the collection statistics used by
//! every scorer, plus a single-file persisted form.
//!
//! # File layout
//!
//! All integers little-endian.
//!
//! ```text
//! magic       b"LITIDX"
//! version     u32
//! fingerprint u32 len + UTF-8
//! analyzer    u8 stemming, u32 min_token_length, u32 count, count x (u32 len + UTF-8)
//! doc table   u32 N, u64 L, N x (u32 len + UTF-8 id, u32 L_d, f64 licos_norm)
//! vocab       u32 V, V x (u32 len + UTF-8 term, u32 df, u64 cf)   terms ascending
//! postings    for each term in vocab order: df x (u32 doc ordinal, u32 tf)
//! checksum    u32 CRC-32 of every preceding byte
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::analysis::{analyze, AnalyzerConfig};
use crate::scoring::licos_weight_from_counts;

pub const MAGIC: &[u8; 6] = b"LITIDX";
pub const FORMAT_VERSION: u32 = 1;

/// Documents analyzed per parallel batch during [`build_index`].
const BUILD_BATCH: usize = 4096;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("duplicate document id {0:?}")]
    DuplicateDocId(String),
    #[error("empty document id")]
    EmptyDocId,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not an index file (bad magic)")]
    BadMagic,
    #[error("unsupported index format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("index file truncated")]
    Truncated,
    #[error("index checksum mismatch (stored {stored:08x}, computed {computed:08x})")]
    Checksum { stored: u32, computed: u32 },
    #[error("corrupt index: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TermStats {
    /// Number of documents containing the term.
    pub df: u32,
    /// Total occurrences in the collection.
    pub cf: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocEntry {
    pub id: String,
    /// Length in tokens after analysis.
    pub len: u32,
    /// Euclidean norm of the document's LIB+LIF weight vector.
    pub licos_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct TermEntry {
    stats: TermStats,
    postings: Vec<Posting>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Index {
    docs: Vec<DocEntry>,
    total_len: u64,
    vocab: BTreeMap<String, TermEntry>,
    ordinals: HashMap<String, u32>,
    analyzer: AnalyzerConfig,
    fingerprint: String,
}

impl Index {
    pub fn num_docs(&self) -> u32 {
        self.docs.len() as u32
    }

    /// Total token count `L` over all documents.
    pub fn total_len(&self) -> u64 {
        self.total_len
    }

    pub fn avg_doc_len(&self) -> f64 {
        if self.docs.is_empty() {
            0.0
        } else {
            self.total_len as f64 / self.docs.len() as f64
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn doc(&self, ordinal: u32) -> Option<&DocEntry> {
        self.docs.get(ordinal as usize)
    }

    pub fn docs(&self) -> &[DocEntry] {
        &self.docs
    }

    pub fn ordinal(&self, doc_id: &str) -> Option<u32> {
        self.ordinals.get(doc_id).copied()
    }

    pub fn term_stats(&self, term: &str) -> Option<TermStats> {
        self.vocab.get(term).map(|e| e.stats)
    }

    /// Postings sorted by ordinal; empty for unseen terms.
    pub fn postings(&self, term: &str) -> &[Posting] {
        self.vocab.get(term).map_or(&[], |e| &e.postings)
    }

    /// Term frequency of `term` in document `doc` (0 when absent).
    pub fn tf(&self, term: &str, doc: u32) -> u32 {
        let postings = self.postings(term);
        postings
            .binary_search_by_key(&doc, |p| p.doc)
            .map_or(0, |i| postings[i].tf)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&str, TermStats)> {
        self.vocab.iter().map(|(t, e)| (t.as_str(), e.stats))
    }

    pub fn analyzer(&self) -> &AnalyzerConfig {
        &self.analyzer
    }

    pub fn analyzer_fingerprint(&self) -> &str {
        &self.fingerprint
    }
}

/// Accumulates analyzed documents; [`IndexBuilder::finish`] computes the
/// collection statistics and LICos norms.
#[derive(Debug)]
pub struct IndexBuilder {
    analyzer: AnalyzerConfig,
    docs: Vec<DocEntry>,
    ordinals: HashMap<String, u32>,
    postings: HashMap<String, Vec<Posting>>,
    total_len: u64,
}

impl IndexBuilder {
    pub fn new(analyzer: AnalyzerConfig) -> Self {
        Self {
            analyzer,
            docs: Vec::new(),
            ordinals: HashMap::new(),
            postings: HashMap::new(),
            total_len: 0,
        }
    }

    pub fn analyzer(&self) -> &AnalyzerConfig {
        &self.analyzer
    }

    /// Adds a document whose text has already been analyzed into tokens.
    pub fn add_tokens(&mut self, id: String, tokens: &[String]) -> Result<u32, IndexError> {
        if id.is_empty() {
            return Err(IndexError::EmptyDocId);
        }
        if self.ordinals.contains_key(&id) {
            return Err(IndexError::DuplicateDocId(id));
        }
        let ordinal = self.docs.len() as u32;
        let mut counts: BTreeMap<&str, u32> = BTreeMap::new();
        for t in tokens {
            *counts.entry(t.as_str()).or_default() += 1;
        }
        for (term, tf) in counts {
            self.postings
                .entry(term.to_string())
                .or_default()
                .push(Posting { doc: ordinal, tf });
        }
        self.total_len += tokens.len() as u64;
        self.ordinals.insert(id.clone(), ordinal);
        self.docs.push(DocEntry {
            id,
            len: tokens.len() as u32,
            licos_norm: 0.0,
        });
        Ok(ordinal)
    }

    pub fn add(&mut self, id: String, text: &str) -> Result<u32, IndexError> {
        let tokens = analyze(text, &self.analyzer);
        self.add_tokens(id, &tokens)
    }

    pub fn finish(self) -> Index {
        let IndexBuilder {
            analyzer,
            mut docs,
            ordinals,
            postings,
            total_len,
        } = self;
        let n_docs = docs.len() as u32;
        let vocab: BTreeMap<String, TermEntry> = postings
            .into_iter()
            .map(|(term, postings)| {
                let stats = TermStats {
                    df: postings.len() as u32,
                    cf: postings.iter().map(|p| p.tf as u64).sum(),
                };
                (term, TermEntry { stats, postings })
            })
            .collect();

        // Terms are visited in ascending order so norms are bit-reproducible.
        let mut sq = vec![0.0f64; docs.len()];
        for entry in vocab.values() {
            for p in &entry.postings {
                let w = licos_weight_from_counts(
                    n_docs,
                    entry.stats,
                    total_len,
                    p.tf,
                    docs[p.doc as usize].len,
                );
                sq[p.doc as usize] += w * w;
            }
        }
        for (doc, s) in docs.iter_mut().zip(sq) {
            doc.licos_norm = s.sqrt();
        }

        let fingerprint = analyzer.fingerprint();
        Index {
            docs,
            total_len,
            vocab,
            ordinals,
            analyzer,
            fingerprint,
        }
    }
}

/// Builds an index from `(doc_id, text)` pairs. Ordinals follow arrival order;
/// analysis runs in parallel batches and does not affect the result.
pub fn build_index<I>(docs: I, cfg: &AnalyzerConfig) -> Result<Index, IndexError>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut builder = IndexBuilder::new(cfg.clone());
    let mut batch = Vec::with_capacity(BUILD_BATCH);
    let flush = |batch: &mut Vec<(String, String)>, builder: &mut IndexBuilder| {
        let analyzed: Vec<(String, Vec<String>)> = batch
            .par_drain(..)
            .map(|(id, text)| {
                let tokens = analyze(&text, cfg);
                (id, tokens)
            })
            .collect();
        for (id, tokens) in analyzed {
            builder.add_tokens(id, &tokens)?;
        }
        Ok::<_, IndexError>(())
    };
    for doc in docs {
        batch.push(doc);
        if batch.len() == BUILD_BATCH {
            flush(&mut batch, &mut builder)?;
        }
    }
    flush(&mut batch, &mut builder)?;
    Ok(builder.finish())
}

struct ChecksumWriter<W: Write> {
    inner: W,
    hasher: crc32fast::Hasher,
}

impl<W: Write> ChecksumWriter<W> {
    fn put(&mut self, bytes: &[u8]) -> std::io::Result<()> {
        self.hasher.update(bytes);
        self.inner.write_all(bytes)
    }

    fn u32(&mut self, v: u32) -> std::io::Result<()> {
        self.put(&v.to_le_bytes())
    }

    fn u64(&mut self, v: u64) -> std::io::Result<()> {
        self.put(&v.to_le_bytes())
    }

    fn str(&mut self, s: &str) -> std::io::Result<()> {
        self.u32(s.len() as u32)?;
        self.put(s.as_bytes())
    }
}

/// Serializes the index into `sink`.
pub fn write_index<W: Write>(ix: &Index, sink: W) -> std::io::Result<()> {
    let mut w = ChecksumWriter {
        inner: sink,
        hasher: crc32fast::Hasher::new(),
    };
    w.put(MAGIC)?;
    w.u32(FORMAT_VERSION)?;
    w.str(&ix.fingerprint)?;

    w.put(&[ix.analyzer.stemming() as u8])?;
    w.u32(ix.analyzer.min_token_length() as u32)?;
    w.u32(ix.analyzer.stopwords().len() as u32)?;
    for s in ix.analyzer.stopwords() {
        w.str(s)?;
    }

    w.u32(ix.docs.len() as u32)?;
    w.u64(ix.total_len)?;
    for d in &ix.docs {
        w.str(&d.id)?;
        w.u32(d.len)?;
        w.u64(d.licos_norm.to_bits())?;
    }

    w.u32(ix.vocab.len() as u32)?;
    for (term, e) in &ix.vocab {
        w.str(term)?;
        w.u32(e.stats.df)?;
        w.u64(e.stats.cf)?;
    }
    for e in ix.vocab.values() {
        for p in &e.postings {
            w.u32(p.doc)?;
            w.u32(p.tf)?;
        }
    }
    let crc = w.hasher.clone().finalize();
    w.inner.write_all(&crc.to_le_bytes())?;
    w.inner.flush()
}

pub fn save_index(ix: &Index, path: impl AsRef<Path>) -> Result<(), IndexError> {
    let file = File::create(path)?;
    write_index(ix, BufWriter::new(file))?;
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], IndexError> {
        let end = self.pos.checked_add(n).ok_or(IndexError::Truncated)?;
        let s = self.buf.get(self.pos..end).ok_or(IndexError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, IndexError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, IndexError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, IndexError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn str(&mut self) -> Result<String, IndexError> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| IndexError::Corrupt("invalid UTF-8".into()))
    }
}

/// Parses an index from its serialized bytes.
pub fn read_index(bytes: &[u8]) -> Result<Index, IndexError> {
    if bytes.len() < MAGIC.len() {
        return Err(if MAGIC.starts_with(bytes) && !bytes.is_empty() {
            IndexError::Truncated
        } else {
            IndexError::BadMagic
        });
    }
    if &bytes[..MAGIC.len()] != MAGIC {
        return Err(IndexError::BadMagic);
    }
    let mut header = Cursor {
        buf: bytes,
        pos: MAGIC.len(),
    };
    let version = header.u32()?;
    if version != FORMAT_VERSION {
        return Err(IndexError::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    if bytes.len() < MAGIC.len() + 8 {
        return Err(IndexError::Truncated);
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(IndexError::Checksum { stored, computed });
    }

    let mut c = Cursor {
        buf: body,
        pos: header.pos,
    };
    let fingerprint = c.str()?;
    let stemming = c.u8()? != 0;
    let min_len = c.u32()? as usize;
    let n_stop = c.u32()? as usize;
    let stopwords = (0..n_stop)
        .map(|_| c.str())
        .collect::<Result<Vec<_>, _>>()?;
    let analyzer = AnalyzerConfig::new(stemming, stopwords, min_len);

    let n_docs = c.u32()?;
    let total_len = c.u64()?;
    let mut docs = Vec::with_capacity(n_docs.min(1 << 24) as usize);
    let mut ordinals = HashMap::new();
    for ord in 0..n_docs {
        let id = c.str()?;
        let len = c.u32()?;
        let licos_norm = f64::from_bits(c.u64()?);
        if ordinals.insert(id.clone(), ord).is_some() {
            return Err(IndexError::Corrupt(format!("duplicate doc id {id:?}")));
        }
        docs.push(DocEntry {
            id,
            len,
            licos_norm,
        });
    }
    if docs.iter().map(|d| d.len as u64).sum::<u64>() != total_len {
        return Err(IndexError::Corrupt(
            "document lengths do not sum to L".into(),
        ));
    }

    let n_terms = c.u32()?;
    let mut terms = Vec::with_capacity(n_terms.min(1 << 24) as usize);
    for _ in 0..n_terms {
        let term = c.str()?;
        let df = c.u32()?;
        let cf = c.u64()?;
        terms.push((term, TermStats { df, cf }));
    }
    let mut vocab = BTreeMap::new();
    for (term, stats) in terms {
        let mut postings = Vec::with_capacity(stats.df as usize);
        let mut cf = 0u64;
        for _ in 0..stats.df {
            let p = Posting {
                doc: c.u32()?,
                tf: c.u32()?,
            };
            if p.doc >= n_docs
                || p.tf == 0
                || postings.last().is_some_and(|q: &Posting| q.doc >= p.doc)
            {
                return Err(IndexError::Corrupt(format!("bad postings for {term:?}")));
            }
            cf += p.tf as u64;
            postings.push(p);
        }
        if cf != stats.cf {
            return Err(IndexError::Corrupt(format!("cf mismatch for {term:?}")));
        }
        vocab.insert(term, TermEntry { stats, postings });
    }
    if c.pos != body.len() {
        return Err(IndexError::Corrupt("trailing bytes".into()));
    }
    Ok(Index {
        docs,
        total_len,
        vocab,
        ordinals,
        analyzer,
        fingerprint,
    })
}

pub fn load_index(path: impl AsRef<Path>) -> Result<Index, IndexError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    read_index(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f3() -> Index {
        let docs = [
            ("d1", "cat cat dog"),
            ("d2", "dog mouse"),
            ("d3", "cat fish fish fish"),
        ];
        build_index(
            docs.iter().map(|(i, t)| (i.to_string(), t.to_string())),
            &AnalyzerConfig::plain(),
        )
        .unwrap()
    }

    fn to_bytes(ix: &Index) -> Vec<u8> {
        let mut buf = Vec::new();
        write_index(ix, &mut buf).unwrap();
        buf
    }

    #[test]
    fn f3_statistics() {
        let ix = f3();
        assert_eq!(ix.num_docs(), 3);
        assert_eq!(ix.total_len(), 9);
        assert_eq!(ix.vocab_size(), 4);
        assert_eq!(ix.term_stats("cat"), Some(TermStats { df: 2, cf: 3 }));
        assert_eq!(ix.term_stats("mouse"), Some(TermStats { df: 1, cf: 1 }));
        assert_eq!(ix.term_stats("fish"), Some(TermStats { df: 1, cf: 3 }));
        assert_eq!(ix.term_stats("unicorn"), None);
        assert_eq!(ix.doc(2).unwrap().len, 4);
        assert_eq!(
            ix.postings("cat"),
            &[Posting { doc: 0, tf: 2 }, Posting { doc: 2, tf: 1 }]
        );
        assert_eq!(
            ix.postings("dog"),
            &[Posting { doc: 0, tf: 1 }, Posting { doc: 1, tf: 1 }]
        );
        assert!(ix.postings("unicorn").is_empty());
        assert_eq!(ix.tf("fish", 2), 3);
        assert_eq!(ix.tf("fish", 0), 0);
        assert_eq!(ix.ordinal("d3"), Some(2));
    }

    #[test]
    fn empty_stream() {
        let ix = build_index(Vec::new(), &AnalyzerConfig::plain()).unwrap();
        assert_eq!((ix.num_docs(), ix.total_len(), ix.vocab_size()), (0, 0, 0));
        let back = read_index(&to_bytes(&ix)).unwrap();
        assert_eq!(back, ix);
    }

    #[test]
    fn duplicate_and_empty_ids() {
        let docs = vec![
            ("a".to_string(), "x".to_string()),
            ("a".to_string(), "y".to_string()),
        ];
        match build_index(docs, &AnalyzerConfig::plain()) {
            Err(IndexError::DuplicateDocId(id)) => assert_eq!(id, "a"),
            other => panic!("unexpected {other:?}"),
        }
        let docs = vec![(String::new(), "x".to_string())];
        assert!(matches!(
            build_index(docs, &AnalyzerConfig::plain()),
            Err(IndexError::EmptyDocId)
        ));
    }

    #[test]
    fn zero_length_documents_are_kept() {
        let docs = vec![
            ("a".to_string(), "the of".to_string()),
            ("b".to_string(), "words here".to_string()),
        ];
        let ix = build_index(docs, &AnalyzerConfig::default()).unwrap();
        assert_eq!(ix.num_docs(), 2);
        assert_eq!(ix.doc(0).unwrap().len, 0);
        assert_eq!(ix.doc(0).unwrap().licos_norm, 0.0);
    }

    #[test]
    fn persisted_form_is_deterministic_and_round_trips() {
        let a = to_bytes(&f3());
        let b = to_bytes(&f3());
        assert_eq!(a, b);
        assert_eq!(&a[..6], b"LITIDX");
        assert_eq!(read_index(&a).unwrap(), f3());
    }

    #[test]
    fn load_errors() {
        assert!(matches!(read_index(b""), Err(IndexError::BadMagic)));
        assert!(matches!(
            read_index(b"NOPE0000000000"),
            Err(IndexError::BadMagic)
        ));
        let good = to_bytes(&f3());
        assert!(matches!(
            read_index(&good[..good.len() - 10]),
            Err(IndexError::Checksum { .. })
        ));
        assert!(matches!(read_index(&good[..8]), Err(IndexError::Truncated)));
        let mut flipped = good.clone();
        flipped[40] ^= 0x01;
        assert!(matches!(
            read_index(&flipped),
            Err(IndexError::Checksum { .. })
        ));
        let mut versioned = good.clone();
        versioned[6] = 9;
        assert!(matches!(
            read_index(&versioned),
            Err(IndexError::VersionMismatch { found: 9, .. })
        ));
    }

    #[test]
    fn fingerprint_survives_round_trip() {
        let cfg = AnalyzerConfig::default().with_stemming(true);
        let ix = build_index(vec![("a".into(), "running cats".into())], &cfg).unwrap();
        let back = read_index(&to_bytes(&ix)).unwrap();
        assert_eq!(back.analyzer_fingerprint(), cfg.fingerprint());
        assert_ne!(
            back.analyzer_fingerprint(),
            AnalyzerConfig::default().fingerprint()
        );
        assert_eq!(back.analyzer(), &cfg);
    }
}
