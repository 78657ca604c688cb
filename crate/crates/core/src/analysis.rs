//! Text analysis shared by indexing and query processing.
//!
//! The pipeline is: split on maximal runs of non-alphanumeric characters,
//! lowercase, drop stopwords, drop short tokens, then (optionally) Porter-stem.

use std::collections::BTreeSet;
use std::io::BufRead;

use crate::porter;

/// The bundled SMART-derived stopword list.
pub const SMART_STOPWORDS: &str = include_str!("../data/smart_stopwords.txt");

/// Name recorded in fingerprints for the bundled list.
const SMART_LIST_NAME: &str = "smart-v1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalyzerConfig {
    stemming: bool,
    stopwords: BTreeSet<String>,
    min_token_length: usize,
}

impl Default for AnalyzerConfig {
    /// Bundled stopwords, no stemming, minimum token length 1.
    fn default() -> Self {
        Self::new(false, parse_stopwords(SMART_STOPWORDS), 1)
    }
}

impl AnalyzerConfig {
    /// Stopword entries are lowercased; `min_token_length` is clamped to at least 1.
    pub fn new<I, S>(stemming: bool, stopwords: I, min_token_length: usize) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            stemming,
            stopwords: stopwords
                .into_iter()
                .map(|s| s.as_ref().to_lowercase())
                .filter(|s| !s.is_empty())
                .collect(),
            min_token_length: min_token_length.max(1),
        }
    }

    /// No stopwords, no stemming.
    pub fn plain() -> Self {
        Self::new(false, Vec::<String>::new(), 1)
    }

    pub fn with_stemming(mut self, on: bool) -> Self {
        self.stemming = on;
        self
    }

    pub fn stemming(&self) -> bool {
        self.stemming
    }

    pub fn stopwords(&self) -> &BTreeSet<String> {
        &self.stopwords
    }

    pub fn min_token_length(&self) -> usize {
        self.min_token_length
    }

    /// Stable textual identity of the configuration, e.g.
    /// `stem=porter;minlen=1;stop=smart-v1:523:3f1c09aa`.
    pub fn fingerprint(&self) -> String {
        let mut h = crc32fast::Hasher::new();
        for w in &self.stopwords {
            h.update(w.as_bytes());
            h.update(b"\n");
        }
        let list_name = if self.stopwords == parse_stopwords(SMART_STOPWORDS) {
            SMART_LIST_NAME
        } else if self.stopwords.is_empty() {
            "none"
        } else {
            "custom"
        };
        format!(
            "stem={};minlen={};stop={}:{}:{:08x}",
            if self.stemming { "porter" } else { "none" },
            self.min_token_length,
            list_name,
            self.stopwords.len(),
            h.finalize()
        )
    }
}

/// Parses a stopword list: one token per line, `#` comments ignored,
/// surrounding whitespace stripped.
pub fn parse_stopwords(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(|line| line.split('#').next().unwrap_or("").trim())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Reads a stopword file in the format accepted by [`parse_stopwords`].
pub fn read_stopwords<R: BufRead>(reader: R) -> std::io::Result<BTreeSet<String>> {
    let mut text = String::new();
    for line in reader.lines() {
        text.push_str(&line?);
        text.push('\n');
    }
    Ok(parse_stopwords(&text))
}

pub fn stem(token: &str) -> String {
    porter::stem(token)
}

pub fn analyze(text: &str, cfg: &AnalyzerConfig) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|raw| !raw.is_empty())
        .filter_map(|raw| {
            let token = raw.to_lowercase();
            if cfg.stopwords.contains(&token) || token.chars().count() < cfg.min_token_length {
                return None;
            }
            Some(if cfg.stemming { stem(&token) } else { token })
        })
        .collect()
}

/// Like [`analyze`], replacing invalid UTF-8 sequences with U+FFFD first.
pub fn analyze_bytes(bytes: &[u8], cfg: &AnalyzerConfig) -> Vec<String> {
    analyze(&String::from_utf8_lossy(bytes), cfg)
}
