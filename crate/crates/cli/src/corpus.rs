use std::io::BufRead;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use globset::{Glob, GlobSet, GlobSetBuilder};
use walkdir::WalkDir;

use lit_core::trec::{self, TrecDocReader, TrecError};

use crate::{Failure, EXIT_IO};

fn glob_set(patterns: &[String]) -> Result<Option<GlobSet>, Failure> {
    if patterns.is_empty() {
        return Ok(None);
    }
    let mut b = GlobSetBuilder::new();
    for p in patterns {
        b.add(Glob::new(p).map_err(|e| anyhow!("bad glob {p:?}: {e}"))?);
    }
    Ok(Some(b.build().map_err(|e| anyhow!(e))?))
}

/// Expands `paths` into a file list. Directories are walked in name order;
/// the include/exclude globs are matched against paths relative to the
/// directory. Files named explicitly are always kept.
pub fn collect_files(
    paths: &[PathBuf],
    include: &[String],
    exclude: &[String],
) -> Result<Vec<PathBuf>, Failure> {
    let include = glob_set(include)?;
    let exclude = glob_set(exclude)?;
    let mut files = Vec::new();
    for root in paths {
        let meta = std::fs::metadata(root)
            .map_err(|e| Failure::new(EXIT_IO, anyhow!("{}: {e}", root.display())))?;
        if !meta.is_dir() {
            files.push(root.clone());
            continue;
        }
        for entry in WalkDir::new(root).sort_by_file_name() {
            let entry = entry.map_err(|e| Failure::new(EXIT_IO, anyhow!(e)))?;
            if !entry.file_type().is_file() {
                continue;
            }
            let rel = entry.path().strip_prefix(root).unwrap_or(entry.path());
            if include.as_ref().is_some_and(|g| !g.is_match(rel)) {
                continue;
            }
            if exclude.as_ref().is_some_and(|g| g.is_match(rel)) {
                log::debug!("excluded {}", entry.path().display());
                continue;
            }
            files.push(entry.into_path());
        }
    }
    Ok(files)
}

/// Streams `(doc_id, text)` pairs from a list of files, stopping at the first
/// fatal error. Call [`DocStream::finish`] afterwards to surface it.
pub struct DocStream {
    files: std::vec::IntoIter<PathBuf>,
    current: Option<(PathBuf, TrecDocReader<Box<dyn BufRead + Send>>)>,
    skipped: usize,
    error: Option<Failure>,
}

impl DocStream {
    pub fn new(files: Vec<PathBuf>) -> Self {
        Self {
            files: files.into_iter(),
            current: None,
            skipped: 0,
            error: None,
        }
    }

    pub fn skipped(&self) -> usize {
        self.skipped
    }

    pub fn finish(&mut self) -> Result<(), Failure> {
        self.error.take().map_or(Ok(()), Err)
    }

    fn close_current(&mut self) {
        if let Some((path, reader)) = self.current.take() {
            if reader.skipped() > 0 {
                log::warn!(
                    "{}: skipped {} records without DOCNO",
                    path.display(),
                    reader.skipped()
                );
            }
            self.skipped += reader.skipped();
        }
    }

    fn fail(&mut self, path: &Path, e: TrecError) {
        let f: Failure = e.into();
        self.error = Some(Failure::new(
            f.code,
            f.err.context(path.display().to_string()),
        ));
    }
}

impl Iterator for DocStream {
    type Item = (String, String);

    fn next(&mut self) -> Option<Self::Item> {
        if self.error.is_some() {
            return None;
        }
        loop {
            if let Some((path, reader)) = &mut self.current {
                match reader.next() {
                    Some(Ok(doc)) => return Some((doc.id, doc.text)),
                    Some(Err(e)) => {
                        let path = path.clone();
                        self.close_current();
                        self.fail(&path, e);
                        return None;
                    }
                    None => self.close_current(),
                }
            }
            let path = self.files.next()?;
            match trec::open_input(&path) {
                Ok(r) => self.current = Some((path, TrecDocReader::new(r))),
                Err(e) => {
                    self.fail(&path, TrecError::Io(e));
                    return None;
                }
            }
        }
    }
}
