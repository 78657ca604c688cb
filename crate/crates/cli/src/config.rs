//! `key=value` config files that pre-set command-line flags.
//!
//! Each key is a long flag name. Values are spliced into argv right after the
//! subcommand so that explicit flags, which come later, override them.

use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::Command;

/// Removes every `--config <file>` / `--config=<file>` from `args` and
/// returns the last path given.
pub fn take_config_path(args: &mut Vec<OsString>) -> Result<Option<OsString>> {
    let mut path = None;
    let mut i = 1;
    while i < args.len() {
        let a = args[i].to_string_lossy().into_owned();
        if a == "--" {
            break;
        }
        if a == "--config" {
            if i + 1 >= args.len() {
                bail!("--config requires a file argument");
            }
            path = Some(args.remove(i + 1));
            args.remove(i);
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(OsString::from(p));
            args.remove(i);
        } else {
            i += 1;
        }
    }
    Ok(path)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

pub fn parse(text: &str) -> Result<Vec<Entry>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("config line {}: expected key=value", i + 1);
        };
        let key = k.trim().trim_start_matches("--").to_string();
        if key.is_empty() {
            bail!("config line {}: empty key", i + 1);
        }
        out.push(Entry {
            line: i + 1,
            key,
            value: v.trim().to_string(),
        });
    }
    Ok(out)
}

fn parse_bool(v: &str) -> Option<bool> {
    match v.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Some(true),
        "0" | "false" | "no" | "off" => Some(false),
        _ => None,
    }
}

/// Translates config entries into flags understood by `sub`. Keys the
/// subcommand does not know are reported and ignored, so one file can serve
/// several subcommands.
pub fn to_flags(entries: &[Entry], sub: &Command) -> Result<Vec<OsString>> {
    let mut flags = Vec::new();
    for e in entries {
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(e.key.as_str()) && !a.is_positional());
        let Some(arg) = arg else {
            log::debug!(
                "config key {:?} does not apply to `{}`",
                e.key,
                sub.get_name()
            );
            continue;
        };
        if arg.get_action().takes_values() {
            flags.push(OsString::from(format!("--{}={}", e.key, e.value)));
        } else {
            match parse_bool(&e.value) {
                Some(true) => flags.push(OsString::from(format!("--{}", e.key))),
                Some(false) => {}
                None => bail!("config line {}: {:?} is not a boolean", e.line, e.value),
            }
        }
    }
    Ok(flags)
}

/// Reads the config file and splices its flags into `args` after the
/// subcommand name.
pub fn apply(args: &mut Vec<OsString>, path: &Path, root: &Command) -> Result<()> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let entries = parse(&text)?;
    let Some(pos) = args
        .iter()
        .skip(1)
        .position(|a| root.find_subcommand(a).is_some())
        .map(|p| p + 1)
    else {
        return Ok(());
    };
    let sub = root
        .find_subcommand(&args[pos])
        .expect("position found above");
    let flags = to_flags(&entries, sub)?;
    args.splice(pos + 1..pos + 1, flags);
    Ok(())
}
