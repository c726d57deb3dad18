use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Written ground truth paired with its ASR transcript.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParallelPair {
    pub id: String,
    pub gt: String,
    pub asr: String,
}

impl ParallelPair {
    /// Normalizes both sides.
    pub fn new(id: &str, gt: &str, asr: &str) -> Self {
        ParallelPair {
            id: id.to_string(),
            gt: normalize_text(gt),
            asr: normalize_text(asr),
        }
    }
}

/// Lowercases and replaces everything except alphanumerics and apostrophes
/// with single spaces.
pub fn normalize_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for c in text.chars().flat_map(char::to_lowercase) {
        if c.is_alphanumeric() || c == '\'' {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(c);
        } else {
            pending_space = true;
        }
    }
    out
}

/// True for lines that carry artifact provenance rather than data.
pub(crate) fn is_header_line(line: &str) -> bool {
    line == "#" || line.starts_with("# ")
}

/// Parses `GT<TAB>ASR` lines. Both sides are normalized; the pair id is
/// `line-<n>`. An empty ASR side is a total deletion.
pub fn parse_corpus(text: &str) -> Result<Vec<ParallelPair>> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || is_header_line(line) {
            continue;
        }
        let err = |message: &str| Error::Parse {
            what: "corpus",
            line: i + 1,
            message: message.to_string(),
        };
        let (gt, asr) = line.split_once('\t').ok_or_else(|| err("expected GT<TAB>ASR"))?;
        if asr.contains('\t') {
            return Err(err("more than two fields"));
        }
        let gt = normalize_text(gt);
        if gt.is_empty() {
            return Err(err("ground-truth side is empty"));
        }
        pairs.push(ParallelPair {
            id: format!("line-{}", i + 1),
            gt,
            asr: normalize_text(asr),
        });
    }
    Ok(pairs)
}

pub fn read_corpus(path: &Path) -> Result<Vec<ParallelPair>> {
    parse_corpus(&fs::read_to_string(path)?)
}

/// Serializes pairs back to `GT<TAB>ASR` lines.
pub fn format_corpus(pairs: &[ParallelPair]) -> String {
    let mut out = String::new();
    for p in pairs {
        out.push_str(&p.gt);
        out.push('\t');
        out.push_str(&p.asr);
        out.push('\n');
    }
    out
}

/// Reads one text per line, skipping header lines and blank lines.
pub fn parse_texts(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| l.trim_end_matches('\r'))
        .filter(|l| !l.trim().is_empty() && !is_header_line(l))
        .map(str::to_string)
        .collect()
}
