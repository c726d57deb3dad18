use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::phonetics::CONTINUATION_PREFIX;

pub const BOS: &str = "<bos>";
pub const EOS: &str = "<eos>";
pub const UNK: &str = "<unk>";

/// Ordered subword pieces. Specials occupy fixed slots; continuation pieces
/// carry the `##` prefix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubwordVocab {
    pieces: Vec<String>,
    index: HashMap<String, usize>,
    bos: usize,
    eos: usize,
    unk: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub id: usize,
    pub surface: String,
    pub continuation: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSeq {
    pub tokens: Vec<Token>,
}

impl SubwordVocab {
    /// Builds a vocabulary from an explicit piece list. Each special must
    /// appear exactly once; other duplicates are rejected too.
    pub fn from_pieces<I, S>(pieces: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let pieces: Vec<String> = pieces.into_iter().map(Into::into).collect();
        let mut index = HashMap::with_capacity(pieces.len());
        for (i, p) in pieces.iter().enumerate() {
            if p.is_empty() || p == CONTINUATION_PREFIX {
                return Err(Error::Config(format!("invalid vocabulary piece {p:?} at index {i}")));
            }
            if index.insert(p.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate vocabulary piece {p:?}")));
            }
        }
        let find = |s: &str| {
            index
                .get(s)
                .copied()
                .ok_or_else(|| Error::Config(format!("vocabulary lacks special {s}")))
        };
        let (bos, eos, unk) = (find(BOS)?, find(EOS)?, find(UNK)?);
        Ok(SubwordVocab {
            pieces,
            index,
            bos,
            eos,
            unk,
        })
    }

    /// One piece per line; the index is the line number among data lines.
    pub fn parse(text: &str) -> Result<Self> {
        let pieces = text
            .lines()
            .map(|l| l.trim_end_matches('\r'))
            .filter(|l| !l.is_empty() && !super::pairs::is_header_line(l));
        Self::from_pieces(pieces)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for p in &self.pieces {
            out.push_str(p);
            out.push('\n');
        }
        out
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn pieces(&self) -> &[String] {
        &self.pieces
    }

    pub fn piece(&self, id: usize) -> &str {
        &self.pieces[id]
    }

    pub fn id(&self, piece: &str) -> Option<usize> {
        self.index.get(piece).copied()
    }

    pub fn bos(&self) -> usize {
        self.bos
    }

    pub fn eos(&self) -> usize {
        self.eos
    }

    pub fn unk(&self) -> usize {
        self.unk
    }

    pub fn is_special(&self, id: usize) -> bool {
        id == self.bos || id == self.eos || id == self.unk
    }

    /// Greedy longest-match tokenization within each whitespace word.
    /// Characters no piece covers become one `unk` token each, keeping the
    /// original character as the surface.
    pub fn tokenize(&self, text: &str) -> TokenSeq {
        let mut tokens = Vec::new();
        for word in text.split_whitespace() {
            self.tokenize_word(word, &mut tokens);
        }
        TokenSeq { tokens }
    }

    fn tokenize_word(&self, word: &str, out: &mut Vec<Token>) {
        let bounds: Vec<usize> = word
            .char_indices()
            .map(|(i, _)| i)
            .chain(std::iter::once(word.len()))
            .collect();
        let mut start = 0;
        let mut candidate = String::with_capacity(word.len() + 2);
        while start + 1 < bounds.len() {
            let continuation = start > 0;
            let mut matched = None;
            for end in (start + 1..bounds.len()).rev() {
                candidate.clear();
                if continuation {
                    candidate.push_str(CONTINUATION_PREFIX);
                }
                candidate.push_str(&word[bounds[start]..bounds[end]]);
                if let Some(&id) = self.index.get(candidate.as_str()) {
                    if !self.is_special(id) {
                        matched = Some((id, end));
                        break;
                    }
                }
            }
            match matched {
                Some((id, end)) => {
                    out.push(Token {
                        id,
                        surface: self.pieces[id].clone(),
                        continuation,
                    });
                    start = end;
                }
                None => {
                    let ch = &word[bounds[start]..bounds[start + 1]];
                    let surface = if continuation {
                        format!("{CONTINUATION_PREFIX}{ch}")
                    } else {
                        ch.to_string()
                    };
                    out.push(Token {
                        id: self.unk,
                        surface,
                        continuation,
                    });
                    start += 1;
                }
            }
        }
    }
}

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn ids(&self) -> Vec<usize> {
        self.tokens.iter().map(|t| t.id).collect()
    }

    pub fn surfaces(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.surface.as_str()).collect()
    }

    pub fn detokenize(&self) -> String {
        detokenize(&self.surfaces())
    }

    /// Token index ranges of each whitespace word.
    pub fn word_spans(&self) -> Vec<std::ops::Range<usize>> {
        let mut spans: Vec<std::ops::Range<usize>> = Vec::new();
        for (i, t) in self.tokens.iter().enumerate() {
            match spans.last_mut() {
                Some(last) if t.continuation => last.end = i + 1,
                _ => spans.push(i..i + 1),
            }
        }
        spans
    }
}

/// Rebuilds text from piece surfaces: `##` pieces glue onto the previous
/// word, every other piece starts a new space-separated word.
pub fn detokenize<S: AsRef<str>>(surfaces: &[S]) -> String {
    let mut out = String::new();
    for s in surfaces {
        let s = s.as_ref();
        match s.strip_prefix(CONTINUATION_PREFIX) {
            Some(rest) => out.push_str(rest),
            None => {
                if !out.is_empty() {
                    out.push(' ');
                }
                out.push_str(s);
            }
        }
    }
    out
}

fn split_units(word: &str) -> Vec<String> {
    word.chars()
        .enumerate()
        .map(|(i, c)| {
            if i == 0 {
                c.to_string()
            } else {
                format!("{CONTINUATION_PREFIX}{c}")
            }
        })
        .collect()
}

fn merge_pieces(left: &str, right: &str) -> String {
    let tail = right.strip_prefix(CONTINUATION_PREFIX).unwrap_or(right);
    format!("{left}{tail}")
}

/// Frequency-greedy merge induction over whitespace words.
///
/// The base alphabet is every word-initial character plus every
/// continuation character (`##c`) seen in `texts`; `size` must cover it and
/// the three specials. Merges repeatedly join the most frequent adjacent
/// pair (ties go to the lexicographically smallest pair) until the
/// vocabulary reaches `size` or no pair remains.
pub fn induce_vocab<S: AsRef<str>>(texts: &[S], size: usize) -> Result<SubwordVocab> {
    let mut word_freq: BTreeMap<&str, usize> = BTreeMap::new();
    for t in texts {
        for w in t.as_ref().split_whitespace() {
            *word_freq.entry(w).or_default() += 1;
        }
    }
    let mut words: Vec<(Vec<String>, usize)> =
        word_freq.iter().map(|(w, &f)| (split_units(w), f)).collect();

    let alphabet: BTreeSet<String> = words.iter().flat_map(|(u, _)| u.iter().cloned()).collect();
    let minimum = alphabet.len() + 3;
    if size < minimum {
        return Err(Error::SizeTooSmall {
            requested: size,
            minimum,
        });
    }

    let mut pieces: Vec<String> = vec![BOS.into(), EOS.into(), UNK.into()];
    let mut seen: BTreeSet<String> = pieces.iter().cloned().collect();
    for a in alphabet {
        seen.insert(a.clone());
        pieces.push(a);
    }

    while pieces.len() < size {
        let mut counts: BTreeMap<(&str, &str), usize> = BTreeMap::new();
        for (units, freq) in &words {
            for pair in units.windows(2) {
                *counts.entry((pair[0].as_str(), pair[1].as_str())).or_default() += freq;
            }
        }
        // BTreeMap iterates in lexicographic order, so the first maximum wins ties.
        let best = counts
            .iter()
            .fold(None, |best: Option<(&(&str, &str), usize)>, (pair, &c)| match best {
                Some((_, bc)) if bc >= c => best,
                _ => Some((pair, c)),
            });
        let Some(((left, right), _)) = best else { break };
        let (left, right) = (left.to_string(), right.to_string());
        let merged = merge_pieces(&left, &right);
        for (units, _) in &mut words {
            let mut i = 0;
            while i + 1 < units.len() {
                if units[i] == left && units[i + 1] == right {
                    units[i] = merged.clone();
                    units.remove(i + 1);
                }
                i += 1;
            }
        }
        if seen.insert(merged.clone()) {
            pieces.push(merged);
        }
    }
    SubwordVocab::from_pieces(pieces)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab(extra: &[&str]) -> SubwordVocab {
        let mut pieces = vec![BOS, EOS, UNK];
        pieces.extend_from_slice(extra);
        SubwordVocab::from_pieces(pieces).unwrap()
    }

    #[test]
    fn chars_only_when_size_is_minimal() {
        // alphabet: a, ##a, ##b
        let v = induce_vocab(&["aaab"], 6).unwrap();
        assert_eq!(v.pieces(), [BOS, EOS, UNK, "##a", "##b", "a"]);
        assert!(matches!(
            induce_vocab(&["aaab"], 5),
            Err(Error::SizeTooSmall { requested: 5, minimum: 6 })
        ));
    }

    #[test]
    fn dominant_bigram_merges_first() {
        // "th" appears 5 times; every other pair at most twice.
        let texts = ["the then this that though", "to ta"];
        let v = induce_vocab(&texts, 30).unwrap();
        let alphabet = 3 + 11; // specials + units
        assert_eq!(v.piece(alphabet), "th");
    }

    #[test]
    fn tie_breaks_lexicographically() {
        // pairs (a,##b) and (c,##d) both occur once
        let v = induce_vocab(&["ab cd"], 8).unwrap();
        assert_eq!(v.piece(7), "ab");
    }

    #[test]
    fn induction_is_deterministic() {
        let texts = ["only labored the gags", "only labored labor thes gag"];
        assert_eq!(induce_vocab(&texts, 40).unwrap(), induce_vocab(&texts, 40).unwrap());
    }

    #[test]
    fn greedy_longest_match() {
        let v = vocab(&["as", "a", "best", "be", "##st", "##ial", "##i", "##a", "##l", "at", "##s"]);
        let seq = v.tokenize("as bestial");
        assert_eq!(seq.surfaces(), ["as", "best", "##ial"]);
        assert_eq!(seq.tokens.iter().map(|t| t.continuation).collect::<Vec<_>>(), [false, false, true]);
        assert_eq!(seq.detokenize(), "as bestial");
        assert_eq!(seq.word_spans(), vec![0..1, 1..3]);
    }

    #[test]
    fn glue_rule() {
        assert_eq!(detokenize(&["as", "best", "at", "##ial"]), "as best atial");
        assert_eq!(detokenize(&["##ed", "x"]), "ed x");
        assert_eq!(detokenize::<&str>(&[]), "");
    }

    #[test]
    fn unknown_characters() {
        let v = vocab(&["a", "##b"]);
        let seq = v.tokenize("abz zb");
        assert_eq!(seq.ids(), [v.id("a").unwrap(), v.id("##b").unwrap(), v.unk(), v.unk(), v.id("##b").unwrap()]);
        assert_eq!(seq.detokenize(), "abz zb");
    }

    #[test]
    fn specials_never_match_text() {
        let v = vocab(&["<", "##e"]);
        let seq = v.tokenize("<eos>");
        assert!(seq.tokens.iter().all(|t| t.id != v.eos()));
    }

    #[test]
    fn file_round_trip() {
        let v = induce_vocab(&["the cue the queue"], 20).unwrap();
        assert_eq!(SubwordVocab::parse(&v.to_file_string()).unwrap(), v);
    }

    #[test]
    fn specials_required_once() {
        assert!(SubwordVocab::from_pieces(["<bos>", "<eos>", "a"]).is_err());
        assert!(SubwordVocab::from_pieces(["<bos>", "<eos>", "<unk>", "<eos>"]).is_err());
    }
}
