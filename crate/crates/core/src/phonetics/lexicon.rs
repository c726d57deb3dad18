use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use super::inventory::{Inventory, Phoneme};
use crate::error::{Error, Result};

/// Prefix marking a subword piece that continues the previous piece.
pub const CONTINUATION_PREFIX: &str = "##";

/// An ordered phoneme sequence; `len()` is `|C|`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PhoneticCode {
    phonemes: Vec<Phoneme>,
}

impl PhoneticCode {
    pub fn new(phonemes: Vec<Phoneme>) -> Self {
        PhoneticCode { phonemes }
    }

    pub fn phonemes(&self) -> &[Phoneme] {
        &self.phonemes
    }

    pub fn len(&self) -> usize {
        self.phonemes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phonemes.is_empty()
    }

    /// Space-joined symbols, e.g. `"K Y UW"`.
    pub fn canonical(&self) -> String {
        let symbols: Vec<&str> = self.phonemes.iter().map(Phoneme::symbol).collect();
        symbols.join(" ")
    }
}

impl fmt::Display for PhoneticCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

// Letter-by-letter fallback; every symbol here exists in the shipped inventory.
const FALLBACK: &[(char, &[&str])] = &[
    ('a', &["AE"]),
    ('b', &["B"]),
    ('c', &["K"]),
    ('d', &["D"]),
    ('e', &["EH"]),
    ('f', &["F"]),
    ('g', &["G"]),
    ('h', &["HH"]),
    ('i', &["IH"]),
    ('j', &["JH"]),
    ('k', &["K"]),
    ('l', &["L"]),
    ('m', &["M"]),
    ('n', &["N"]),
    ('o', &["AA"]),
    ('p', &["P"]),
    ('q', &["K"]),
    ('r', &["R"]),
    ('s', &["S"]),
    ('t', &["T"]),
    ('u', &["AH"]),
    ('v', &["V"]),
    ('w', &["W"]),
    ('x', &["K", "S"]),
    ('y', &["Y"]),
    ('z', &["Z"]),
];

/// Word → phonetic code dictionary over a fixed inventory. Lookup is
/// case-insensitive.
#[derive(Debug, Clone)]
pub struct PronouncingLexicon {
    entries: HashMap<String, PhoneticCode>,
    inventory: Arc<Inventory>,
}

impl PronouncingLexicon {
    pub fn new(inventory: Arc<Inventory>) -> Self {
        PronouncingLexicon {
            entries: HashMap::new(),
            inventory,
        }
    }

    /// Adds or replaces an entry; every symbol must belong to the inventory.
    pub fn insert<S: AsRef<str>>(&mut self, word: &str, symbols: &[S]) -> Result<()> {
        let phonemes = symbols
            .iter()
            .map(|s| self.inventory.lookup(s.as_ref()).cloned())
            .collect::<Result<Vec<_>>>()?;
        self.entries.insert(word.to_lowercase(), PhoneticCode::new(phonemes));
        Ok(())
    }

    /// Parses `WORD<TAB>PH1 PH2 ...` lines. Trailing stress digits on vowel
    /// symbols (`UW1`) are dropped; the first pronunciation of a word wins.
    pub fn parse(text: &str, inventory: Arc<Inventory>) -> Result<Self> {
        let mut lexicon = PronouncingLexicon::new(inventory);
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Parse {
                what: "lexicon",
                line: i + 1,
                message,
            };
            let (word, pron) = line
                .split_once('\t')
                .ok_or_else(|| err("expected WORD<TAB>PHONEMES".into()))?;
            let word = word.trim();
            if word.is_empty() {
                return Err(err("empty word".into()));
            }
            if lexicon.entries.contains_key(&word.to_lowercase()) {
                continue;
            }
            let symbols: Vec<&str> = pron
                .split_whitespace()
                .map(|s| s.trim_end_matches(|c: char| c.is_ascii_digit()))
                .collect();
            if symbols.is_empty() {
                return Err(err(format!("no phonemes for {word:?}")));
            }
            lexicon.insert(word, &symbols).map_err(|e| err(e.to_string()))?;
        }
        Ok(lexicon)
    }

    /// The shipped lexicon over [`Inventory::builtin`].
    pub fn builtin() -> Self {
        Self::parse(
            include_str!("../../data/lexicon.tsv"),
            Arc::new(Inventory::builtin()),
        )
        .expect("shipped lexicon is valid")
    }

    pub fn inventory(&self) -> &Inventory {
        &self.inventory
    }

    pub fn shared_inventory(&self) -> Arc<Inventory> {
        self.inventory.clone()
    }

    pub fn get(&self, word: &str) -> Option<&PhoneticCode> {
        self.entries.get(&word.to_lowercase())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entry words in sorted order.
    pub fn words(&self) -> Vec<&str> {
        let mut words: Vec<&str> = self.entries.keys().map(String::as_str).collect();
        words.sort_unstable();
        words
    }

    /// Grapheme-to-phoneme conversion. A leading `##` is stripped first;
    /// words missing from the lexicon go through the letter fallback table,
    /// with unmapped characters becoming `UNK`.
    pub fn g2p(&self, word: &str) -> Result<PhoneticCode> {
        let stripped = word.strip_prefix(CONTINUATION_PREFIX).unwrap_or(word);
        if stripped.is_empty() {
            return Err(Error::EmptyWord);
        }
        if let Some(code) = self.get(stripped) {
            return Ok(code.clone());
        }
        Ok(self.fallback(stripped))
    }

    fn fallback(&self, word: &str) -> PhoneticCode {
        let mut phonemes = Vec::with_capacity(word.len());
        for c in word.chars().flat_map(char::to_lowercase) {
            match FALLBACK.iter().find(|(letter, _)| *letter == c) {
                Some((_, symbols)) => {
                    for s in *symbols {
                        let p = self.inventory.get(s).unwrap_or_else(|| self.inventory.unk());
                        phonemes.push(p.clone());
                    }
                }
                None => phonemes.push(self.inventory.unk().clone()),
            }
        }
        PhoneticCode::new(phonemes)
    }
}
