use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Symbol of the catch-all phoneme assigned to characters the fallback table
/// cannot map.
pub const UNK_PHONEME: &str = "UNK";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhonemeKind {
    Consonant,
    Vowel,
}

impl PhonemeKind {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "consonant" => Some(PhonemeKind::Consonant),
            "vowel" => Some(PhonemeKind::Vowel),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PhonemeKind::Consonant => "consonant",
            PhonemeKind::Vowel => "vowel",
        }
    }
}

/// Categorical articulatory description of a phoneme.
///
/// Consonant slots are (place, manner, voicing); vowel slots are
/// (height, backness, rounding).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ArticulatoryProfile {
    kind: PhonemeKind,
    slots: [Arc<str>; 3],
}

impl ArticulatoryProfile {
    pub fn new(kind: PhonemeKind, slots: [&str; 3]) -> Result<Self> {
        if slots.iter().any(|s| s.trim().is_empty()) {
            return Err(Error::Config(format!(
                "every articulatory slot of a {} must be populated",
                kind.as_str()
            )));
        }
        Ok(ArticulatoryProfile {
            kind,
            slots: slots.map(|s| Arc::from(s.trim())),
        })
    }

    pub fn consonant(place: &str, manner: &str, voicing: &str) -> Result<Self> {
        Self::new(PhonemeKind::Consonant, [place, manner, voicing])
    }

    pub fn vowel(height: &str, backness: &str, rounding: &str) -> Result<Self> {
        Self::new(PhonemeKind::Vowel, [height, backness, rounding])
    }

    pub fn kind(&self) -> PhonemeKind {
        self.kind
    }

    pub fn slots(&self) -> [&str; 3] {
        [&self.slots[0], &self.slots[1], &self.slots[2]]
    }

    /// Number of slots whose categories differ; 3 when the kinds differ.
    pub(crate) fn differing_slots(&self, other: &Self) -> u32 {
        if self.kind != other.kind {
            return 3;
        }
        self.slots
            .iter()
            .zip(other.slots.iter())
            .filter(|(a, b)| a != b)
            .count() as u32
    }
}

#[derive(Debug, Clone)]
pub struct Phoneme {
    symbol: Arc<str>,
    profile: ArticulatoryProfile,
}

impl Phoneme {
    pub fn new(symbol: &str, profile: ArticulatoryProfile) -> Result<Self> {
        if symbol.is_empty() {
            return Err(Error::Config("phoneme symbol must be nonempty".into()));
        }
        Ok(Phoneme {
            symbol: Arc::from(symbol),
            profile,
        })
    }

    pub fn symbol(&self) -> &str {
        &self.symbol
    }

    pub fn profile(&self) -> &ArticulatoryProfile {
        &self.profile
    }
}

impl PartialEq for Phoneme {
    fn eq(&self, other: &Self) -> bool {
        self.symbol == other.symbol
    }
}

impl Eq for Phoneme {}

impl fmt::Display for Phoneme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.symbol)
    }
}

/// A closed set of phonemes with pairwise-distinct symbols and profiles.
#[derive(Debug, Clone)]
pub struct Inventory {
    phonemes: Vec<Phoneme>,
    by_symbol: HashMap<Arc<str>, usize>,
    unk: usize,
}

impl Inventory {
    /// Builds an inventory, adding an `UNK` phoneme if none is present.
    pub fn new(mut phonemes: Vec<Phoneme>) -> Result<Self> {
        if !phonemes.iter().any(|p| p.symbol() == UNK_PHONEME) {
            phonemes.push(Phoneme::new(
                UNK_PHONEME,
                ArticulatoryProfile::consonant("unknown", "unknown", "unknown")?,
            )?);
        }
        let mut by_symbol = HashMap::with_capacity(phonemes.len());
        let mut profiles = HashSet::with_capacity(phonemes.len());
        for (i, p) in phonemes.iter().enumerate() {
            if by_symbol.insert(p.symbol.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate phoneme symbol {:?}", p.symbol())));
            }
            // Distinct profiles keep the substitution cost zero only on identity.
            if !profiles.insert(p.profile.clone()) {
                return Err(Error::Config(format!(
                    "phoneme {:?} repeats another phoneme's profile",
                    p.symbol()
                )));
            }
        }
        let unk = by_symbol[UNK_PHONEME];
        Ok(Inventory {
            phonemes,
            by_symbol,
            unk,
        })
    }

    /// Parses `SYMBOL<TAB>kind<TAB>slot1<TAB>slot2<TAB>slot3` lines. Blank
    /// lines and lines starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut phonemes = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Parse {
                what: "inventory",
                line: i + 1,
                message,
            };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 5 {
                return Err(err(format!("expected 5 tab-separated fields, found {}", fields.len())));
            }
            let kind = PhonemeKind::parse(fields[1])
                .ok_or_else(|| err(format!("unknown phoneme kind {:?}", fields[1])))?;
            let profile = ArticulatoryProfile::new(kind, [fields[2], fields[3], fields[4]])
                .map_err(|e| err(e.to_string()))?;
            phonemes.push(Phoneme::new(fields[0].trim(), profile).map_err(|e| err(e.to_string()))?);
        }
        Self::new(phonemes)
    }

    /// The ARPAbet inventory shipped with the crate.
    pub fn builtin() -> Self {
        Self::parse(include_str!("../../data/inventory.tsv")).expect("shipped inventory is valid")
    }

    pub fn get(&self, symbol: &str) -> Option<&Phoneme> {
        self.by_symbol.get(symbol).map(|&i| &self.phonemes[i])
    }

    pub fn lookup(&self, symbol: &str) -> Result<&Phoneme> {
        self.get(symbol).ok_or_else(|| Error::UnknownPhoneme {
            symbol: symbol.to_string(),
        })
    }

    pub fn unk(&self) -> &Phoneme {
        &self.phonemes[self.unk]
    }

    pub fn contains(&self, p: &Phoneme) -> bool {
        self.by_symbol.contains_key(p.symbol())
    }

    pub fn iter(&self) -> impl Iterator<Item = &Phoneme> {
        self.phonemes.iter()
    }

    pub fn len(&self) -> usize {
        self.phonemes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phonemes.is_empty()
    }
}
