use std::collections::HashMap;

use ndarray::Array2;

use crate::corpus::{SubwordVocab, BOS, EOS, UNK};
use crate::error::{Error, Result};
use crate::phonetics::{supervision_from_codes, PhoneticCode, PronouncingLexicon};

/// Maps each vocabulary piece to a row of the phoneme embedding. Pieces
/// with the same phonetic code share a row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhonemeCodeIndex {
    /// Canonical code string of each row.
    rows: Vec<String>,
    by_code: HashMap<String, usize>,
    /// Row of each vocabulary id.
    token_rows: Vec<usize>,
}

/// Row reserved for pieces without a phonetic code.
pub const UNK_CODE_ROW: usize = 0;

impl PhonemeCodeIndex {
    /// Specials get dedicated rows; every other piece is coded with
    /// [`PronouncingLexicon::g2p`].
    pub fn build(vocab: &SubwordVocab, lexicon: &PronouncingLexicon) -> Self {
        let mut index = PhonemeCodeIndex {
            rows: Vec::new(),
            by_code: HashMap::new(),
            token_rows: Vec::with_capacity(vocab.len()),
        };
        for key in [UNK, BOS, EOS] {
            index.intern(key.to_string());
        }
        for id in 0..vocab.len() {
            let row = if id == vocab.bos() {
                index.by_code[BOS]
            } else if id == vocab.eos() {
                index.by_code[EOS]
            } else if id == vocab.unk() {
                UNK_CODE_ROW
            } else {
                match lexicon.g2p(vocab.piece(id)) {
                    Ok(code) => index.intern(code.canonical()),
                    Err(_) => UNK_CODE_ROW,
                }
            };
            index.token_rows.push(row);
        }
        index
    }

    fn intern(&mut self, key: String) -> usize {
        if let Some(&row) = self.by_code.get(&key) {
            return row;
        }
        let row = self.rows.len();
        self.by_code.insert(key.clone(), row);
        self.rows.push(key);
        row
    }

    /// Rebuilds an index from stored parts (checkpoint load).
    pub fn from_parts(rows: Vec<String>, token_rows: Vec<usize>) -> Result<Self> {
        let mut by_code = HashMap::with_capacity(rows.len());
        for (i, r) in rows.iter().enumerate() {
            if by_code.insert(r.clone(), i).is_some() {
                return Err(Error::CorruptCheckpoint(format!("duplicate phoneme code row {r:?}")));
            }
        }
        if token_rows.iter().any(|&r| r >= rows.len()) {
            return Err(Error::CorruptCheckpoint("token row out of range".into()));
        }
        Ok(PhonemeCodeIndex {
            rows,
            by_code,
            token_rows,
        })
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[String] {
        &self.rows
    }

    pub fn token_rows(&self) -> &[usize] {
        &self.token_rows
    }

    pub fn row_of(&self, token: usize) -> usize {
        self.token_rows[token]
    }

    pub fn rows_of(&self, tokens: &[usize]) -> Vec<usize> {
        tokens.iter().map(|&t| self.token_rows[t]).collect()
    }

    pub fn row_for_code(&self, code: &PhoneticCode) -> usize {
        self.by_code.get(&code.canonical()).copied().unwrap_or(UNK_CODE_ROW)
    }
}

/// Zero-probability floor applied to `R` inside the KL term.
pub const R_FLOOR: f64 = 1e-12;

/// Precomputed `log max(R(t), floor)` rows for every vocabulary target `t`.
/// Targets with no phonetic support (specials, degenerate pieces) have no row.
#[derive(Debug, Clone)]
pub struct SupervisionTable {
    log_r: Array2<f64>,
    has_row: Vec<bool>,
}

impl SupervisionTable {
    pub fn build(vocab: &SubwordVocab, lexicon: &PronouncingLexicon) -> Self {
        let codes: Vec<Option<PhoneticCode>> = (0..vocab.len())
            .map(|id| {
                if vocab.is_special(id) {
                    None
                } else {
                    lexicon.g2p(vocab.piece(id)).ok()
                }
            })
            .collect();
        let v = vocab.len();
        let mut log_r = Array2::zeros((v, v));
        let mut has_row = vec![false; v];
        for (t, code) in codes.iter().enumerate() {
            let Some(code) = code else { continue };
            let Some(r) = supervision_from_codes(code, &codes) else { continue };
            for (j, p) in r.into_iter().enumerate() {
                log_r[[t, j]] = p.max(R_FLOOR).ln();
            }
            has_row[t] = true;
        }
        SupervisionTable { log_r, has_row }
    }

    pub fn has(&self, target: usize) -> bool {
        self.has_row.get(target).copied().unwrap_or(false)
    }

    pub fn log_row(&self, target: usize) -> Option<ndarray::ArrayView1<'_, f64>> {
        self.has(target).then(|| self.log_r.row(target))
    }

    /// The unfloored distribution, for inspection.
    pub fn distribution(&self, target: usize) -> Option<Vec<f64>> {
        self.log_row(target).map(|row| {
            row.iter()
                .map(|&l| {
                    let p = l.exp();
                    if p <= R_FLOOR * (1.0 + 1e-9) {
                        0.0
                    } else {
                        p
                    }
                })
                .collect()
        })
    }
}
