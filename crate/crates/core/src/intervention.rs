//! Corruption-indicator sampling.
//!
//! The interventional sampler draws `a^k ~ U[0, 1]` per position and sets
//! `z^k = 1` iff `a^k <= P(z)`, with `P(z)` a constant, so corruption never
//! depends on which token sits at a position. The conditional sampler uses
//! a per-token prior table instead and exists for the ablation.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{AlignLabel, UnitAlignment};
use crate::error::{Error, Result};

/// The prior settings used for pseudo-transcript generation.
pub const PRIOR_PRESETS: [f64; 3] = [0.15, 0.21, 0.45];

#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionPlan {
    pub z: Vec<bool>,
    /// Constant prior for interventional plans; `None` for table-driven plans.
    pub prior: Option<f64>,
    pub seed: u64,
}

impl CorruptionPlan {
    /// All-zero plan: nothing is corrupted.
    pub fn identity(len: usize, seed: u64) -> Self {
        CorruptionPlan {
            z: vec![false; len],
            prior: Some(0.0),
            seed,
        }
    }

    pub fn corrupted_positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.z.iter().enumerate().filter(|(_, &z)| z).map(|(k, _)| k)
    }

    pub fn corrupted_count(&self) -> usize {
        self.z.iter().filter(|&&z| z).count()
    }
}

/// The uniform draw `a^k` for position `k`. Each position reads its own
/// ChaCha stream, so a draw depends on `(seed, k)` only.
pub fn position_draw(seed: u64, k: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    rng.random::<f64>()
}

/// Seed for item `index` of a run seeded with `seed` (SplitMix64 finalizer),
/// so sentences of one corpus get unrelated draw streams.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn check_prior(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::PriorOutOfRange(p))
    }
}

/// Interventional plan: `z^k = 1` iff `a^k <= p_z`. Token identities are
/// accepted only to fix the plan length.
pub fn sample_plan_interventional<T>(tokens: &[T], p_z: f64, seed: u64) -> Result<CorruptionPlan> {
    check_prior(p_z)?;
    // `a^k` lies in [0, 1), so p_z = 0 must exclude a draw of exactly 0.
    let z = (0..tokens.len())
        .map(|k| p_z > 0.0 && position_draw(seed, k) <= p_z)
        .collect();
    Ok(CorruptionPlan {
        z,
        prior: Some(p_z),
        seed,
    })
}

/// Empirical per-token corruption frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalPriorTable {
    frequencies: BTreeMap<String, f64>,
    default: f64,
}

impl ConditionalPriorTable {
    pub fn new(frequencies: BTreeMap<String, f64>, default: f64) -> Result<Self> {
        check_prior(default)?;
        for &f in frequencies.values() {
            check_prior(f)?;
        }
        Ok(ConditionalPriorTable { frequencies, default })
    }

    pub fn get(&self, token: &str) -> f64 {
        self.frequencies.get(token).copied().unwrap_or(self.default)
    }

    pub fn default_frequency(&self) -> f64 {
        self.default
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// `token<TAB>frequency` lines; the unseen-token default is stored under
    /// the reserved key `<default>`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "<default>\t{}", self.default);
        for (t, f) in &self.frequencies {
            let _ = writeln!(out, "{t}\t{f}");
        }
        out
    }

    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut frequencies = BTreeMap::new();
        let mut default = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Parse {
                what: "prior table",
                line: i + 1,
                message,
            };
            let (token, value) = line
                .split_once('\t')
                .ok_or_else(|| err("expected token<TAB>frequency".into()))?;
            let f: f64 = value.trim().parse().map_err(|e| err(format!("{e}")))?;
            check_prior(f).map_err(|e| err(e.to_string()))?;
            if token == "<default>" {
                default = Some(f);
            } else {
                frequencies.insert(token.to_string(), f);
            }
        }
        let default = default.ok_or_else(|| Error::Parse {
            what: "prior table",
            line: 0,
            message: "missing <default> row".into(),
        })?;
        Self::new(frequencies, default)
    }
}

/// Frequency of corruption per ground-truth word surface. Unseen words get
/// the corpus-wide corruption rate.
pub fn estimate_conditional_prior<A: AsRef<[UnitAlignment]>>(
    alignments: &[A],
) -> Result<ConditionalPriorTable> {
    let mut counts: HashMap<&str, (usize, usize)> = HashMap::new();
    let (mut total, mut corrupted) = (0usize, 0usize);
    for sentence in alignments {
        for unit in sentence.as_ref() {
            let entry = counts.entry(unit.gt.as_str()).or_default();
            entry.1 += 1;
            total += 1;
            if unit.label != AlignLabel::Match {
                entry.0 += 1;
                corrupted += 1;
            }
        }
    }
    if total == 0 {
        return Err(Error::EmptyCorpus);
    }
    let frequencies = counts
        .into_iter()
        .map(|(t, (c, n))| (t.to_string(), c as f64 / n as f64))
        .collect();
    ConditionalPriorTable::new(frequencies, corrupted as f64 / total as f64)
}

/// Conditional plan: `z^k = 1` iff `a^k <= table[x^k]`, with the same
/// per-position draws as the interventional sampler.
pub fn sample_plan_conditional<S: AsRef<str>>(
    tokens: &[S],
    table: &ConditionalPriorTable,
    seed: u64,
) -> CorruptionPlan {
    let z = tokens
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let p = table.get(t.as_ref());
            p > 0.0 && position_draw(seed, k) <= p
        })
        .collect();
    CorruptionPlan { z, prior: None, seed }
}
