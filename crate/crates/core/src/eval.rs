//! Corpus-level error metrics and the sampler independence test.

use std::collections::BTreeMap;
use std::fmt::{Debug, Write as _};

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::align::{align, EditOp};
use crate::corpus::normalize_text;
use crate::error::{Error, Result};
use crate::intervention::CorruptionPlan;
use crate::phonetics::{phoneme_edit_distance, PronouncingLexicon};

/// Reference figures from the published study, kept for report comparison.
pub mod reference {
    /// Word error rate of the real recognizer, the interventional generator
    /// and the conditional baseline on the reference corpus.
    pub const WER_DEEPSPEECH: f64 = 0.46;
    pub const WER_ISNI: f64 = 0.66;
    pub const WER_NOISY_GEN: f64 = 0.76;
    /// (insertion, deletion, substitution) shares.
    pub const MIX_DEEPSPEECH: (f64, f64, f64) = (0.20, 0.29, 0.51);
    pub const MIX_ISNI: (f64, f64, f64) = (0.25, 0.16, 0.59);
    /// Phoneme distance with and without the phoneme head (units unstated).
    pub const PHONEME_DISTANCE_FULL: f64 = 62.02;
    pub const PHONEME_DISTANCE_ABLATION: f64 = 72.52;
}

fn check_lengths<A, B>(refs: &[A], hyps: &[B]) -> Result<()> {
    if refs.len() != hyps.len() {
        return Err(Error::LengthMismatch {
            reference: refs.len(),
            hypothesis: hyps.len(),
        });
    }
    Ok(())
}

fn words(text: &str) -> Vec<String> {
    normalize_text(text).split_whitespace().map(str::to_string).collect()
}

/// Unit-cost word alignment of one normalized pair.
fn word_alignment(reference: &str, hypothesis: &str) -> (Vec<String>, Vec<String>, Vec<EditOp>) {
    let r = words(reference);
    let h = words(hypothesis);
    let (_, ops) = align(&r, &h, |a, b| if a == b { 0.0 } else { 1.0 }, 1.0);
    (r, h, ops)
}

/// Edit-operation counts over a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ErrorCounts {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub reference_words: usize,
}

impl ErrorCounts {
    pub fn errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }

    /// `(S + D + I) / N`; zero for an empty reference.
    pub fn wer(&self) -> f64 {
        if self.reference_words == 0 {
            0.0
        } else {
            self.errors() as f64 / self.reference_words as f64
        }
    }
}

pub fn error_counts<R: AsRef<str>, H: AsRef<str>>(refs: &[R], hyps: &[H]) -> Result<ErrorCounts> {
    check_lengths(refs, hyps)?;
    let mut c = ErrorCounts::default();
    for (r, h) in refs.iter().zip(hyps) {
        let (rw, hw, ops) = word_alignment(r.as_ref(), h.as_ref());
        c.reference_words += rw.len();
        for op in ops {
            match op {
                EditOp::Pair { r, h } if rw[r] != hw[h] => c.substitutions += 1,
                EditOp::Pair { .. } => {}
                EditOp::Insert { .. } => c.insertions += 1,
                EditOp::Delete { .. } => c.deletions += 1,
            }
        }
    }
    Ok(c)
}

/// Corpus word error rate after lowercasing and stripping punctuation.
pub fn word_error_rate<R: AsRef<str>, H: AsRef<str>>(refs: &[R], hyps: &[H]) -> Result<f64> {
    Ok(error_counts(refs, hyps)?.wer())
}

/// Shares of each error operation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBreakdown {
    pub insertion: f64,
    pub deletion: f64,
    pub substitution: f64,
    /// False when the corpora are identical; all shares are then 0.
    pub any_errors: bool,
}

impl From<ErrorCounts> for ErrorBreakdown {
    fn from(c: ErrorCounts) -> Self {
        let total = c.errors();
        if total == 0 {
            return ErrorBreakdown {
                insertion: 0.0,
                deletion: 0.0,
                substitution: 0.0,
                any_errors: false,
            };
        }
        let t = total as f64;
        ErrorBreakdown {
            insertion: c.insertions as f64 / t,
            deletion: c.deletions as f64 / t,
            substitution: c.substitutions as f64 / t,
            any_errors: true,
        }
    }
}

pub fn error_type_breakdown<R: AsRef<str>, H: AsRef<str>>(refs: &[R], hyps: &[H]) -> Result<ErrorBreakdown> {
    Ok(error_counts(refs, hyps)?.into())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhonemeDistanceReport {
    /// Mean phoneme edit distance over substituted word pairs; 0 when none.
    pub mean: f64,
    pub substituted_pairs: usize,
}

/// Mean `D` between reference and hypothesis words paired as
/// substitutions by the unit-cost word alignment.
pub fn mean_phoneme_distance<R: AsRef<str>, H: AsRef<str>>(
    refs: &[R],
    hyps: &[H],
    lexicon: &PronouncingLexicon,
) -> Result<PhonemeDistanceReport> {
    check_lengths(refs, hyps)?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for (r, h) in refs.iter().zip(hyps) {
        let (rw, hw, ops) = word_alignment(r.as_ref(), h.as_ref());
        for op in ops {
            if let EditOp::Pair { r, h } = op {
                if rw[r] != hw[h] {
                    sum += phoneme_edit_distance(&lexicon.g2p(&rw[r])?, &lexicon.g2p(&hw[h])?);
                    n += 1;
                }
            }
        }
    }
    Ok(PhonemeDistanceReport {
        mean: if n == 0 { 0.0 } else { sum / n as f64 },
        substituted_pairs: n,
    })
}

/// Observations required per token before the test is run.
pub const MIN_OBSERVATIONS: usize = 100;
pub const INDEPENDENCE_ALPHA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndependenceVerdict {
    /// Fail to reject independence at the chosen level.
    Independent,
    Dependent,
    /// Every indicator has the same value; the test is undefined.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenRate<T> {
    pub token: T,
    pub observations: usize,
    pub corrupted: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndependenceReport<T> {
    pub per_token: Vec<TokenRate<T>>,
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    pub verdict: IndependenceVerdict,
}

/// Pearson chi-square test of corruption indicator vs. token identity over
/// every (token, z) observation of the plans.
pub fn independence_report<T: Ord + Clone + Debug>(
    plans: &[CorruptionPlan],
    tokens: &[Vec<T>],
) -> Result<IndependenceReport<T>> {
    check_lengths(plans, tokens)?;
    let mut table: BTreeMap<T, (usize, usize)> = BTreeMap::new();
    for (plan, toks) in plans.iter().zip(tokens) {
        if plan.z.len() != toks.len() {
            return Err(Error::PlanMismatch(format!(
                "plan of {} positions for {} tokens",
                plan.z.len(),
                toks.len()
            )));
        }
        for (t, &z) in toks.iter().zip(&plan.z) {
            let e = table.entry(t.clone()).or_default();
            e.0 += 1;
            e.1 += usize::from(z);
        }
    }
    for (t, &(n, _)) in &table {
        if n < MIN_OBSERVATIONS {
            return Err(Error::InsufficientData {
                token: format!("{t:?}"),
                count: n,
                required: MIN_OBSERVATIONS,
            });
        }
    }
    let per_token: Vec<TokenRate<T>> = table
        .into_iter()
        .map(|(token, (observations, corrupted))| TokenRate {
            token,
            observations,
            corrupted,
        })
        .collect();

    let total: usize = per_token.iter().map(|r| r.observations).sum();
    let ones: usize = per_token.iter().map(|r| r.corrupted).sum();
    let zeros = total - ones;
    let df = per_token.len().saturating_sub(1);
    if ones == 0 || zeros == 0 || df == 0 {
        return Ok(IndependenceReport {
            per_token,
            statistic: 0.0,
            degrees_of_freedom: df,
            p_value: 1.0,
            verdict: IndependenceVerdict::Degenerate,
        });
    }
    let mut stat = 0.0;
    for r in &per_token {
        for (observed, column) in [(r.corrupted, ones), (r.observations - r.corrupted, zeros)] {
            let expected = r.observations as f64 * column as f64 / total as f64;
            stat += (observed as f64 - expected).powi(2) / expected;
        }
    }
    let dist = ChiSquared::new(df as f64).expect("positive degrees of freedom");
    let p_value = dist.sf(stat);
    Ok(IndependenceReport {
        per_token,
        statistic: stat,
        degrees_of_freedom: df,
        p_value,
        verdict: if p_value < INDEPENDENCE_ALPHA {
            IndependenceVerdict::Dependent
        } else {
            IndependenceVerdict::Independent
        },
    })
}

/// Named corpus metrics with a text rendering and a CSV twin.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub counts: ErrorCounts,
    pub breakdown: ErrorBreakdown,
    pub phoneme_distance: PhonemeDistanceReport,
}

impl EvalReport {
    pub fn compute<R: AsRef<str>, H: AsRef<str>>(refs: &[R], hyps: &[H], lexicon: &PronouncingLexicon) -> Result<Self> {
        let counts = error_counts(refs, hyps)?;
        Ok(EvalReport {
            counts,
            breakdown: counts.into(),
            phoneme_distance: mean_phoneme_distance(refs, hyps, lexicon)?,
        })
    }

    fn rows(&self) -> Vec<(&'static str, String)> {
        let c = &self.counts;
        let b = &self.breakdown;
        vec![
            ("wer", format!("{:.6}", c.wer())),
            ("reference_words", c.reference_words.to_string()),
            ("substitutions", c.substitutions.to_string()),
            ("deletions", c.deletions.to_string()),
            ("insertions", c.insertions.to_string()),
            ("share_insertion", format!("{:.6}", b.insertion)),
            ("share_deletion", format!("{:.6}", b.deletion)),
            ("share_substitution", format!("{:.6}", b.substitution)),
            ("mean_phoneme_distance", format!("{:.6}", self.phoneme_distance.mean)),
            ("substituted_pairs", self.phoneme_distance.substituted_pairs.to_string()),
        ]
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.rows() {
            let _ = writeln!(out, "{k:<22} {v}");
        }
        let _ = writeln!(
            out,
            "reference wer: recognizer {} / interventional generator {} / conditional generator {}",
            reference::WER_DEEPSPEECH,
            reference::WER_ISNI,
            reference::WER_NOISY_GEN
        );
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        for (k, v) in self.rows() {
            let _ = writeln!(out, "{k},{v}");
        }
        out
    }
}
