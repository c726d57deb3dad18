//! Constrained noise-token decoding, error-type classification and
//! pseudo-transcript assembly.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::{detokenize, normalize_text, TokenSeq};
use crate::error::{Error, Result};
use crate::intervention::{derive_seed, sample_plan_conditional, sample_plan_interventional, ConditionalPriorTable, CorruptionPlan};
use crate::model::Model;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ErrorType {
    Deletion,
    Substitution,
    Insertion,
    NoError,
}

impl ErrorType {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorType::Deletion => "deletion",
            ErrorType::Substitution => "substitution",
            ErrorType::Insertion => "insertion",
            ErrorType::NoError => "no_error",
        }
    }
}

impl fmt::Display for ErrorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ErrorType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "deletion" => ErrorType::Deletion,
            "substitution" => ErrorType::Substitution,
            "insertion" => ErrorType::Insertion,
            "no_error" => ErrorType::NoError,
            other => return Err(Error::Config(format!("unknown error type {other:?}"))),
        })
    }
}

/// Error type implied by `m` generated tokens (eos included): one token is
/// a bare `eos` (deletion), two replace the word, more insert extra words.
pub fn classify_error(m: usize, max_gen_len: usize) -> Result<ErrorType> {
    match m {
        0 => Err(Error::OutOfRange { m, max: max_gen_len }),
        m if m > max_gen_len => Err(Error::OutOfRange { m, max: max_gen_len }),
        1 => Ok(ErrorType::Deletion),
        2 => Ok(ErrorType::Substitution),
        _ => Ok(ErrorType::Insertion),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecodeMode {
    /// Argmax of `P_gen`, lowest index on ties.
    Greedy,
    /// Sampling from `P_gen^(1/T)`, renormalized.
    Sample { temperature: f64 },
}

impl DecodeMode {
    pub const DEFAULT: DecodeMode = DecodeMode::Sample { temperature: 1.0 };
}

impl FromStr for DecodeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(DecodeMode::Greedy),
            "sample" => Ok(DecodeMode::DEFAULT),
            other => Err(Error::Config(format!("unknown decode mode {other:?} (greedy|sample)"))),
        }
    }
}

impl fmt::Display for DecodeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecodeMode::Greedy => f.write_str("greedy"),
            DecodeMode::Sample { temperature } => write!(f, "sample(T={temperature})"),
        }
    }
}

/// Noise tokens generated for one corrupted position.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedSpan {
    pub position: usize,
    pub original: String,
    /// Generated ids, ending with exactly one `eos`.
    pub tokens: Vec<usize>,
    /// Surfaces of `tokens` without the final `eos`.
    pub pieces: Vec<String>,
    pub error_type: ErrorType,
    pub replacement: String,
}

impl GeneratedSpan {
    pub fn m(&self) -> usize {
        self.tokens.len()
    }
}

/// Index of the largest entry; the first one wins ties.
pub fn argmax_lowest(p: &Array1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

/// Inverse-CDF draw from `p^(1/T)` (renormalized).
pub fn sample_index(p: &Array1<f64>, temperature: f64, rng: &mut impl Rng) -> usize {
    let weights: Vec<f64> = if temperature == 1.0 {
        p.to_vec()
    } else {
        p.iter().map(|&v| v.powf(1.0 / temperature)).collect()
    };
    let total: f64 = weights.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

impl Model {
    /// Decodes noise tokens for position `k` of an encoded sentence until
    /// `eos`, forcing `eos` as the `M`-th token. `rng` is only consulted in
    /// sampling mode.
    pub fn generate_span(
        &self,
        encoded: &Array2<f64>,
        k: usize,
        original: &str,
        mode: DecodeMode,
        rng: &mut impl Rng,
    ) -> Result<GeneratedSpan> {
        let eos = self.vocab.eos();
        let max = self.config.max_gen_len;
        let mut prefix = vec![self.vocab.bos()];
        let mut tokens = Vec::new();
        loop {
            let next = if tokens.len() + 1 == max {
                eos
            } else {
                let d = self.decoder_step(encoded, k, &prefix)?;
                let p = self.step_distributions(&d).p_gen;
                match mode {
                    DecodeMode::Greedy => argmax_lowest(&p),
                    DecodeMode::Sample { temperature } => sample_index(&p, temperature, rng),
                }
            };
            tokens.push(next);
            if next == eos {
                break;
            }
            prefix.push(next);
        }
        let pieces: Vec<String> = tokens[..tokens.len() - 1]
            .iter()
            .map(|&t| self.vocab.piece(t).to_string())
            .collect();
        Ok(GeneratedSpan {
            position: k,
            original: original.to_string(),
            error_type: classify_error(tokens.len(), max)?,
            replacement: detokenize(&pieces),
            tokens,
            pieces,
        })
    }
}

/// Rebuilds the surface text: uncorrupted tokens pass through, corrupted
/// ones are replaced by their span pieces, and `##` pieces glue onto the
/// preceding text.
pub fn assemble(tokens: &TokenSeq, plan: &CorruptionPlan, spans: &[GeneratedSpan]) -> Result<String> {
    if plan.z.len() != tokens.len() {
        return Err(Error::PlanMismatch(format!(
            "plan covers {} positions, sentence has {} tokens",
            plan.z.len(),
            tokens.len()
        )));
    }
    let mut spans_iter = spans.iter().peekable();
    let mut surfaces: Vec<&str> = Vec::with_capacity(tokens.len());
    for (k, (tok, &z)) in tokens.tokens.iter().zip(&plan.z).enumerate() {
        if !z {
            surfaces.push(&tok.surface);
            continue;
        }
        match spans_iter.next() {
            Some(span) if span.position == k => surfaces.extend(span.pieces.iter().map(String::as_str)),
            Some(span) => {
                return Err(Error::PlanMismatch(format!(
                    "span for position {} where position {k} was expected",
                    span.position
                )))
            }
            None => return Err(Error::PlanMismatch(format!("no span for corrupted position {k}"))),
        }
    }
    if let Some(extra) = spans_iter.next() {
        return Err(Error::PlanMismatch(format!("span for uncorrupted position {}", extra.position)));
    }
    Ok(detokenize(&surfaces))
}

/// Where corruption indicators come from.
#[derive(Debug, Clone, Copy)]
pub enum PlanSource<'a> {
    /// `do(z)`: a constant prior for every token.
    Interventional(f64),
    /// Per-token empirical frequencies.
    Conditional(&'a ConditionalPriorTable),
}

/// One corrupted sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptedSentence {
    pub input: String,
    pub output: String,
    pub plan: CorruptionPlan,
    pub spans: Vec<GeneratedSpan>,
}

/// Pseudo transcripts for a corpus plus every generated span.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionOutput {
    pub sentences: Vec<CorruptedSentence>,
}

impl CorruptionOutput {
    pub fn transcripts(&self) -> Vec<&str> {
        self.sentences.iter().map(|s| s.output.as_str()).collect()
    }

    /// Span report TSV with a column header; sentence ids are 0-based
    /// corpus indices.
    pub fn span_report_tsv(&self) -> String {
        let mut out = String::from("sentence_id\tposition\toriginal\treplacement\terror_type\n");
        for (i, s) in self.sentences.iter().enumerate() {
            for span in &s.spans {
                out.push_str(&format!(
                    "{i}\t{}\t{}\t{}\t{}\n",
                    span.position, span.original, span.replacement, span.error_type
                ));
            }
        }
        out
    }

    pub fn error_type_counts(&self) -> [(ErrorType, usize); 3] {
        let mut counts = [(ErrorType::Deletion, 0), (ErrorType::Substitution, 0), (ErrorType::Insertion, 0)];
        for span in self.sentences.iter().flat_map(|s| &s.spans) {
            for c in &mut counts {
                if c.0 == span.error_type {
                    c.1 += 1;
                }
            }
        }
        counts
    }
}

/// Corrupts one normalized sentence with an explicit plan.
pub fn corrupt_sentence(
    model: &Model,
    text: &str,
    plan_for: impl Fn(&TokenSeq) -> Result<CorruptionPlan>,
    mode: DecodeMode,
    decode_seed: u64,
) -> Result<CorruptedSentence> {
    let input = normalize_text(text);
    let tokens = model.vocab.tokenize(&input);
    let plan = plan_for(&tokens)?;
    let mut spans = Vec::with_capacity(plan.corrupted_count());
    if plan.corrupted_count() > 0 {
        let encoded = model.encode_tokens(&tokens.ids())?;
        for k in plan.corrupted_positions() {
            let mut rng = ChaCha8Rng::seed_from_u64(decode_seed);
            rng.set_stream(k as u64);
            spans.push(model.generate_span(&encoded, k, &tokens.tokens[k].surface, mode, &mut rng)?);
        }
    }
    let output = assemble(&tokens, &plan, &spans)?;
    Ok(CorruptedSentence {
        input,
        output,
        plan,
        spans,
    })
}

/// Tokenize, plan, decode and assemble every text. Sentence `i` uses plan
/// and decoding seeds derived from `(seed, i)`, so results do not depend
/// on thread scheduling or on the other sentences.
pub fn corrupt_corpus<S: AsRef<str> + Sync>(
    model: &Model,
    texts: &[S],
    source: PlanSource<'_>,
    seed: u64,
    mode: DecodeMode,
) -> Result<CorruptionOutput> {
    if let PlanSource::Interventional(p) = source {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::PriorOutOfRange(p));
        }
    }
    let sentences = texts
        .par_iter()
        .enumerate()
        .map(|(i, text)| {
            let plan_seed = derive_seed(seed, 2 * i as u64);
            let decode_seed = derive_seed(seed, 2 * i as u64 + 1);
            let plan_for = |tokens: &TokenSeq| match source {
                PlanSource::Interventional(p) => sample_plan_interventional(&tokens.tokens, p, plan_seed),
                PlanSource::Conditional(table) => Ok(sample_plan_conditional(&tokens.surfaces(), table, plan_seed)),
            };
            corrupt_sentence(model, text.as_ref(), plan_for, mode, decode_seed)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CorruptionOutput { sentences })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{SubwordVocab, BOS, EOS, UNK};

    fn span(vocab: &SubwordVocab, position: usize, pieces: &[&str]) -> GeneratedSpan {
        let mut tokens: Vec<usize> = pieces.iter().map(|p| vocab.id(p).unwrap()).collect();
        tokens.push(vocab.eos());
        GeneratedSpan {
            position,
            original: String::new(),
            error_type: classify_error(tokens.len(), 5).unwrap(),
            tokens,
            pieces: pieces.iter().map(|s| s.to_string()).collect(),
            replacement: detokenize(pieces),
        }
    }

    fn plan(z: &[u8]) -> CorruptionPlan {
        CorruptionPlan {
            z: z.iter().map(|&b| b == 1).collect(),
            prior: None,
            seed: 0,
        }
    }

    #[test]
    fn classification_table() {
        assert_eq!(classify_error(1, 5).unwrap(), ErrorType::Deletion);
        assert_eq!(classify_error(2, 5).unwrap(), ErrorType::Substitution);
        assert_eq!(classify_error(4, 5).unwrap(), ErrorType::Insertion);
        assert!(classify_error(0, 5).is_err());
        assert!(classify_error(6, 5).is_err());
    }

    #[test]
    fn assembles_labored_examples() {
        let v = SubwordVocab::from_pieces([BOS, EOS, UNK, "as", "best", "##ial", "at"]).unwrap();
        let toks = v.tokenize("as best bestial");
        assert_eq!(toks.surfaces(), ["as", "best", "best", "##ial"]);
        let toks = v.tokenize("as bestial");
        let out = assemble(&toks, &plan(&[0, 0, 1]), &[span(&v, 2, &["at", "##ial"])]).unwrap();
        assert_eq!(out, "as best atial");

        let v = SubwordVocab::from_pieces([BOS, EOS, UNK, "only", "labor", "##ed", "the", "gag", "##s"]).unwrap();
        let toks = v.tokenize("only labored the gags");
        let spans = [
            span(&v, 2, &["##ed", "labor"]),
            span(&v, 3, &["the", "##s"]),
            span(&v, 5, &[]),
        ];
        let out = assemble(&toks, &plan(&[0, 0, 1, 1, 0, 1]), &spans).unwrap();
        assert_eq!(out, "only labored labor thes gag");
        assert_eq!(spans[2].error_type, ErrorType::Deletion);
    }

    #[test]
    fn assemble_rejects_mismatch() {
        let v = SubwordVocab::from_pieces([BOS, EOS, UNK, "a", "b"]).unwrap();
        let toks = v.tokenize("a b");
        assert_eq!(assemble(&toks, &plan(&[0, 0]), &[]).unwrap(), "a b");
        assert!(assemble(&toks, &plan(&[0, 1]), &[]).is_err());
        assert!(assemble(&toks, &plan(&[0, 0]), &[span(&v, 1, &["a"])]).is_err());
        assert!(assemble(&toks, &plan(&[1]), &[]).is_err());
    }

    #[test]
    fn greedy_ties_take_lowest_index() {
        let p = Array1::from(vec![0.1, 0.4, 0.4, 0.1]);
        assert_eq!(argmax_lowest(&p), 1);
    }

    #[test]
    fn sampling_respects_support() {
        let p = Array1::from(vec![0.0, 0.5, 0.0, 0.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let i = sample_index(&p, 0.7, &mut rng);
            assert!(i == 1 || i == 3);
        }
    }
}
