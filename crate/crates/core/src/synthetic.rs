//! Seeded generator for the synthetic confusion corpus used at desk scale.
//!
//! Ground-truth sentences are random lexicon words. A simulated recognizer
//! corrupts each word with a propensity that depends on the word itself
//! (words with a close-sounding neighbour are confused more often), and
//! substitutes mostly phonetic neighbours.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::ParallelPair;
use crate::phonetics::{phoneme_edit_distance, PhoneticCode, PronouncingLexicon};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub pairs: usize,
    pub min_words: usize,
    pub max_words: usize,
    /// Corruption propensity of words with a neighbour within distance 1.
    pub confusable_rate: f64,
    pub other_rate: f64,
    /// Error mix; insertion takes the remainder.
    pub p_substitution: f64,
    pub p_deletion: f64,
    /// Share of substitutions drawn from phonetic neighbours rather than
    /// uniformly from the lexicon.
    pub p_neighbor: f64,
    /// Neighbourhood size.
    pub neighbors: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            pairs: 500,
            min_words: 5,
            max_words: 9,
            confusable_rate: 0.6,
            other_rate: 0.2,
            p_substitution: 0.55,
            p_deletion: 0.2,
            p_neighbor: 0.8,
            neighbors: 3,
            seed: 2024,
        }
    }
}

/// The `k` nearest other words of each word by phoneme edit distance
/// (ties broken by list order), with the distances.
pub fn phonetic_neighbors(codes: &[PhoneticCode], k: usize) -> Vec<Vec<(usize, f64)>> {
    (0..codes.len())
        .map(|i| {
            let mut d: Vec<(usize, f64)> = (0..codes.len())
                .filter(|&j| j != i)
                .map(|j| (j, phoneme_edit_distance(&codes[i], &codes[j])))
                .collect();
            d.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            d.truncate(k);
            d
        })
        .collect()
}

/// Builds `cfg.pairs` ground-truth/recognizer pairs over the lexicon words.
pub fn synthetic_corpus(lexicon: &PronouncingLexicon, cfg: &SyntheticConfig) -> Vec<ParallelPair> {
    let words: Vec<&str> = lexicon.words();
    let codes: Vec<PhoneticCode> = words.iter().map(|w| lexicon.get(w).expect("lexicon word").clone()).collect();
    let neighbors = phonetic_neighbors(&codes, cfg.neighbors);
    let rate: Vec<f64> = neighbors
        .iter()
        .map(|n| {
            if n.first().is_some_and(|&(_, d)| d <= 1.0) {
                cfg.confusable_rate
            } else {
                cfg.other_rate
            }
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(cfg.pairs);
    for i in 0..cfg.pairs {
        let n = rng.random_range(cfg.min_words..=cfg.max_words);
        let gt: Vec<usize> = (0..n).map(|_| rng.random_range(0..words.len())).collect();
        let mut asr: Vec<&str> = Vec::with_capacity(n + 2);
        for &w in &gt {
            if rng.random::<f64>() >= rate[w] {
                asr.push(words[w]);
                continue;
            }
            let substitute = |rng: &mut ChaCha8Rng| {
                if rng.random::<f64>() < cfg.p_neighbor {
                    neighbors[w][rng.random_range(0..neighbors[w].len())].0
                } else {
                    rng.random_range(0..words.len())
                }
            };
            let u = rng.random::<f64>();
            if u < cfg.p_substitution {
                asr.push(words[substitute(&mut rng)]);
            } else if u < cfg.p_substitution + cfg.p_deletion {
                // dropped
            } else {
                asr.push(words[w]);
                asr.push(words[substitute(&mut rng)]);
            }
        }
        let gt_text: Vec<&str> = gt.iter().map(|&w| words[w]).collect();
        out.push(ParallelPair::new(&format!("syn-{i}"), &gt_text.join(" "), &asr.join(" ")));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_and_shaped() {
        let lex = PronouncingLexicon::builtin();
        let cfg = SyntheticConfig {
            pairs: 40,
            ..Default::default()
        };
        let a = synthetic_corpus(&lex, &cfg);
        assert_eq!(a, synthetic_corpus(&lex, &cfg));
        assert_eq!(a.len(), 40);
        for p in &a {
            let n = p.gt.split(' ').count();
            assert!((5..=9).contains(&n));
        }
        assert!(a.iter().any(|p| p.gt != p.asr));
    }

    #[test]
    fn neighbors_are_nearest() {
        let lex = PronouncingLexicon::builtin();
        let codes: Vec<PhoneticCode> = ["cue", "queue", "sue", "the"].iter().map(|w| lex.g2p(w).unwrap()).collect();
        let n = phonetic_neighbors(&codes, 2);
        assert_eq!(n[0][0], (1, 0.0));
        assert_eq!(n[0][1].0, 2);
    }
}
