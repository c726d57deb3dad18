//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use isni::corpus::{induce_vocab, parse_corpus, training_items_for_corpus, AlignedExample, ParallelPair, SubwordVocab};
use isni::model::{Model, ModelConfig, SupervisionTable};
use isni::phonetics::{Phoneme, PhoneticCode, PronouncingLexicon};
use isni::training::{prepare_items, train, LossLog, TrainConfig};

pub const DESK_CORPUS: &str = include_str!("../../data/desk_corpus.tsv");

/// Substitution cost in thirds, straight from the articulatory slots.
fn sub_thirds(p: &Phoneme, q: &Phoneme) -> u64 {
    if p == q {
        return 0;
    }
    let (a, b) = (p.profile(), q.profile());
    if a.kind() != b.kind() {
        return 3;
    }
    a.slots().iter().zip(b.slots()).filter(|(x, y)| *x != y).count() as u64
}

fn rec(a: &[Phoneme], b: &[Phoneme], i: usize, j: usize, memo: &mut HashMap<(usize, usize), u64>) -> u64 {
    if i == 0 {
        return 3 * j as u64;
    }
    if j == 0 {
        return 3 * i as u64;
    }
    if let Some(&v) = memo.get(&(i, j)) {
        return v;
    }
    let v = (rec(a, b, i - 1, j - 1, memo) + sub_thirds(&a[i - 1], &b[j - 1]))
        .min(rec(a, b, i - 1, j, memo) + 3)
        .min(rec(a, b, i, j - 1, memo) + 3);
    memo.insert((i, j), v);
    v
}

/// Weighted Levenshtein by memoized recursion over prefixes, in exact
/// thirds of a unit.
pub fn oracle_distance(cp: &PhoneticCode, cq: &PhoneticCode) -> f64 {
    let (a, b) = (cp.phonemes(), cq.phonemes());
    rec(a, b, a.len(), b.len(), &mut HashMap::new()) as f64 / 3.0
}

pub fn three_pairs() -> Vec<ParallelPair> {
    vec![
        ParallelPair::new("p1", "the cue was late", "the queue was late"),
        ParallelPair::new("p2", "only labored the gags", "only labored labor thes gag"),
        ParallelPair::new("p3", "as bestial", "as best atial"),
    ]
}

/// Small model over the three-pair corpus plus its items and supervision.
pub fn small_fixture(d_model: usize, seed: u64) -> (Model, Vec<AlignedExample>, SupervisionTable) {
    let lex = PronouncingLexicon::builtin();
    let pairs = three_pairs();
    let texts: Vec<String> = pairs.iter().flat_map(|p| [p.gt.clone(), p.asr.clone()]).collect();
    let vocab = induce_vocab(&texts, 60).unwrap();
    let mut cfg = ModelConfig::desk(0, 0);
    cfg.d_model = d_model;
    cfg.n_heads = 2;
    cfg.max_len = 16;
    let model = Model::new(cfg, vocab, &lex, seed).unwrap();
    let items = training_items_for_corpus(&pairs, &model.vocab, &lex);
    let sup = SupervisionTable::build(&model.vocab, &lex);
    (model, items, sup)
}

pub fn desk_pairs() -> Vec<ParallelPair> {
    parse_corpus(DESK_CORPUS).unwrap()
}

pub fn desk_vocab(pairs: &[ParallelPair], size: usize) -> SubwordVocab {
    let texts: Vec<&str> = pairs.iter().flat_map(|p| [p.gt.as_str(), p.asr.as_str()]).collect();
    induce_vocab(&texts, size).unwrap()
}

/// Trains a desk-config model on `pairs`.
pub fn train_desk(pairs: &[ParallelPair], cfg: ModelConfig, seed: u64, epochs: usize) -> (Model, LossLog) {
    let lex = PronouncingLexicon::builtin();
    let mut model = Model::new(cfg, desk_vocab(pairs, 256), &lex, seed).unwrap();
    let (items, _) = prepare_items(training_items_for_corpus(pairs, &model.vocab, &lex), &model);
    let sup = SupervisionTable::build(&model.vocab, &lex);
    let tc = TrainConfig {
        epochs,
        seed,
        ..TrainConfig::desk()
    };
    let log = train(&mut model, &items, &sup, &tc).unwrap();
    (model, log)
}
