//! Parallel corpus ingestion, subword vocabulary, alignment and training
//! item extraction.

mod alignment;
mod items;
mod pairs;
mod vocab;

pub use alignment::{align_pair, align_units, AlignLabel, UnitAlignment};
pub use items::{build_training_items, AlignedExample};
pub use pairs::{format_corpus, normalize_text, parse_corpus, parse_texts, read_corpus, ParallelPair};
pub use vocab::{detokenize, induce_vocab, SubwordVocab, Token, TokenSeq, BOS, EOS, UNK};

use crate::phonetics::PronouncingLexicon;

/// Aligns every pair and collects the training items in corpus order.
pub fn training_items_for_corpus(
    pairs: &[ParallelPair],
    vocab: &SubwordVocab,
    lexicon: &PronouncingLexicon,
) -> Vec<AlignedExample> {
    pairs
        .iter()
        .flat_map(|p| {
            let alignments = align_pair(&p.gt, &p.asr, lexicon);
            build_training_items(&alignments, vocab, lexicon)
        })
        .collect()
}
