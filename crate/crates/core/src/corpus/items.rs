use super::alignment::{align_units, AlignLabel, UnitAlignment};
use super::vocab::{SubwordVocab, TokenSeq};
use crate::generation::ErrorType;
use crate::phonetics::PronouncingLexicon;

/// One corrupted ground-truth token with its noise-token target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignedExample {
    /// Token ids of the whole ground-truth sentence (encoder input).
    pub context: Vec<usize>,
    /// Index `k` of the corrupted token within `context`.
    pub position: usize,
    pub gt_surface: String,
    /// Target piece ids, terminated by exactly one `eos`.
    pub target: Vec<usize>,
    pub label: ErrorType,
}

impl AlignedExample {
    /// Number of generated tokens including `eos`.
    pub fn m(&self) -> usize {
        self.target.len()
    }
}

fn error_type(label: AlignLabel) -> Option<ErrorType> {
    match label {
        AlignLabel::Match => None,
        AlignLabel::Substitution => Some(ErrorType::Substitution),
        AlignLabel::Insertion => Some(ErrorType::Insertion),
        AlignLabel::Deletion => Some(ErrorType::Deletion),
    }
}

/// Turns word alignments of one sentence into per-token training items.
///
/// Each non-matching word is re-aligned at piece level against the pieces
/// of its matched ASR words (same phonetic cost), so only the pieces that
/// actually change become items. Matching positions produce nothing.
pub fn build_training_items(
    alignments: &[UnitAlignment],
    vocab: &SubwordVocab,
    lexicon: &PronouncingLexicon,
) -> Vec<AlignedExample> {
    let gt_text: Vec<&str> = alignments.iter().map(|a| a.gt.as_str()).collect();
    let gt_tokens = vocab.tokenize(&gt_text.join(" "));
    let context = gt_tokens.ids();
    let spans = gt_tokens.word_spans();
    debug_assert_eq!(spans.len(), alignments.len());

    let mut items = Vec::new();
    for (word, span) in alignments.iter().zip(spans) {
        if word.label == AlignLabel::Match {
            continue;
        }
        let replacement: TokenSeq = vocab.tokenize(&word.matched.join(" "));
        let gt_pieces: Vec<&str> = gt_tokens.tokens[span.clone()].iter().map(|t| t.surface.as_str()).collect();
        let asr_pieces = replacement.surfaces();
        for piece in align_units(&gt_pieces, &asr_pieces, lexicon) {
            let Some(label) = error_type(piece.label) else { continue };
            let position = span.start + piece.index;
            let mut target: Vec<usize> = piece
                .matched
                .iter()
                .map(|s| lookup_surface(vocab, &replacement, s))
                .collect();
            target.push(vocab.eos());
            items.push(AlignedExample {
                context: context.clone(),
                position,
                gt_surface: piece.gt,
                target,
                label,
            });
        }
    }
    items
}

fn lookup_surface(vocab: &SubwordVocab, seq: &TokenSeq, surface: &str) -> usize {
    seq.tokens
        .iter()
        .find(|t| t.surface == surface)
        .map_or(vocab.unk(), |t| t.id)
}

#[cfg(test)]
mod tests {
    use super::super::alignment::align_pair;
    use super::super::vocab::{induce_vocab, SubwordVocab, BOS, EOS, UNK};
    use super::*;

    fn fixture_vocab() -> SubwordVocab {
        SubwordVocab::from_pieces([
            BOS, EOS, UNK, "only", "labor", "##ed", "the", "##s", "gag", "t", "##h", "##e",
        ])
        .unwrap()
    }

    #[test]
    fn all_match_gives_nothing() {
        let lex = PronouncingLexicon::builtin();
        let v = fixture_vocab();
        let a = align_pair("only the gag", "only the gag", &lex);
        assert!(build_training_items(&a, &v, &lex).is_empty());
    }

    #[test]
    fn inserted_word_decomposes_per_piece() {
        let lex = PronouncingLexicon::builtin();
        let v = fixture_vocab();
        let a = align_pair("only labored the gags", "only labored labor thes gag", &lex);
        let items = build_training_items(&a, &v, &lex);
        let id = |s: &str| v.id(s).unwrap();
        // context: only labor ##ed the gag ##s
        let got: Vec<(usize, &str, Vec<usize>, ErrorType)> = items
            .iter()
            .map(|e| (e.position, e.gt_surface.as_str(), e.target.clone(), e.label))
            .collect();
        assert_eq!(
            got,
            vec![
                (2, "##ed", vec![id("##ed"), id("labor"), v.eos()], ErrorType::Insertion),
                (3, "the", vec![id("the"), id("##s"), v.eos()], ErrorType::Insertion),
                (5, "##s", vec![v.eos()], ErrorType::Deletion),
            ]
        );
        assert!(items.iter().all(|e| e.context == v.tokenize("only labored the gags").ids()));
    }

    #[test]
    fn deletion_target_is_eos_only() {
        let lex = PronouncingLexicon::builtin();
        let v = fixture_vocab();
        let a = align_pair("only the gag", "only gag", &lex);
        let items = build_training_items(&a, &v, &lex);
        assert_eq!(items.len(), 1);
        assert_eq!(items[0].target, vec![v.eos()]);
        assert_eq!(items[0].m(), 1);
        assert_eq!(items[0].label, ErrorType::Deletion);
    }

    #[test]
    fn targets_end_with_one_eos() {
        let lex = PronouncingLexicon::builtin();
        let texts = ["the cue is here now", "a queue is hear", "the sue here know no"];
        let v = induce_vocab(&texts, 40).unwrap();
        let a = align_pair(texts[0], texts[2], &lex);
        let items = build_training_items(&a, &v, &lex);
        assert!(!items.is_empty());
        for e in items {
            assert_eq!(e.target.last(), Some(&v.eos()));
            assert_eq!(e.target.iter().filter(|&&t| t == v.eos()).count(), 1);
            assert_eq!(e.label == ErrorType::Deletion, e.target.len() == 1);
        }
    }
}
