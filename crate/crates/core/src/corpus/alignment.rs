use crate::align::{align, EditOp};
use crate::phonetics::{phoneme_edit_distance, PhoneticCode, PronouncingLexicon};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AlignLabel {
    Match,
    Substitution,
    Insertion,
    Deletion,
}

/// One ground-truth unit and the hypothesis units assigned to it, in
/// hypothesis order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitAlignment {
    pub index: usize,
    pub gt: String,
    pub matched: Vec<String>,
    pub label: AlignLabel,
}

fn label_for(gt: &str, matched: &[String]) -> AlignLabel {
    match matched {
        [] => AlignLabel::Deletion,
        [only] if only == gt => AlignLabel::Match,
        [_] => AlignLabel::Substitution,
        _ => AlignLabel::Insertion,
    }
}

fn code_or_empty(lexicon: &PronouncingLexicon, unit: &str) -> PhoneticCode {
    lexicon.g2p(unit).unwrap_or_default()
}

/// Phonetic alignment of ground-truth units against hypothesis units.
///
/// Substituting `a` by `b` costs `D(C_a, C_b) / max(|C_a|, 1)` clamped to
/// `[0, 1]` (zero for identical surfaces); insertions and deletions cost 1.
/// Inserted hypothesis units join the preceding ground-truth unit, or the
/// first one when nothing precedes them.
pub fn align_units<S: AsRef<str>, T: AsRef<str>>(
    gt: &[S],
    asr: &[T],
    lexicon: &PronouncingLexicon,
) -> Vec<UnitAlignment> {
    let gt_codes: Vec<PhoneticCode> = gt.iter().map(|w| code_or_empty(lexicon, w.as_ref())).collect();
    let asr_codes: Vec<PhoneticCode> = asr.iter().map(|w| code_or_empty(lexicon, w.as_ref())).collect();
    let gt_idx: Vec<usize> = (0..gt.len()).collect();
    let asr_idx: Vec<usize> = (0..asr.len()).collect();
    let cost = |&i: &usize, &j: &usize| {
        if gt[i].as_ref() == asr[j].as_ref() {
            return 0.0;
        }
        let d = phoneme_edit_distance(&gt_codes[i], &asr_codes[j]);
        (d / gt_codes[i].len().max(1) as f64).clamp(0.0, 1.0)
    };
    let (_, ops) = align(&gt_idx, &asr_idx, cost, 1.0);

    let mut groups: Vec<Vec<String>> = vec![Vec::new(); gt.len()];
    let mut current: Option<usize> = None;
    for op in ops {
        match op {
            EditOp::Pair { r, h } => {
                groups[r].push(asr[h].as_ref().to_string());
                current = Some(r);
            }
            EditOp::Delete { r } => current = Some(r),
            EditOp::Insert { h } => {
                if let Some(g) = groups.get_mut(current.unwrap_or(0)) {
                    g.push(asr[h].as_ref().to_string());
                }
            }
        }
    }

    gt.iter()
        .zip(groups)
        .enumerate()
        .map(|(index, (g, matched))| UnitAlignment {
            index,
            gt: g.as_ref().to_string(),
            label: label_for(g.as_ref(), &matched),
            matched,
        })
        .collect()
}

/// Word-level alignment of one normalized ground-truth/ASR pair.
pub fn align_pair(gt: &str, asr: &str, lexicon: &PronouncingLexicon) -> Vec<UnitAlignment> {
    let gt_words: Vec<&str> = gt.split_whitespace().collect();
    let asr_words: Vec<&str> = asr.split_whitespace().collect();
    align_units(&gt_words, &asr_words, lexicon)
}
