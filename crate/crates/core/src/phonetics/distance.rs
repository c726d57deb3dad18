use super::inventory::Phoneme;
use super::lexicon::{PhoneticCode, PronouncingLexicon};
use crate::error::{Error, Result};

// Costs are tracked in thirds of a unit: every profile has three slots, so
// slot-fraction substitution costs and unit insertions stay integral and the
// distance is exact.
const THIRDS: u32 = 3;

fn sub_thirds(p: &Phoneme, q: &Phoneme) -> u32 {
    if p == q {
        0
    } else {
        p.profile().differing_slots(q.profile())
    }
}

/// Articulatory substitution cost in `[0, 1]`: the fraction of differing
/// slots for phonemes of the same kind, 1 across kinds, 0 only on identity.
pub fn phoneme_sub_cost(p: &Phoneme, q: &Phoneme) -> f64 {
    f64::from(sub_thirds(p, q)) / f64::from(THIRDS)
}

/// Phoneme edit distance `D`: weighted Levenshtein with articulatory
/// substitution costs and unit insertion/deletion costs.
pub fn phoneme_edit_distance(cp: &PhoneticCode, cq: &PhoneticCode) -> f64 {
    f64::from(edit_thirds(cp.phonemes(), cq.phonemes())) / f64::from(THIRDS)
}

fn edit_thirds(a: &[Phoneme], b: &[Phoneme]) -> u32 {
    let mut prev: Vec<u32> = (0..=b.len() as u32).map(|j| j * THIRDS).collect();
    let mut cur = vec![0u32; b.len() + 1];
    for (i, pa) in a.iter().enumerate() {
        cur[0] = (i as u32 + 1) * THIRDS;
        for (j, pb) in b.iter().enumerate() {
            let sub = prev[j] + sub_thirds(pa, pb);
            let del = prev[j + 1] + THIRDS;
            let ins = cur[j] + THIRDS;
            cur[j + 1] = sub.min(del).min(ins);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `S(p, q) = max(|C_p| - D(C_p, C_q), 0)`. Not symmetric: the length term
/// belongs to the first code.
pub fn similarity_of_codes(cp: &PhoneticCode, cq: &PhoneticCode) -> f64 {
    (cp.len() as f64 - phoneme_edit_distance(cp, cq)).max(0.0)
}

/// Phonetic similarity between two surface words via [`PronouncingLexicon::g2p`].
pub fn phonetic_similarity(wp: &str, wq: &str, lexicon: &PronouncingLexicon) -> Result<f64> {
    let cp = lexicon.g2p(wp)?;
    let cq = lexicon.g2p(wq)?;
    Ok(similarity_of_codes(&cp, &cq))
}

/// Normalized similarity of `target` to each candidate code. Candidates with
/// no code (`None`) receive zero mass.
pub fn supervision_from_codes(
    target: &PhoneticCode,
    candidates: &[Option<PhoneticCode>],
) -> Option<Vec<f64>> {
    let mut weights: Vec<f64> = candidates
        .iter()
        .map(|c| c.as_ref().map_or(0.0, |c| similarity_of_codes(target, c)))
        .collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return None;
    }
    for w in &mut weights {
        *w /= total;
    }
    Some(weights)
}

/// Supervision distribution `R` over `vocab` for one target token.
///
/// Vocabulary entries that have no phonetic code (empty after stripping
/// `##`) get zero mass. Fails with [`Error::DegenerateSupport`] when the
/// target is similar to nothing in the vocabulary.
pub fn supervision_distribution<S: AsRef<str>>(
    target: &str,
    vocab: &[S],
    lexicon: &PronouncingLexicon,
) -> Result<Vec<f64>> {
    let code = lexicon.g2p(target)?;
    let candidates: Vec<Option<PhoneticCode>> =
        vocab.iter().map(|w| lexicon.g2p(w.as_ref()).ok()).collect();
    supervision_from_codes(&code, &candidates).ok_or_else(|| Error::DegenerateSupport {
        target: target.to_string(),
    })
}
