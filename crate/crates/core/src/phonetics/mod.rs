//! Phonetic codes, articulatory phoneme edit distance, phonetic similarity
//! and the similarity-derived supervision distribution.

mod distance;
mod inventory;
mod lexicon;

pub use distance::{
    phoneme_edit_distance, phoneme_sub_cost, phonetic_similarity, similarity_of_codes,
    supervision_distribution, supervision_from_codes,
};
pub use inventory::{ArticulatoryProfile, Inventory, Phoneme, PhonemeKind, UNK_PHONEME};
pub use lexicon::{PhoneticCode, PronouncingLexicon, CONTINUATION_PREFIX};
