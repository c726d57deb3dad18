//! Regenerates `data/desk_corpus.tsv`.
//!
//!     cargo run -p isni-core --example gen_desk_corpus > crates/core/data/desk_corpus.tsv

use isni::corpus::format_corpus;
use isni::phonetics::PronouncingLexicon;
use isni::synthetic::{synthetic_corpus, SyntheticConfig};

fn main() {
    let cfg = SyntheticConfig::default();
    let pairs = synthetic_corpus(&PronouncingLexicon::builtin(), &cfg);
    print!("# gen_desk_corpus seed={} pairs={}\n{}", cfg.seed, cfg.pairs, format_corpus(&pairs));
}
