//! Interventional speech-noise injection.
//!
//! Clean text is turned into ASR-like pseudo transcripts: every token is
//! marked for corruption with a constant prior (independent of the token),
//! and a small phoneme-aware encoder-decoder generates the noise words for
//! the marked positions.

pub mod align;
pub mod corpus;
pub mod eval;
pub mod error;
pub mod generation;
pub mod intervention;
pub mod model;
pub mod training;
pub mod phonetics;
pub mod synthetic;

pub use error::{Error, Result};
