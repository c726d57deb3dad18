//! The corruption model: a small encoder-decoder with mixed word/phoneme
//! input embeddings and two output heads, trained by reverse-mode autodiff.

mod codes;
mod config;
mod loss;
mod network;
mod params;
mod tape;

pub use codes::{PhonemeCodeIndex, SupervisionTable, R_FLOOR, UNK_CODE_ROW};
pub use config::ModelConfig;
pub use loss::{backward_and_check, GradCheckEntry, GradCheckReport, LossParts, FD_STEP, REL_ERROR_FLOOR};
pub use network::{gate_eos, renormalized_product, Model, StepDistributions};
pub use params::{ParamId, ParamStore};
pub use tape::softmax_rows;
