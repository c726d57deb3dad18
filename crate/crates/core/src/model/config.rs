use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Shapes and mixing weights of the corruption model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub d_model: usize,
    pub n_heads: usize,
    pub vocab_size: usize,
    pub phoneme_code_vocab_size: usize,
    /// Longest encoder input; also bounds decoder positions.
    pub max_len: usize,
    /// `M`: most tokens generated per corrupted position, `eos` included.
    pub max_gen_len: usize,
    /// Word-embedding share of the input mix; `1 - lambda_w` goes to the
    /// phoneme embedding.
    pub lambda_w: f64,
    /// Weight of the phoneme-head KL term in the total loss.
    pub lambda_ph: f64,
    /// With the head disabled, `P_gen = P_n` and no KL term is computed.
    pub phoneme_head: bool,
}

impl ModelConfig {
    /// Desk-scale defaults: 32 dims, 4 heads, `M = 5`.
    pub fn desk(vocab_size: usize, phoneme_code_vocab_size: usize) -> Self {
        ModelConfig {
            d_model: 32,
            n_heads: 4,
            vocab_size,
            phoneme_code_vocab_size,
            max_len: 64,
            max_gen_len: 5,
            lambda_w: 0.5,
            lambda_ph: 0.5,
            phoneme_head: true,
        }
    }

    /// Published scale: 768 dims, 12 heads.
    pub fn full_scale(vocab_size: usize, phoneme_code_vocab_size: usize) -> Self {
        ModelConfig {
            d_model: 768,
            n_heads: 12,
            max_len: 512,
            ..Self::desk(vocab_size, phoneme_code_vocab_size)
        }
    }

    /// The same shapes with phoneme-aware generation removed: no phoneme
    /// embedding in the input, no phoneme head, no KL term.
    pub fn without_phoneme_head(&self) -> Self {
        ModelConfig {
            lambda_w: 1.0,
            lambda_ph: 0.0,
            phoneme_head: false,
            ..self.clone()
        }
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn ff_dim(&self) -> usize {
        4 * self.d_model
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.d_model == 0 || self.n_heads == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            return fail("d_model must be a positive multiple of n_heads");
        }
        if self.max_gen_len == 0 {
            return fail("max_gen_len must be at least 1");
        }
        if self.max_len < self.max_gen_len {
            return fail("max_len must cover max_gen_len decoder positions");
        }
        if self.vocab_size == 0 || self.phoneme_code_vocab_size == 0 {
            return fail("vocabulary sizes must be positive");
        }
        if !(0.0..=1.0).contains(&self.lambda_w) {
            return fail("lambda_w must lie in [0, 1]");
        }
        if !(self.lambda_ph >= 0.0 && self.lambda_ph.is_finite()) {
            return fail("lambda_ph must be finite and nonnegative");
        }
        Ok(())
    }

    /// `key = value` lines; floats use Rust's shortest round-trip format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "d_model = {}", self.d_model);
        let _ = writeln!(out, "n_heads = {}", self.n_heads);
        let _ = writeln!(out, "vocab_size = {}", self.vocab_size);
        let _ = writeln!(out, "phoneme_code_vocab_size = {}", self.phoneme_code_vocab_size);
        let _ = writeln!(out, "max_len = {}", self.max_len);
        let _ = writeln!(out, "max_gen_len = {}", self.max_gen_len);
        let _ = writeln!(out, "lambda_w = {:?}", self.lambda_w);
        let _ = writeln!(out, "lambda_ph = {:?}", self.lambda_ph);
        let _ = writeln!(out, "phoneme_head = {}", self.phoneme_head);
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = ModelConfig::desk(0, 0);
        let mut seen = 0usize;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let err = |m: String| Error::Parse {
                what: "model config",
                line: i + 1,
                message: m,
            };
            let (k, v) = line.split_once('=').ok_or_else(|| err("expected key = value".into()))?;
            let (k, v) = (k.trim(), v.trim());
            let int = |v: &str| v.parse::<usize>().map_err(|e| err(format!("{k}: {e}")));
            let float = |v: &str| v.parse::<f64>().map_err(|e| err(format!("{k}: {e}")));
            match k {
                "d_model" => cfg.d_model = int(v)?,
                "n_heads" => cfg.n_heads = int(v)?,
                "vocab_size" => cfg.vocab_size = int(v)?,
                "phoneme_code_vocab_size" => cfg.phoneme_code_vocab_size = int(v)?,
                "max_len" => cfg.max_len = int(v)?,
                "max_gen_len" => cfg.max_gen_len = int(v)?,
                "lambda_w" => cfg.lambda_w = float(v)?,
                "lambda_ph" => cfg.lambda_ph = float(v)?,
                "phoneme_head" => {
                    cfg.phoneme_head = v.parse::<bool>().map_err(|e| err(format!("{k}: {e}")))?
                }
                other => return Err(err(format!("unknown key {other:?}"))),
            }
            seen += 1;
        }
        if seen != 9 {
            return Err(Error::Config(format!("model config has {seen} of 9 keys")));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut cfg = ModelConfig::desk(300, 250);
        cfg.lambda_w = 0.1 + 0.2;
        assert_eq!(ModelConfig::from_text(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn validation() {
        let mut cfg = ModelConfig::desk(10, 10);
        assert!(cfg.validate().is_ok());
        cfg.n_heads = 5;
        assert!(cfg.validate().is_err());
        let mut cfg = ModelConfig::desk(10, 10);
        cfg.max_gen_len = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = ModelConfig::desk(10, 10);
        cfg.lambda_w = 1.5;
        assert!(cfg.validate().is_err());
        assert!(ModelConfig::full_scale(10, 10).validate().is_ok());
    }

    #[test]
    fn ablation_disables_phoneme_paths() {
        let ab = ModelConfig::desk(10, 10).without_phoneme_head();
        assert_eq!(ab.lambda_w, 1.0);
        assert_eq!(ab.lambda_ph, 0.0);
        assert!(!ab.phoneme_head);
    }
}
