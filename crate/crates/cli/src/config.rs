//! Flat `key = value` run configuration: defaults, then the config file,
//! then command-line overrides.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use isni::generation::DecodeMode;
use isni::model::ModelConfig;
use isni::training::TrainConfig;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("config line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("config line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("invalid value for {key}: {message}")]
    Value { key: String, message: String },
    #[error("cannot read config {path}: {message}")]
    Read { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub p_z: f64,
    pub lambda_w: f64,
    pub lambda_ph: f64,
    pub phoneme_head: bool,
    pub mode: DecodeMode,
    pub d_model: usize,
    pub n_heads: usize,
    pub max_len: usize,
    pub max_gen_len: usize,
    pub vocab_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub clip_norm: f64,
    pub lexicon: Option<PathBuf>,
    pub inventory: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let m = ModelConfig::desk(0, 0);
        let t = TrainConfig::desk();
        RunConfig {
            seed: 0,
            p_z: 0.15,
            lambda_w: m.lambda_w,
            lambda_ph: m.lambda_ph,
            phoneme_head: m.phoneme_head,
            mode: DecodeMode::DEFAULT,
            d_model: m.d_model,
            n_heads: m.n_heads,
            max_len: m.max_len,
            max_gen_len: m.max_gen_len,
            vocab_size: 256,
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            batch_size: t.batch_size,
            clip_norm: t.clip_norm,
            lexicon: None,
            inventory: None,
        }
    }
}

pub const KEYS: &[&str] = &[
    "seed",
    "p_z",
    "lambda_w",
    "lambda_ph",
    "phoneme_head",
    "mode",
    "temperature",
    "d_model",
    "n_heads",
    "max_len",
    "max_gen_len",
    "vocab_size",
    "learning_rate",
    "epochs",
    "batch_size",
    "clip_norm",
    "lexicon",
    "inventory",
];

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| ConfigError::Value {
        key: key.to_string(),
        message: e.to_string(),
    })
}

impl RunConfig {
    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "seed" => self.seed = parse_value(key, value)?,
            "p_z" => self.p_z = parse_value(key, value)?,
            "lambda_w" => self.lambda_w = parse_value(key, value)?,
            "lambda_ph" => self.lambda_ph = parse_value(key, value)?,
            "phoneme_head" => self.phoneme_head = parse_value(key, value)?,
            "mode" => {
                let temperature = match self.mode {
                    DecodeMode::Sample { temperature } => temperature,
                    DecodeMode::Greedy => 1.0,
                };
                self.mode = match value {
                    "sample" => DecodeMode::Sample { temperature },
                    other => other.parse().map_err(|e: isni::Error| ConfigError::Value {
                        key: key.into(),
                        message: e.to_string(),
                    })?,
                }
            }
            "temperature" => {
                let t: f64 = parse_value(key, value)?;
                if !(t > 0.0 && t.is_finite()) {
                    return Err(ConfigError::Value {
                        key: key.into(),
                        message: "temperature must be positive".into(),
                    });
                }
                if let DecodeMode::Sample { temperature } = &mut self.mode {
                    *temperature = t;
                }
            }
            "d_model" => self.d_model = parse_value(key, value)?,
            "n_heads" => self.n_heads = parse_value(key, value)?,
            "max_len" => self.max_len = parse_value(key, value)?,
            "max_gen_len" => self.max_gen_len = parse_value(key, value)?,
            "vocab_size" => self.vocab_size = parse_value(key, value)?,
            "learning_rate" => self.learning_rate = parse_value(key, value)?,
            "epochs" => self.epochs = parse_value(key, value)?,
            "batch_size" => self.batch_size = parse_value(key, value)?,
            "clip_norm" => self.clip_norm = parse_value(key, value)?,
            "lexicon" => self.lexicon = Some(PathBuf::from(value)),
            "inventory" => self.inventory = Some(PathBuf::from(value)),
            _ => {
                return Err(ConfigError::UnknownKey {
                    line: 0,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment line.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let n = i + 1;
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Parse {
                line: n,
                message: format!("expected `key = value`, got {line:?}"),
            })?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(ConfigError::UnknownKey { line: n, key: k.into() });
            }
            self.set(k, v).map_err(|e| ConfigError::Parse {
                line: n,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn model_config(&self) -> ModelConfig {
        let mut m = ModelConfig {
            d_model: self.d_model,
            n_heads: self.n_heads,
            max_len: self.max_len,
            max_gen_len: self.max_gen_len,
            lambda_w: self.lambda_w,
            lambda_ph: self.lambda_ph,
            ..ModelConfig::desk(0, 0)
        };
        if !self.phoneme_head {
            m = m.without_phoneme_head();
        }
        m
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            clip_norm: self.clip_norm,
            ..TrainConfig::desk()
        }
    }

    /// Canonical `key = value` rendering of every key, in a fixed order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let (mode, temperature) = match self.mode {
            DecodeMode::Greedy => ("greedy", 1.0),
            DecodeMode::Sample { temperature } => ("sample", temperature),
        };
        let path = |p: &Option<PathBuf>| p.as_ref().map_or("builtin".to_string(), |p| p.display().to_string());
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "p_z = {:?}", self.p_z);
        let _ = writeln!(out, "lambda_w = {:?}", self.lambda_w);
        let _ = writeln!(out, "lambda_ph = {:?}", self.lambda_ph);
        let _ = writeln!(out, "phoneme_head = {}", self.phoneme_head);
        let _ = writeln!(out, "mode = {mode}");
        let _ = writeln!(out, "temperature = {temperature:?}");
        let _ = writeln!(out, "d_model = {}", self.d_model);
        let _ = writeln!(out, "n_heads = {}", self.n_heads);
        let _ = writeln!(out, "max_len = {}", self.max_len);
        let _ = writeln!(out, "max_gen_len = {}", self.max_gen_len);
        let _ = writeln!(out, "vocab_size = {}", self.vocab_size);
        let _ = writeln!(out, "learning_rate = {:?}", self.learning_rate);
        let _ = writeln!(out, "epochs = {}", self.epochs);
        let _ = writeln!(out, "batch_size = {}", self.batch_size);
        let _ = writeln!(out, "clip_norm = {:?}", self.clip_norm);
        let _ = writeln!(out, "lexicon = {}", path(&self.lexicon));
        let _ = writeln!(out, "inventory = {}", path(&self.inventory));
        out
    }

    /// First 16 hex digits of the SHA-256 of [`RunConfig::to_text`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Defaults, overlaid by the file at `path` (if any), overlaid by
/// `overrides` in order.
pub fn load_config(path: Option<&Path>, overrides: &[(&str, String)]) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = path {
        let text = fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.apply_text(&text)?;
    }
    for (k, v) in overrides {
        cfg.set(k, v)?;
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.p_z, 0.15);
    }

    #[test]
    fn text_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("seed = 9\nmode = greedy\np_z = 0.45\n").unwrap();
        let mut back = RunConfig::default();
        back.apply_text(&cfg.to_text().replace("builtin", "x")).unwrap();
        back.lexicon = None;
        back.inventory = None;
        assert_eq!(back, cfg);
    }

    #[test]
    fn errors_name_lines() {
        let mut cfg = RunConfig::default();
        assert_eq!(
            cfg.apply_text("seed = 1\n\nbogus = 2"),
            Err(ConfigError::UnknownKey {
                line: 3,
                key: "bogus".into()
            })
        );
        assert!(matches!(cfg.apply_text("seed 1"), Err(ConfigError::Parse { line: 1, .. })));
        assert!(matches!(cfg.apply_text("# c\nseed = x"), Err(ConfigError::Parse { line: 2, .. })));
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.seed = 1;
        assert_eq!(a.hash().len(), 16);
        assert_ne!(a.hash(), b.hash());
    }
}
