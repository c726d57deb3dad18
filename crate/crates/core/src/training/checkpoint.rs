//! Binary checkpoint: `ISNI1`, then length-prefixed model config text,
//! vocabulary text, phoneme-code rows and per-token rows, then every
//! parameter array as (name length, name, rank, dims, little-endian f64).

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::corpus::SubwordVocab;
use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig, ParamId, ParamStore, PhonemeCodeIndex};

pub const CHECKPOINT_MAGIC: &[u8; 5] = b"ISNI1";

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&u32::try_from(v).expect("checkpoint field fits in u32").to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u64).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

pub fn write_checkpoint(model: &Model) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    put_str(&mut out, &model.config.to_text());
    put_str(&mut out, &model.vocab.to_file_string());
    put_str(&mut out, &model.codes.rows().join("\n"));
    put_u32(&mut out, model.codes.token_rows().len());
    for &r in model.codes.token_rows() {
        put_u32(&mut out, r);
    }
    put_u32(&mut out, ParamId::ALL.len());
    for (id, array) in model.params.iter() {
        put_u32(&mut out, id.name().len());
        out.extend_from_slice(id.name().as_bytes());
        put_u32(&mut out, 2);
        for d in array.shape() {
            out.extend_from_slice(&(*d as u64).to_le_bytes());
        }
        for v in array.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::CorruptCheckpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<&'a str> {
        let len = usize::try_from(self.u64()?).map_err(|_| Error::CorruptCheckpoint("length overflow".into()))?;
        std::str::from_utf8(self.take(len)?).map_err(|e| Error::CorruptCheckpoint(e.to_string()))
    }
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<Model> {
    let head = &bytes[..bytes.len().min(CHECKPOINT_MAGIC.len())];
    if head != CHECKPOINT_MAGIC {
        if head.len() < CHECKPOINT_MAGIC.len() && CHECKPOINT_MAGIC.starts_with(head) {
            return Err(Error::CorruptCheckpoint("truncated magic".into()));
        }
        return Err(Error::VersionMismatch {
            found: String::from_utf8_lossy(head).into_owned(),
        });
    }
    let mut r = Reader {
        bytes,
        pos: CHECKPOINT_MAGIC.len(),
    };
    let corrupt = |e: Error| match e {
        Error::CorruptCheckpoint(m) => Error::CorruptCheckpoint(m),
        other => Error::CorruptCheckpoint(other.to_string()),
    };
    let config = ModelConfig::from_text(r.string()?).map_err(corrupt)?;
    let vocab = SubwordVocab::parse(r.string()?).map_err(corrupt)?;
    let rows: Vec<String> = r.string()?.split('\n').map(str::to_string).collect();
    let n_tokens = r.u32()?;
    let token_rows = (0..n_tokens).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let codes = PhonemeCodeIndex::from_parts(rows, token_rows)?;
    if vocab.len() != config.vocab_size || codes.token_rows().len() != vocab.len() || codes.num_rows() != config.phoneme_code_vocab_size {
        return Err(Error::CorruptCheckpoint("vocabulary sizes disagree with the config".into()));
    }

    let n_arrays = r.u32()?;
    let mut named = Vec::with_capacity(n_arrays);
    for _ in 0..n_arrays {
        let name_len = r.u32()?;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|e| Error::CorruptCheckpoint(e.to_string()))?
            .to_string();
        let rank = r.u32()?;
        if rank != 2 {
            return Err(Error::CorruptCheckpoint(format!("array {name} has rank {rank}")));
        }
        let rows = r.u64()? as usize;
        let cols = r.u64()? as usize;
        let count = rows
            .checked_mul(cols)
            .filter(|&c| c.checked_mul(8).is_some_and(|b| b <= bytes.len()))
            .ok_or_else(|| Error::CorruptCheckpoint(format!("array {name} is too large")))?;
        let data = r.take(count * 8)?;
        let values: Vec<f64> = data
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let array = Array2::from_shape_vec((rows, cols), values).map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
        named.push((name, array));
    }
    if r.pos != bytes.len() {
        return Err(Error::CorruptCheckpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    let params = ParamStore::from_arrays(&config, named)?;
    Ok(Model {
        config,
        vocab,
        codes,
        params,
    })
}

pub fn save_checkpoint(model: &Model, path: &Path) -> Result<()> {
    fs::write(path, write_checkpoint(model))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Model> {
    read_checkpoint(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::induce_vocab;
    use crate::phonetics::PronouncingLexicon;

    fn model() -> Model {
        let lex = PronouncingLexicon::builtin();
        let vocab = induce_vocab(&["the cue and the queue", "as best atial"], 40).unwrap();
        let mut cfg = ModelConfig::desk(0, 0);
        cfg.d_model = 8;
        cfg.n_heads = 2;
        cfg.max_len = 12;
        Model::new(cfg, vocab, &lex, 4).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = model();
        let bytes = write_checkpoint(&m);
        let back = read_checkpoint(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(write_checkpoint(&back), bytes);
    }

    #[test]
    fn truncation_and_magic() {
        let bytes = write_checkpoint(&model());
        for cut in [3, 5, 20, bytes.len() / 2, bytes.len() - 1] {
            assert!(
                matches!(read_checkpoint(&bytes[..cut]), Err(Error::CorruptCheckpoint(_))),
                "cut {cut}"
            );
        }
        let mut foreign = bytes.clone();
        foreign[..5].copy_from_slice(b"ISNI0");
        assert!(matches!(read_checkpoint(&foreign), Err(Error::VersionMismatch { .. })));
        assert!(matches!(read_checkpoint(b"PK\x03\x04zip"), Err(Error::VersionMismatch { .. })));
    }
}
