//! Forward computation: mixed word/phoneme embeddings, one self-attention
//! encoder block, a one-layer decoder conditioned on a single encoder row,
//! and the two generation heads.

use ndarray::{Array1, Array2};

use super::codes::PhonemeCodeIndex;
use super::config::ModelConfig;
use super::params::{ParamId, ParamStore};
use super::tape::{softmax_rows, Tape, Var};
use crate::corpus::SubwordVocab;
use crate::error::{Error, Result};
use crate::phonetics::PronouncingLexicon;

/// A corruption model: architecture, vocabulary, code index and weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub vocab: SubwordVocab,
    pub codes: PhonemeCodeIndex,
    pub params: ParamStore,
}

/// Per-step output distributions over the vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDistributions {
    pub p_n: Array1<f64>,
    pub p_ph: Array1<f64>,
    pub p_gen: Array1<f64>,
}

impl Model {
    /// Fresh model over `vocab`; `config` shapes are overwritten from the
    /// vocabulary and code index.
    pub fn new(
        mut config: ModelConfig,
        vocab: SubwordVocab,
        lexicon: &PronouncingLexicon,
        seed: u64,
    ) -> Result<Self> {
        let codes = PhonemeCodeIndex::build(&vocab, lexicon);
        config.vocab_size = vocab.len();
        config.phoneme_code_vocab_size = codes.num_rows();
        config.validate()?;
        let params = ParamStore::init(&config, seed);
        Ok(Model {
            config,
            vocab,
            codes,
            params,
        })
    }

    /// `λ_w · M_word[x] + (1 − λ_w) · M_ph[code(x)]` for each token.
    fn token_embeddings(&self, tape: &mut Tape, tokens: &[usize]) -> Var {
        let lw = self.config.lambda_w;
        let word = tape.param(ParamId::WordEmb);
        let w = tape.gather(word, tokens);
        let w = tape.scale(w, lw);
        let ph = tape.param(ParamId::PhEmb);
        let p = tape.gather(ph, &self.codes.rows_of(tokens));
        let p = tape.scale(p, 1.0 - lw);
        tape.add(w, p)
    }

    fn positions(&self, tape: &mut Tape, n: usize) -> Var {
        let pos = tape.param(ParamId::PosEmb);
        tape.slice_rows(pos, 0, n)
    }

    /// Encoder input rows `E_in[k] = λ_w M_word[x^k] + (1 − λ_w) M_ph[code(x^k)] + M_pos[k]`.
    pub(crate) fn embed(&self, tape: &mut Tape, tokens: &[usize]) -> Result<Var> {
        if tokens.len() > self.config.max_len {
            return Err(Error::SequenceTooLong {
                len: tokens.len(),
                max: self.config.max_len,
            });
        }
        let t = self.token_embeddings(tape, tokens);
        let p = self.positions(tape, tokens.len());
        Ok(tape.add(t, p))
    }

    fn attention(
        &self,
        tape: &mut Tape,
        query: Var,
        memory: Var,
        weights: [ParamId; 4],
        causal: bool,
    ) -> Var {
        let [wq, wk, wv, wo] = weights.map(|id| tape.param(id));
        let q = tape.matmul(query, wq);
        let k = tape.matmul(memory, wk);
        let v = tape.matmul(memory, wv);
        let dh = self.config.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();
        let heads: Vec<Var> = (0..self.config.n_heads)
            .map(|h| {
                let qh = tape.slice_cols(q, h * dh, dh);
                let kh = tape.slice_cols(k, h * dh, dh);
                let vh = tape.slice_cols(v, h * dh, dh);
                let scores = tape.matmul_t(qh, kh);
                let scores = tape.scale(scores, scale);
                let attn = tape.softmax(scores, causal);
                tape.matmul(attn, vh)
            })
            .collect();
        let joined = tape.concat_cols(&heads);
        tape.matmul(joined, wo)
    }

    fn layer_norm(&self, tape: &mut Tape, x: Var, gain: ParamId, bias: ParamId) -> Var {
        let g = tape.param(gain);
        let b = tape.param(bias);
        tape.layer_norm(x, g, b)
    }

    fn feed_forward(&self, tape: &mut Tape, x: Var, ids: [ParamId; 4]) -> Var {
        let [w1, b1, w2, b2] = ids.map(|id| tape.param(id));
        let h = tape.matmul(x, w1);
        let h = tape.add_row(h, b1);
        let h = tape.gelu(h);
        let o = tape.matmul(h, w2);
        tape.add_row(o, b2)
    }

    /// One post-norm self-attention block over the embedded sentence.
    pub(crate) fn encode(&self, tape: &mut Tape, e_in: Var) -> Var {
        use ParamId::*;
        let a = self.attention(tape, e_in, e_in, [EncWq, EncWk, EncWv, EncWo], false);
        let x = tape.add(e_in, a);
        let h = self.layer_norm(tape, x, EncLn1Gain, EncLn1Bias);
        let f = self.feed_forward(tape, h, [EncFf1W, EncFf1B, EncFf2W, EncFf2B]);
        let y = tape.add(h, f);
        self.layer_norm(tape, y, EncLn2Gain, EncLn2Bias)
    }

    /// Decoder hidden states for every prefix position of corrupted token
    /// `k`. `prefix` starts with `bos`; row `l` is the state that predicts
    /// the token after `prefix[..=l]`.
    ///
    /// Position 0 is `H_decoder · [e_k ; emb(bos)]`, later positions are the
    /// mixed embeddings of the generated tokens; all get position
    /// embeddings. Causal self-attention is followed by cross-attention
    /// with the full encoder output as keys and values.
    pub(crate) fn decode(&self, tape: &mut Tape, encoded: Var, k: usize, prefix: &[usize]) -> Result<Var> {
        use ParamId::*;
        if prefix.first() != Some(&self.vocab.bos()) {
            return Err(Error::Config("decoder prefix must start with bos".into()));
        }
        if prefix.len() > self.config.max_gen_len {
            return Err(Error::PrefixTooLong {
                len: prefix.len(),
                max: self.config.max_gen_len,
            });
        }
        let n = prefix.len();
        let tokens = self.token_embeddings(tape, prefix);
        let e_k = tape.slice_rows(encoded, k, 1);
        let bos = tape.slice_rows(tokens, 0, 1);
        let joined = tape.concat_cols(&[e_k, bos]);
        let h = tape.param(DecH);
        let head = tape.matmul(joined, h);
        let rows = if n > 1 {
            let rest = tape.slice_rows(tokens, 1, n - 1);
            tape.concat_rows(&[head, rest])
        } else {
            head
        };
        let pos = self.positions(tape, n);
        let x = tape.add(rows, pos);

        let sa = self.attention(tape, x, x, [DecSelfWq, DecSelfWk, DecSelfWv, DecSelfWo], true);
        let x = tape.add(x, sa);
        let s = self.layer_norm(tape, x, DecLn1Gain, DecLn1Bias);
        let ca = self.attention(tape, s, encoded, [DecCrossWq, DecCrossWk, DecCrossWv, DecCrossWo], false);
        let x = tape.add(s, ca);
        let c = self.layer_norm(tape, x, DecLn2Gain, DecLn2Bias);
        let f = self.feed_forward(tape, c, [DecFf1W, DecFf1B, DecFf2W, DecFf2B]);
        let y = tape.add(c, f);
        Ok(self.layer_norm(tape, y, DecLn3Gain, DecLn3Bias))
    }

    /// `M_word · d + b_n` for each row of `hidden`.
    pub(crate) fn word_logits(&self, tape: &mut Tape, hidden: Var) -> Var {
        let w = tape.param(ParamId::WordEmb);
        let b = tape.param(ParamId::BiasN);
        let l = tape.matmul_t(hidden, w);
        tape.add_row(l, b)
    }

    /// `M_ph[code(w)] · d + b_ph[w]` for every vocabulary token `w`.
    pub(crate) fn phoneme_logits(&self, tape: &mut Tape, hidden: Var) -> Var {
        let ph = tape.param(ParamId::PhEmb);
        let rows = tape.gather(ph, self.codes.token_rows());
        let b = tape.param(ParamId::BiasPh);
        let l = tape.matmul_t(hidden, rows);
        tape.add_row(l, b)
    }

    /// Embedded encoder input for a token sequence.
    pub fn embed_sequence(&self, tokens: &[usize]) -> Result<Array2<f64>> {
        self.embed_sequence_with(&self.params, tokens)
    }

    pub fn embed_sequence_with(&self, params: &ParamStore, tokens: &[usize]) -> Result<Array2<f64>> {
        let mut tape = Tape::new(params);
        let e = self.embed(&mut tape, tokens)?;
        Ok(tape.value(e).clone())
    }

    /// Encoder output for already-embedded rows.
    pub fn encode_embedded(&self, e_in: &Array2<f64>) -> Array2<f64> {
        let mut tape = Tape::new(&self.params);
        let x = tape.constant(e_in.clone());
        let y = self.encode(&mut tape, x);
        tape.value(y).clone()
    }

    /// Encoder output `E_encoder` for a token sequence.
    pub fn encode_tokens(&self, tokens: &[usize]) -> Result<Array2<f64>> {
        let mut tape = Tape::new(&self.params);
        let e = self.embed(&mut tape, tokens)?;
        let y = self.encode(&mut tape, e);
        Ok(tape.value(y).clone())
    }

    /// Last-position decoder state `d_k` for position `k` given a prefix
    /// starting with `bos`.
    pub fn decoder_step(&self, encoded: &Array2<f64>, k: usize, prefix: &[usize]) -> Result<Array1<f64>> {
        let mut tape = Tape::new(&self.params);
        let enc = tape.constant(encoded.clone());
        let d = self.decode(&mut tape, enc, k, prefix)?;
        Ok(tape.value(d).row(prefix.len() - 1).to_owned())
    }

    /// `P_n`, `P_ph` and the generation distribution `P_gen` for one
    /// decoder state.
    ///
    /// The stop decision is taken from the word head alone,
    /// `P_gen(eos) = P_n(eos)`; the remaining mass is spread over the other
    /// tokens in proportion to `P_n ⊙ P_ph`. The phoneme head is never
    /// supervised towards `eos` (it has no pronunciation), so letting it
    /// veto stopping would make every span run to the length cap. With the
    /// phoneme head disabled `P_gen = P_n`.
    pub fn step_distributions(&self, d_k: &Array1<f64>) -> StepDistributions {
        let mut tape = Tape::new(&self.params);
        let d = tape.constant(d_k.clone().insert_axis(ndarray::Axis(0)));
        let ln = self.word_logits(&mut tape, d);
        let lp = self.phoneme_logits(&mut tape, d);
        let p_n = softmax_rows(tape.value(ln).view()).row(0).to_owned();
        let p_ph = softmax_rows(tape.value(lp).view()).row(0).to_owned();
        let p_gen = if self.config.phoneme_head {
            gate_eos(&p_n, &p_ph, self.vocab.eos())
        } else {
            p_n.clone()
        };
        StepDistributions { p_n, p_ph, p_gen }
    }
}

/// `P_n(eos)` for `eos`, and `(1 − P_n(eos)) · renormalized(P_n ⊙ P_ph)`
/// over every other token. Computed in log space.
pub fn gate_eos(p_n: &Array1<f64>, p_ph: &Array1<f64>, eos: usize) -> Array1<f64> {
    let stop = p_n[eos];
    let log_prod: Vec<f64> = p_n
        .iter()
        .zip(p_ph)
        .enumerate()
        .map(|(i, (&a, &b))| if i == eos { f64::NEG_INFINITY } else { a.ln() + b.ln() })
        .collect();
    let max = log_prod.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        let mut out = Array1::zeros(p_n.len());
        out[eos] = 1.0;
        return out;
    }
    let z: f64 = log_prod.iter().map(|l| (l - max).exp()).sum();
    let mut out: Array1<f64> = log_prod.iter().map(|l| (1.0 - stop) * (l - max).exp() / z).collect();
    out[eos] = stop;
    out
}

/// `P_n ⊙ P_ph / Σ(P_n ⊙ P_ph)`.
pub fn renormalized_product(p_n: &Array1<f64>, p_ph: &Array1<f64>) -> Array1<f64> {
    let prod = p_n * p_ph;
    let total = prod.sum();
    prod / total
}
