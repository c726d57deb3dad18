use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::codes::SupervisionTable;
use super::network::Model;
use super::params::{ParamId, ParamStore};
use super::tape::{Tape, Var};
use crate::corpus::AlignedExample;
use crate::error::{Error, Result};

/// Loss components, summed over decoding steps (and examples for batches).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossParts {
    pub total: f64,
    pub l_n: f64,
    pub l_ph: f64,
}

impl LossParts {
    fn add(&mut self, other: LossParts) {
        self.total += other.total;
        self.l_n += other.l_n;
        self.l_ph += other.l_ph;
    }

    pub fn scaled(self, c: f64) -> LossParts {
        LossParts {
            total: self.total * c,
            l_n: self.l_n * c,
            l_ph: self.l_ph * c,
        }
    }
}

struct Graph {
    total: Var,
    l_n: Var,
    l_ph: Option<Var>,
}

impl Model {
    /// Teacher-forced graph for one example: prefix `[bos, t̂_0 .. t̂_{m-2}]`
    /// predicts `t̂_0 .. t̂_{m-1}`.
    fn example_graph(&self, tape: &mut Tape, ex: &AlignedExample, sup: &SupervisionTable) -> Result<Graph> {
        let e_in = self.embed(tape, &ex.context)?;
        let encoded = self.encode(tape, e_in);
        let mut prefix = Vec::with_capacity(ex.target.len());
        prefix.push(self.vocab.bos());
        prefix.extend_from_slice(&ex.target[..ex.target.len() - 1]);
        let hidden = self.decode(tape, encoded, ex.position, &prefix)?;

        let logits_n = self.word_logits(tape, hidden);
        let l_n = tape.cross_entropy(logits_n, &ex.target);

        let mut l_ph = None;
        if self.config.phoneme_head {
            let steps: Vec<usize> = (0..ex.target.len())
                .filter(|&l| ex.target[l] != self.vocab.eos() && sup.has(ex.target[l]))
                .collect();
            if !steps.is_empty() {
                let rows: Vec<Var> = steps.iter().map(|&l| tape.slice_rows(hidden, l, 1)).collect();
                let h = if rows.len() == 1 { rows[0] } else { tape.concat_rows(&rows) };
                let logits_ph = self.phoneme_logits(tape, h);
                let mut log_r = Array2::zeros((steps.len(), self.config.vocab_size));
                for (i, &l) in steps.iter().enumerate() {
                    log_r.row_mut(i).assign(&sup.log_row(ex.target[l]).expect("checked"));
                }
                l_ph = Some(tape.kl_to(logits_ph, &log_r));
            }
        }
        let total = match l_ph {
            Some(kl) => tape.combine(&[(l_n, 1.0), (kl, self.config.lambda_ph)]),
            None => l_n,
        };
        Ok(Graph { total, l_n, l_ph })
    }

    /// Teacher-forced `P_gen` rows, one per target step.
    pub fn teacher_forced_p_gen(&self, ex: &AlignedExample) -> Result<Vec<ndarray::Array1<f64>>> {
        let encoded = self.encode_tokens(&ex.context)?;
        let mut prefix = vec![self.vocab.bos()];
        prefix.extend_from_slice(&ex.target[..ex.target.len() - 1]);
        let mut tape = Tape::new(&self.params);
        let enc = tape.constant(encoded);
        let hidden = self.decode(&mut tape, enc, ex.position, &prefix)?;
        let rows = tape.value(hidden).clone();
        Ok(rows.rows().into_iter().map(|d| self.step_distributions(&d.to_owned()).p_gen).collect())
    }

    fn parts(tape: &Tape, g: &Graph) -> LossParts {
        LossParts {
            total: tape.scalar(g.total),
            l_n: tape.scalar(g.l_n),
            l_ph: g.l_ph.map_or(0.0, |v| tape.scalar(v)),
        }
    }

    /// Loss of one example under `params`.
    pub fn example_loss_with(&self, params: &ParamStore, ex: &AlignedExample, sup: &SupervisionTable) -> Result<LossParts> {
        let mut tape = Tape::new(params);
        let g = self.example_graph(&mut tape, ex, sup)?;
        Ok(Self::parts(&tape, &g))
    }

    /// `(L_tot, L_n, L_ph)` summed over the batch.
    pub fn loss_total(&self, batch: &[AlignedExample], sup: &SupervisionTable) -> Result<LossParts> {
        self.loss_total_with(&self.params, batch, sup)
    }

    pub fn loss_total_with(&self, params: &ParamStore, batch: &[AlignedExample], sup: &SupervisionTable) -> Result<LossParts> {
        let per: Vec<LossParts> = batch
            .par_iter()
            .map(|ex| self.example_loss_with(params, ex, sup))
            .collect::<Result<_>>()?;
        let mut sum = LossParts::default();
        for p in per {
            sum.add(p);
        }
        Ok(sum)
    }

    fn example_gradient(&self, ex: &AlignedExample, sup: &SupervisionTable) -> Result<(LossParts, ParamStore)> {
        let mut tape = Tape::new(&self.params);
        let g = self.example_graph(&mut tape, ex, sup)?;
        let mut grads = ParamStore::zeros_like(&self.params);
        tape.backward(g.total, &mut grads);
        Ok((Self::parts(&tape, &g), grads))
    }

    /// Summed loss and gradient of `L_tot` over the batch.
    ///
    /// Examples are differentiated in parallel; partial gradients are added
    /// in batch order so the result does not depend on thread scheduling.
    pub fn gradients(&self, batch: &[AlignedExample], sup: &SupervisionTable) -> Result<(LossParts, ParamStore)> {
        let per: Vec<(LossParts, ParamStore)> = batch
            .par_iter()
            .map(|ex| self.example_gradient(ex, sup))
            .collect::<Result<_>>()?;
        let mut loss = LossParts::default();
        let mut grads = ParamStore::zeros_like(&self.params);
        for (l, g) in per {
            loss.add(l);
            grads.add_assign(&g);
        }
        if let Some(id) = grads.first_non_finite() {
            return Err(Error::NonFiniteGradient { array: id.name().to_string() });
        }
        Ok((loss, grads))
    }
}

/// One sampled coordinate of a gradient check.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckEntry {
    pub param: ParamId,
    pub index: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub entries: Vec<GradCheckEntry>,
    pub max_rel_error: f64,
}

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;
/// Relative errors are taken against `max(|analytic|, |numeric|, floor)` so
/// coordinates with vanishing gradient are judged on absolute error.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

/// Reverse-mode gradients of the batch loss, plus (when `check` is set) a
/// comparison against central finite differences at `check.0` coordinates
/// drawn with seed `check.1`.
pub fn backward_and_check(
    model: &Model,
    batch: &[AlignedExample],
    sup: &SupervisionTable,
    check: Option<(usize, u64)>,
) -> Result<(ParamStore, Option<GradCheckReport>)> {
    let (loss, grads) = model.gradients(batch, sup)?;
    if !loss.total.is_finite() {
        return Err(Error::NonFiniteGradient { array: "loss".into() });
    }
    let Some((n, seed)) = check else { return Ok((grads, None)) };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = model.params.clone();
    let mut entries = Vec::with_capacity(n);
    for _ in 0..n {
        let id = ParamId::ALL[rng.random_range(0..ParamId::ALL.len())];
        let (r, c) = params.get(id).dim();
        let index = (rng.random_range(0..r), rng.random_range(0..c));
        let orig = params.get(id)[index];
        params.get_mut(id)[index] = orig + FD_STEP;
        let plus = model.loss_total_with(&params, batch, sup)?.total;
        params.get_mut(id)[index] = orig - FD_STEP;
        let minus = model.loss_total_with(&params, batch, sup)?.total;
        params.get_mut(id)[index] = orig;
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        let analytic = grads.get(id)[index];
        let denom = analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR);
        entries.push(GradCheckEntry {
            param: id,
            index,
            analytic,
            numeric,
            rel_error: (analytic - numeric).abs() / denom,
        });
    }
    let max_rel_error = entries.iter().map(|e| e.rel_error).fold(0.0, f64::max);
    Ok((grads, Some(GradCheckReport { entries, max_rel_error })))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{induce_vocab, training_items_for_corpus, ParallelPair};
    use crate::model::ModelConfig;
    use crate::phonetics::PronouncingLexicon;

    fn fixture(d_model: usize) -> (Model, Vec<AlignedExample>, SupervisionTable) {
        let lex = PronouncingLexicon::builtin();
        let pairs = vec![
            ParallelPair::new("p1", "the cue was late", "the queue was late"),
            ParallelPair::new("p2", "only labored the gags", "only labored labor thes gag"),
            ParallelPair::new("p3", "as bestial", "as best atial"),
        ];
        let texts: Vec<String> = pairs.iter().flat_map(|p| [p.gt.clone(), p.asr.clone()]).collect();
        let vocab = induce_vocab(&texts, 60).unwrap();
        let mut cfg = ModelConfig::desk(0, 0);
        cfg.d_model = d_model;
        cfg.n_heads = 2;
        cfg.max_len = 16;
        let model = Model::new(cfg, vocab, &lex, 11).unwrap();
        let items = training_items_for_corpus(&pairs, &model.vocab, &lex);
        let sup = SupervisionTable::build(&model.vocab, &lex);
        (model, items, sup)
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (model, items, sup) = fixture(16);
        assert!(!items.is_empty());
        let (_, report) = backward_and_check(&model, &items, &sup, Some((60, 3))).unwrap();
        let report = report.unwrap();
        assert!(report.max_rel_error <= 1e-4, "{report:#?}");
    }

    #[test]
    fn lambda_ph_zero_reduces_to_word_loss() {
        let (mut model, items, sup) = fixture(8);
        model.config.lambda_ph = 0.0;
        let l = model.loss_total(&items, &sup).unwrap();
        assert_eq!(l.total, l.l_n);
        assert!(l.l_ph > 0.0);
        let (_, g) = model.gradients(&items, &sup).unwrap();
        assert!(g.get(ParamId::BiasPh).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn duplicated_example_doubles_gradient() {
        let (model, items, sup) = fixture(8);
        let one = &items[..1];
        let two = vec![items[0].clone(), items[0].clone()];
        let (l1, g1) = model.gradients(one, &sup).unwrap();
        let (l2, g2) = model.gradients(&two, &sup).unwrap();
        assert_eq!(l2.total, 2.0 * l1.total);
        for ((_, a), (_, b)) in g1.iter().zip(g2.iter()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert!((2.0 * x - y).abs() <= 1e-12 * (1.0 + y.abs()));
            }
        }
    }
}
