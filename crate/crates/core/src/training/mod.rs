//! Adam training of the corruption model, dev evaluation and checkpoints.

mod checkpoint;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::AlignedExample;
use crate::error::{Error, Result};
use crate::generation::argmax_lowest;
use crate::model::{LossParts, Model, ParamStore, SupervisionTable};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Global gradient-norm ceiling.
    pub clip_norm: f64,
}

impl TrainConfig {
    /// Tiny-model defaults: lr 1e-3, 30 epochs, batch 32.
    pub fn desk() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            epochs: 30,
            batch_size: 32,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            clip_norm: 5.0,
        }
    }

    /// The published fine-tuning schedule: lr 5e-5 for 20 epochs.
    pub fn full_scale() -> Self {
        TrainConfig {
            learning_rate: 5e-5,
            epochs: 20,
            ..Self::desk()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning rate must be positive");
        }
        if self.epochs == 0 {
            return fail("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return fail("batch size must be at least 1");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return fail("Adam moment coefficients must lie in [0, 1)");
        }
        if self.adam_eps.is_nan() || self.adam_eps <= 0.0 || self.clip_norm.is_nan() || self.clip_norm <= 0.0 {
            return fail("adam_eps and clip_norm must be positive");
        }
        Ok(())
    }
}

/// Scales `grads` down to `max_norm` if its global L2 norm exceeds it.
/// Returns the norm before clipping.
pub fn clip_gradients(grads: &mut ParamStore, max_norm: f64) -> f64 {
    let norm = grads.l2_norm();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
    norm
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    m: ParamStore,
    v: ParamStore,
    t: i32,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new(params: &ParamStore, cfg: &TrainConfig) -> Self {
        Adam {
            m: ParamStore::zeros_like(params),
            v: ParamStore::zeros_like(params),
            t: 0,
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.adam_eps,
        }
    }

    pub fn step(&mut self, params: &mut ParamStore, grads: &ParamStore) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        let moments = self.m.iter_mut().zip(self.v.iter_mut());
        for (((_, p), (_, g)), ((_, m), (_, v))) in params.iter_mut().zip(grads.iter()).zip(moments) {
            ndarray::Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            });
        }
    }
}

/// Mean per-example losses of one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    pub loss: LossParts,
}

/// Row 0 is the loss of the initial parameters; row `e` is the mean over
/// the batches of epoch `e`, measured before each update.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossLog {
    pub epochs: Vec<EpochLoss>,
}

impl LossLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,L_tot,L_n,L_ph\n");
        for e in &self.epochs {
            let _ = writeln!(out, "{},{},{},{}", e.epoch, e.loss.total, e.loss.l_n, e.loss.l_ph);
        }
        out
    }

    pub fn initial(&self) -> Option<f64> {
        self.epochs.first().map(|e| e.loss.total)
    }

    pub fn last(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.loss.total)
    }
}

/// Clips over-long targets to `M − 1` tokens plus `eos` and drops items
/// whose sentence exceeds the encoder length. Returns the kept items and
/// the number dropped.
pub fn prepare_items(items: Vec<AlignedExample>, model: &Model) -> (Vec<AlignedExample>, usize) {
    let max_gen = model.config.max_gen_len;
    let eos = model.vocab.eos();
    let before = items.len();
    let kept: Vec<AlignedExample> = items
        .into_iter()
        .filter(|ex| ex.context.len() <= model.config.max_len)
        .map(|mut ex| {
            if ex.target.len() > max_gen {
                ex.target.truncate(max_gen - 1);
                ex.target.push(eos);
            }
            ex
        })
        .collect();
    let dropped = before - kept.len();
    (kept, dropped)
}

/// Optimizes `model.params` in place.
///
/// Each epoch visits the data in a seeded shuffle order; a batch's
/// gradient is the mean of per-example gradients, clipped, then applied
/// with Adam. A non-finite loss or gradient aborts the run and hands back
/// the parameters from before the failing batch.
pub fn train(model: &mut Model, data: &[AlignedExample], sup: &SupervisionTable, cfg: &TrainConfig) -> Result<LossLog> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut log = LossLog::default();
    let initial = model.loss_total(data, sup)?.scaled(1.0 / data.len() as f64);
    log.epochs.push(EpochLoss { epoch: 0, loss: initial });

    let mut adam = Adam::new(&model.params, cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = LossParts::default();
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<AlignedExample> = chunk.iter().map(|&i| data[i].clone()).collect();
            let abort = || Error::NonFiniteLoss {
                epoch,
                batch: b,
                last_good: Box::new(model.params.clone()),
            };
            let (loss, mut grads) = match model.gradients(&batch, sup) {
                Ok(r) => r,
                Err(Error::NonFiniteGradient { .. }) => return Err(abort()),
                Err(e) => return Err(e),
            };
            if !loss.total.is_finite() {
                return Err(abort());
            }
            sum.total += loss.total;
            sum.l_n += loss.l_n;
            sum.l_ph += loss.l_ph;
            grads.scale(1.0 / batch.len() as f64);
            clip_gradients(&mut grads, cfg.clip_norm);
            adam.step(&mut model.params, &grads);
        }
        log.epochs.push(EpochLoss {
            epoch,
            loss: sum.scaled(1.0 / data.len() as f64),
        });
    }
    if let Some(id) = model.params.first_non_finite() {
        return Err(Error::NonFiniteGradient { array: id.name().to_string() });
    }
    Ok(log)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DevReport {
    pub examples: usize,
    pub mean_l_n: f64,
    pub mean_l_ph: f64,
    /// Fraction of teacher-forced steps where argmax `P_gen` is the target.
    pub token_accuracy: f64,
}

/// Losses and teacher-forced accuracy on held-out items; an empty set
/// gives a zero report.
pub fn evaluate_dev(model: &Model, data: &[AlignedExample], sup: &SupervisionTable) -> Result<DevReport> {
    if data.is_empty() {
        return Ok(DevReport {
            examples: 0,
            mean_l_n: 0.0,
            mean_l_ph: 0.0,
            token_accuracy: 0.0,
        });
    }
    let loss = model.loss_total(data, sup)?;
    let (mut hits, mut steps) = (0usize, 0usize);
    for ex in data {
        for (p, &t) in model.teacher_forced_p_gen(ex)?.iter().zip(&ex.target) {
            hits += usize::from(argmax_lowest(p) == t);
            steps += 1;
        }
    }
    let n = data.len() as f64;
    Ok(DevReport {
        examples: data.len(),
        mean_l_n: loss.l_n / n,
        mean_l_ph: loss.l_ph / n,
        token_accuracy: hits as f64 / steps as f64,
    })
}
