//! Optimization loop: Adam with exponential learning-rate decay, linear KL
//! annealing and early stopping on the validation ELBO.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, StcnError};
use crate::eval::evaluate;
use crate::model::{Model, ModelConfig};
use crate::params::{Gradients, ParamStore};
use crate::real::Real;
use crate::seqdata::{make_batches, SequenceSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Multiplicative decay applied every `lr_decay_steps` (continuously).
    pub lr_decay_rate: f64,
    pub lr_decay_steps: usize,
    /// Per-step increment of the KL weight.
    pub kl_anneal_rate: f64,
    pub max_steps: usize,
    pub eval_every: usize,
    /// Evaluations without improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub precision: Precision,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 20,
            learning_rate: 5e-4,
            lr_decay_rate: 0.94,
            lr_decay_steps: 1000,
            kl_anneal_rate: 1e-4,
            max_steps: 20_000,
            eval_every: 500,
            patience: 5,
            seed: 0,
            precision: Precision::F32,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(StcnError::Config(m.into()));
        if self.batch_size == 0 {
            return bad("train.batch_size must be ≥ 1");
        }
        if !(self.learning_rate > 0.0) || !(self.lr_decay_rate > 0.0) || !(self.kl_anneal_rate > 0.0) {
            return bad("train rates must be positive");
        }
        if self.lr_decay_steps == 0 || self.eval_every == 0 {
            return bad("train.lr_decay_steps and train.eval_every must be ≥ 1");
        }
        if self.patience == 0 {
            return bad("train.patience must be ≥ 1");
        }
        Ok(())
    }
}

/// KL weight at `step`: `min(1, step · rate)`.
pub fn kl_anneal_weight(step: usize, rate: f64) -> f64 {
    (step as f64 * rate).min(1.0)
}

/// `lr₀ · rate^(step / decay_steps)` with a continuous exponent.
pub fn lr_schedule(step: usize, lr0: f64, rate: f64, decay_steps: usize) -> f64 {
    lr0 * rate.powf(step as f64 / decay_steps as f64)
}

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct Adam<F> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    m: Vec<Vec<F>>,
    v: Vec<Vec<F>>,
}

impl<F: Real> Adam<F> {
    pub fn new(store: &ParamStore<F>) -> Self {
        let zeros: Vec<Vec<F>> = store.iter().map(|p| vec![F::zero(); p.value.len()]).collect();
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn update(&mut self, store: &mut ParamStore<F>, grads: &Gradients<F>, lr: f64) {
        self.step += 1;
        let (b1, b2) = (F::lit(self.beta1), F::lit(self.beta2));
        let c1 = F::one() - b1.powi(self.step);
        let c2 = F::one() - b2.powi(self.step);
        let (lr, eps) = (F::lit(lr), F::lit(self.eps));
        for (i, p) in store.iter_mut().enumerate() {
            let g = grads.by_index(i);
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for j in 0..p.value.len() {
                m[j] = b1 * m[j] + (F::one() - b1) * g[j];
                v[j] = b2 * v[j] + (F::one() - b2) * g[j] * g[j];
                let m_hat = m[j] / c1;
                let v_hat = v[j] / c2;
                p.value[j] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

/// One evaluation event of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRecord {
    pub step: usize,
    /// Mean annealed training loss over the steps since the previous record.
    pub loss: f64,
    pub valid_elbo: f64,
    pub kl_weight: f64,
    pub lr: f64,
    /// Validation KL per layer (bottom first), summed per sequence.
    pub kl_layers: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct History {
    pub records: Vec<HistoryRecord>,
}

impl History {
    pub fn to_csv(&self) -> String {
        let layers = self.records.first().map_or(0, |r| r.kl_layers.len());
        let mut out = String::from("step,loss,valid_elbo,kl_weight,lr");
        for l in 1..=layers {
            let _ = write!(out, ",kl_layer_{l}");
        }
        out.push('\n');
        for r in &self.records {
            let _ = write!(out, "{},{},{},{},{}", r.step, r.loss, r.valid_elbo, r.kl_weight, r.lr);
            for k in &r.kl_layers {
                let _ = write!(out, ",{k}");
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<F> {
    /// Parameters at the best validation ELBO.
    pub model: Model<F>,
    pub history: History,
    pub best_step: usize,
    pub best_valid_elbo: f64,
}

/// Seed of the fixed validation noise, derived from the training seed.
fn valid_seed(seed: u64) -> u64 {
    seed ^ 0x5eed_0f_7a11d
}

/// Trains a freshly initialized model.
pub fn train<F: Real>(
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    train_set: &SequenceSet,
    valid_set: &SequenceSet,
) -> Result<TrainOutcome<F>> {
    let model = Model::new(model_cfg.clone(), train_cfg.seed)?;
    train_model(model, train_cfg, train_set, valid_set)
}

/// Trains `model` in place of a fresh initialization.
///
/// The optimized objective is `−(recon − w·KL)` with `w` from
/// [`kl_anneal_weight`]; model selection uses the unweighted validation ELBO
/// evaluated every `eval_every` steps (and once before the first update).
pub fn train_model<F: Real>(
    mut model: Model<F>,
    cfg: &TrainConfig,
    train_set: &SequenceSet,
    valid_set: &SequenceSet,
) -> Result<TrainOutcome<F>> {
    cfg.validate()?;
    if train_set.is_empty() || valid_set.is_empty() {
        return Err(StcnError::Argument("training and validation sets must be non-empty".into()));
    }
    let mut adam = Adam::new(model.store());
    let mut noise_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut history = History::default();
    let layers = model.latent_dims().len();

    let mut epoch = 0u64;
    let mut batches = make_batches::<F>(train_set, cfg.batch_size, Some(cfg.seed.wrapping_add(epoch)))?;
    let mut cursor = 0;

    let record = |model: &Model<F>, step: usize, loss: f64| -> Result<HistoryRecord> {
        let report = evaluate(model, valid_set, 1, valid_seed(cfg.seed))?;
        Ok(HistoryRecord {
            step,
            loss,
            valid_elbo: report.avg_elbo_per_sequence,
            kl_weight: kl_anneal_weight(step, cfg.kl_anneal_rate),
            lr: lr_schedule(step, cfg.learning_rate, cfg.lr_decay_rate, cfg.lr_decay_steps),
            kl_layers: if layers == 0 { Vec::new() } else { report.kl_per_layer },
        })
    };

    // step-0 record: loss on the first batch before any update
    let initial_loss = {
        let batch = &batches[0];
        let noise = model.sample_noise(batch, &mut noise_rng.clone());
        let (loss, _, _) = model.loss_and_grads(batch, &noise, F::zero())?;
        loss.as_f64()
    };
    if !initial_loss.is_finite() {
        return Err(StcnError::Divergence {
            step: 0,
            detail: format!("initial loss is {initial_loss}"),
        });
    }
    history.records.push(record(&model, 0, initial_loss)?);
    let mut best_valid = history.records[0].valid_elbo;
    let mut best_model = model.clone();
    let mut best_step = 0;
    let mut since_best = 0;
    let mut loss_acc = 0.0;
    let mut loss_n = 0usize;

    for step in 0..cfg.max_steps {
        if cursor == batches.len() {
            epoch += 1;
            batches = make_batches::<F>(train_set, cfg.batch_size, Some(cfg.seed.wrapping_add(epoch)))?;
            cursor = 0;
        }
        let batch = &batches[cursor];
        cursor += 1;

        let w = kl_anneal_weight(step, cfg.kl_anneal_rate);
        let lr = lr_schedule(step, cfg.learning_rate, cfg.lr_decay_rate, cfg.lr_decay_steps);
        let noise = model.sample_noise(batch, &mut noise_rng);
        let (loss, _, grads) = model.loss_and_grads(batch, &noise, F::lit(w))?;
        let loss = loss.as_f64();
        if !loss.is_finite() {
            return Err(StcnError::Divergence {
                step,
                detail: format!("loss is {loss}"),
            });
        }
        if !grads.all_finite() {
            return Err(StcnError::Divergence {
                step,
                detail: "non-finite gradient".into(),
            });
        }
        adam.update(model.store_mut(), &grads, lr);
        loss_acc += loss;
        loss_n += 1;

        let done = step + 1;
        if done % cfg.eval_every == 0 || done == cfg.max_steps {
            let rec = record(&model, done, loss_acc / loss_n as f64)?;
            loss_acc = 0.0;
            loss_n = 0;
            if !rec.valid_elbo.is_finite() {
                return Err(StcnError::Divergence {
                    step: done,
                    detail: format!("validation ELBO is {}", rec.valid_elbo),
                });
            }
            let improved = rec.valid_elbo > best_valid;
            history.records.push(rec);
            if improved {
                best_valid = history.records.last().unwrap().valid_elbo;
                best_model = model.clone();
                best_step = done;
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= cfg.patience {
                    break;
                }
            }
        }
    }
    Ok(TrainOutcome {
        model: best_model,
        history,
        best_step,
        best_valid_elbo: best_valid,
    })
}
