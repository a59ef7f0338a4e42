//! Dataset-level evaluation and model-comparison tables.
//!
//! Noise for sequence `i` and Monte-Carlo draw `k` comes from a generator
//! seeded by `(seed, i, k)`, so reports do not depend on how sequences are
//! grouped into batches or on the number of worker threads.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, StcnError};
use crate::latent::LatentNoise;
use crate::model::Model;
use crate::real::Real;
use crate::seqdata::{SequenceBatch, SequenceSet};

/// Sequences evaluated together in one forward pass.
const EVAL_CHUNK: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub avg_elbo_per_sequence: f64,
    pub avg_recon: f64,
    /// Sum of `kl_per_layer`.
    pub kl_total: f64,
    /// Mean over sequences of the per-sequence summed KL, layer 1 (bottom)
    /// first. Units: nats per sequence.
    pub kl_per_layer: Vec<f64>,
    pub n_sequences: usize,
    /// Mean number of valid steps per sequence.
    pub avg_steps: f64,
    pub mc_samples: usize,
    pub seed: u64,
}

impl EvalReport {
    /// Per-layer KL in nats per step.
    pub fn kl_per_step(&self) -> Vec<f64> {
        self.kl_per_layer.iter().map(|k| k / self.avg_steps).collect()
    }
}

fn sequence_rng(seed: u64, index: usize, draw: usize) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(index as u64).to_le_bytes());
    key[16..24].copy_from_slice(&(draw as u64).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Per-sequence results: (elbo, recon, kl per layer).
type SeqStats = (f64, f64, Vec<f64>);

fn eval_chunk<F: Real>(
    model: &Model<F>,
    set: &SequenceSet,
    indices: &[usize],
    mc_samples: usize,
    seed: u64,
) -> Result<Vec<SeqStats>> {
    let batch = SequenceBatch::<F>::from_set(set, indices)?;
    let layers = model.latent_dims().len();
    let mut acc: Vec<SeqStats> = vec![(0.0, 0.0, vec![0.0; layers]); indices.len()];
    for draw in 0..mc_samples {
        let mut rngs: Vec<ChaCha8Rng> = indices.iter().map(|&i| sequence_rng(seed, i, draw)).collect();
        let noise = LatentNoise::per_sequence(model.latent_dims(), batch.max_len(), &mut rngs);
        let bd = model.elbo_step(&batch, &noise)?;
        let recon = bd.recon_per_sequence();
        let kls: Vec<_> = (0..layers).map(|l| bd.kl_per_sequence(l)).collect();
        for (b, stats) in acc.iter_mut().enumerate() {
            stats.0 += bd.per_sequence[b].as_f64();
            stats.1 += recon[b].as_f64();
            for l in 0..layers {
                stats.2[l] += kls[l][b].as_f64();
            }
        }
    }
    let k = mc_samples as f64;
    for stats in &mut acc {
        stats.0 /= k;
        stats.1 /= k;
        stats.2.iter_mut().for_each(|v| *v /= k);
    }
    Ok(acc)
}

/// Averages the ELBO and its terms over all sequences of `set`, using
/// `mc_samples` independent noise draws per sequence.
pub fn evaluate<F: Real>(
    model: &Model<F>,
    set: &SequenceSet,
    mc_samples: usize,
    seed: u64,
) -> Result<EvalReport> {
    if mc_samples == 0 {
        return Err(StcnError::Argument("mc_samples must be ≥ 1".into()));
    }
    if set.is_empty() {
        return Err(StcnError::Argument("cannot evaluate an empty set".into()));
    }
    if set.feature_dim() != model.config().input_dim {
        return Err(StcnError::Shape(format!(
            "data has D={}, model expects D={}",
            set.feature_dim(),
            model.config().input_dim
        )));
    }
    let indices: Vec<usize> = (0..set.len()).collect();
    let chunks: Vec<Vec<SeqStats>> = indices
        .par_chunks(EVAL_CHUNK)
        .map(|idx| eval_chunk(model, set, idx, mc_samples, seed))
        .collect::<Result<_>>()?;
    let layers = model.latent_dims().len();
    let n = set.len() as f64;
    let (mut elbo, mut recon, mut kl) = (0.0, 0.0, vec![0.0; layers]);
    for (e, r, k) in chunks.iter().flatten() {
        elbo += e;
        recon += r;
        for l in 0..layers {
            kl[l] += k[l];
        }
    }
    let kl_per_layer: Vec<f64> = kl.iter().map(|k| k / n).collect();
    Ok(EvalReport {
        avg_elbo_per_sequence: elbo / n,
        avg_recon: recon / n,
        kl_total: kl_per_layer.iter().fold(0.0, |a, b| a + b),
        kl_per_layer,
        n_sequences: set.len(),
        avg_steps: set.total_steps() as f64 / n,
        mc_samples,
        seed,
    })
}

/// CSV table with one row per model, sorted by name.
///
/// KL columns are indexed bottom-first (`kl_1` is the lowest layer, `kl_L`
/// the top-most); rows with fewer layers leave trailing cells empty.
pub fn compare(reports: &BTreeMap<String, EvalReport>) -> String {
    let layers = reports.values().map(|r| r.kl_per_layer.len()).max().unwrap_or(0);
    let mut out = String::from("model,avg_elbo,avg_recon,kl_total");
    for l in 1..=layers {
        let _ = write!(out, ",kl_{l}");
    }
    out.push('\n');
    for (name, r) in reports {
        let _ = write!(out, "{name},{},{},{}", r.avg_elbo_per_sequence, r.avg_recon, r.kl_total);
        for l in 0..layers {
            match r.kl_per_layer.get(l) {
                Some(k) => {
                    let _ = write!(out, ",{k}");
                }
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

/// Human-readable KL table with the top-most layer labelled explicitly.
pub fn kl_table(name: &str, r: &EvalReport) -> String {
    let layers = r.kl_per_layer.len();
    let mut out = format!(
        "{name}: avg ELBO/sequence {:.3}, recon {:.3}, KL total {:.3} (nats/sequence)\n",
        r.avg_elbo_per_sequence, r.avg_recon, r.kl_total
    );
    for (l, k) in r.kl_per_layer.iter().enumerate() {
        let tag = if l + 1 == layers { " (top-most)" } else if l == 0 { " (bottom)" } else { "" };
        let _ = writeln!(
            out,
            "  KL{}{tag}: {:.4} nats/sequence, {:.5} nats/step",
            l + 1,
            k,
            k / r.avg_steps
        );
    }
    out
}
