#![allow(dead_code)]

use ndarray::{concatenate, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use stcn::latent::LatentNoise;
use stcn::model::{Model, ModelConfig, Variant};
use stcn::observation::{ObsConfig, ObservationParams};
use stcn::seqdata::SequenceBatch;
use stcn::tcn::TcnConfig;

pub const ALL_VARIANTS: [Variant; 4] = [
    Variant::Stcn,
    Variant::StcnDense,
    Variant::Wavenet,
    Variant::WavenetDense,
];

/// Small model; the head is kept shallow so no ReLU layer goes fully dead.
pub fn config(variant: Variant, layers: usize, blocks: usize, obs: ObsConfig) -> ModelConfig {
    ModelConfig {
        variant,
        tcn: TcnConfig {
            layers,
            blocks,
            filters: 12,
        },
        latent_dims: (0..layers).map(|l| 3 - l.min(2)).collect(),
        obs: ObsConfig { head_depth: 2, ..obs },
        input_dim: 2,
    }
}

/// Model with random (non-zero) biases so every unit is active.
pub fn model(cfg: ModelConfig, seed: u64) -> Model<f64> {
    let mut m = Model::<f64>::new(cfg, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
    for p in m.store_mut().iter_mut() {
        if p.name.ends_with(".bias") {
            p.value.iter_mut().for_each(|v| *v = rng.random_range(-0.3..0.3));
        }
    }
    m
}

pub fn random_seqs(lengths: &[usize], dim: usize, seed: u64) -> Vec<Array2<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    lengths
        .iter()
        .map(|&t| Array2::from_shape_simple_fn((t, dim), || rng.sample::<f32, _>(StandardNormal)))
        .collect()
}

pub fn batch(seqs: &[Array2<f32>]) -> SequenceBatch<f64> {
    let views: Vec<_> = seqs.iter().map(|s| s.view()).collect();
    SequenceBatch::from_views(&views).unwrap()
}

pub fn noise(m: &Model<f64>, b: &SequenceBatch<f64>, seed: u64) -> LatentNoise<f64> {
    m.sample_noise(b, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// All observation parameters as one `[B·T × C]` matrix.
pub fn param_rows(p: &ObservationParams<f64>) -> Array2<f64> {
    match p {
        ObservationParams::Normal { mean, std } => {
            concatenate(Axis(1), &[mean.rows().view(), std.rows().view()]).unwrap()
        }
        ObservationParams::Gmm { logits, means, stds } => concatenate(
            Axis(1),
            &[logits.rows().view(), means.rows().view(), stds.rows().view()],
        )
        .unwrap(),
    }
}
