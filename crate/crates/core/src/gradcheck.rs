//! Central finite-difference check of the analytic gradient of `−elbo`.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, StcnError};
use crate::model::{Model, ModelConfig, Variant};
use crate::observation::ObsConfig;
use crate::seqdata::SequenceBatch;
use crate::tcn::TcnConfig;

/// Finite-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Factor applied to initial kernels before checking. Larger weights keep
/// every derivative well above the roundoff floor of the difference quotient.
const KERNEL_GAIN: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradCheckPreset {
    Tiny,
    TinyDense,
    TinyWavenet,
}

impl std::str::FromStr for GradCheckPreset {
    type Err = StcnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tiny" => Ok(Self::Tiny),
            "tiny-dense" => Ok(Self::TinyDense),
            "tiny-wavenet" => Ok(Self::TinyWavenet),
            other => Err(StcnError::Argument(format!(
                "unknown preset `{other}` (expected tiny|tiny-dense|tiny-wavenet)"
            ))),
        }
    }
}

impl GradCheckPreset {
    /// L=2, K=2, F=8, dims=[3,2], D=2, Normal observations.
    pub fn model_config(self) -> ModelConfig {
        let variant = match self {
            Self::Tiny => Variant::Stcn,
            Self::TinyDense => Variant::StcnDense,
            Self::TinyWavenet => Variant::Wavenet,
        };
        ModelConfig {
            variant,
            tcn: TcnConfig {
                layers: 2,
                blocks: 2,
                filters: 8,
            },
            latent_dims: vec![3, 2],
            obs: ObsConfig::normal(),
            input_dim: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// `name[flat index]` of the scalar with the largest relative error.
    pub worst_param: String,
    /// Analytic and numeric derivative at `worst_param`.
    pub worst_pair: (f64, f64),
    pub checked: usize,
    pub tol: f64,
    pub passed: bool,
}

/// `|a − n| / max(1e-8, |a| + |n|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Options of [`grad_check`].
#[derive(Debug, Clone, Default)]
pub struct GradCheckOptions {
    /// Fault injection: the analytic gradient of this parameter is doubled.
    pub corrupt_param: Option<String>,
}

/// Checks every scalar parameter of a freshly initialized model with a
/// `B=2, T=6` batch (second sequence of length 5) and frozen noise.
///
/// Biases are re-drawn at random before checking so that no ReLU or clamp
/// sits exactly on its kink.
pub fn grad_check(cfg: &ModelConfig, tol: f64, seed: u64, opts: &GradCheckOptions) -> Result<GradCheckReport> {
    let mut model = Model::<f64>::new(cfg.clone(), seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6ead_c4ec);
    for p in model.store_mut().iter_mut() {
        if p.name.ends_with(".bias") {
            p.value.iter_mut().for_each(|v| *v = rng.random_range(-0.3..0.3));
        } else {
            p.value.iter_mut().for_each(|v| *v *= KERNEL_GAIN);
        }
    }
    let d = cfg.input_dim;
    let seqs: Vec<Array2<f32>> = [6usize, 5]
        .iter()
        .map(|&t| Array2::from_shape_simple_fn((t, d), || rng.sample::<f32, _>(StandardNormal)))
        .collect();
    let views: Vec<_> = seqs.iter().map(|s| s.view()).collect();
    let batch = SequenceBatch::<f64>::from_views(&views)?;
    let noise = model.sample_noise(&batch, &mut rng);

    let (_, _, grads) = model.loss_and_grads(&batch, &noise, 1.0)?;
    let corrupt = match &opts.corrupt_param {
        Some(name) => Some(model.store().find(name).ok_or_else(|| {
            StcnError::Argument(format!("no parameter named `{name}`"))
        })?),
        None => None,
    };

    let neg_elbo = |m: &Model<f64>| -> Result<f64> { Ok(-m.elbo_step(&batch, &noise)?.elbo) };
    let mut worst = (0.0f64, String::new(), (0.0, 0.0));
    let mut checked = 0;
    let ids: Vec<_> = model.store().ids().collect();
    for id in ids {
        let name = model.store().param(id).name.clone();
        let scale = if corrupt == Some(id) { 2.0 } else { 1.0 };
        for i in 0..grads.get(id).len() {
            let orig = model.store().values(id)[i];
            model.store_mut().values_mut(id)[i] = orig + FD_STEP;
            let up = neg_elbo(&model)?;
            model.store_mut().values_mut(id)[i] = orig - FD_STEP;
            let down = neg_elbo(&model)?;
            model.store_mut().values_mut(id)[i] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let analytic = scale * grads.get(id)[i];
            let err = relative_error(analytic, numeric);
            if !(err <= worst.0) {
                worst = (err, format!("{name}[{i}]"), (analytic, numeric));
            }
            checked += 1;
        }
    }
    Ok(GradCheckReport {
        max_rel_err: worst.0,
        worst_param: worst.1,
        worst_pair: worst.2,
        checked,
        tol,
        passed: worst.0 < tol,
    })
}
