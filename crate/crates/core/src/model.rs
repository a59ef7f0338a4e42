//! Full STCN / STCN-dense / WaveNet / WaveNet-dense models.
//!
//! For a batch `x`, the TCN produces the pyramid `d^l_t`. The conditional
//! prior of step `t` reads `d_{t−1}` (the pyramid delayed by one step, with
//! `d_0 = 0`) and the approximate posterior reads `d_t`. The observation
//! model decodes `x_t` from the bottom sample (STCN) or from all samples
//! concatenated bottom-first (STCN-dense). The deterministic baselines decode
//! `x_t` directly from the delayed pyramid: its top layer (WaveNet) or all
//! layers concatenated (WaveNet-dense).

use ndarray::{s, Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, StcnError};
use crate::latent::{
    gaussian_kl_rows, posterior_backward, posterior_pass, prior_pass, LatentHierarchy, LatentNoise,
    LatentStack,
};
use crate::observation::{loglik_backward, loglik_rows, ObsConfig, ObservationParams, OutputHead};
use crate::params::{Gradients, ParamStore};
use crate::real::Real;
use crate::seqdata::SequenceBatch;
use crate::tcn::{DeterministicPyramid, Tcn, TcnConfig};
use crate::tensor::SeqTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Stcn,
    StcnDense,
    Wavenet,
    WavenetDense,
}

impl Variant {
    pub fn is_stochastic(self) -> bool {
        matches!(self, Self::Stcn | Self::StcnDense)
    }

    pub fn is_dense(self) -> bool {
        matches!(self, Self::StcnDense | Self::WavenetDense)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Stcn => "stcn",
            Self::StcnDense => "stcn_dense",
            Self::Wavenet => "wavenet",
            Self::WavenetDense => "wavenet_dense",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub variant: Variant,
    pub tcn: TcnConfig,
    /// Latent dimension per stochastic layer, bottom (`z^1`) first.
    pub latent_dims: Vec<usize>,
    pub obs: ObsConfig,
    pub input_dim: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            variant: Variant::StcnDense,
            tcn: TcnConfig::default(),
            latent_dims: vec![8, 4, 2],
            obs: ObsConfig::default(),
            input_dim: 2,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.tcn.validate()?;
        self.obs.validate()?;
        if self.input_dim == 0 {
            return Err(StcnError::Config("input_dim must be ≥ 1".into()));
        }
        if self.variant.is_stochastic() {
            if self.latent_dims.len() != self.tcn.layers {
                return Err(StcnError::Config(format!(
                    "latent_dims has {} entries but tcn.layers = {}",
                    self.latent_dims.len(),
                    self.tcn.layers
                )));
            }
            if self.latent_dims.contains(&0) {
                return Err(StcnError::Config("latent dimensions must be ≥ 1".into()));
            }
        }
        Ok(())
    }

    /// Channels consumed by the observation head.
    pub fn head_input_channels(&self) -> usize {
        match self.variant {
            Variant::Stcn => self.latent_dims[0],
            Variant::StcnDense => self.latent_dims.iter().sum(),
            Variant::Wavenet => self.tcn.filters,
            Variant::WavenetDense => self.tcn.layers * self.tcn.filters,
        }
    }

    /// Latent dimensions actually used (empty for deterministic variants).
    pub fn active_latent_dims(&self) -> &[usize] {
        if self.variant.is_stochastic() {
            &self.latent_dims
        } else {
            &[]
        }
    }
}

/// Reconstruction and per-layer KL terms of a batch.
///
/// `recon` and every `kl_per_layer[l]` are `[B × T]` grids that are exactly
/// zero at padded positions. `per_sequence[b] = Σ_t (recon − Σ_l kl_l)` over
/// valid steps and `elbo` is the mean of `per_sequence`.
#[derive(Debug, Clone, PartialEq)]
pub struct ElboBreakdown<F> {
    pub recon: Array2<F>,
    pub kl_per_layer: Vec<Array2<F>>,
    pub per_sequence: Array1<F>,
    pub elbo: F,
}

impl<F: Real> ElboBreakdown<F> {
    /// Summed KL of layer `l` for each sequence.
    pub fn kl_per_sequence(&self, layer: usize) -> Array1<F> {
        self.kl_per_layer[layer].sum_axis(ndarray::Axis(1))
    }

    pub fn recon_per_sequence(&self) -> Array1<F> {
        self.recon.sum_axis(ndarray::Axis(1))
    }
}

#[derive(Debug, Clone)]
pub struct Model<F> {
    cfg: ModelConfig,
    store: ParamStore<F>,
    tcn: Tcn,
    latents: Option<LatentHierarchy>,
    head: OutputHead,
}

struct ForwardState<F> {
    tcn_cache: crate::tcn::TcnCache<F>,
    latent: Option<(LatentStack<F>, crate::latent::PosteriorCache<F>)>,
    params: ObservationParams<F>,
    head_cache: crate::observation::HeadCache<F>,
}

impl<F: Real> Model<F> {
    pub fn new(cfg: ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let tcn = Tcn::new(&mut store, &cfg.tcn, cfg.input_dim, &mut rng);
        let latents = cfg
            .variant
            .is_stochastic()
            .then(|| LatentHierarchy::new(&mut store, &cfg.latent_dims, cfg.tcn.filters, &mut rng));
        let head = OutputHead::new(
            &mut store,
            &cfg.obs,
            cfg.head_input_channels(),
            cfg.tcn.filters,
            cfg.input_dim,
            &mut rng,
        );
        Ok(Self {
            cfg,
            store,
            tcn,
            latents,
            head,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn store(&self) -> &ParamStore<F> {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore<F> {
        &mut self.store
    }

    pub fn tcn(&self) -> &Tcn {
        &self.tcn
    }

    pub fn latents(&self) -> Option<&LatentHierarchy> {
        self.latents.as_ref()
    }

    pub fn head(&self) -> &OutputHead {
        &self.head
    }

    pub fn num_params(&self) -> usize {
        self.store.num_scalars()
    }

    pub fn latent_dims(&self) -> &[usize] {
        self.cfg.active_latent_dims()
    }

    /// Zero noise shaped for `batch` (used by deterministic variants).
    pub fn zero_noise(&self, batch: &SequenceBatch<F>) -> LatentNoise<F> {
        LatentNoise::zeros(self.latent_dims(), batch.batch_size(), batch.max_len())
    }

    pub fn sample_noise<R: rand::Rng>(&self, batch: &SequenceBatch<F>, rng: &mut R) -> LatentNoise<F> {
        LatentNoise::sample(self.latent_dims(), batch.batch_size(), batch.max_len(), rng)
    }

    /// Runs the TCN on raw inputs.
    pub fn pyramid(&self, x: &SeqTensor<F>) -> Result<DeterministicPyramid<F>> {
        Ok(self.tcn.forward(&self.store, x)?.0)
    }

    /// What the observation head consumes for a given latent stack.
    pub fn head_input(&self, stack: &LatentStack<F>) -> Result<SeqTensor<F>> {
        match self.cfg.variant {
            Variant::Stcn => Ok(stack.layers[0].sample.clone()),
            Variant::StcnDense => SeqTensor::concat(&stack.samples()),
            _ => Err(StcnError::Usage(
                "deterministic variants have no latent samples".into(),
            )),
        }
    }

    fn deterministic_head_input(&self, prev: &DeterministicPyramid<F>) -> Result<SeqTensor<F>> {
        if self.cfg.variant.is_dense() {
            SeqTensor::concat(&prev.layers.iter().collect::<Vec<_>>())
        } else {
            Ok(prev.layers[prev.depth() - 1].clone())
        }
    }

    fn check_batch(&self, batch: &SequenceBatch<F>) -> Result<()> {
        if batch.feature_dim() != self.cfg.input_dim {
            return Err(StcnError::Shape(format!(
                "batch has D={}, model expects D={}",
                batch.feature_dim(),
                self.cfg.input_dim
            )));
        }
        Ok(())
    }

    fn run(
        &self,
        batch: &SequenceBatch<F>,
        noise: &LatentNoise<F>,
    ) -> Result<(ElboBreakdown<F>, ForwardState<F>)> {
        self.check_batch(batch)?;
        let x = &batch.data;
        let (pyramid, tcn_cache) = self.tcn.forward(&self.store, x)?;
        let prev = pyramid.shifted();
        let (latent, head_in) = match &self.latents {
            Some(h) => {
                let (stack, cache) = posterior_pass(&self.store, h, &pyramid, &prev, noise)?;
                let head_in = self.head_input(&stack)?;
                (Some((stack, cache)), head_in)
            }
            None => (None, self.deterministic_head_input(&prev)?),
        };
        let (params, head_cache) = self.head.forward(&self.store, &head_in)?;

        let mask = mask_rows(batch);
        let masked = |v: Array1<F>| {
            let mut v = v;
            v.iter_mut().zip(mask.iter()).for_each(|(a, &m)| {
                if m == F::zero() {
                    *a = F::zero();
                }
            });
            x.row_vector_to_grid(v)
        };
        let recon = masked(loglik_rows(x, &params));
        let kl_per_layer: Vec<Array2<F>> = match &latent {
            Some((stack, _)) => stack
                .layers
                .iter()
                .map(|st| {
                    let q = st.posterior.as_ref().expect("posterior state");
                    gaussian_kl_rows(q, &st.prior).map(masked)
                })
                .collect::<Result<_>>()?,
            None => Vec::new(),
        };
        let breakdown = aggregate(recon, kl_per_layer);
        Ok((
            breakdown,
            ForwardState {
                tcn_cache,
                latent,
                params,
                head_cache,
            },
        ))
    }

    /// Per-step ELBO of a batch with the given noise. For deterministic
    /// variants the noise must be empty and the result is the exact
    /// log-likelihood.
    pub fn elbo_step(&self, batch: &SequenceBatch<F>, noise: &LatentNoise<F>) -> Result<ElboBreakdown<F>> {
        Ok(self.run(batch, noise)?.0)
    }

    /// Exact autoregressive log-likelihood of a deterministic baseline.
    pub fn deterministic_loglik(&self, batch: &SequenceBatch<F>) -> Result<ElboBreakdown<F>> {
        if self.cfg.variant.is_stochastic() {
            return Err(StcnError::Usage(format!(
                "deterministic_loglik needs a wavenet variant, model is {}",
                self.cfg.variant.as_str()
            )));
        }
        self.elbo_step(batch, &self.zero_noise(batch))
    }

    /// Observation parameters for every step of `batch`.
    pub fn observation_params(
        &self,
        batch: &SequenceBatch<F>,
        noise: &LatentNoise<F>,
    ) -> Result<ObservationParams<F>> {
        Ok(self.run(batch, noise)?.1.params)
    }

    /// Observation parameters of the generative path: latents drawn from the
    /// priors given `d_{t−1}`, so step `t` depends on `x_{<t}` only.
    pub fn predictive_params(
        &self,
        batch: &SequenceBatch<F>,
        noise: &LatentNoise<F>,
    ) -> Result<ObservationParams<F>> {
        self.check_batch(batch)?;
        let prev = self.pyramid(&batch.data)?.shifted();
        let head_in = match &self.latents {
            Some(h) => self.head_input(&prior_pass(&self.store, h, &prev, noise)?)?,
            None => self.deterministic_head_input(&prev)?,
        };
        Ok(self.head.forward(&self.store, &head_in)?.0)
    }

    /// Training loss `−(1/B) Σ_b Σ_t (recon − w·Σ_l kl_l)` with its gradient.
    pub fn loss_and_grads(
        &self,
        batch: &SequenceBatch<F>,
        noise: &LatentNoise<F>,
        kl_weight: F,
    ) -> Result<(F, ElboBreakdown<F>, Gradients<F>)> {
        let (breakdown, state) = self.run(batch, noise)?;
        let inv_b = F::one() / F::lit(batch.batch_size() as f64);
        let mask = mask_rows(batch);
        let recon_w = mask.mapv(|m| -m * inv_b);
        let kl_w = mask.mapv(|m| m * kl_weight * inv_b);

        let kl_sum: F = breakdown.kl_per_layer.iter().map(|k| k.sum()).sum();
        let loss = -(breakdown.recon.sum() - kl_weight * kl_sum) * inv_b;

        let mut grads = Gradients::zeros_like(&self.store);
        let g_params = loglik_backward(&batch.data, &state.params, &recon_w);
        let g_head_in = self
            .head
            .backward(&self.store, &state.head_cache, &g_params, &mut grads);

        let depth = self.cfg.tcn.layers;
        let g_pyramid: Vec<SeqTensor<F>> = match (&self.latents, &state.latent) {
            (Some(h), Some((stack, cache))) => {
                let mut g_samples: Vec<Option<Array2<F>>> = vec![None; depth];
                if self.cfg.variant.is_dense() {
                    for (l, part) in g_head_in.split(&self.cfg.latent_dims).into_iter().enumerate() {
                        g_samples[l] = Some(part.into_rows());
                    }
                } else {
                    g_samples[0] = Some(g_head_in.into_rows());
                }
                let zero = self.zero_noise(batch);
                let noise = if noise.layers.is_empty() { &zero } else { noise };
                let g = posterior_backward(
                    &self.store,
                    h,
                    stack,
                    cache,
                    noise,
                    g_samples,
                    &kl_w,
                    &mut grads,
                );
                g.d_cur
                    .into_iter()
                    .zip(g.d_prev)
                    .map(|(mut cur, prev)| {
                        cur.add_assign(&prev.shift_left(1));
                        cur
                    })
                    .collect()
            }
            _ => {
                let parts = if self.cfg.variant.is_dense() {
                    g_head_in.split(&vec![self.cfg.tcn.filters; depth])
                } else {
                    let mut v: Vec<SeqTensor<F>> = (1..depth)
                        .map(|_| SeqTensor::zeros(batch.batch_size(), batch.max_len(), self.cfg.tcn.filters))
                        .collect();
                    v.push(g_head_in);
                    v
                };
                parts.into_iter().map(|g| g.shift_left(1)).collect()
            }
        };
        self.tcn
            .backward(&self.store, &state.tcn_cache, g_pyramid, &mut grads);
        Ok((loss, breakdown, grads))
    }

    /// Generates `steps` new rows after `prefix` by ancestral sampling from
    /// the priors. With `mean_pred` each new row is the observation mean
    /// instead of a draw.
    pub fn sample_sequence(
        &self,
        prefix: &Array2<f32>,
        steps: usize,
        seed: u64,
        mean_pred: bool,
    ) -> Result<Array2<f32>> {
        let dim = self.cfg.input_dim;
        if prefix.ncols() != dim && prefix.nrows() > 0 {
            return Err(StcnError::Shape(format!(
                "prefix has D={}, model expects D={dim}",
                prefix.ncols()
            )));
        }
        let total = prefix.nrows() + steps;
        let mut out = Array2::<f32>::zeros((total, dim));
        if prefix.nrows() > 0 {
            out.slice_mut(s![..prefix.nrows(), ..]).assign(prefix);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let filters = self.cfg.tcn.filters;
        for t in prefix.nrows()..total {
            // d_{t−1}: last row of the pyramid over rows 0..t, or zeros at t = 0
            let prev = if t == 0 {
                DeterministicPyramid {
                    layers: (0..self.cfg.tcn.layers)
                        .map(|_| SeqTensor::zeros(1, 1, filters))
                        .collect(),
                }
            } else {
                let hist = out.slice(s![..t, ..]).mapv(|v| F::lit(v as f64));
                let x = SeqTensor::from_rows(hist, 1, t)?;
                let pyr = self.pyramid(&x)?;
                DeterministicPyramid {
                    layers: pyr
                        .layers
                        .iter()
                        .map(|d| SeqTensor::from_rows(d.rows().slice(s![t - 1..t, ..]).to_owned(), 1, 1))
                        .collect::<Result<_>>()?,
                }
            };
            let head_in = match &self.latents {
                Some(h) => {
                    let noise = LatentNoise::sample(self.latent_dims(), 1, 1, &mut rng);
                    let stack = prior_pass(&self.store, h, &prev, &noise)?;
                    self.head_input(&stack)?
                }
                None => self.deterministic_head_input(&prev)?,
            };
            let (params, _) = self.head.forward(&self.store, &head_in)?;
            let row = if mean_pred {
                params.mean_rows()
            } else {
                params.sample_rows(&mut rng)
            };
            for d in 0..dim {
                out[[t, d]] = row[[0, d]].as_f32();
            }
        }
        Ok(out)
    }
}

fn mask_rows<F: Real>(batch: &SequenceBatch<F>) -> Array1<F> {
    batch
        .mask
        .clone()
        .into_shape_with_order(batch.batch_size() * batch.max_len())
        .expect("mask is [B × T]")
}

fn aggregate<F: Real>(recon: Array2<F>, kl_per_layer: Vec<Array2<F>>) -> ElboBreakdown<F> {
    let b = recon.nrows();
    let mut per_sequence = Array1::zeros(b);
    for bi in 0..b {
        let mut acc = recon.row(bi).sum();
        for kl in &kl_per_layer {
            acc -= kl.row(bi).sum();
        }
        per_sequence[bi] = acc;
    }
    let elbo = per_sequence.sum() / F::lit(b as f64);
    ElboBreakdown {
        recon,
        kl_per_layer,
        per_sequence,
        elbo,
    }
}

/// Delays every pyramid layer by one step (`d_0 = 0`).
pub fn shift_pyramid<F: Real>(p: &DeterministicPyramid<F>) -> DeterministicPyramid<F> {
    p.shifted()
}
