//! Output network `f^(o)` and the observation densities.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, Axis, Zip};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Result, StcnError};
use crate::latent::sigma_from_pre;
use crate::params::{Gradients, ParamStore};
use crate::real::{log_sum_exp, Real};
use crate::tcn::{BlockCache, CausalConv, WavenetBlock};
use crate::tensor::SeqTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObsFamily {
    Normal,
    Gmm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    /// Pointwise convolutions with ReLU.
    ReluWidth1Stack,
    /// Dilation-1 WaveNet blocks after a pointwise projection.
    WavenetStack,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObsConfig {
    pub family: ObsFamily,
    /// Mixture components (GMM only).
    pub components: usize,
    pub head: HeadKind,
    pub head_depth: usize,
}

impl Default for ObsConfig {
    fn default() -> Self {
        Self {
            family: ObsFamily::Gmm,
            components: 20,
            head: HeadKind::ReluWidth1Stack,
            head_depth: 5,
        }
    }
}

impl ObsConfig {
    pub fn normal() -> Self {
        Self {
            family: ObsFamily::Normal,
            ..Self::default()
        }
    }

    pub fn gmm(components: usize) -> Self {
        Self {
            family: ObsFamily::Gmm,
            components,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.components == 0 {
            return Err(StcnError::Config("obs.components must be ≥ 1".into()));
        }
        if self.head_depth == 0 {
            return Err(StcnError::Config("obs.head_depth must be ≥ 1".into()));
        }
        Ok(())
    }

    /// Output channels of the distribution head for data dimension `dim`.
    pub fn param_channels(&self, dim: usize) -> usize {
        match self.family {
            ObsFamily::Normal => 2 * dim,
            ObsFamily::Gmm => self.components * (1 + 2 * dim),
        }
    }
}

/// Parameters of the per-step output distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum ObservationParams<F> {
    Normal {
        mean: SeqTensor<F>,
        std: SeqTensor<F>,
    },
    /// `means`/`stds` hold component `m`, dimension `d` at channel `m·D + d`.
    Gmm {
        logits: SeqTensor<F>,
        means: SeqTensor<F>,
        stds: SeqTensor<F>,
    },
}

impl<F: Real> ObservationParams<F> {
    pub fn family(&self) -> ObsFamily {
        match self {
            Self::Normal { .. } => ObsFamily::Normal,
            Self::Gmm { .. } => ObsFamily::Gmm,
        }
    }

    pub fn data_dim(&self) -> usize {
        match self {
            Self::Normal { mean, .. } => mean.channels(),
            Self::Gmm { logits, means, .. } => means.channels() / logits.channels(),
        }
    }

    /// Softmax of the mixture logits, `[B·T × M]`.
    pub fn mixture_weights(&self) -> Option<Array2<F>> {
        let Self::Gmm { logits, .. } = self else {
            return None;
        };
        let mut w = logits.rows().clone();
        for mut row in w.rows_mut() {
            let lse = log_sum_exp(row.iter().copied());
            row.mapv_inplace(|v| (v - lse).exp());
        }
        Some(w)
    }

    /// Distribution mean per row, `[B·T × D]`.
    pub fn mean_rows(&self) -> Array2<F> {
        match self {
            Self::Normal { mean, .. } => mean.rows().clone(),
            Self::Gmm { means, .. } => {
                let w = self.mixture_weights().unwrap();
                let (m, d) = (w.ncols(), self.data_dim());
                Array2::from_shape_fn((w.nrows(), d), |(r, j)| {
                    (0..m).map(|k| w[[r, k]] * means.rows()[[r, k * d + j]]).sum()
                })
            }
        }
    }

    /// Draws one value per row from the distribution.
    pub fn sample_rows<R: Rng>(&self, rng: &mut R) -> Array2<F> {
        let d = self.data_dim();
        let normal = |rng: &mut R| F::lit(rng.sample::<f64, _>(StandardNormal));
        match self {
            Self::Normal { mean, std } => {
                let mut out = mean.rows().clone();
                Zip::from(&mut out)
                    .and(std.rows())
                    .for_each(|o, &s| *o += s * normal(rng));
                out
            }
            Self::Gmm { means, stds, .. } => {
                let w = self.mixture_weights().unwrap();
                let mut out = Array2::zeros((w.nrows(), d));
                for r in 0..w.nrows() {
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    let mut k = w.ncols() - 1;
                    for (m, &wm) in w.row(r).iter().enumerate() {
                        acc += wm.as_f64();
                        if u < acc {
                            k = m;
                            break;
                        }
                    }
                    for j in 0..d {
                        out[[r, j]] =
                            means.rows()[[r, k * d + j]] + stds.rows()[[r, k * d + j]] * normal(rng);
                    }
                }
                out
            }
        }
    }
}

#[inline]
fn log_normal<F: Real>(x: F, mean: F, std: F) -> F {
    let z = (x - mean) / std;
    F::lit(-0.5 * (2.0 * PI).ln()) - std.ln() - F::lit(0.5) * z * z
}

fn check_x<F: Real>(x: &SeqTensor<F>, p: &ObservationParams<F>) -> Result<()> {
    let like = match p {
        ObservationParams::Normal { mean, .. } => mean,
        ObservationParams::Gmm { logits, .. } => logits,
    };
    if !x.same_layout(like) || x.channels() != p.data_dim() {
        return Err(shape_err("observations do not match the distribution shape"));
    }
    Ok(())
}

/// Per-step Gaussian log-density summed over the data dimension, `[B × T]`.
pub fn normal_loglik<F: Real>(x: &SeqTensor<F>, p: &ObservationParams<F>) -> Result<Array2<F>> {
    if p.family() != ObsFamily::Normal {
        return Err(StcnError::Usage("normal_loglik needs Normal parameters".into()));
    }
    check_x(x, p)?;
    Ok(x.row_vector_to_grid(loglik_rows(x, p)))
}

/// Per-step mixture log-density `log Σ_m w_m N(x; μ_m, σ_m)`, `[B × T]`.
pub fn gmm_loglik<F: Real>(x: &SeqTensor<F>, p: &ObservationParams<F>) -> Result<Array2<F>> {
    if p.family() != ObsFamily::Gmm {
        return Err(StcnError::Usage("gmm_loglik needs GMM parameters".into()));
    }
    check_x(x, p)?;
    Ok(x.row_vector_to_grid(loglik_rows(x, p)))
}

/// Log-likelihood of each row under either family.
pub fn loglik_rows<F: Real>(x: &SeqTensor<F>, p: &ObservationParams<F>) -> Array1<F> {
    let xr = x.rows();
    let d = xr.ncols();
    match p {
        ObservationParams::Normal { mean, std } => Array1::from_shape_fn(xr.nrows(), |r| {
            (0..d)
                .map(|j| log_normal(xr[[r, j]], mean.rows()[[r, j]], std.rows()[[r, j]]))
                .sum()
        }),
        ObservationParams::Gmm {
            logits,
            means,
            stds,
        } => {
            let m = logits.channels();
            let mut joint = vec![F::zero(); m];
            Array1::from_shape_fn(xr.nrows(), |r| {
                gmm_joint_row(xr, logits.rows(), means.rows(), stds.rows(), r, d, m, &mut joint);
                log_sum_exp(joint.iter().copied())
            })
        }
    }
}

/// Fills `joint[m] = log w_m + log N(x_r; μ_m, σ_m)` for row `r`.
#[allow(clippy::too_many_arguments)]
fn gmm_joint_row<F: Real>(
    x: &Array2<F>,
    logits: &Array2<F>,
    means: &Array2<F>,
    stds: &Array2<F>,
    r: usize,
    d: usize,
    m: usize,
    joint: &mut [F],
) {
    let lse = log_sum_exp(logits.row(r).iter().copied());
    for k in 0..m {
        let mut lp = logits[[r, k]] - lse;
        for j in 0..d {
            lp += log_normal(x[[r, j]], means[[r, k * d + j]], stds[[r, k * d + j]]);
        }
        joint[k] = lp;
    }
}

/// Gradient of `Σ_r w_r · loglik_r` with respect to the distribution
/// parameters. Variants mirror [`ObservationParams`].
pub(crate) fn loglik_backward<F: Real>(
    x: &SeqTensor<F>,
    p: &ObservationParams<F>,
    row_weight: &Array1<F>,
) -> ObservationParams<F> {
    let xr = x.rows();
    let (n, d) = xr.dim();
    match p {
        ObservationParams::Normal { mean, std } => {
            let mut gm = Array2::zeros((n, d));
            let mut gs = Array2::zeros((n, d));
            for r in 0..n {
                let w = row_weight[r];
                if w == F::zero() {
                    continue;
                }
                for j in 0..d {
                    let (mu, s) = (mean.rows()[[r, j]], std.rows()[[r, j]]);
                    let diff = xr[[r, j]] - mu;
                    gm[[r, j]] = w * diff / (s * s);
                    gs[[r, j]] = w * (diff * diff / (s * s * s) - s.recip());
                }
            }
            ObservationParams::Normal {
                mean: mean.with_rows(gm),
                std: mean.with_rows(gs),
            }
        }
        ObservationParams::Gmm {
            logits,
            means,
            stds,
        } => {
            let m = logits.channels();
            let mut gl = Array2::zeros((n, m));
            let mut gm = Array2::zeros((n, m * d));
            let mut gs = Array2::zeros((n, m * d));
            let mut joint = vec![F::zero(); m];
            for r in 0..n {
                let w = row_weight[r];
                if w == F::zero() {
                    continue;
                }
                gmm_joint_row(xr, logits.rows(), means.rows(), stds.rows(), r, d, m, &mut joint);
                let total = log_sum_exp(joint.iter().copied());
                let lse = log_sum_exp(logits.rows().row(r).iter().copied());
                for k in 0..m {
                    let resp = (joint[k] - total).exp();
                    let prior_w = (logits.rows()[[r, k]] - lse).exp();
                    gl[[r, k]] = w * (resp - prior_w);
                    for j in 0..d {
                        let c = k * d + j;
                        let (mu, s) = (means.rows()[[r, c]], stds.rows()[[r, c]]);
                        let diff = xr[[r, j]] - mu;
                        gm[[r, c]] = w * resp * diff / (s * s);
                        gs[[r, c]] = w * resp * (diff * diff / (s * s * s) - s.recip());
                    }
                }
            }
            ObservationParams::Gmm {
                logits: logits.with_rows(gl),
                means: logits.with_rows(gm),
                stds: logits.with_rows(gs),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum HeadBody {
    Relu(Vec<CausalConv>),
    Wavenet {
        proj: CausalConv,
        blocks: Vec<WavenetBlock>,
    },
}

/// The output network: a body of pointwise ReLU layers (or WaveNet blocks)
/// followed by a pointwise distribution head.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputHead {
    body: HeadBody,
    dist: CausalConv,
    cfg: ObsConfig,
    data_dim: usize,
}

#[derive(Debug, Clone)]
enum BodyCache<F> {
    Relu(Vec<SeqTensor<F>>),
    Wavenet {
        input: SeqTensor<F>,
        blocks: Vec<BlockCache<F>>,
    },
}

#[derive(Debug, Clone)]
pub struct HeadCache<F> {
    body: BodyCache<F>,
    features: SeqTensor<F>,
    dstd_dpre: Array2<F>,
}

impl OutputHead {
    pub fn new<F: Real, R: Rng>(
        store: &mut ParamStore<F>,
        cfg: &ObsConfig,
        input_channels: usize,
        hidden: usize,
        data_dim: usize,
        rng: &mut R,
    ) -> Self {
        let body = match cfg.head {
            HeadKind::ReluWidth1Stack => HeadBody::Relu(
                (0..cfg.head_depth)
                    .map(|i| {
                        let c_in = if i == 0 { input_channels } else { hidden };
                        CausalConv::pointwise(store, &format!("obs.layer{}", i + 1), c_in, hidden, rng)
                    })
                    .collect(),
            ),
            HeadKind::WavenetStack => HeadBody::Wavenet {
                proj: CausalConv::pointwise(store, "obs.proj", input_channels, hidden, rng),
                blocks: (0..cfg.head_depth)
                    .map(|i| WavenetBlock::new(store, &format!("obs.block{}", i + 1), hidden, 1, rng))
                    .collect(),
            },
        };
        let dist = CausalConv::pointwise(store, "obs.dist", hidden, cfg.param_channels(data_dim), rng);
        Self {
            body,
            dist,
            cfg: *cfg,
            data_dim,
        }
    }

    pub fn input_channels(&self) -> usize {
        match &self.body {
            HeadBody::Relu(layers) => layers[0].c_in,
            HeadBody::Wavenet { proj, .. } => proj.c_in,
        }
    }

    /// The pointwise layer producing distribution parameters.
    pub fn dist_layer(&self) -> &CausalConv {
        &self.dist
    }

    pub fn forward<F: Real>(
        &self,
        store: &ParamStore<F>,
        z_in: &SeqTensor<F>,
    ) -> Result<(ObservationParams<F>, HeadCache<F>)> {
        if z_in.channels() != self.input_channels() {
            return Err(shape_err(format!(
                "output head expects {} input channels, got {}",
                self.input_channels(),
                z_in.channels()
            )));
        }
        let (features, body) = match &self.body {
            HeadBody::Relu(layers) => {
                let mut inputs = Vec::with_capacity(layers.len());
                let mut h = z_in.clone();
                for layer in layers {
                    let next = layer.forward(store, &h)?.map(|v| v.max(F::zero()));
                    inputs.push(h);
                    h = next;
                }
                (h, BodyCache::Relu(inputs))
            }
            HeadBody::Wavenet { proj, blocks } => {
                let mut h = proj.forward(store, z_in)?;
                let mut caches = Vec::with_capacity(blocks.len());
                for block in blocks {
                    let (y, c) = block.forward(store, &h)?;
                    caches.push(c);
                    h = y;
                }
                (
                    h,
                    BodyCache::Wavenet {
                        input: z_in.clone(),
                        blocks: caches,
                    },
                )
            }
        };
        let raw = self.dist.forward(store, &features)?;
        let d = self.data_dim;
        let (params, dstd_dpre) = match self.cfg.family {
            ObsFamily::Normal => {
                let parts = raw.split(&[d, d]);
                let (std, deriv) = squash_std(parts[1].rows());
                let mean = parts.into_iter().next().unwrap();
                let std = mean.with_rows(std);
                (ObservationParams::Normal { mean, std }, deriv)
            }
            ObsFamily::Gmm => {
                let m = self.cfg.components;
                let mut parts = raw.split(&[m, m * d, m * d]).into_iter();
                let logits = parts.next().unwrap();
                let means = parts.next().unwrap();
                let (std, deriv) = squash_std(parts.next().unwrap().rows());
                let stds = logits.with_rows(std);
                (
                    ObservationParams::Gmm {
                        logits,
                        means,
                        stds,
                    },
                    deriv,
                )
            }
        };
        Ok((
            params,
            HeadCache {
                body,
                features,
                dstd_dpre,
            },
        ))
    }

    /// Returns `∂loss/∂z_in` given gradients on the distribution parameters.
    pub fn backward<F: Real>(
        &self,
        store: &ParamStore<F>,
        cache: &HeadCache<F>,
        g_params: &ObservationParams<F>,
        grads: &mut Gradients<F>,
    ) -> SeqTensor<F> {
        let g_raw = match g_params {
            ObservationParams::Normal { mean, std } => {
                let g_pre = std.rows() * &cache.dstd_dpre;
                ndarray::concatenate(Axis(1), &[mean.rows().view(), g_pre.view()])
            }
            ObservationParams::Gmm {
                logits,
                means,
                stds,
            } => {
                let g_pre = stds.rows() * &cache.dstd_dpre;
                ndarray::concatenate(
                    Axis(1),
                    &[logits.rows().view(), means.rows().view(), g_pre.view()],
                )
            }
        }
        .expect("parameter gradient concat");
        let mut g = self
            .dist
            .backward(store, &cache.features, &cache.features.with_rows(g_raw), grads);
        match (&self.body, &cache.body) {
            (HeadBody::Relu(layers), BodyCache::Relu(inputs)) => {
                let mut out = cache.features.clone();
                for (layer, input) in layers.iter().zip(inputs).rev() {
                    let mut gr = g.into_rows();
                    Zip::from(&mut gr).and(out.rows()).for_each(|g, &o| {
                        if o <= F::zero() {
                            *g = F::zero();
                        }
                    });
                    g = layer.backward(store, input, &input.with_rows(gr), grads);
                    out = input.clone();
                }
                g
            }
            (HeadBody::Wavenet { proj, blocks }, BodyCache::Wavenet { input, blocks: bc }) => {
                for (block, c) in blocks.iter().zip(bc).rev() {
                    g = block.backward(store, c, &g, grads);
                }
                proj.backward(store, input, &g, grads)
            }
            _ => unreachable!("cache built by this head"),
        }
    }
}

fn squash_std<F: Real>(pre: &Array2<F>) -> (Array2<F>, Array2<F>) {
    let mut std = pre.clone();
    let mut deriv = Array2::zeros(pre.raw_dim());
    Zip::from(&mut std).and(&mut deriv).for_each(|s, d| {
        let (sigma, dd) = sigma_from_pre(*s);
        *s = sigma;
        *d = dd;
    });
    (std, deriv)
}
