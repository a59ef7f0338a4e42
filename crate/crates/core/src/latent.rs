//! Diagonal-Gaussian latent hierarchy.
//!
//! Each stochastic layer `l` owns two small networks: `f_p^(l)` producing the
//! conditional prior from the previous step's TCN features, and `f_q^(l)`
//! producing an approximate likelihood from the current step's features. The
//! posterior is their precision-weighted combination. Both passes run
//! top-down; layer `l < L` is conditioned on the sample of layer `l + 1`.

use ndarray::{Array1, Array2, Zip};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{shape_err, Result, StcnError};
use crate::params::{Gradients, ParamStore};
use crate::real::{sigmoid, softplus, Real};
use crate::tcn::{CausalConv, DeterministicPyramid};
use crate::tensor::SeqTensor;

pub const SIGMA_MIN: f64 = 0.001;
pub const SIGMA_MAX: f64 = 5.0;

#[inline]
pub fn clamp_sigma<F: Real>(s: F) -> F {
    s.max(F::lit(SIGMA_MIN)).min(F::lit(SIGMA_MAX))
}

#[inline]
fn within_clamp<F: Real>(s: F) -> bool {
    s > F::lit(SIGMA_MIN) && s < F::lit(SIGMA_MAX)
}

/// `σ = clamp(softplus(pre))` together with `∂σ/∂pre` (zero where clamped).
#[inline]
pub(crate) fn sigma_from_pre<F: Real>(pre: F) -> (F, F) {
    let sp = softplus(pre);
    if within_clamp(sp) {
        (sp, sigmoid(pre))
    } else {
        (clamp_sigma(sp), F::zero())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagGaussian<F> {
    pub mean: SeqTensor<F>,
    pub std: SeqTensor<F>,
}

impl<F: Real> DiagGaussian<F> {
    pub fn new(mean: SeqTensor<F>, std: SeqTensor<F>) -> Result<Self> {
        if !mean.same_layout(&std) || mean.channels() != std.channels() {
            return Err(shape_err("Gaussian mean and std shapes differ"));
        }
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.channels()
    }

    fn check_positive(&self, what: &str) -> Result<()> {
        if self.std.rows().iter().any(|&s| !(s > F::zero())) {
            return Err(StcnError::Domain(format!("{what} has a non-positive std")));
        }
        Ok(())
    }

    fn check_matches(&self, other: &Self) -> Result<()> {
        if !self.mean.same_layout(&other.mean) || self.dim() != other.dim() {
            return Err(shape_err("Gaussians have different shapes"));
        }
        Ok(())
    }
}

/// Per-row `KL(q ‖ p)` summed over the latent dimension.
pub fn gaussian_kl_rows<F: Real>(q: &DiagGaussian<F>, p: &DiagGaussian<F>) -> Result<Array1<F>> {
    q.check_matches(p)?;
    q.check_positive("q")?;
    p.check_positive("p")?;
    Ok(kl_rows_unchecked(q, p))
}

/// `KL(q ‖ p)` as a `[B × T]` grid.
pub fn gaussian_kl<F: Real>(q: &DiagGaussian<F>, p: &DiagGaussian<F>) -> Result<Array2<F>> {
    let rows = gaussian_kl_rows(q, p)?;
    Ok(q.mean.row_vector_to_grid(rows))
}

#[inline]
fn kl_scalar<F: Real>(mq: F, sq: F, mp: F, sp: F) -> F {
    let half = F::lit(0.5);
    let d = mq - mp;
    (sp / sq).ln() + (sq * sq + d * d) / (F::lit(2.0) * sp * sp) - half
}

fn kl_rows_unchecked<F: Real>(q: &DiagGaussian<F>, p: &DiagGaussian<F>) -> Array1<F> {
    let n = q.mean.rows().nrows();
    let mut out = Array1::zeros(n);
    for r in 0..n {
        let mut acc = F::zero();
        for c in 0..q.dim() {
            acc += kl_scalar(
                q.mean.rows()[[r, c]],
                q.std.rows()[[r, c]],
                p.mean.rows()[[r, c]],
                p.std.rows()[[r, c]],
            );
        }
        out[r] = acc;
    }
    out
}

/// Gradient of `Σ_r w_r · KL_r(q ‖ p)` with respect to the four parameter
/// tensors, returned as `(∂μ_q, ∂σ_q, ∂μ_p, ∂σ_p)`.
pub(crate) fn kl_backward<F: Real>(
    q: &DiagGaussian<F>,
    p: &DiagGaussian<F>,
    row_weight: &Array1<F>,
) -> (Array2<F>, Array2<F>, Array2<F>, Array2<F>) {
    let shape = q.mean.rows().raw_dim();
    let (mut gmq, mut gsq, mut gmp, mut gsp) = (
        Array2::zeros(shape),
        Array2::zeros(shape),
        Array2::zeros(shape),
        Array2::zeros(shape),
    );
    for r in 0..shape[0] {
        let w = row_weight[r];
        if w == F::zero() {
            continue;
        }
        for c in 0..shape[1] {
            let (mq, sq) = (q.mean.rows()[[r, c]], q.std.rows()[[r, c]]);
            let (mp, sp) = (p.mean.rows()[[r, c]], p.std.rows()[[r, c]]);
            let d = mq - mp;
            let vp = sp * sp;
            gmq[[r, c]] = w * d / vp;
            gmp[[r, c]] = -w * d / vp;
            gsq[[r, c]] = w * (sq / vp - F::one() / sq);
            gsp[[r, c]] = w * (F::one() / sp - (sq * sq + d * d) / (vp * sp));
        }
    }
    (gmq, gsq, gmp, gsp)
}

/// `μ + σ ⊙ ε`.
pub fn reparam_sample<F: Real>(dist: &DiagGaussian<F>, eps: &SeqTensor<F>) -> Result<SeqTensor<F>> {
    if !eps.same_layout(&dist.mean) || eps.channels() != dist.dim() {
        return Err(shape_err("noise shape does not match the distribution"));
    }
    Ok(reparam_unchecked(dist, eps))
}

fn reparam_unchecked<F: Real>(dist: &DiagGaussian<F>, eps: &SeqTensor<F>) -> SeqTensor<F> {
    let mut z = dist.std.rows() * eps.rows();
    z += dist.mean.rows();
    dist.mean.with_rows(z)
}

/// Precision-weighted combination of an approximate likelihood with a prior:
/// `σ_q² = 1 / (σ̂⁻² + σ_p⁻²)`, `μ_q = σ_q²·(μ̂ σ̂⁻² + μ_p σ_p⁻²)`, with the
/// resulting std clamped to `[0.001, 5]`.
pub fn precision_merge<F: Real>(
    likelihood: &DiagGaussian<F>,
    prior: &DiagGaussian<F>,
) -> Result<DiagGaussian<F>> {
    likelihood.check_matches(prior)?;
    likelihood.check_positive("likelihood")?;
    prior.check_positive("prior")?;
    Ok(merge_unchecked(likelihood, prior))
}

#[inline]
fn merge_scalar<F: Real>(ml: F, sl: F, mp: F, sp: F) -> (F, F) {
    let (al, ap) = ((sl * sl).recip(), (sp * sp).recip());
    let var = (al + ap).recip();
    (var * (ml * al + mp * ap), var.sqrt())
}

fn merge_unchecked<F: Real>(lik: &DiagGaussian<F>, prior: &DiagGaussian<F>) -> DiagGaussian<F> {
    let shape = lik.mean.rows().raw_dim();
    let mut mean = Array2::zeros(shape);
    let mut std = Array2::zeros(shape);
    Zip::from(&mut mean)
        .and(&mut std)
        .and(lik.mean.rows())
        .and(lik.std.rows())
        .and(prior.mean.rows())
        .and(prior.std.rows())
        .for_each(|m, s, &ml, &sl, &mp, &sp| {
            let (mq, sq) = merge_scalar(ml, sl, mp, sp);
            *m = mq;
            *s = clamp_sigma(sq);
        });
    DiagGaussian {
        mean: lik.mean.with_rows(mean),
        std: lik.mean.with_rows(std),
    }
}

/// Back-propagates `(∂μ_q, ∂σ_q)` through the merge into the likelihood and
/// prior parameters: `(∂μ̂, ∂σ̂, ∂μ_p, ∂σ_p)`.
fn merge_backward<F: Real>(
    lik: &DiagGaussian<F>,
    prior: &DiagGaussian<F>,
    g_mean: &Array2<F>,
    g_std: &Array2<F>,
) -> (Array2<F>, Array2<F>, Array2<F>, Array2<F>) {
    let shape = g_mean.raw_dim();
    let (mut gml, mut gsl, mut gmp, mut gsp) = (
        Array2::zeros(shape),
        Array2::zeros(shape),
        Array2::zeros(shape),
        Array2::zeros(shape),
    );
    let two = F::lit(2.0);
    for r in 0..shape[0] {
        for c in 0..shape[1] {
            let (ml, sl) = (lik.mean.rows()[[r, c]], lik.std.rows()[[r, c]]);
            let (mp, sp) = (prior.mean.rows()[[r, c]], prior.std.rows()[[r, c]]);
            let (al, ap) = ((sl * sl).recip(), (sp * sp).recip());
            let prec = al + ap;
            let mq = (ml * al + mp * ap) / prec;
            let sq = prec.recip().sqrt();
            let (gm, mut gs) = (g_mean[[r, c]], g_std[[r, c]]);
            if !within_clamp(sq) {
                gs = F::zero();
            }
            // ∂μ_q/∂a = (μ − μ_q)/P for a ∈ {σ̂⁻², σ_p⁻²}; ∂σ_q/∂a = −½ P^{−3/2}
            let dsq_dprec = -sq / (two * prec);
            let d_al = gm * (ml - mq) / prec + gs * dsq_dprec;
            let d_ap = gm * (mp - mq) / prec + gs * dsq_dprec;
            gml[[r, c]] = gm * al / prec;
            gmp[[r, c]] = gm * ap / prec;
            // ∂(σ⁻²)/∂σ = −2σ⁻³
            gsl[[r, c]] = d_al * (-two * al / sl);
            gsp[[r, c]] = d_ap * (-two * ap / sp);
        }
    }
    (gml, gsl, gmp, gsp)
}

/// Two pointwise convolutions with a ReLU between, mapping the conditioning
/// input to the mean and std of one latent layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentNet {
    pub hidden: CausalConv,
    pub head: CausalConv,
    pub dim: usize,
}

#[derive(Debug, Clone)]
pub struct LatentNetCache<F> {
    input: SeqTensor<F>,
    hidden: SeqTensor<F>,
    dstd_dpre: Array2<F>,
}

impl LatentNet {
    pub fn new<F: Real, R: Rng>(
        store: &mut ParamStore<F>,
        name: &str,
        c_in: usize,
        hidden: usize,
        dim: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            hidden: CausalConv::pointwise(store, &format!("{name}.hidden"), c_in, hidden, rng),
            head: CausalConv::pointwise(store, &format!("{name}.head"), hidden, 2 * dim, rng),
            dim,
        }
    }

    pub fn input_channels(&self) -> usize {
        self.hidden.c_in
    }

    pub fn forward<F: Real>(
        &self,
        store: &ParamStore<F>,
        input: &SeqTensor<F>,
    ) -> Result<(DiagGaussian<F>, LatentNetCache<F>)> {
        let hidden = self
            .hidden
            .forward(store, input)?
            .map(|v| v.max(F::zero()));
        let out = self.head.forward(store, &hidden)?;
        let parts = out.split(&[self.dim, self.dim]);
        let mut std = parts[1].rows().clone();
        let mut dstd_dpre = Array2::zeros(std.raw_dim());
        Zip::from(&mut std).and(&mut dstd_dpre).for_each(|s, d| {
            let (sigma, deriv) = sigma_from_pre(*s);
            *s = sigma;
            *d = deriv;
        });
        let mean = parts.into_iter().next().unwrap();
        let std = mean.with_rows(std);
        Ok((
            DiagGaussian { mean, std },
            LatentNetCache {
                input: input.clone(),
                hidden,
                dstd_dpre,
            },
        ))
    }

    /// Returns `∂loss/∂input` given gradients on the produced mean and std.
    pub fn backward<F: Real>(
        &self,
        store: &ParamStore<F>,
        cache: &LatentNetCache<F>,
        g_mean: &Array2<F>,
        g_std: &Array2<F>,
        grads: &mut Gradients<F>,
    ) -> SeqTensor<F> {
        let g_pre = g_std * &cache.dstd_dpre;
        let g_out = ndarray::concatenate(ndarray::Axis(1), &[g_mean.view(), g_pre.view()])
            .expect("head gradient concat");
        let g_hidden = self
            .head
            .backward(store, &cache.hidden, &cache.hidden.with_rows(g_out), grads);
        let mut g_hidden_pre = g_hidden.into_rows();
        Zip::from(&mut g_hidden_pre)
            .and(cache.hidden.rows())
            .for_each(|g, &h| {
                if h <= F::zero() {
                    *g = F::zero();
                }
            });
        self.hidden.backward(
            store,
            &cache.input,
            &cache.input.with_rows(g_hidden_pre),
            grads,
        )
    }
}

/// Evaluates a latent network on `[z_above, d]` (or `d` alone at the top).
pub fn latent_params<F: Real>(
    store: &ParamStore<F>,
    net: &LatentNet,
    z_above: Option<&SeqTensor<F>>,
    d: &SeqTensor<F>,
) -> Result<DiagGaussian<F>> {
    let input = match z_above {
        Some(z) => SeqTensor::concat(&[z, d])?,
        None => d.clone(),
    };
    Ok(net.forward(store, &input)?.0)
}

/// The prior and approximate-likelihood networks of one stochastic layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentLayer {
    pub prior: LatentNet,
    pub likelihood: LatentNet,
}

/// All stochastic layers, bottom (`l = 1`) first.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentHierarchy {
    pub layers: Vec<LatentLayer>,
}

impl LatentHierarchy {
    pub fn new<F: Real, R: Rng>(
        store: &mut ParamStore<F>,
        dims: &[usize],
        filters: usize,
        rng: &mut R,
    ) -> Self {
        let top = dims.len();
        let layers = (0..top)
            .map(|i| {
                let c_in = if i + 1 == top { filters } else { dims[i + 1] + filters };
                let l = i + 1;
                LatentLayer {
                    prior: LatentNet::new(store, &format!("latent{l}.prior"), c_in, filters, dims[i], rng),
                    likelihood: LatentNet::new(
                        store,
                        &format!("latent{l}.likelihood"),
                        c_in,
                        filters,
                        dims[i],
                        rng,
                    ),
                }
            })
            .collect();
        Self { layers }
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.prior.dim).collect()
    }
}

/// State of one stochastic layer after a pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState<F> {
    pub prior: DiagGaussian<F>,
    pub posterior: Option<DiagGaussian<F>>,
    pub sample: SeqTensor<F>,
}

/// Per-layer priors, posteriors and samples, bottom first.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentStack<F> {
    pub layers: Vec<LatentState<F>>,
}

impl<F: Real> LatentStack<F> {
    pub fn samples(&self) -> Vec<&SeqTensor<F>> {
        self.layers.iter().map(|l| &l.sample).collect()
    }
}

/// Standard-normal noise for every stochastic layer, bottom first.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentNoise<F> {
    pub layers: Vec<SeqTensor<F>>,
}

impl<F: Real> LatentNoise<F> {
    pub fn zeros(dims: &[usize], batch: usize, steps: usize) -> Self {
        Self {
            layers: dims.iter().map(|&d| SeqTensor::zeros(batch, steps, d)).collect(),
        }
    }

    pub fn sample<R: Rng>(dims: &[usize], batch: usize, steps: usize, rng: &mut R) -> Self {
        let mut noise = Self::zeros(dims, batch, steps);
        for layer in &mut noise.layers {
            layer
                .rows_mut()
                .mapv_inplace(|_| F::lit(rng.sample::<f64, _>(StandardNormal)));
        }
        noise
    }

    /// Noise where every sequence `b` draws from its own generator, so a
    /// sequence's noise does not depend on the batch it lands in.
    pub fn per_sequence<R: Rng>(dims: &[usize], steps: usize, rngs: &mut [R]) -> Self {
        let batch = rngs.len();
        let mut noise = Self::zeros(dims, batch, steps);
        for (b, rng) in rngs.iter_mut().enumerate() {
            for layer in &mut noise.layers {
                for t in 0..steps {
                    for c in 0..layer.channels() {
                        *layer.at_mut(b, t, c) = F::lit(rng.sample::<f64, _>(StandardNormal));
                    }
                }
            }
        }
        noise
    }

    fn check(&self, dims: &[usize], like: &SeqTensor<F>) -> Result<()> {
        if self.layers.len() != dims.len() {
            return Err(shape_err(format!(
                "noise has {} layers, hierarchy has {}",
                self.layers.len(),
                dims.len()
            )));
        }
        for (eps, &d) in self.layers.iter().zip(dims) {
            if !eps.same_layout(like) || eps.channels() != d {
                return Err(shape_err("noise tensor does not match the batch layout"));
            }
        }
        Ok(())
    }
}

fn check_pyramid<F: Real>(h: &LatentHierarchy, pyr: &DeterministicPyramid<F>) -> Result<()> {
    if pyr.depth() != h.depth() {
        return Err(shape_err(format!(
            "pyramid has {} layers, hierarchy has {}",
            pyr.depth(),
            h.depth()
        )));
    }
    Ok(())
}

/// Ancestral pass through the priors: `z^L ~ p(·|d^L_prev)`, then
/// `z^l ~ p(·|z^{l+1}, d^l_prev)` down to the bottom.
pub fn prior_pass<F: Real>(
    store: &ParamStore<F>,
    hierarchy: &LatentHierarchy,
    pyramid_prev: &DeterministicPyramid<F>,
    noise: &LatentNoise<F>,
) -> Result<LatentStack<F>> {
    check_pyramid(hierarchy, pyramid_prev)?;
    noise.check(&hierarchy.dims(), &pyramid_prev.layers[0])?;
    let mut states: Vec<Option<LatentState<F>>> = vec![None; hierarchy.depth()];
    let mut z_above: Option<SeqTensor<F>> = None;
    for l in (0..hierarchy.depth()).rev() {
        let prior = latent_params(
            store,
            &hierarchy.layers[l].prior,
            z_above.as_ref(),
            &pyramid_prev.layers[l],
        )?;
        let sample = reparam_unchecked(&prior, &noise.layers[l]);
        z_above = Some(sample.clone());
        states[l] = Some(LatentState {
            prior,
            posterior: None,
            sample,
        });
    }
    Ok(LatentStack {
        layers: states.into_iter().map(Option::unwrap).collect(),
    })
}

#[derive(Debug, Clone)]
struct LayerCache<F> {
    prior_cache: LatentNetCache<F>,
    lik_cache: LatentNetCache<F>,
    likelihood: DiagGaussian<F>,
    /// Channels of the conditioning input taken by `z^{l+1}`.
    z_above_dim: usize,
}

#[derive(Debug, Clone)]
pub struct PosteriorCache<F> {
    layers: Vec<LayerCache<F>>,
}

/// Top-down inference pass: at each layer the prior (from `d_prev`) and the
/// approximate likelihood (from `d_cur`) are both conditioned on the same
/// posterior sample of the layer above, merged by precision weighting, and
/// sampled.
pub fn posterior_pass<F: Real>(
    store: &ParamStore<F>,
    hierarchy: &LatentHierarchy,
    pyramid_cur: &DeterministicPyramid<F>,
    pyramid_prev: &DeterministicPyramid<F>,
    noise: &LatentNoise<F>,
) -> Result<(LatentStack<F>, PosteriorCache<F>)> {
    check_pyramid(hierarchy, pyramid_cur)?;
    check_pyramid(hierarchy, pyramid_prev)?;
    noise.check(&hierarchy.dims(), &pyramid_cur.layers[0])?;
    let depth = hierarchy.depth();
    let mut states: Vec<Option<LatentState<F>>> = vec![None; depth];
    let mut caches: Vec<Option<LayerCache<F>>> = vec![None; depth];
    let mut z_above: Option<SeqTensor<F>> = None;
    for l in (0..depth).rev() {
        let (in_p, in_q) = match &z_above {
            Some(z) => (
                SeqTensor::concat(&[z, &pyramid_prev.layers[l]])?,
                SeqTensor::concat(&[z, &pyramid_cur.layers[l]])?,
            ),
            None => (pyramid_prev.layers[l].clone(), pyramid_cur.layers[l].clone()),
        };
        let layer = &hierarchy.layers[l];
        let (prior, prior_cache) = layer.prior.forward(store, &in_p)?;
        let (likelihood, lik_cache) = layer.likelihood.forward(store, &in_q)?;
        let posterior = merge_unchecked(&likelihood, &prior);
        let sample = reparam_unchecked(&posterior, &noise.layers[l]);
        caches[l] = Some(LayerCache {
            prior_cache,
            lik_cache,
            likelihood,
            z_above_dim: z_above.as_ref().map_or(0, |z| z.channels()),
        });
        z_above = Some(sample.clone());
        states[l] = Some(LatentState {
            prior,
            posterior: Some(posterior),
            sample,
        });
    }
    Ok((
        LatentStack {
            layers: states.into_iter().map(Option::unwrap).collect(),
        },
        PosteriorCache {
            layers: caches.into_iter().map(Option::unwrap).collect(),
        },
    ))
}

/// Gradients flowing out of the latent hierarchy into the TCN.
pub struct PosteriorGrads<F> {
    pub d_cur: Vec<SeqTensor<F>>,
    pub d_prev: Vec<SeqTensor<F>>,
}

/// Back-propagates through [`posterior_pass`].
///
/// `g_samples[l]` is the external gradient on sample `z^l` (from the
/// observation model) and `kl_row_weight` the weight of every row's KL term
/// in the loss. Layers are visited bottom-up so each sample's gradient is
/// complete before it is pushed into the layer that produced it.
pub fn posterior_backward<F: Real>(
    store: &ParamStore<F>,
    hierarchy: &LatentHierarchy,
    stack: &LatentStack<F>,
    cache: &PosteriorCache<F>,
    noise: &LatentNoise<F>,
    mut g_samples: Vec<Option<Array2<F>>>,
    kl_row_weight: &Array1<F>,
    grads: &mut Gradients<F>,
) -> PosteriorGrads<F> {
    let depth = hierarchy.depth();
    let mut d_cur = Vec::with_capacity(depth);
    let mut d_prev = Vec::with_capacity(depth);
    for l in 0..depth {
        let state = &stack.layers[l];
        let lc = &cache.layers[l];
        let posterior = state.posterior.as_ref().expect("posterior pass state");
        let (mut g_mq, mut g_sq, g_mp_kl, g_sp_kl) =
            kl_backward(posterior, &state.prior, kl_row_weight);
        if let Some(gz) = g_samples[l].take() {
            g_mq += &gz;
            g_sq += &(&gz * noise.layers[l].rows());
        }
        let (g_ml, g_sl, mut g_mp, mut g_sp) =
            merge_backward(&lc.likelihood, &state.prior, &g_mq, &g_sq);
        g_mp += &g_mp_kl;
        g_sp += &g_sp_kl;
        let layer = &hierarchy.layers[l];
        let g_in_q = layer
            .likelihood
            .backward(store, &lc.lik_cache, &g_ml, &g_sl, grads);
        let g_in_p = layer
            .prior
            .backward(store, &lc.prior_cache, &g_mp, &g_sp, grads);
        if lc.z_above_dim > 0 {
            let za = lc.z_above_dim;
            let f = g_in_q.channels() - za;
            let q_parts = g_in_q.split(&[za, f]);
            let p_parts = g_in_p.split(&[za, f]);
            let mut gz_above = q_parts[0].rows() + p_parts[0].rows();
            if let Some(existing) = g_samples[l + 1].take() {
                gz_above += &existing;
            }
            g_samples[l + 1] = Some(gz_above);
            let mut qi = q_parts.into_iter();
            let mut pi = p_parts.into_iter();
            d_cur.push(qi.nth(1).unwrap());
            d_prev.push(pi.nth(1).unwrap());
        } else {
            d_cur.push(g_in_q);
            d_prev.push(g_in_p);
        }
    }
    PosteriorGrads { d_cur, d_prev }
}
