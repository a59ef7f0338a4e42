//! Temporal convolutional network: causal dilated convolutions, gated
//! residual (WaveNet) blocks and the `L`-stack deterministic pyramid.
//!
//! Every layer exposes a `forward` that returns whatever the matching
//! `backward` needs, and a `backward` that accumulates parameter gradients
//! and returns the gradient with respect to its input.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, Array3, ArrayView1, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Result};
use crate::params::{Gradients, ParamId, ParamStore};
use crate::real::Real;
use crate::tensor::SeqTensor;

/// Owned parameters of a single causal convolution.
///
/// `kernel` is `[width × C_in × C_out]`; tap `width−1` reads the current step
/// and tap `k` reads `t − (width−1−k)·dilation`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams<F> {
    pub kernel: Array3<F>,
    pub bias: Array1<F>,
    pub dilation: usize,
}

/// Applies a causal dilated convolution with left zero-padding. The output
/// has the input's length.
pub fn causal_dilated_conv<F: Real>(
    input: &SeqTensor<F>,
    params: &ConvParams<F>,
) -> Result<SeqTensor<F>> {
    let (width, c_in, _) = params.kernel.dim();
    if input.channels() != c_in {
        return Err(shape_err(format!(
            "convolution expects {c_in} input channels, got {}",
            input.channels()
        )));
    }
    if params.dilation == 0 {
        return Err(shape_err("dilation must be ≥ 1"));
    }
    let taps: Vec<ArrayView2<F>> = params.kernel.outer_iter().collect();
    debug_assert_eq!(taps.len(), width);
    Ok(conv_forward(input, &taps, params.bias.view(), params.dilation))
}

fn tap_offset(width: usize, k: usize, dilation: usize) -> usize {
    (width - 1 - k) * dilation
}

fn conv_forward<F: Real>(
    x: &SeqTensor<F>,
    taps: &[ArrayView2<F>],
    bias: ArrayView1<F>,
    dilation: usize,
) -> SeqTensor<F> {
    let width = taps.len();
    let mut out = Array2::zeros((x.rows().nrows(), bias.len()));
    out += &bias;
    for (k, tap) in taps.iter().enumerate() {
        let offset = tap_offset(width, k, dilation);
        if offset == 0 {
            general_mat_mul(F::one(), x.rows(), tap, F::one(), &mut out);
        } else if offset < x.steps() {
            general_mat_mul(F::one(), x.shift_right(offset).rows(), tap, F::one(), &mut out);
        }
    }
    x.with_rows(out)
}

/// A causal convolution whose weights live in a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct CausalConv {
    pub kernel: ParamId,
    pub bias: ParamId,
    pub width: usize,
    pub dilation: usize,
    pub c_in: usize,
    pub c_out: usize,
}

impl CausalConv {
    /// Registers `{name}.kernel` (fan-in scaled uniform) and `{name}.bias`
    /// (zeros).
    pub fn new<F: Real, R: Rng>(
        store: &mut ParamStore<F>,
        name: &str,
        c_in: usize,
        c_out: usize,
        width: usize,
        dilation: usize,
        rng: &mut R,
    ) -> Self {
        assert!(width >= 1 && dilation >= 1 && c_in >= 1 && c_out >= 1);
        let bound = 1.0 / ((width * c_in) as f64).sqrt();
        let kernel = store.add_uniform(format!("{name}.kernel"), &[width, c_in, c_out], bound, rng);
        let bias = store.add_zeros(format!("{name}.bias"), &[c_out]);
        Self {
            kernel,
            bias,
            width,
            dilation,
            c_in,
            c_out,
        }
    }

    pub fn pointwise<F: Real, R: Rng>(
        store: &mut ParamStore<F>,
        name: &str,
        c_in: usize,
        c_out: usize,
        rng: &mut R,
    ) -> Self {
        Self::new(store, name, c_in, c_out, 1, 1, rng)
    }

    pub fn params<F: Real>(&self, store: &ParamStore<F>) -> ConvParams<F> {
        let kernel = Array3::from_shape_vec(
            (self.width, self.c_in, self.c_out),
            store.values(self.kernel).to_vec(),
        )
        .expect("kernel shape");
        ConvParams {
            kernel,
            bias: store.vector(self.bias).to_owned(),
            dilation: self.dilation,
        }
    }

    fn taps<'a, F: Real>(&self, store: &'a ParamStore<F>) -> Vec<ArrayView2<'a, F>> {
        (0..self.width).map(|k| store.kernel_tap(self.kernel, k)).collect()
    }

    pub fn forward<F: Real>(&self, store: &ParamStore<F>, x: &SeqTensor<F>) -> Result<SeqTensor<F>> {
        if x.channels() != self.c_in {
            return Err(shape_err(format!(
                "convolution expects {} input channels, got {}",
                self.c_in,
                x.channels()
            )));
        }
        Ok(conv_forward(x, &self.taps(store), store.vector(self.bias), self.dilation))
    }

    /// Accumulates kernel and bias gradients and returns `∂loss/∂x`.
    pub fn backward<F: Real>(
        &self,
        store: &ParamStore<F>,
        x: &SeqTensor<F>,
        g_out: &SeqTensor<F>,
        grads: &mut Gradients<F>,
    ) -> SeqTensor<F> {
        let g = g_out.rows();
        grads.vector_mut(self.bias).scaled_add(F::one(), &g.sum_axis(Axis(0)));
        let mut g_in = Array2::zeros((x.rows().nrows(), self.c_in));
        for k in 0..self.width {
            let offset = tap_offset(self.width, k, self.dilation);
            if offset >= x.steps() {
                continue;
            }
            let tap = store.kernel_tap(self.kernel, k);
            if offset == 0 {
                general_mat_mul(
                    F::one(),
                    &x.rows().t(),
                    g,
                    F::one(),
                    &mut grads.kernel_tap_mut(store, self.kernel, k),
                );
                general_mat_mul(F::one(), g, &tap.t(), F::one(), &mut g_in);
            } else {
                let xs = x.shift_right(offset);
                general_mat_mul(
                    F::one(),
                    &xs.rows().t(),
                    g,
                    F::one(),
                    &mut grads.kernel_tap_mut(store, self.kernel, k),
                );
                let back = g_out.with_rows(g.dot(&tap.t())).shift_left(offset);
                g_in += back.rows();
            }
        }
        x.with_rows(g_in)
    }
}

/// Gated residual block: `x + W_o·(tanh(conv_f(x)) ⊙ σ(conv_g(x)))`.
#[derive(Debug, Clone, PartialEq)]
pub struct WavenetBlock {
    pub filter: CausalConv,
    pub gate: CausalConv,
    pub out: CausalConv,
}

#[derive(Debug, Clone)]
pub struct BlockCache<F> {
    input: SeqTensor<F>,
    tanh_filter: Array2<F>,
    sig_gate: Array2<F>,
    gated: SeqTensor<F>,
}

impl WavenetBlock {
    pub fn new<F: Real, R: Rng>(
        store: &mut ParamStore<F>,
        name: &str,
        channels: usize,
        dilation: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            filter: CausalConv::new(store, &format!("{name}.filter"), channels, channels, 2, dilation, rng),
            gate: CausalConv::new(store, &format!("{name}.gate"), channels, channels, 2, dilation, rng),
            out: CausalConv::pointwise(store, &format!("{name}.out"), channels, channels, rng),
        }
    }

    pub fn channels(&self) -> usize {
        self.filter.c_in
    }

    pub fn forward<F: Real>(
        &self,
        store: &ParamStore<F>,
        x: &SeqTensor<F>,
    ) -> Result<(SeqTensor<F>, BlockCache<F>)> {
        let tanh_filter = self.filter.forward(store, x)?.into_rows().mapv_into(F::act_tanh);
        let sig_gate = self.gate.forward(store, x)?.into_rows().mapv_into(F::act_sigmoid);
        let gated = x.with_rows(&tanh_filter * &sig_gate);
        let mut y = self.out.forward(store, &gated)?;
        y.add_assign(x);
        Ok((
            y,
            BlockCache {
                input: x.clone(),
                tanh_filter,
                sig_gate,
                gated,
            },
        ))
    }

    pub fn backward<F: Real>(
        &self,
        store: &ParamStore<F>,
        cache: &BlockCache<F>,
        g_out: &SeqTensor<F>,
        grads: &mut Gradients<F>,
    ) -> SeqTensor<F> {
        let g_gated = self.out.backward(store, &cache.gated, g_out, grads);
        let mut g_filter = Array2::zeros(g_gated.rows().raw_dim());
        let mut g_gate = Array2::zeros(g_gated.rows().raw_dim());
        Zip::from(&mut g_filter)
            .and(&mut g_gate)
            .and(g_gated.rows())
            .and(&cache.tanh_filter)
            .and(&cache.sig_gate)
            .for_each(|gf, gg, &g, &th, &sg| {
                *gf = g * sg * (F::one() - th * th);
                *gg = g * th * sg * (F::one() - sg);
            });
        let x = &cache.input;
        let mut g_in = g_out.clone();
        g_in.add_assign(&self.filter.backward(store, x, &x.with_rows(g_filter), grads));
        g_in.add_assign(&self.gate.backward(store, x, &x.with_rows(g_gate), grads));
        g_in
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TcnConfig {
    /// Number of stacks, one per stochastic layer (`L`).
    pub layers: usize,
    /// WaveNet blocks per stack (`K`).
    pub blocks: usize,
    /// Filters per convolution (`F`).
    pub filters: usize,
}

impl Default for TcnConfig {
    fn default() -> Self {
        Self {
            layers: 3,
            blocks: 3,
            filters: 32,
        }
    }
}

impl TcnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.blocks == 0 || self.filters == 0 {
            return Err(crate::error::StcnError::Config(
                "tcn layers, blocks and filters must all be ≥ 1".into(),
            ));
        }
        Ok(())
    }

    pub fn receptive_field(&self) -> usize {
        receptive_field(self.blocks, self.layers)
    }
}

/// Receptive field of `L` stacks of `K` width-2 blocks with per-stack
/// dilations `1, 2, …, 2^(K−1)`.
pub fn receptive_field(blocks: usize, layers: usize) -> usize {
    layers * ((1usize << blocks) - 1) + 1
}

/// Per-layer TCN outputs `d^l`, bottom (`l = 1`) first.
#[derive(Debug, Clone, PartialEq)]
pub struct DeterministicPyramid<F> {
    pub layers: Vec<SeqTensor<F>>,
}

impl<F: Real> DeterministicPyramid<F> {
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Delays every layer one step, so position `t` holds `d_{t−1}` and the
    /// first position holds `d_0 = 0`.
    pub fn shifted(&self) -> Self {
        Self {
            layers: self.layers.iter().map(|d| d.shift_right(1)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tcn {
    pub input_proj: CausalConv,
    /// `stacks[l][k]` is block `k` of stack `l`, with dilation `2^k`.
    pub stacks: Vec<Vec<WavenetBlock>>,
}

#[derive(Debug, Clone)]
pub struct TcnCache<F> {
    input: SeqTensor<F>,
    blocks: Vec<Vec<BlockCache<F>>>,
}

impl Tcn {
    pub fn new<F: Real, R: Rng>(
        store: &mut ParamStore<F>,
        cfg: &TcnConfig,
        input_dim: usize,
        rng: &mut R,
    ) -> Self {
        let input_proj = CausalConv::pointwise(store, "tcn.input_proj", input_dim, cfg.filters, rng);
        let stacks = (0..cfg.layers)
            .map(|l| {
                (0..cfg.blocks)
                    .map(|k| {
                        WavenetBlock::new(
                            store,
                            &format!("tcn.stack{}.block{}", l + 1, k + 1),
                            cfg.filters,
                            1 << k,
                            rng,
                        )
                    })
                    .collect()
            })
            .collect();
        Self { input_proj, stacks }
    }

    pub fn forward<F: Real>(
        &self,
        store: &ParamStore<F>,
        x: &SeqTensor<F>,
    ) -> Result<(DeterministicPyramid<F>, TcnCache<F>)> {
        let mut h = self.input_proj.forward(store, x)?;
        let mut layers = Vec::with_capacity(self.stacks.len());
        let mut caches = Vec::with_capacity(self.stacks.len());
        for stack in &self.stacks {
            let mut stack_caches = Vec::with_capacity(stack.len());
            for block in stack {
                let (y, cache) = block.forward(store, &h)?;
                stack_caches.push(cache);
                h = y;
            }
            layers.push(h.clone());
            caches.push(stack_caches);
        }
        Ok((
            DeterministicPyramid { layers },
            TcnCache {
                input: x.clone(),
                blocks: caches,
            },
        ))
    }

    /// Back-propagates `∂loss/∂d^l` for every layer into the parameters.
    pub fn backward<F: Real>(
        &self,
        store: &ParamStore<F>,
        cache: &TcnCache<F>,
        g_layers: Vec<SeqTensor<F>>,
        grads: &mut Gradients<F>,
    ) {
        debug_assert_eq!(g_layers.len(), self.stacks.len());
        let mut carry: Option<SeqTensor<F>> = None;
        for (l, g_layer) in g_layers.into_iter().enumerate().rev() {
            let mut g = g_layer;
            if let Some(c) = carry.take() {
                g.add_assign(&c);
            }
            for (block, bc) in self.stacks[l].iter().zip(&cache.blocks[l]).rev() {
                g = block.backward(store, bc, &g, grads);
            }
            carry = Some(g);
        }
        if let Some(g) = carry {
            self.input_proj.backward(store, &cache.input, &g, grads);
        }
    }
}
