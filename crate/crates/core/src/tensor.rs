//! Batched sequence tensors.
//!
//! A [`SeqTensor`] stores a `[B × T × C]` tensor as a row matrix of shape
//! `[B·T × C]`, with row `b·T + t` holding the channels of sequence `b` at
//! step `t`. Every per-step transform in the model (1x1 convolutions, gating,
//! distribution heads) is then a plain matrix operation over rows, and the
//! only operations that mix rows are the causal time shifts below.

use ndarray::{s, Array1, Array2, Array3, ArrayView2, Axis};

use crate::error::{shape_err, Result};
use crate::real::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct SeqTensor<F> {
    data: Array2<F>,
    batch: usize,
    steps: usize,
}

impl<F: Real> SeqTensor<F> {
    pub fn zeros(batch: usize, steps: usize, channels: usize) -> Self {
        Self {
            data: Array2::zeros((batch * steps, channels)),
            batch,
            steps,
        }
    }

    pub fn from_rows(data: Array2<F>, batch: usize, steps: usize) -> Result<Self> {
        if data.nrows() != batch * steps {
            return Err(shape_err(format!(
                "row matrix has {} rows, expected B·T = {}·{}",
                data.nrows(),
                batch,
                steps
            )));
        }
        Ok(Self { data, batch, steps })
    }

    pub fn from_array3(a: &Array3<F>) -> Self {
        let (b, t, c) = a.dim();
        let data = a
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((b * t, c))
            .expect("standard layout reshape");
        Self {
            data,
            batch: b,
            steps: t,
        }
    }

    pub fn to_array3(&self) -> Array3<F> {
        self.data
            .clone()
            .into_shape_with_order((self.batch, self.steps, self.channels()))
            .expect("standard layout reshape")
    }

    #[inline]
    pub fn batch(&self) -> usize {
        self.batch
    }

    #[inline]
    pub fn steps(&self) -> usize {
        self.steps
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.data.ncols()
    }

    #[inline]
    pub fn rows(&self) -> &Array2<F> {
        &self.data
    }

    #[inline]
    pub fn rows_mut(&mut self) -> &mut Array2<F> {
        &mut self.data
    }

    pub fn into_rows(self) -> Array2<F> {
        self.data
    }

    #[inline]
    pub fn at(&self, b: usize, t: usize, c: usize) -> F {
        self.data[[b * self.steps + t, c]]
    }

    #[inline]
    pub fn at_mut(&mut self, b: usize, t: usize, c: usize) -> &mut F {
        &mut self.data[[b * self.steps + t, c]]
    }

    pub fn same_layout(&self, other: &Self) -> bool {
        self.batch == other.batch && self.steps == other.steps
    }

    pub fn with_rows(&self, data: Array2<F>) -> Self {
        debug_assert_eq!(data.nrows(), self.data.nrows());
        Self {
            data,
            batch: self.batch,
            steps: self.steps,
        }
    }

    pub fn map(&self, f: impl Fn(F) -> F) -> Self {
        self.with_rows(self.data.mapv(f))
    }

    /// Delays every sequence by `shift` steps: `out[b,t] = in[b,t−shift]`,
    /// with zeros where `t < shift`.
    pub fn shift_right(&self, shift: usize) -> Self {
        let mut out = Array2::zeros(self.data.raw_dim());
        if shift < self.steps {
            let keep = self.steps - shift;
            for b in 0..self.batch {
                let base = b * self.steps;
                out.slice_mut(s![base + shift..base + self.steps, ..])
                    .assign(&self.data.slice(s![base..base + keep, ..]));
            }
        }
        self.with_rows(out)
    }

    /// Adjoint of [`SeqTensor::shift_right`]: `out[b,t] = in[b,t+shift]`,
    /// with zeros in the last `shift` steps.
    pub fn shift_left(&self, shift: usize) -> Self {
        let mut out = Array2::zeros(self.data.raw_dim());
        if shift < self.steps {
            let keep = self.steps - shift;
            for b in 0..self.batch {
                let base = b * self.steps;
                out.slice_mut(s![base..base + keep, ..])
                    .assign(&self.data.slice(s![base + shift..base + self.steps, ..]));
            }
        }
        self.with_rows(out)
    }

    /// Concatenates tensors along the channel axis, in order.
    pub fn concat(parts: &[&SeqTensor<F>]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| shape_err("cannot concatenate zero tensors"))?;
        if parts.iter().any(|p| !p.same_layout(first)) {
            return Err(shape_err("concatenated tensors disagree on B or T"));
        }
        let views: Vec<ArrayView2<F>> = parts.iter().map(|p| p.data.view()).collect();
        let data = ndarray::concatenate(Axis(1), &views)
            .map_err(|e| shape_err(format!("channel concat failed: {e}")))?;
        Ok(first.with_rows(data))
    }

    /// Splits channels into consecutive blocks of the given widths.
    pub fn split(&self, widths: &[usize]) -> Vec<Self> {
        debug_assert_eq!(widths.iter().sum::<usize>(), self.channels());
        let mut start = 0;
        widths
            .iter()
            .map(|&w| {
                let part = self.data.slice(s![.., start..start + w]).to_owned();
                start += w;
                self.with_rows(part)
            })
            .collect()
    }

    pub fn add_assign(&mut self, other: &Self) {
        self.data += &other.data;
    }

    /// Sums a per-row vector back into a `[B × T]` matrix.
    pub fn row_vector_to_grid(&self, v: Array1<F>) -> Array2<F> {
        v.into_shape_with_order((self.batch, self.steps))
            .expect("one value per row")
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
