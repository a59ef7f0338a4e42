//! Named parameter storage shared by every layer of a model.
//!
//! Layers hold [`ParamId`] handles into a [`ParamStore`]; gradients live in a
//! parallel [`Gradients`] buffer with identical layout. This keeps the
//! optimizer, checkpointing and finite-difference checks generic: they only
//! iterate over flat named buffers.

use ndarray::{ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2};
use rand::Rng;

use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param<F> {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<F>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore<F> {
    params: Vec<Param<F>>,
}

impl<F: Real> ParamStore<F> {
    pub fn new() -> Self {
        Self { params: Vec::new() }
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, shape: &[usize]) -> ParamId {
        let len = shape.iter().product();
        self.params.push(Param {
            name: name.into(),
            shape: shape.to_vec(),
            value: vec![F::zero(); len],
        });
        ParamId(self.params.len() - 1)
    }

    /// Adds a parameter drawn from `U(−bound, bound)`.
    pub fn add_uniform<R: Rng>(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        bound: f64,
        rng: &mut R,
    ) -> ParamId {
        let id = self.add_zeros(name, shape);
        for v in self.params[id.0].value.iter_mut() {
            *v = F::lit(rng.random_range(-bound..bound));
        }
        id
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param<F>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param<F>> {
        self.params.iter_mut()
    }

    /// Handles of all parameters in creation order.
    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn param(&self, id: ParamId) -> &Param<F> {
        &self.params[id.0]
    }

    pub fn values(&self, id: ParamId) -> &[F] {
        &self.params[id.0].value
    }

    pub fn values_mut(&mut self, id: ParamId) -> &mut [F] {
        &mut self.params[id.0].value
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    /// Tap `k` of a `[width × c_in × c_out]` kernel as a `c_in × c_out` matrix.
    pub fn kernel_tap(&self, id: ParamId, k: usize) -> ArrayView2<'_, F> {
        let p = &self.params[id.0];
        let (cin, cout) = (p.shape[1], p.shape[2]);
        let len = cin * cout;
        ArrayView2::from_shape((cin, cout), &p.value[k * len..(k + 1) * len])
            .expect("kernel tap shape")
    }

    pub fn vector(&self, id: ParamId) -> ArrayView1<'_, F> {
        ArrayView1::from(&self.params[id.0].value[..])
    }
}

/// Gradient buffers aligned with a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<F> {
    values: Vec<Vec<F>>,
}

impl<F: Real> Gradients<F> {
    pub fn zeros_like(store: &ParamStore<F>) -> Self {
        Self {
            values: store.iter().map(|p| vec![F::zero(); p.value.len()]).collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> &[F] {
        &self.values[id.0]
    }

    pub fn by_index(&self, i: usize) -> &[F] {
        &self.values[i]
    }

    pub fn by_index_mut(&mut self, i: usize) -> &mut [F] {
        &mut self.values[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vec<F>> {
        self.values.iter()
    }

    pub(crate) fn kernel_tap_mut(
        &mut self,
        store: &ParamStore<F>,
        id: ParamId,
        k: usize,
    ) -> ArrayViewMut2<'_, F> {
        let shape = &store.param(id).shape;
        let (cin, cout) = (shape[1], shape[2]);
        let len = cin * cout;
        ArrayViewMut2::from_shape((cin, cout), &mut self.values[id.0][k * len..(k + 1) * len])
            .expect("kernel tap shape")
    }

    pub(crate) fn vector_mut(&mut self, id: ParamId) -> ArrayViewMut1<'_, F> {
        ArrayViewMut1::from(&mut self.values[id.0][..])
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().flatten().all(|v| v.is_finite())
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
    }
}
