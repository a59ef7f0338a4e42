//! Scalar abstraction so the whole model can run in either `f32` or `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive};

pub trait Real:
    Float
    + FromPrimitive
    + LinalgScalar
    + ScalarOperand
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Short name used in manifests and diagnostics.
    const NAME: &'static str;

    /// Converts an `f64` literal into this scalar type.
    fn lit(v: f64) -> Self;

    fn as_f64(self) -> f64;

    fn as_f32(self) -> f32 {
        self.as_f64() as f32
    }

    /// `tanh` used by the gated activations.
    #[inline]
    fn act_tanh(self) -> Self {
        self.tanh()
    }

    /// Logistic sigmoid used by the gated activations.
    #[inline]
    fn act_sigmoid(self) -> Self {
        sigmoid(self)
    }
}

impl Real for f32 {
    const NAME: &'static str = "f32";

    #[inline]
    fn lit(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }

    #[inline]
    fn as_f32(self) -> f32 {
        self
    }

    #[inline]
    fn act_tanh(self) -> Self {
        let t = exp_f32(-2.0 * self.abs());
        ((1.0 - t) / (1.0 + t)).copysign(self)
    }

    #[inline]
    fn act_sigmoid(self) -> Self {
        1.0 / (1.0 + exp_f32(-self))
    }
}

/// Branch-free `e^x` for `f32` (range reduction plus a degree-6 polynomial,
/// about 1 ulp), written so loops over it vectorize.
#[inline]
pub fn exp_f32(x: f32) -> f32 {
    const LOG2E: f32 = std::f32::consts::LOG2_E;
    const LN2_HI: f32 = 0.693_359_4;
    const LN2_LO: f32 = -2.121_944_4e-4;
    let x = x.clamp(-87.0, 88.0);
    // round to nearest via the 1.5·2^23 trick (no libm call)
    const SHIFT: f32 = 12_582_912.0;
    let n = (x * LOG2E + SHIFT) - SHIFT;
    let r = x - n * LN2_HI - n * LN2_LO;
    let p = ((((1.987_569_1e-4 * r + 1.398_199_9e-3) * r + 8.333_452e-3) * r + 4.166_579_6e-2) * r
        + 1.666_666_5e-1)
        * r
        + 5.000_000_1e-1;
    let e = p * r * r + r + 1.0;
    e * f32::from_bits(((n as i32 + 127) as u32) << 23)
}

impl Real for f64 {
    const NAME: &'static str = "f64";

    #[inline]
    fn lit(v: f64) -> Self {
        v
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

/// Numerically stable `ln(1 + e^x)`.
#[inline]
pub fn softplus<F: Real>(x: F) -> F {
    x.max(F::zero()) + (-x.abs()).exp().ln_1p()
}

#[inline]
pub fn sigmoid<F: Real>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// `log Σ exp(v_i)` with the max-shift stabilization.
pub fn log_sum_exp<F: Real>(values: impl Iterator<Item = F> + Clone) -> F {
    let max = values.clone().fold(F::neg_infinity(), F::max);
    if max == F::neg_infinity() {
        return max;
    }
    let s: F = values.map(|v| (v - max).exp()).sum();
    max + s.ln()
}
