use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use rand::distr::uniform::SampleUniform;

/// Floating-point scalar every grid, model and statistic in this crate is
/// generic over. `f32` keeps bulk payloads small; `f64` is used wherever
/// tight numeric tolerances matter.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + SampleUniform
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossless-enough conversion from `f64` for constants and config values.
    fn from_f64_c(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant not representable in scalar type")
    }

    fn from_usize_c(v: usize) -> Self {
        Self::from_usize(v).expect("usize not representable in scalar type")
    }
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + NumAssign
        + SampleUniform
        + Sum
        + Debug
        + Display
        + Default
        + Send
        + Sync
        + 'static
{
}

/// Population mean of a slice. Returns `None` on empty input.
pub fn mean<F: Scalar>(values: &[F]) -> Option<F> {
    if values.is_empty() {
        return None;
    }
    let sum: F = values.iter().copied().sum();
    Some(sum / F::from_usize_c(values.len()))
}

/// Population (1/N) standard deviation of a slice.
pub fn population_std<F: Scalar>(values: &[F]) -> Option<F> {
    let m = mean(values)?;
    let n = F::from_usize_c(values.len());
    let ss: F = values.iter().map(|&v| (v - m) * (v - m)).sum();
    Some((ss / n).sqrt())
}

/// Sample (1/(N-1)) standard deviation. Returns `None` for fewer than two values.
pub fn sample_std<F: Scalar>(values: &[F]) -> Option<F> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values)?;
    let n = F::from_usize_c(values.len() - 1);
    let ss: F = values.iter().map(|&v| (v - m) * (v - m)).sum();
    Some((ss / n).sqrt())
}
