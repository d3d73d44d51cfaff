//! Distribution-free, post-hoc uncertainty quantification for gridded
//! spatio-temporal regression: sampling-based uncertainty estimators,
//! conformal prediction intervals, calibration and sharpness metrics, and a
//! kernel-density outlier detector, together with a deterministic synthetic
//! traffic generator used to exercise everything end to end.
//!
//! The whole crate is generic over the floating-point scalar via
//! [`Scalar`]; concrete aliases for the common payload types live at the
//! crate root.

pub mod error;
pub mod scalar;

pub mod conformal;
pub mod estimators;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod outlier;
pub mod predictor;
pub mod special;
pub mod stats;
pub mod synth;
pub mod transform;

pub use error::{CoreError, Result};
pub use scalar::Scalar;

pub use grid::{ActivityMask, ChannelLayout, GridTensor, SampleSequence};
pub use transform::{Rotation, TransformSpec};

/// Single-precision grid, the default for bulk traffic payloads.
pub type GridTensorF32 = GridTensor<f32>;
/// Double-precision grid, used where tight tolerances matter.
pub type GridTensorF64 = GridTensor<f64>;
pub type SampleSequenceF32 = SampleSequence<f32>;
pub type SampleSequenceF64 = SampleSequence<f64>;
