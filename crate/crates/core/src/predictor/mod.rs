//! Pluggable predictor contract plus the three reference predictors:
//! persistence, per-channel linear, and a small convolutional network with
//! batch normalization.

pub mod batchnorm;
pub mod conv;
pub mod train;

pub use batchnorm::{BatchNormLayer, BatchStats, NormMode};
pub use conv::{Conv2d, ConvArch, ConvPredictor};
pub use train::{train, train_ensemble, EnsembleModel, LossTrace, TrainConfig};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::grid::GridTensor;
use crate::io::{load_checkpoint, save_checkpoint, CheckpointEntry, TensorElement};
use crate::scalar::Scalar;

/// A trained forecasting model: maps the 12 input frames to the
/// 60-minute-ahead frame. Forward passes are deterministic for fixed weights
/// and fixed normalization mode.
pub trait Predictor<F: Scalar> {
    fn forward(&self, inputs: &[GridTensor<F>]) -> Result<GridTensor<F>>;

    fn has_batch_norm(&self) -> bool {
        false
    }

    fn is_deterministic(&self) -> bool {
        true
    }

    /// Forward pass where BN layers normalize with the statistics of the
    /// supplied reference mini-batch instead of the stored running values.
    fn forward_stochastic_bn(
        &self,
        _inputs: &[GridTensor<F>],
        _reference_batch: &[&[GridTensor<F>]],
    ) -> Result<GridTensor<F>> {
        Err(CoreError::Unsupported(
            "model has no batch normalization layers",
        ))
    }
}

/// Models with parameters trainable by mini-batch gradient descent on MSE.
pub trait Trainable<F: Scalar>: Predictor<F> {
    fn param_count(&self) -> usize;
    fn params(&self) -> Vec<F>;
    fn set_params(&mut self, p: &[F]) -> Result<()>;

    /// Pure mean-MSE loss over a batch and its gradient for every parameter.
    /// No side effects, so central finite differences can check it.
    fn loss_and_grad(
        &self,
        inputs: &[Vec<GridTensor<F>>],
        targets: &[GridTensor<F>],
    ) -> Result<(F, Vec<F>)>;

    /// One SGD step on a batch; returns the pre-step batch loss. Models with
    /// normalization layers refresh their running statistics here.
    fn train_step(
        &mut self,
        inputs: &[Vec<GridTensor<F>>],
        targets: &[GridTensor<F>],
        lr: F,
    ) -> Result<F> {
        let (loss, grads) = self.loss_and_grad(inputs, targets)?;
        if !loss.is_finite() {
            return Err(CoreError::NonFinite("training loss"));
        }
        let mut p = self.params();
        for (pi, gi) in p.iter_mut().zip(&grads) {
            *pi = *pi - lr * *gi;
        }
        self.set_params(&p)?;
        Ok(loss)
    }

    /// Records the mini-batch size used during training.
    fn note_batch_size(&mut self, _batch_size: usize) {}
}

/// Concatenates frames along the channel axis: stacked channel index is
/// `frame * channels + channel`.
pub fn stack_frames<F: Scalar>(frames: &[GridTensor<F>]) -> Result<GridTensor<F>> {
    let first = frames.first().ok_or(CoreError::EmptyInput("frames"))?;
    let (h, w, c) = first.shape();
    let n = frames.len();
    let mut out = GridTensor::zeros(h, w, n * c);
    for (t, f) in frames.iter().enumerate() {
        first.ensure_same_shape(f, "stack_frames")?;
        for i in 0..h {
            for j in 0..w {
                for k in 0..c {
                    out.set(i, j, t * c + k, f.get(i, j, k));
                }
            }
        }
    }
    Ok(out)
}

/// Predicts that nothing changes: the output is the last input frame.
#[derive(Debug, Clone, Default)]
pub struct PersistencePredictor;

impl<F: Scalar> Predictor<F> for PersistencePredictor {
    fn forward(&self, inputs: &[GridTensor<F>]) -> Result<GridTensor<F>> {
        inputs
            .last()
            .cloned()
            .ok_or(CoreError::EmptyInput("inputs"))
    }
}

/// Per-channel linear predictor: each output cell is an affine combination of
/// the 12 temporal values at the same pixel and channel,
/// `out[h,w,c] = bias[c] + sum_t weight[c][t] * input_t[h,w,c]`.
#[derive(Debug, Clone)]
pub struct LinearPredictor<F: Scalar> {
    pub n_frames: usize,
    pub channels: usize,
    /// Row-major `[channel][frame]`.
    pub weight: Vec<F>,
    pub bias: Vec<F>,
}

impl<F: Scalar> LinearPredictor<F> {
    pub fn new(n_frames: usize, channels: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = (1.0 / n_frames as f64).sqrt();
        let weight = (0..channels * n_frames)
            .map(|_| F::from_f64_c(rng.random_range(-bound..bound)))
            .collect();
        Self {
            n_frames,
            channels,
            weight,
            bias: vec![F::zero(); channels],
        }
    }

    pub fn from_weights(n_frames: usize, channels: usize, weight: Vec<F>, bias: Vec<F>) -> Self {
        assert_eq!(weight.len(), channels * n_frames);
        assert_eq!(bias.len(), channels);
        Self {
            n_frames,
            channels,
            weight,
            bias,
        }
    }

    #[inline]
    fn w(&self, c: usize, t: usize) -> F {
        self.weight[c * self.n_frames + t]
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()>
    where
        F: TensorElement,
    {
        save_checkpoint(
            path,
            &[
                CheckpointEntry {
                    name: "linear.weight".into(),
                    dims: vec![self.channels as u32, self.n_frames as u32],
                    data: self.weight.clone(),
                },
                CheckpointEntry {
                    name: "linear.bias".into(),
                    dims: vec![self.channels as u32],
                    data: self.bias.clone(),
                },
            ],
        )
    }

    pub fn load(path: &std::path::Path) -> Result<Self>
    where
        F: TensorElement,
    {
        let entries = load_checkpoint::<F>(path)?;
        let weight = entries
            .iter()
            .find(|e| e.name == "linear.weight")
            .ok_or_else(|| CoreError::Format("checkpoint missing linear.weight".into()))?;
        let bias = entries
            .iter()
            .find(|e| e.name == "linear.bias")
            .ok_or_else(|| CoreError::Format("checkpoint missing linear.bias".into()))?;
        let channels = weight.dims[0] as usize;
        let n_frames = weight.dims[1] as usize;
        Ok(Self::from_weights(
            n_frames,
            channels,
            weight.data.clone(),
            bias.data.clone(),
        ))
    }
}

impl<F: Scalar> Predictor<F> for LinearPredictor<F> {
    fn forward(&self, inputs: &[GridTensor<F>]) -> Result<GridTensor<F>> {
        if inputs.len() != self.n_frames {
            return Err(CoreError::ShapeMismatch(format!(
                "expected {} input frames, got {}",
                self.n_frames,
                inputs.len()
            )));
        }
        let (h, w, c) = inputs[0].shape();
        if c != self.channels {
            return Err(CoreError::ShapeMismatch(format!(
                "expected {} channels, got {c}",
                self.channels
            )));
        }
        let mut out = GridTensor::zeros(h, w, c);
        for i in 0..h {
            for j in 0..w {
                for k in 0..c {
                    let mut acc = self.bias[k];
                    for (t, f) in inputs.iter().enumerate() {
                        acc += self.w(k, t) * f.get(i, j, k);
                    }
                    out.set(i, j, k, acc);
                }
            }
        }
        Ok(out)
    }
}

impl<F: Scalar> Trainable<F> for LinearPredictor<F> {
    fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    fn params(&self) -> Vec<F> {
        let mut p = self.weight.clone();
        p.extend_from_slice(&self.bias);
        p
    }

    fn set_params(&mut self, p: &[F]) -> Result<()> {
        if p.len() != self.param_count() {
            return Err(CoreError::ShapeMismatch(format!(
                "expected {} params, got {}",
                self.param_count(),
                p.len()
            )));
        }
        let (w, b) = p.split_at(self.weight.len());
        self.weight.copy_from_slice(w);
        self.bias.copy_from_slice(b);
        Ok(())
    }

    fn loss_and_grad(
        &self,
        inputs: &[Vec<GridTensor<F>>],
        targets: &[GridTensor<F>],
    ) -> Result<(F, Vec<F>)> {
        if inputs.is_empty() || inputs.len() != targets.len() {
            return Err(CoreError::ShapeMismatch(
                "batch inputs and targets must be non-empty and equal length".into(),
            ));
        }
        let (h, w, c) = targets[0].shape();
        let norm = F::from_usize_c(inputs.len() * h * w * c);
        let two = F::from_f64_c(2.0);
        let mut loss = F::zero();
        let mut dw = vec![F::zero(); self.weight.len()];
        let mut db = vec![F::zero(); self.bias.len()];
        for (frames, target) in inputs.iter().zip(targets) {
            let pred = self.forward(frames)?;
            pred.ensure_same_shape(target, "linear target")?;
            for i in 0..h {
                for j in 0..w {
                    for k in 0..c {
                        let r = pred.get(i, j, k) - target.get(i, j, k);
                        loss += r * r;
                        let g = two * r / norm;
                        db[k] += g;
                        for (t, f) in frames.iter().enumerate() {
                            dw[k * self.n_frames + t] += g * f.get(i, j, k);
                        }
                    }
                }
            }
        }
        loss /= norm;
        let mut grads = dw;
        grads.extend(db);
        Ok((loss, grads))
    }
}
