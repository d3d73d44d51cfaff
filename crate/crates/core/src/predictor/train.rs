//! Mini-batch SGD training on MSE, plus ensemble training with derived
//! member seeds. Fully deterministic for a fixed config: shuffling uses a
//! seeded ChaCha stream and everything runs serially in a fixed order.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::grid::{GridTensor, SampleSequence};
use crate::scalar::Scalar;

use super::Trainable;

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub shuffle: bool,
    /// Which of the six target horizons is trained; 5 is 60 minutes ahead.
    pub horizon: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 12,
            epochs: 1,
            seed: 0,
            shuffle: true,
            horizon: 5,
        }
    }
}

/// Per-batch losses grouped by epoch.
#[derive(Debug, Clone, Default)]
pub struct LossTrace {
    pub batch_losses: Vec<Vec<f64>>,
}

impl LossTrace {
    pub fn epoch_means(&self) -> Vec<f64> {
        self.batch_losses
            .iter()
            .map(|b| {
                if b.is_empty() {
                    f64::NAN
                } else {
                    b.iter().sum::<f64>() / b.len() as f64
                }
            })
            .collect()
    }
}

/// Trains `model` in place by mini-batch SGD on MSE against the configured
/// target horizon. Returns the loss trace.
pub fn train<F: Scalar, M: Trainable<F>>(
    model: &mut M,
    data: &[SampleSequence<F>],
    cfg: &TrainConfig,
) -> Result<LossTrace> {
    if data.is_empty() {
        return Err(CoreError::EmptyInput("training data"));
    }
    if cfg.batch_size == 0 {
        return Err(CoreError::InvalidParam("batch_size must be positive".into()));
    }
    if cfg.horizon >= crate::grid::TARGET_FRAMES {
        return Err(CoreError::InvalidParam(format!(
            "horizon {} out of range",
            cfg.horizon
        )));
    }
    let shape = data[0].frame_shape();
    for s in data {
        if s.frame_shape() != shape {
            return Err(CoreError::ShapeMismatch(
                "training samples must share one frame shape".into(),
            ));
        }
    }

    model.note_batch_size(cfg.batch_size);
    let lr = F::from_f64_c(cfg.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut trace = LossTrace::default();

    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut epoch_losses = Vec::new();
        for (batch_idx, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let inputs: Vec<Vec<GridTensor<F>>> =
                chunk.iter().map(|&i| data[i].inputs().to_vec()).collect();
            let targets: Vec<GridTensor<F>> = chunk
                .iter()
                .map(|&i| data[i].target(cfg.horizon).clone())
                .collect();
            let loss = model.train_step(&inputs, &targets, lr).map_err(|e| match e {
                CoreError::NonFinite(_) => CoreError::TrainingDiverged {
                    epoch,
                    batch: batch_idx,
                },
                other => other,
            })?;
            let loss = loss.to_f64().unwrap_or(f64::NAN);
            if !loss.is_finite() {
                return Err(CoreError::TrainingDiverged {
                    epoch,
                    batch: batch_idx,
                });
            }
            epoch_losses.push(loss);
        }
        trace.batch_losses.push(epoch_losses);
    }
    Ok(trace)
}

/// An ensemble of independently trained members sharing one architecture and
/// training data but differing in seed (initialization and shuffling order).
#[derive(Debug, Clone)]
pub struct EnsembleModel<M> {
    pub members: Vec<M>,
    pub member_seeds: Vec<u64>,
}

impl<M> EnsembleModel<M> {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Derives one seed per member from the base seed, stable across runs.
pub fn derive_member_seeds(base_seed: u64, m: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    (0..m).map(|_| rng.random::<u64>()).collect()
}

/// Trains `m` members built by `build(seed)`; member order is stable and each
/// member trains with its own derived seed for init and shuffling.
pub fn train_ensemble<F: Scalar, M: Trainable<F>>(
    build: impl Fn(u64) -> M,
    data: &[SampleSequence<F>],
    cfg: &TrainConfig,
    m: usize,
) -> Result<(EnsembleModel<M>, Vec<LossTrace>)> {
    if m == 0 {
        return Err(CoreError::InvalidParam("ensemble size must be >= 1".into()));
    }
    let member_seeds = derive_member_seeds(cfg.seed, m);
    let mut members = Vec::with_capacity(m);
    let mut traces = Vec::with_capacity(m);
    for &seed in &member_seeds {
        let mut member = build(seed);
        let member_cfg = TrainConfig {
            seed,
            ..cfg.clone()
        };
        traces.push(train(&mut member, data, &member_cfg)?);
        members.push(member);
    }
    Ok((
        EnsembleModel {
            members,
            member_seeds,
        },
        traces,
    ))
}
