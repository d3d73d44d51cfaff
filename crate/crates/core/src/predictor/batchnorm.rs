//! Batch normalization over (batch, height, width) per feature channel,
//! with train-time batch statistics, test-time running statistics, and the
//! reference-batch statistics that Monte Carlo batch normalization needs.

use crate::error::{CoreError, Result};
use crate::grid::GridTensor;
use crate::scalar::Scalar;

/// Which statistics a normalization pass uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormMode {
    /// Statistics of the mini-batch being processed.
    Train,
    /// Stored running statistics.
    TestRunning,
    /// Statistics of a supplied reference mini-batch.
    TestStochastic,
}

/// Per-channel batch statistics (population variance).
#[derive(Debug, Clone)]
pub struct BatchStats<F> {
    pub mean: Vec<F>,
    pub var: Vec<F>,
}

#[derive(Debug, Clone)]
pub struct BatchNormLayer<F: Scalar> {
    pub gamma: Vec<F>,
    pub beta: Vec<F>,
    pub running_mean: Vec<F>,
    pub running_var: Vec<F>,
    pub epsilon: F,
    pub momentum: F,
}

impl<F: Scalar> BatchNormLayer<F> {
    pub fn new(features: usize) -> Self {
        Self {
            gamma: vec![F::one(); features],
            beta: vec![F::zero(); features],
            running_mean: vec![F::zero(); features],
            running_var: vec![F::one(); features],
            epsilon: F::from_f64_c(1e-5),
            momentum: F::from_f64_c(0.1),
        }
    }

    pub fn features(&self) -> usize {
        self.gamma.len()
    }

    /// Population mean/variance per channel across every (sample, pixel).
    pub fn batch_stats(&self, maps: &[GridTensor<F>]) -> Result<BatchStats<F>> {
        let first = maps.first().ok_or(CoreError::EmptyInput("bn batch"))?;
        let c = first.channels();
        if c != self.features() {
            return Err(CoreError::ShapeMismatch(format!(
                "bn expects {} channels, got {c}",
                self.features()
            )));
        }
        let mut mean = vec![F::zero(); c];
        let mut var = vec![F::zero(); c];
        let mut count = 0usize;
        for m in maps {
            first.ensure_same_shape(m, "bn batch maps")?;
            count += m.height() * m.width();
            for px in m.data().chunks_exact(c) {
                for (k, &v) in px.iter().enumerate() {
                    mean[k] += v;
                }
            }
        }
        let n = F::from_usize_c(count);
        for k in 0..c {
            mean[k] /= n;
        }
        for m in maps {
            for px in m.data().chunks_exact(c) {
                for (k, &v) in px.iter().enumerate() {
                    let d = v - mean[k];
                    var[k] += d * d;
                }
            }
        }
        for k in 0..c {
            var[k] /= n;
        }
        Ok(BatchStats { mean, var })
    }

    /// Normalizes one map with explicit statistics:
    /// y = gamma * (x - mean) / sqrt(var + eps) + beta.
    pub fn normalize(&self, x: &GridTensor<F>, stats: &BatchStats<F>) -> GridTensor<F> {
        let c = self.features();
        let inv_std: Vec<F> = stats
            .var
            .iter()
            .map(|&v| (v + self.epsilon).sqrt().recip())
            .collect();
        let mut out = x.clone();
        for px in out.data_mut().chunks_exact_mut(c) {
            for (k, v) in px.iter_mut().enumerate() {
                *v = self.gamma[k] * (*v - stats.mean[k]) * inv_std[k] + self.beta[k];
            }
        }
        out
    }

    /// Test-time normalization with the stored running statistics.
    pub fn normalize_running(&self, x: &GridTensor<F>) -> GridTensor<F> {
        let stats = BatchStats {
            mean: self.running_mean.clone(),
            var: self.running_var.clone(),
        };
        self.normalize(x, &stats)
    }

    /// Exponential moving-average update of the running statistics.
    /// Variance stays strictly positive because batch variance is >= 0 and
    /// the previous value is > 0.
    pub fn update_running(&mut self, stats: &BatchStats<F>) {
        let m = self.momentum;
        let keep = F::one() - m;
        for k in 0..self.features() {
            self.running_mean[k] = keep * self.running_mean[k] + m * stats.mean[k];
            self.running_var[k] = (keep * self.running_var[k] + m * stats.var[k])
                .max(F::min_positive_value());
        }
    }

    /// Backward pass for train-mode normalization over a batch.
    ///
    /// `xs` are the pre-normalization inputs, `dys` the upstream gradients.
    /// Returns per-map input gradients plus (dgamma, dbeta).
    pub fn backward(
        &self,
        xs: &[GridTensor<F>],
        stats: &BatchStats<F>,
        dys: &[GridTensor<F>],
    ) -> Result<(Vec<GridTensor<F>>, Vec<F>, Vec<F>)> {
        let c = self.features();
        let count: usize = xs.iter().map(|m| m.height() * m.width()).sum();
        let n = F::from_usize_c(count);
        let inv_std: Vec<F> = stats
            .var
            .iter()
            .map(|&v| (v + self.epsilon).sqrt().recip())
            .collect();

        let mut dgamma = vec![F::zero(); c];
        let mut dbeta = vec![F::zero(); c];
        let mut sum_dy = vec![F::zero(); c];
        let mut sum_dy_xhat = vec![F::zero(); c];
        for (x, dy) in xs.iter().zip(dys) {
            x.ensure_same_shape(dy, "bn backward")?;
            for (px, dpx) in x.data().chunks_exact(c).zip(dy.data().chunks_exact(c)) {
                for k in 0..c {
                    let xhat = (px[k] - stats.mean[k]) * inv_std[k];
                    dbeta[k] += dpx[k];
                    dgamma[k] += dpx[k] * xhat;
                    sum_dy[k] += dpx[k];
                    sum_dy_xhat[k] += dpx[k] * xhat;
                }
            }
        }

        let mut dxs = Vec::with_capacity(xs.len());
        for (x, dy) in xs.iter().zip(dys) {
            let mut dx = GridTensor::zeros(x.height(), x.width(), c);
            for ((px, dpx), out) in x
                .data()
                .chunks_exact(c)
                .zip(dy.data().chunks_exact(c))
                .zip(dx.data_mut().chunks_exact_mut(c))
            {
                for k in 0..c {
                    let xhat = (px[k] - stats.mean[k]) * inv_std[k];
                    out[k] = self.gamma[k]
                        * inv_std[k]
                        * (dpx[k] - sum_dy[k] / n - xhat * sum_dy_xhat[k] / n);
                }
            }
            dxs.push(dx);
        }
        Ok((dxs, dgamma, dbeta))
    }
}
