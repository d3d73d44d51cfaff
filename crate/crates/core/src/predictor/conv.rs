//! Reference convolutional predictor: 3x3 conv -> BN -> ReLU -> 3x3 conv ->
//! BN -> ReLU -> 1x1 conv, operating on the input frames stacked along the
//! channel axis. Fully convolutional, so it accepts any spatial size.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::grid::GridTensor;
use crate::io::{load_checkpoint, save_checkpoint, CheckpointEntry, TensorElement};
use crate::scalar::Scalar;

use super::batchnorm::{BatchNormLayer, BatchStats};
use super::{stack_frames, Predictor, Trainable};

/// Zero-padded stride-1 2D convolution. Weight layout is
/// [out_c][kh][kw][in_c], channels-last like the tensors it consumes.
#[derive(Debug, Clone)]
pub struct Conv2d<F: Scalar> {
    pub in_c: usize,
    pub out_c: usize,
    pub kernel: usize,
    pub weight: Vec<F>,
    pub bias: Vec<F>,
}

impl<F: Scalar> Conv2d<F> {
    pub fn new(in_c: usize, out_c: usize, kernel: usize, rng: &mut impl Rng) -> Self {
        let fan_in = in_c * kernel * kernel;
        let bound = (1.0 / fan_in as f64).sqrt();
        let weight = (0..out_c * kernel * kernel * in_c)
            .map(|_| F::from_f64_c(rng.random_range(-bound..bound)))
            .collect();
        Self {
            in_c,
            out_c,
            kernel,
            weight,
            bias: vec![F::zero(); out_c],
        }
    }

    pub fn zeroed(in_c: usize, out_c: usize, kernel: usize) -> Self {
        Self {
            in_c,
            out_c,
            kernel,
            weight: vec![F::zero(); out_c * kernel * kernel * in_c],
            bias: vec![F::zero(); out_c],
        }
    }

    #[inline]
    fn w_slice(&self, oc: usize, a: usize, b: usize) -> &[F] {
        let base = ((oc * self.kernel + a) * self.kernel + b) * self.in_c;
        &self.weight[base..base + self.in_c]
    }

    pub fn forward(&self, x: &GridTensor<F>) -> Result<GridTensor<F>> {
        let (h, w, c) = x.shape();
        if c != self.in_c {
            return Err(CoreError::ShapeMismatch(format!(
                "conv expects {} input channels, got {c}",
                self.in_c
            )));
        }
        let pad = self.kernel / 2;
        let mut out = GridTensor::zeros(h, w, self.out_c);
        for i in 0..h {
            for j in 0..w {
                for oc in 0..self.out_c {
                    let mut acc = self.bias[oc];
                    for a in 0..self.kernel {
                        let ii = i + a;
                        if ii < pad || ii - pad >= h {
                            continue;
                        }
                        let ii = ii - pad;
                        for b in 0..self.kernel {
                            let jj = j + b;
                            if jj < pad || jj - pad >= w {
                                continue;
                            }
                            let jj = jj - pad;
                            let xb = x.idx(ii, jj, 0);
                            let xs = &x.data()[xb..xb + self.in_c];
                            let ws = self.w_slice(oc, a, b);
                            for k in 0..self.in_c {
                                acc += xs[k] * ws[k];
                            }
                        }
                    }
                    out.set(i, j, oc, acc);
                }
            }
        }
        Ok(out)
    }

    /// Gradients of the loss w.r.t. input, weights and bias given upstream dy.
    pub fn backward(
        &self,
        x: &GridTensor<F>,
        dy: &GridTensor<F>,
    ) -> Result<(GridTensor<F>, Vec<F>, Vec<F>)> {
        let (h, w, _) = x.shape();
        let pad = self.kernel / 2;
        let mut dx = GridTensor::zeros(h, w, self.in_c);
        let mut dw = vec![F::zero(); self.weight.len()];
        let mut db = vec![F::zero(); self.out_c];
        for i in 0..h {
            for j in 0..w {
                for oc in 0..self.out_c {
                    let g = dy.get(i, j, oc);
                    if g == F::zero() {
                        continue;
                    }
                    db[oc] += g;
                    for a in 0..self.kernel {
                        let ii = i + a;
                        if ii < pad || ii - pad >= h {
                            continue;
                        }
                        let ii = ii - pad;
                        for b in 0..self.kernel {
                            let jj = j + b;
                            if jj < pad || jj - pad >= w {
                                continue;
                            }
                            let jj = jj - pad;
                            let xb = x.idx(ii, jj, 0);
                            let wb = ((oc * self.kernel + a) * self.kernel + b) * self.in_c;
                            let dxb = dx.idx(ii, jj, 0);
                            for k in 0..self.in_c {
                                dw[wb + k] += g * x.data()[xb + k];
                                dx.data_mut()[dxb + k] += g * self.weight[wb + k];
                            }
                        }
                    }
                }
            }
        }
        Ok((dx, dw, db))
    }
}

fn relu<F: Scalar>(x: &GridTensor<F>) -> GridTensor<F> {
    x.map(|v| v.max(F::zero()))
}

fn relu_backward<F: Scalar>(x: &GridTensor<F>, dy: &GridTensor<F>) -> GridTensor<F> {
    let mut dx = dy.clone();
    for (d, &v) in dx.data_mut().iter_mut().zip(x.data()) {
        if v <= F::zero() {
            *d = F::zero();
        }
    }
    dx
}

/// Architecture knobs for [`ConvPredictor`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvArch {
    /// Frames stacked along channels at the input.
    pub input_frames: usize,
    /// Channels per frame (also the output channel count).
    pub channels: usize,
    /// Width of the two hidden feature maps.
    pub hidden: usize,
}

impl Default for ConvArch {
    fn default() -> Self {
        // 12 frames x 8 channels = 96 stacked input features
        Self {
            input_frames: crate::grid::INPUT_FRAMES,
            channels: 8,
            hidden: 16,
        }
    }
}

impl ConvArch {
    pub fn stacked_channels(&self) -> usize {
        self.input_frames * self.channels
    }
}

#[derive(Debug, Clone)]
pub struct ConvPredictor<F: Scalar> {
    pub arch: ConvArch,
    pub conv1: Conv2d<F>,
    pub bn1: BatchNormLayer<F>,
    pub conv2: Conv2d<F>,
    pub bn2: BatchNormLayer<F>,
    pub conv3: Conv2d<F>,
    /// Batch size seen at training time; stochastic-BN reference batches
    /// must match it.
    pub trained_batch_size: Option<usize>,
}

struct ForwardCache<F: Scalar> {
    stacked: Vec<GridTensor<F>>,
    h1: Vec<GridTensor<F>>,
    stats1: BatchStats<F>,
    n1: Vec<GridTensor<F>>,
    a1: Vec<GridTensor<F>>,
    h2: Vec<GridTensor<F>>,
    stats2: BatchStats<F>,
    n2: Vec<GridTensor<F>>,
    a2: Vec<GridTensor<F>>,
    out: Vec<GridTensor<F>>,
}

impl<F: Scalar> ConvPredictor<F> {
    pub fn new(arch: ConvArch, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            arch,
            conv1: Conv2d::new(arch.stacked_channels(), arch.hidden, 3, &mut rng),
            bn1: BatchNormLayer::new(arch.hidden),
            conv2: Conv2d::new(arch.hidden, arch.hidden, 3, &mut rng),
            bn2: BatchNormLayer::new(arch.hidden),
            conv3: Conv2d::new(arch.hidden, arch.channels, 1, &mut rng),
            trained_batch_size: None,
        }
    }

    pub fn zeroed(arch: ConvArch) -> Self {
        Self {
            arch,
            conv1: Conv2d::zeroed(arch.stacked_channels(), arch.hidden, 3),
            bn1: BatchNormLayer::new(arch.hidden),
            conv2: Conv2d::zeroed(arch.hidden, arch.hidden, 3),
            bn2: BatchNormLayer::new(arch.hidden),
            conv3: Conv2d::zeroed(arch.hidden, arch.channels, 1),
            trained_batch_size: None,
        }
    }

    fn stack_batch(&self, inputs: &[Vec<GridTensor<F>>]) -> Result<Vec<GridTensor<F>>> {
        inputs.iter().map(|frames| self.stack(frames)).collect()
    }

    fn stack(&self, frames: &[GridTensor<F>]) -> Result<GridTensor<F>> {
        if frames.len() != self.arch.input_frames {
            return Err(CoreError::ShapeMismatch(format!(
                "expected {} input frames, got {}",
                self.arch.input_frames,
                frames.len()
            )));
        }
        if frames[0].channels() != self.arch.channels {
            return Err(CoreError::ShapeMismatch(format!(
                "expected {} channels per frame, got {}",
                self.arch.channels,
                frames[0].channels()
            )));
        }
        stack_frames(frames)
    }

    /// Train-mode forward over a batch, caching everything backward needs.
    fn forward_train(&self, inputs: &[Vec<GridTensor<F>>]) -> Result<ForwardCache<F>> {
        let stacked = self.stack_batch(inputs)?;
        let h1: Vec<_> = stacked
            .iter()
            .map(|x| self.conv1.forward(x))
            .collect::<Result<_>>()?;
        let stats1 = self.bn1.batch_stats(&h1)?;
        let n1: Vec<_> = h1.iter().map(|x| self.bn1.normalize(x, &stats1)).collect();
        let a1: Vec<_> = n1.iter().map(relu).collect();
        let h2: Vec<_> = a1
            .iter()
            .map(|x| self.conv2.forward(x))
            .collect::<Result<_>>()?;
        let stats2 = self.bn2.batch_stats(&h2)?;
        let n2: Vec<_> = h2.iter().map(|x| self.bn2.normalize(x, &stats2)).collect();
        let a2: Vec<_> = n2.iter().map(relu).collect();
        let out: Vec<_> = a2
            .iter()
            .map(|x| self.conv3.forward(x))
            .collect::<Result<_>>()?;
        Ok(ForwardCache {
            stacked,
            h1,
            stats1,
            n1,
            a1,
            h2,
            stats2,
            n2,
            a2,
            out,
        })
    }

    /// MSE loss over the batch plus flat parameter gradients, given a cache.
    fn backward_from_cache(
        &self,
        cache: &ForwardCache<F>,
        targets: &[GridTensor<F>],
    ) -> Result<(F, Vec<F>)> {
        let batch = cache.out.len();
        let cells = cache.out[0].len();
        let norm = F::from_usize_c(batch * cells);
        let two = F::from_f64_c(2.0);

        let mut loss = F::zero();
        let mut dout = Vec::with_capacity(batch);
        for (o, t) in cache.out.iter().zip(targets) {
            o.ensure_same_shape(t, "conv target")?;
            let mut d = GridTensor::zeros(o.height(), o.width(), o.channels());
            for ((dd, &ov), &tv) in d.data_mut().iter_mut().zip(o.data()).zip(t.data()) {
                let r = ov - tv;
                loss += r * r;
                *dd = two * r / norm;
            }
            dout.push(d);
        }
        loss /= norm;

        // conv3
        let mut dw3 = vec![F::zero(); self.conv3.weight.len()];
        let mut db3 = vec![F::zero(); self.conv3.out_c];
        let mut da2 = Vec::with_capacity(batch);
        for (x, dy) in cache.a2.iter().zip(&dout) {
            let (dx, dw, db) = self.conv3.backward(x, dy)?;
            for (acc, v) in dw3.iter_mut().zip(dw) {
                *acc += v;
            }
            for (acc, v) in db3.iter_mut().zip(db) {
                *acc += v;
            }
            da2.push(dx);
        }
        // relu 2
        let dn2: Vec<_> = cache
            .n2
            .iter()
            .zip(&da2)
            .map(|(x, dy)| relu_backward(x, dy))
            .collect();
        // bn 2
        let (dh2, dg2, dbeta2) = self.bn2.backward(&cache.h2, &cache.stats2, &dn2)?;
        // conv2
        let mut dw2 = vec![F::zero(); self.conv2.weight.len()];
        let mut db2 = vec![F::zero(); self.conv2.out_c];
        let mut da1 = Vec::with_capacity(batch);
        for (x, dy) in cache.a1.iter().zip(&dh2) {
            let (dx, dw, db) = self.conv2.backward(x, dy)?;
            for (acc, v) in dw2.iter_mut().zip(dw) {
                *acc += v;
            }
            for (acc, v) in db2.iter_mut().zip(db) {
                *acc += v;
            }
            da1.push(dx);
        }
        // relu 1
        let dn1: Vec<_> = cache
            .n1
            .iter()
            .zip(&da1)
            .map(|(x, dy)| relu_backward(x, dy))
            .collect();
        // bn 1
        let (dh1, dg1, dbeta1) = self.bn1.backward(&cache.h1, &cache.stats1, &dn1)?;
        // conv1
        let mut dw1 = vec![F::zero(); self.conv1.weight.len()];
        let mut db1 = vec![F::zero(); self.conv1.out_c];
        for (x, dy) in cache.stacked.iter().zip(&dh1) {
            let (_, dw, db) = self.conv1.backward(x, dy)?;
            for (acc, v) in dw1.iter_mut().zip(dw) {
                *acc += v;
            }
            for (acc, v) in db1.iter_mut().zip(db) {
                *acc += v;
            }
        }

        let mut grads = Vec::with_capacity(self.param_count());
        grads.extend(dw1);
        grads.extend(db1);
        grads.extend(dg1);
        grads.extend(dbeta1);
        grads.extend(dw2);
        grads.extend(db2);
        grads.extend(dg2);
        grads.extend(dbeta2);
        grads.extend(dw3);
        grads.extend(db3);
        Ok((loss, grads))
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()>
    where
        F: TensorElement,
    {
        let k = self.conv1.kernel as u32;
        let mut entries = vec![
            CheckpointEntry {
                name: "conv1.weight".into(),
                dims: vec![self.conv1.out_c as u32, k, k, self.conv1.in_c as u32],
                data: self.conv1.weight.clone(),
            },
            CheckpointEntry {
                name: "conv1.bias".into(),
                dims: vec![self.conv1.out_c as u32],
                data: self.conv1.bias.clone(),
            },
        ];
        for (name, bn) in [("bn1", &self.bn1), ("bn2", &self.bn2)] {
            let n = bn.features() as u32;
            entries.push(CheckpointEntry {
                name: format!("{name}.gamma"),
                dims: vec![n],
                data: bn.gamma.clone(),
            });
            entries.push(CheckpointEntry {
                name: format!("{name}.beta"),
                dims: vec![n],
                data: bn.beta.clone(),
            });
            entries.push(CheckpointEntry {
                name: format!("{name}.running_mean"),
                dims: vec![n],
                data: bn.running_mean.clone(),
            });
            entries.push(CheckpointEntry {
                name: format!("{name}.running_var"),
                dims: vec![n],
                data: bn.running_var.clone(),
            });
        }
        let k2 = self.conv2.kernel as u32;
        entries.push(CheckpointEntry {
            name: "conv2.weight".into(),
            dims: vec![self.conv2.out_c as u32, k2, k2, self.conv2.in_c as u32],
            data: self.conv2.weight.clone(),
        });
        entries.push(CheckpointEntry {
            name: "conv2.bias".into(),
            dims: vec![self.conv2.out_c as u32],
            data: self.conv2.bias.clone(),
        });
        entries.push(CheckpointEntry {
            name: "conv3.weight".into(),
            dims: vec![self.conv3.out_c as u32, 1, 1, self.conv3.in_c as u32],
            data: self.conv3.weight.clone(),
        });
        entries.push(CheckpointEntry {
            name: "conv3.bias".into(),
            dims: vec![self.conv3.out_c as u32],
            data: self.conv3.bias.clone(),
        });
        entries.push(CheckpointEntry {
            name: "meta.batch_size".into(),
            dims: vec![1],
            data: vec![F::from_usize_c(self.trained_batch_size.unwrap_or(0))],
        });
        save_checkpoint(path, &entries)
    }

    pub fn load(path: &std::path::Path, arch: ConvArch) -> Result<Self>
    where
        F: TensorElement,
    {
        let entries = load_checkpoint::<F>(path)?;
        let find = |name: &str| -> Result<&CheckpointEntry<F>> {
            entries
                .iter()
                .find(|e| e.name == name)
                .ok_or_else(|| CoreError::Format(format!("checkpoint missing {name}")))
        };
        let mut model = Self::zeroed(arch);
        model.conv1.weight = find("conv1.weight")?.data.clone();
        model.conv1.bias = find("conv1.bias")?.data.clone();
        model.conv2.weight = find("conv2.weight")?.data.clone();
        model.conv2.bias = find("conv2.bias")?.data.clone();
        model.conv3.weight = find("conv3.weight")?.data.clone();
        model.conv3.bias = find("conv3.bias")?.data.clone();
        for (name, bn) in [("bn1", &mut model.bn1), ("bn2", &mut model.bn2)] {
            bn.gamma = find(&format!("{name}.gamma"))?.data.clone();
            bn.beta = find(&format!("{name}.beta"))?.data.clone();
            bn.running_mean = find(&format!("{name}.running_mean"))?.data.clone();
            bn.running_var = find(&format!("{name}.running_var"))?.data.clone();
        }
        let bs = find("meta.batch_size")?.data[0].to_usize().unwrap_or(0);
        model.trained_batch_size = if bs > 0 { Some(bs) } else { None };
        if model.conv1.weight.len() != arch.stacked_channels() * 9 * arch.hidden {
            return Err(CoreError::Format(
                "checkpoint shapes disagree with architecture".into(),
            ));
        }
        Ok(model)
    }
}

impl<F: Scalar> Predictor<F> for ConvPredictor<F> {
    fn forward(&self, inputs: &[GridTensor<F>]) -> Result<GridTensor<F>> {
        let x = self.stack(inputs)?;
        let h1 = self.conv1.forward(&x)?;
        let a1 = relu(&self.bn1.normalize_running(&h1));
        let h2 = self.conv2.forward(&a1)?;
        let a2 = relu(&self.bn2.normalize_running(&h2));
        self.conv3.forward(&a2)
    }

    fn has_batch_norm(&self) -> bool {
        true
    }

    fn forward_stochastic_bn(
        &self,
        inputs: &[GridTensor<F>],
        reference_batch: &[&[GridTensor<F>]],
    ) -> Result<GridTensor<F>> {
        if reference_batch.is_empty() {
            return Err(CoreError::EmptyInput("stochastic-BN reference batch"));
        }
        if let Some(bs) = self.trained_batch_size {
            if reference_batch.len() != bs {
                return Err(CoreError::InvalidParam(format!(
                    "reference batch size {} != training batch size {bs}",
                    reference_batch.len()
                )));
            }
        }
        let x = self.stack(inputs)?;
        let refs: Vec<GridTensor<F>> = reference_batch
            .iter()
            .map(|frames| self.stack(frames))
            .collect::<Result<_>>()?;

        // layer 1: statistics from the reference batch
        let h1 = self.conv1.forward(&x)?;
        let r1: Vec<_> = refs
            .iter()
            .map(|r| self.conv1.forward(r))
            .collect::<Result<_>>()?;
        let stats1 = self.bn1.batch_stats(&r1)?;
        let a1 = relu(&self.bn1.normalize(&h1, &stats1));
        let ra1: Vec<_> = r1
            .iter()
            .map(|r| relu(&self.bn1.normalize(r, &stats1)))
            .collect();

        // layer 2: reference maps flow through their own normalization
        let h2 = self.conv2.forward(&a1)?;
        let r2: Vec<_> = ra1
            .iter()
            .map(|r| self.conv2.forward(r))
            .collect::<Result<_>>()?;
        let stats2 = self.bn2.batch_stats(&r2)?;
        let a2 = relu(&self.bn2.normalize(&h2, &stats2));

        self.conv3.forward(&a2)
    }
}

impl<F: Scalar> Trainable<F> for ConvPredictor<F> {
    fn param_count(&self) -> usize {
        self.conv1.weight.len()
            + self.conv1.bias.len()
            + 2 * self.bn1.features()
            + self.conv2.weight.len()
            + self.conv2.bias.len()
            + 2 * self.bn2.features()
            + self.conv3.weight.len()
            + self.conv3.bias.len()
    }

    fn params(&self) -> Vec<F> {
        let mut p = Vec::with_capacity(self.param_count());
        p.extend_from_slice(&self.conv1.weight);
        p.extend_from_slice(&self.conv1.bias);
        p.extend_from_slice(&self.bn1.gamma);
        p.extend_from_slice(&self.bn1.beta);
        p.extend_from_slice(&self.conv2.weight);
        p.extend_from_slice(&self.conv2.bias);
        p.extend_from_slice(&self.bn2.gamma);
        p.extend_from_slice(&self.bn2.beta);
        p.extend_from_slice(&self.conv3.weight);
        p.extend_from_slice(&self.conv3.bias);
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
        let mut it = p.iter().copied();
        let mut take = |dst: &mut [F]| {
            for d in dst {
                *d = it.next().expect("length checked");
            }
        };
        take(&mut self.conv1.weight);
        take(&mut self.conv1.bias);
        take(&mut self.bn1.gamma);
        take(&mut self.bn1.beta);
        take(&mut self.conv2.weight);
        take(&mut self.conv2.bias);
        take(&mut self.bn2.gamma);
        take(&mut self.bn2.beta);
        take(&mut self.conv3.weight);
        take(&mut self.conv3.bias);
        Ok(())
    }

    fn loss_and_grad(
        &self,
        inputs: &[Vec<GridTensor<F>>],
        targets: &[GridTensor<F>],
    ) -> Result<(F, Vec<F>)> {
        let cache = self.forward_train(inputs)?;
        self.backward_from_cache(&cache, targets)
    }

    fn train_step(
        &mut self,
        inputs: &[Vec<GridTensor<F>>],
        targets: &[GridTensor<F>],
        lr: F,
    ) -> Result<F> {
        let cache = self.forward_train(inputs)?;
        let (loss, grads) = self.backward_from_cache(&cache, targets)?;
        if !loss.is_finite() {
            return Err(CoreError::NonFinite("training loss"));
        }
        // running stats follow the pre-step batch statistics
        self.bn1.update_running(&cache.stats1);
        self.bn2.update_running(&cache.stats2);
        let mut p = self.params();
        for (pi, gi) in p.iter_mut().zip(&grads) {
            *pi = *pi - lr * *gi;
        }
        self.set_params(&p)?;
        Ok(loss)
    }

    fn note_batch_size(&mut self, batch_size: usize) {
        self.trained_batch_size = Some(batch_size);
    }
}
