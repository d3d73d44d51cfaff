//! The four sampling-based uncertainty estimators (deep ensembles, Monte
//! Carlo batch normalization, test-time augmentation, patch-based), their
//! predictive combinations, and the constant uncertainty baseline. Each maps
//! a test input to a per-cell point estimate and a per-cell uncertainty.
//!
//! All Monte Carlo spreads are population (1/M) standard deviations: they
//! are plain second moments of the sampled predictions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::grid::GridTensor;
use crate::predictor::{EnsembleModel, Predictor};
use crate::scalar::Scalar;
use crate::transform::{apply_transform, canonical_transforms, invert_transform, pad_to_square, unpad};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UncertaintyKind {
    Epistemic,
    Aleatoric,
    Predictive,
}

impl UncertaintyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            UncertaintyKind::Epistemic => "epistemic",
            UncertaintyKind::Aleatoric => "aleatoric",
            UncertaintyKind::Predictive => "predictive",
        }
    }
}

/// Monte Carlo sample count behind an estimate: one number for most methods,
/// a per-pixel map for the sliding-window patches.
#[derive(Debug, Clone)]
pub enum SampleCount {
    Uniform(usize),
    PerPixel(PixelCounts),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelCounts {
    pub height: usize,
    pub width: usize,
    pub counts: Vec<u32>,
}

impl PixelCounts {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.counts[i * self.width + j]
    }

    pub fn mean(&self) -> f64 {
        self.counts.iter().map(|&c| c as f64).sum::<f64>() / self.counts.len() as f64
    }
}

/// Per-cell point prediction and non-negative uncertainty with a kind tag.
#[derive(Debug, Clone)]
pub struct UQEstimate<F: Scalar> {
    pub mu: GridTensor<F>,
    pub sigma: GridTensor<F>,
    pub kind: UncertaintyKind,
    pub method: String,
    pub samples: SampleCount,
}

impl<F: Scalar> UQEstimate<F> {
    pub fn new(
        mu: GridTensor<F>,
        sigma: GridTensor<F>,
        kind: UncertaintyKind,
        method: impl Into<String>,
        samples: SampleCount,
    ) -> Result<Self> {
        mu.ensure_same_shape(&sigma, "UQEstimate mu/sigma")?;
        if sigma.data().iter().any(|&v| v < F::zero() || !v.is_finite()) {
            return Err(CoreError::NonFinite("sigma must be finite and >= 0"));
        }
        Ok(Self {
            mu,
            sigma,
            kind,
            method: method.into(),
            samples,
        })
    }
}

/// Per-cell mean and population standard deviation over a stack of grids.
pub fn stack_mean_std<F: Scalar>(grids: &[GridTensor<F>]) -> Result<(GridTensor<F>, GridTensor<F>)> {
    let first = grids.first().ok_or(CoreError::EmptyInput("grid stack"))?;
    let (h, w, c) = first.shape();
    for g in grids {
        first.ensure_same_shape(g, "stack_mean_std")?;
    }
    let n = F::from_usize_c(grids.len());
    // cells whose samples are bit-identical get sigma exactly 0 and mu
    // exactly the shared value, sidestepping summation round-off
    let mut all_equal = vec![true; first.len()];
    for g in &grids[1..] {
        for ((eq, &v), &f) in all_equal.iter_mut().zip(g.data()).zip(first.data()) {
            *eq &= v == f;
        }
    }
    let mut mu = GridTensor::zeros(h, w, c);
    for g in grids {
        for (m, &v) in mu.data_mut().iter_mut().zip(g.data()) {
            *m += v;
        }
    }
    for ((m, &eq), &f) in mu.data_mut().iter_mut().zip(&all_equal).zip(first.data()) {
        if eq {
            *m = f;
        } else {
            *m /= n;
        }
    }
    let mut sigma = GridTensor::zeros(h, w, c);
    for g in grids {
        for ((s, &v), &m) in sigma.data_mut().iter_mut().zip(g.data()).zip(mu.data()) {
            let d = v - m;
            *s += d * d;
        }
    }
    for (s, &eq) in sigma.data_mut().iter_mut().zip(&all_equal) {
        if eq {
            *s = F::zero();
        } else {
            let v: F = *s / n;
            *s = v.sqrt();
        }
    }
    Ok((mu, sigma))
}

/// Deep-ensemble estimate: member mean as the point estimate, member spread
/// as epistemic uncertainty.
pub fn ensemble_estimate<F: Scalar, M: Predictor<F>>(
    ens: &EnsembleModel<M>,
    inputs: &[GridTensor<F>],
) -> Result<UQEstimate<F>> {
    if ens.is_empty() {
        return Err(CoreError::EmptyInput("ensemble members"));
    }
    let outputs: Vec<GridTensor<F>> = ens
        .members
        .iter()
        .map(|m| m.forward(inputs))
        .collect::<Result<_>>()?;
    let (mu, sigma) = stack_mean_std(&outputs)?;
    UQEstimate::new(
        mu,
        sigma,
        UncertaintyKind::Epistemic,
        "ens",
        SampleCount::Uniform(ens.len()),
    )
}

/// Monte Carlo batch normalization: `m` stochastic-BN forward passes, each
/// with a freshly sampled training mini-batch (drawn without replacement
/// within a batch, independently across passes).
pub fn mcbn_estimate<F: Scalar, M: Predictor<F>>(
    model: &M,
    inputs: &[GridTensor<F>],
    train_inputs: &[Vec<GridTensor<F>>],
    m: usize,
    batch_size: usize,
    seed: u64,
) -> Result<UQEstimate<F>> {
    if !model.has_batch_norm() {
        return Err(CoreError::Unsupported(
            "MCBN requires a model with batch normalization",
        ));
    }
    if m == 0 {
        return Err(CoreError::InvalidParam("MCBN needs m >= 1".into()));
    }
    if train_inputs.len() < batch_size {
        return Err(CoreError::InsufficientSamples {
            needed: batch_size,
            got: train_inputs.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut passes = Vec::with_capacity(m);
    for _ in 0..m {
        let idx = rand::seq::index::sample(&mut rng, train_inputs.len(), batch_size);
        let batch: Vec<&[GridTensor<F>]> =
            idx.iter().map(|i| train_inputs[i].as_slice()).collect();
        passes.push(model.forward_stochastic_bn(inputs, &batch)?);
    }
    let (mu, sigma) = stack_mean_std(&passes)?;
    UQEstimate::new(
        mu,
        sigma,
        UncertaintyKind::Epistemic,
        "mcbn",
        SampleCount::Uniform(m),
    )
}

/// All 8 aligned test-time-augmentation predictions for one model: the
/// identity element first, inverse-transformed back to the original frame.
fn tta_aligned_predictions<F: Scalar, M: Predictor<F>>(
    model: &M,
    inputs: &[GridTensor<F>],
) -> Result<Vec<GridTensor<F>>> {
    let first = inputs.first().ok_or(CoreError::EmptyInput("inputs"))?;
    let (h, w, _) = first.shape();
    let square = h.max(w);
    let padded: Vec<GridTensor<F>> = inputs
        .iter()
        .map(|f| pad_to_square(f, square))
        .collect::<Result<_>>()?;
    let mut aligned = Vec::with_capacity(8);
    for spec in canonical_transforms() {
        let transformed: Vec<GridTensor<F>> = padded
            .iter()
            .map(|f| apply_transform(f, spec))
            .collect::<Result<_>>()?;
        let pred = model.forward(&transformed)?;
        let back = invert_transform(&pred, spec)?;
        aligned.push(unpad(&back, h, w)?);
    }
    Ok(aligned)
}

/// Test-time augmentation: the model runs on the identity plus the 7
/// non-identity group elements; each augmented prediction is aligned back.
/// The point estimate is the prediction on the unaugmented input, the
/// uncertainty the population spread over all 8 aligned predictions.
pub fn tta_estimate<F: Scalar, M: Predictor<F>>(
    model: &M,
    inputs: &[GridTensor<F>],
) -> Result<UQEstimate<F>> {
    let aligned = tta_aligned_predictions(model, inputs)?;
    let mu = aligned[0].clone();
    let (_, sigma) = stack_mean_std(&aligned)?;
    UQEstimate::new(
        mu,
        sigma,
        UncertaintyKind::Aleatoric,
        "tta",
        SampleCount::Uniform(aligned.len()),
    )
}

/// Sliding-window configuration for patch-based uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchConfig {
    /// Patch side length in pixels.
    pub d: usize,
    /// Window stride in pixels.
    pub s: usize,
}

impl PatchConfig {
    pub fn validate(&self, height: usize, width: usize) -> Result<()> {
        if self.s == 0 || self.s > self.d {
            return Err(CoreError::InvalidParam(format!(
                "stride {} must satisfy 1 <= s <= d = {}",
                self.s, self.d
            )));
        }
        if self.d > height.min(width) {
            return Err(CoreError::InvalidParam(format!(
                "patch size {} exceeds image extent {}x{}",
                self.d, height, width
            )));
        }
        Ok(())
    }
}

/// Window start offsets along one axis: multiples of the stride, plus one
/// extra start so the far edge is covered when `edge_extend` is set.
pub fn window_starts(extent: usize, d: usize, s: usize, edge_extend: bool) -> Vec<usize> {
    let last = extent - d;
    let mut starts: Vec<usize> = (0..=last).step_by(s).collect();
    if edge_extend && *starts.last().expect("at least one start") != last {
        starts.push(last);
    }
    starts
}

/// Per-pixel covering-window counts for the sliding-window grid.
pub fn patch_sample_counts(
    height: usize,
    width: usize,
    cfg: PatchConfig,
    edge_extend: bool,
) -> Result<PixelCounts> {
    cfg.validate(height, width)?;
    let rows = window_starts(height, cfg.d, cfg.s, edge_extend);
    let cols = window_starts(width, cfg.d, cfg.s, edge_extend);
    let mut counts = vec![0u32; height * width];
    for &r in &rows {
        for &c in &cols {
            for i in r..r + cfg.d {
                for j in c..c + cfg.d {
                    counts[i * width + j] += 1;
                }
            }
        }
    }
    Ok(PixelCounts {
        height,
        width,
        counts,
    })
}

/// Predicted covering-window count for the ideal (no edge-extension) sliding
/// window at 1-based pixel (i, j): the product of per-axis minimum hop
/// counts, with the border distance capped at the patch size.
pub fn expected_patch_count(
    i: usize,
    j: usize,
    height: usize,
    width: usize,
    d: usize,
    s: usize,
) -> Result<u32> {
    if i < 1 || i > height || j < 1 || j > width {
        return Err(CoreError::InvalidParam(format!(
            "pixel ({i}, {j}) outside 1-based bounds {height}x{width}"
        )));
    }
    if s == 0 || s > d {
        return Err(CoreError::InvalidParam("need 1 <= s <= d".into()));
    }
    let axis = |pos: usize, extent: usize| -> u32 {
        let dist = (pos - 1).min(extent - pos) + 1;
        let dist = dist.min(d);
        // f(x) = floor(x) for x >= 1, ceil(x) for 0 < x < 1
        if dist >= s {
            (dist / s) as u32
        } else {
            1
        }
    };
    Ok(axis(i, height) * axis(j, width))
}

fn crop<F: Scalar>(t: &GridTensor<F>, r: usize, c: usize, d: usize) -> GridTensor<F> {
    let ch = t.channels();
    let mut out = GridTensor::zeros(d, d, ch);
    for i in 0..d {
        for j in 0..d {
            for k in 0..ch {
                out.set(i, j, k, t.get(r + i, c + j, k));
            }
        }
    }
    out
}

/// Patch-based aleatoric uncertainty: a d x d window slides with stride s
/// (plus an extra row and column of windows so the right and bottom edges are
/// covered), every window yields a full-patch prediction, and each pixel
/// aggregates the predictions of all windows covering it by simple averaging.
pub fn patch_estimate<F: Scalar, M: Predictor<F>>(
    model: &M,
    inputs: &[GridTensor<F>],
    cfg: PatchConfig,
) -> Result<UQEstimate<F>> {
    let first = inputs.first().ok_or(CoreError::EmptyInput("inputs"))?;
    let (h, w, c) = first.shape();
    cfg.validate(h, w)?;
    let rows = window_starts(h, cfg.d, cfg.s, true);
    let cols = window_starts(w, cfg.d, cfg.s, true);

    // accumulate in f64: the one-pass variance needs the headroom
    let mut sum = vec![0.0f64; h * w * c];
    let mut sumsq = vec![0.0f64; h * w * c];
    let mut counts = vec![0u32; h * w];
    for &r in &rows {
        for &cc in &cols {
            let window: Vec<GridTensor<F>> =
                inputs.iter().map(|f| crop(f, r, cc, cfg.d)).collect();
            let pred = model.forward(&window)?;
            if pred.shape() != (cfg.d, cfg.d, c) {
                return Err(CoreError::ShapeMismatch(format!(
                    "patch prediction shape {:?} != window {}x{}x{c}",
                    pred.shape(),
                    cfg.d,
                    cfg.d
                )));
            }
            for i in 0..cfg.d {
                for j in 0..cfg.d {
                    counts[(r + i) * w + (cc + j)] += 1;
                    for k in 0..c {
                        let v = pred.get(i, j, k).to_f64().expect("finite prediction");
                        let at = ((r + i) * w + (cc + j)) * c + k;
                        sum[at] += v;
                        sumsq[at] += v * v;
                    }
                }
            }
        }
    }

    let mut mu = GridTensor::zeros(h, w, c);
    let mut sigma = GridTensor::zeros(h, w, c);
    for i in 0..h {
        for j in 0..w {
            let n = counts[i * w + j] as f64;
            for k in 0..c {
                let at = (i * w + j) * c + k;
                let m = sum[at] / n;
                let var = (sumsq[at] / n - m * m).max(0.0);
                mu.set(i, j, k, F::from_f64_c(m));
                sigma.set(i, j, k, F::from_f64_c(var.sqrt()));
            }
        }
    }
    // counting is deterministic, so halve the work by reusing it
    let counts = PixelCounts {
        height: h,
        width: w,
        counts,
    };
    UQEstimate::new(
        mu,
        sigma,
        UncertaintyKind::Aleatoric,
        "patches",
        SampleCount::PerPixel(counts),
    )
}

/// Additive combination of one epistemic and one aleatoric estimate into the
/// total predictive uncertainty; the point estimate comes from the epistemic
/// side.
pub fn combine_predictive<F: Scalar>(
    epi: &UQEstimate<F>,
    alea: &UQEstimate<F>,
) -> Result<UQEstimate<F>> {
    if epi.kind != UncertaintyKind::Epistemic {
        return Err(CoreError::KindMismatch {
            expected: "epistemic",
            got: epi.kind.as_str(),
        });
    }
    if alea.kind != UncertaintyKind::Aleatoric {
        return Err(CoreError::KindMismatch {
            expected: "aleatoric",
            got: alea.kind.as_str(),
        });
    }
    epi.sigma.ensure_same_shape(&alea.sigma, "combine_predictive")?;
    let sigma = epi.sigma.zip_map(&alea.sigma, |a, b| a + b)?;
    UQEstimate::new(
        epi.mu.clone(),
        sigma,
        UncertaintyKind::Predictive,
        format!("{}+{}", alea.method, epi.method),
        match &epi.samples {
            SampleCount::Uniform(n) => SampleCount::Uniform(*n),
            SampleCount::PerPixel(p) => SampleCount::PerPixel(p.clone()),
        },
    )
}

/// The decomposed pieces of a fused predictive estimate.
#[derive(Debug, Clone)]
pub struct PredictiveParts<F: Scalar> {
    pub epistemic: UQEstimate<F>,
    pub aleatoric_mean: UQEstimate<F>,
    pub combined: UQEstimate<F>,
}

/// Fused TTA + ensembles pipeline: per-member TTA spread averaged over
/// members as the aleatoric part, the member spread of unaugmented
/// predictions as the epistemic part, combined additively. The point
/// estimate is the ensemble mean of unaugmented predictions.
pub fn tta_ens_estimate<F: Scalar, M: Predictor<F>>(
    ens: &EnsembleModel<M>,
    inputs: &[GridTensor<F>],
) -> Result<PredictiveParts<F>> {
    if ens.is_empty() {
        return Err(CoreError::EmptyInput("ensemble members"));
    }
    let mut unaugmented = Vec::with_capacity(ens.len());
    let mut member_sigmas = Vec::with_capacity(ens.len());
    for member in &ens.members {
        let aligned = tta_aligned_predictions(member, inputs)?;
        unaugmented.push(aligned[0].clone());
        let (_, sigma) = stack_mean_std(&aligned)?;
        member_sigmas.push(sigma);
    }
    let (mu, epi_sigma) = stack_mean_std(&unaugmented)?;
    let (alea_bar, _) = stack_mean_std(&member_sigmas)?;
    let epistemic = UQEstimate::new(
        mu,
        epi_sigma,
        UncertaintyKind::Epistemic,
        "ens",
        SampleCount::Uniform(ens.len()),
    )?;
    let aleatoric_mean = UQEstimate::new(
        epistemic.mu.clone(),
        alea_bar,
        UncertaintyKind::Aleatoric,
        "tta",
        SampleCount::Uniform(8),
    )?;
    let mut combined = combine_predictive(&epistemic, &aleatoric_mean)?;
    combined.method = "tta-ens".into();
    Ok(PredictiveParts {
        epistemic,
        aleatoric_mean,
        combined,
    })
}

/// Fused patches + ensembles pipeline, mirroring `tta_ens_estimate` with the
/// patch estimator as the aleatoric side: member spread of patch means is
/// epistemic, member mean of patch spreads is aleatoric.
pub fn patches_ens_estimate<F: Scalar, M: Predictor<F>>(
    ens: &EnsembleModel<M>,
    inputs: &[GridTensor<F>],
    cfg: PatchConfig,
) -> Result<PredictiveParts<F>> {
    if ens.is_empty() {
        return Err(CoreError::EmptyInput("ensemble members"));
    }
    let mut member_mus = Vec::with_capacity(ens.len());
    let mut member_sigmas = Vec::with_capacity(ens.len());
    let mut counts = None;
    for member in &ens.members {
        let est = patch_estimate(member, inputs, cfg)?;
        member_mus.push(est.mu);
        member_sigmas.push(est.sigma);
        if counts.is_none() {
            counts = Some(est.samples);
        }
    }
    let (mu, epi_sigma) = stack_mean_std(&member_mus)?;
    let (alea_bar, _) = stack_mean_std(&member_sigmas)?;
    let samples = counts.expect("at least one member");
    let epistemic = UQEstimate::new(
        mu,
        epi_sigma,
        UncertaintyKind::Epistemic,
        "ens",
        SampleCount::Uniform(ens.len()),
    )?;
    let aleatoric_mean = UQEstimate::new(
        epistemic.mu.clone(),
        alea_bar,
        UncertaintyKind::Aleatoric,
        "patches",
        samples,
    )?;
    let mut combined = combine_predictive(&epistemic, &aleatoric_mean)?;
    combined.method = "patches-ens".into();
    Ok(PredictiveParts {
        epistemic,
        aleatoric_mean,
        combined,
    })
}

/// Constant uncertainty baseline: the per-cell population spread of point
/// predictions across test samples, identical for every test sample.
pub fn cub_sigma<F: Scalar>(test_predictions: &[GridTensor<F>]) -> Result<GridTensor<F>> {
    if test_predictions.len() < 2 {
        return Err(CoreError::InsufficientSamples {
            needed: 2,
            got: test_predictions.len(),
        });
    }
    let (_, sigma) = stack_mean_std(test_predictions)?;
    Ok(sigma)
}

/// One CUB estimate per test sample: its own prediction as the point
/// estimate and the shared constant spread as uncertainty.
pub fn cub_estimates<F: Scalar>(
    test_predictions: &[GridTensor<F>],
) -> Result<Vec<UQEstimate<F>>> {
    let sigma = cub_sigma(test_predictions)?;
    test_predictions
        .iter()
        .map(|pred| {
            UQEstimate::new(
                pred.clone(),
                sigma.clone(),
                UncertaintyKind::Predictive,
                "cub",
                SampleCount::Uniform(test_predictions.len()),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::{LinearPredictor, PersistencePredictor};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_frames(h: usize, w: usize, c: usize, n: usize, seed: u64) -> Vec<GridTensor<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let data = (0..h * w * c).map(|_| rng.random_range(0.0..10.0)).collect();
                GridTensor::new(h, w, c, data).unwrap()
            })
            .collect()
    }

    struct ConstPredictor(f64);
    impl Predictor<f64> for ConstPredictor {
        fn forward(&self, inputs: &[GridTensor<f64>]) -> Result<GridTensor<f64>> {
            let (h, w, c) = inputs[0].shape();
            Ok(GridTensor::filled(h, w, c, self.0))
        }
    }

    /// Broadcasts the top-left cell of the last input frame; orientation-
    /// sensitive on purpose.
    struct CornerPredictor;
    impl Predictor<f64> for CornerPredictor {
        fn forward(&self, inputs: &[GridTensor<f64>]) -> Result<GridTensor<f64>> {
            let last = inputs.last().unwrap();
            let (h, w, c) = last.shape();
            Ok(GridTensor::filled(h, w, c, last.get(0, 0, 0)))
        }
    }

    #[test]
    fn ensemble_of_identical_members_has_zero_sigma() {
        let ens = EnsembleModel {
            members: vec![ConstPredictor(2.0), ConstPredictor(2.0), ConstPredictor(2.0)],
            member_seeds: vec![0, 0, 0],
        };
        let inputs = random_frames(3, 3, 2, 2, 1);
        let est = ensemble_estimate(&ens, &inputs).unwrap();
        assert!(est.sigma.data().iter().all(|&s| s == 0.0));
        assert!(est.mu.data().iter().all(|&m| m == 2.0));
    }

    #[test]
    fn ensemble_of_constants_two_and_four() {
        let ens = EnsembleModel {
            members: vec![ConstPredictor(2.0), ConstPredictor(4.0)],
            member_seeds: vec![0, 1],
        };
        let inputs = random_frames(2, 2, 1, 2, 2);
        let est = ensemble_estimate(&ens, &inputs).unwrap();
        assert!(est.mu.data().iter().all(|&m| (m - 3.0).abs() < 1e-15));
        assert!(est.sigma.data().iter().all(|&s| (s - 1.0).abs() < 1e-15));
    }

    #[test]
    fn ensemble_matches_bruteforce_mean_std_loop() {
        let members: Vec<LinearPredictor<f64>> =
            (0..5).map(|i| LinearPredictor::new(4, 2, 100 + i)).collect();
        let inputs = random_frames(4, 5, 2, 4, 3);
        let outputs: Vec<GridTensor<f64>> =
            members.iter().map(|m| m.forward(&inputs).unwrap()).collect();
        let ens = EnsembleModel {
            members,
            member_seeds: (0..5).collect(),
        };
        let est = ensemble_estimate(&ens, &inputs).unwrap();
        for i in 0..4 {
            for j in 0..5 {
                for k in 0..2 {
                    let vals: Vec<f64> = outputs.iter().map(|o| o.get(i, j, k)).collect();
                    let mean = vals.iter().sum::<f64>() / 5.0;
                    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 5.0;
                    assert!((est.mu.get(i, j, k) - mean).abs() < 1e-12);
                    assert!((est.sigma.get(i, j, k) - var.sqrt()).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn tta_sigma_is_zero_for_equivariant_predictor() {
        // persistence commutes with every spatial transform
        let inputs = random_frames(6, 6, 2, 12, 4);
        let est = tta_estimate(&PersistencePredictor, &inputs).unwrap();
        assert!(est.sigma.data().iter().all(|&s| s == 0.0));
        assert_eq!(est.mu, inputs[11]);
    }

    #[test]
    fn tta_population_std_over_corner_orbit() {
        // last frame corners (0,0)=0, (0,1)=0, (1,0)=2, (1,1)=2: over the 8
        // group elements the top-left sees each corner twice, so every cell's
        // aligned predictions are {0,0,0,0,2,2,2,2} with population std 1.
        let mut last = GridTensor::<f64>::zeros(2, 2, 1);
        last.set(1, 0, 0, 2.0);
        last.set(1, 1, 0, 2.0);
        let mut inputs = vec![GridTensor::<f64>::zeros(2, 2, 1); 11];
        inputs.push(last);
        let est = tta_estimate(&CornerPredictor, &inputs).unwrap();
        for &s in est.sigma.data() {
            assert!((s - 1.0).abs() < 1e-12, "sigma {s}");
        }
        // the point estimate is the unaugmented prediction (top-left = 0)
        assert!(est.mu.data().iter().all(|&m| m == 0.0));
    }

    #[test]
    fn tta_handles_rectangular_inputs_via_padding() {
        let inputs = random_frames(4, 6, 2, 12, 5);
        let est = tta_estimate(&PersistencePredictor, &inputs).unwrap();
        assert_eq!(est.mu.shape(), (4, 6, 2));
        assert!(est.sigma.data().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn expected_patch_count_worked_examples() {
        assert_eq!(expected_patch_count(5, 5, 9, 9, 5, 1).unwrap(), 25);
        assert_eq!(expected_patch_count(2, 1, 9, 9, 5, 1).unwrap(), 2);
        assert!(expected_patch_count(0, 1, 9, 9, 5, 1).is_err());
        assert!(expected_patch_count(10, 1, 9, 9, 5, 1).is_err());
    }

    #[test]
    fn patch_counts_match_formula_on_interior_without_extension() {
        let cfg = PatchConfig { d: 6, s: 2 };
        let counts = patch_sample_counts(20, 17, cfg, false).unwrap();
        for i in 1..=20usize {
            for j in 1..=17usize {
                let dv = (i - 1).min(20 - i) + 1;
                let dh = (j - 1).min(17 - j) + 1;
                if dv >= cfg.d && dh >= cfg.d {
                    let expect = expected_patch_count(i, j, 20, 17, cfg.d, cfg.s).unwrap();
                    assert_eq!(counts.get(i - 1, j - 1), expect, "pixel ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn constant_model_gives_zero_patch_sigma() {
        let inputs = random_frames(9, 9, 1, 12, 6);
        let est = patch_estimate(&ConstPredictor(7.0), &inputs, PatchConfig { d: 5, s: 1 }).unwrap();
        assert!(est.sigma.data().iter().all(|&s| s == 0.0));
        assert!(est.mu.data().iter().all(|&m| (m - 7.0).abs() < 1e-12));
        match est.samples {
            SampleCount::PerPixel(ref counts) => {
                // central pixel fully covered, corner-adjacent pixel barely
                assert_eq!(counts.get(4, 4), 25);
                assert_eq!(counts.get(1, 0), 2);
            }
            _ => panic!("patches must record per-pixel counts"),
        }
    }

    #[test]
    fn oversized_patch_errors() {
        let inputs = random_frames(5, 5, 1, 12, 7);
        assert!(patch_estimate(&ConstPredictor(0.0), &inputs, PatchConfig { d: 6, s: 1 }).is_err());
    }

    #[test]
    fn smaller_stride_never_reduces_counts_on_nested_grids() {
        // per-pixel monotonicity holds when the finer stride divides the
        // coarser one (the window grids nest); for unrelated strides the
        // start-grid phase can reduce individual pixels, so the structural
        // guarantee for arbitrary strides is on the mean count below
        for &(d, h, w) in &[(5usize, 12usize, 15usize), (4, 9, 9), (8, 20, 11)] {
            for s_coarse in 2..=d {
                for s_fine in 1..s_coarse {
                    if s_coarse % s_fine != 0 {
                        continue;
                    }
                    let coarse =
                        patch_sample_counts(h, w, PatchConfig { d, s: s_coarse }, true).unwrap();
                    let fine =
                        patch_sample_counts(h, w, PatchConfig { d, s: s_fine }, true).unwrap();
                    for (a, b) in fine.counts.iter().zip(&coarse.counts) {
                        assert!(a >= b, "nested stride decrease reduced a count");
                    }
                }
            }
        }
    }

    #[test]
    fn smaller_stride_never_reduces_mean_count() {
        for &(d, h, w) in &[(5usize, 12usize, 15usize), (4, 9, 9), (7, 20, 11)] {
            let mut prev = 0.0;
            for s in (1..=d).rev() {
                let counts = patch_sample_counts(h, w, PatchConfig { d, s }, true).unwrap();
                let mean = counts.mean();
                assert!(
                    mean >= prev - 1e-12,
                    "mean count dropped from {prev} to {mean} at stride {s}"
                );
                prev = mean;
            }
        }
    }

    #[test]
    fn combine_adds_sigmas_and_keeps_epistemic_mean() {
        let inputs = random_frames(3, 3, 1, 2, 8);
        let mu = inputs[0].clone();
        let epi = UQEstimate::new(
            mu.clone(),
            GridTensor::filled(3, 3, 1, 0.3),
            UncertaintyKind::Epistemic,
            "ens",
            SampleCount::Uniform(5),
        )
        .unwrap();
        let alea = UQEstimate::new(
            inputs[1].clone(),
            GridTensor::filled(3, 3, 1, 0.5),
            UncertaintyKind::Aleatoric,
            "tta",
            SampleCount::Uniform(8),
        )
        .unwrap();
        let pred = combine_predictive(&epi, &alea).unwrap();
        assert!(pred.sigma.data().iter().all(|&s| (s - 0.8).abs() < 1e-15));
        assert_eq!(pred.mu, mu);
        assert_eq!(pred.kind, UncertaintyKind::Predictive);
        // kind mismatch is rejected
        assert!(combine_predictive(&alea, &epi).is_err());
    }

    #[test]
    fn combine_with_zero_side_returns_other_sigma() {
        let zero = GridTensor::<f64>::zeros(2, 2, 1);
        let epi = UQEstimate::new(
            zero.clone(),
            zero.clone(),
            UncertaintyKind::Epistemic,
            "ens",
            SampleCount::Uniform(1),
        )
        .unwrap();
        let alea = UQEstimate::new(
            zero.clone(),
            GridTensor::filled(2, 2, 1, 0.7),
            UncertaintyKind::Aleatoric,
            "tta",
            SampleCount::Uniform(8),
        )
        .unwrap();
        let pred = combine_predictive(&epi, &alea).unwrap();
        assert!(pred.sigma.data().iter().all(|&s| (s - 0.7).abs() < 1e-15));
    }

    #[test]
    fn cub_examples() {
        let a = GridTensor::<f64>::filled(2, 2, 1, 1.0);
        let b = GridTensor::<f64>::filled(2, 2, 1, 3.0);
        let sigma = cub_sigma(&[a.clone(), b.clone()]).unwrap();
        assert!(sigma.data().iter().all(|&s| (s - 1.0).abs() < 1e-15));

        let same = cub_sigma(&[a.clone(), a.clone(), a.clone()]).unwrap();
        assert!(same.data().iter().all(|&s| s == 0.0));

        assert!(cub_sigma(&[a.clone()]).is_err());

        let ests = cub_estimates(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(ests.len(), 2);
        assert_eq!(ests[0].mu, a);
        assert_eq!(ests[1].mu, b);
        assert_eq!(ests[0].sigma, ests[1].sigma);
    }

    #[test]
    fn cub_matches_naive_per_cell_loop() {
        let preds = random_frames(4, 4, 2, 6, 9);
        let sigma = cub_sigma(&preds).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..2 {
                    let vals: Vec<f64> = preds.iter().map(|p| p.get(i, j, k)).collect();
                    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                    let var =
                        vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
                    assert!((sigma.get(i, j, k) - var.sqrt()).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn mcbn_requires_batch_norm() {
        let inputs = random_frames(3, 3, 2, 12, 10);
        let train: Vec<Vec<GridTensor<f64>>> =
            (0..15).map(|i| random_frames(3, 3, 2, 12, 20 + i)).collect();
        let err = mcbn_estimate(&PersistencePredictor, &inputs, &train, 10, 12, 0);
        assert!(matches!(err, Err(CoreError::Unsupported(_))));
    }
}
