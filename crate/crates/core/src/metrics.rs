//! Predictive and uncertainty-quality metrics: MSE, expected normalized
//! calibration error, Spearman rank correlation between absolute residuals
//! and uncertainties, and mean prediction-interval width, all with optional
//! zero-masking.

use crate::conformal::{floor_sigma, PredictionInterval};
use crate::error::{CoreError, Result};
use crate::grid::{ActivityMask, GridTensor};
use crate::scalar::Scalar;

fn check_mask<F: Scalar>(t: &GridTensor<F>, mask: Option<&ActivityMask>) -> Result<()> {
    if let Some(m) = mask {
        if m.shape() != t.shape() {
            return Err(CoreError::ShapeMismatch("metric mask".into()));
        }
    }
    Ok(())
}

macro_rules! masked_cells {
    ($mask:expr, $i:expr) => {
        if let Some(m) = $mask {
            if !m.is_active_flat($i) {
                continue;
            }
        }
    };
}

/// Mean squared residual over the (masked) cells.
pub fn mse<F: Scalar>(
    pred: &GridTensor<F>,
    truth: &GridTensor<F>,
    mask: Option<&ActivityMask>,
) -> Result<F> {
    pred.ensure_same_shape(truth, "mse")?;
    check_mask(pred, mask)?;
    let mut sum = F::zero();
    let mut n = 0usize;
    for (i, (&p, &y)) in pred.data().iter().zip(truth.data()).enumerate() {
        masked_cells!(mask, i);
        let r = p - y;
        sum += r * r;
        n += 1;
    }
    if n == 0 {
        return Err(CoreError::EmptyInput("mse selection"));
    }
    Ok(sum / F::from_usize_c(n))
}

/// Expected normalized calibration error: the mean over cells of
/// |sigma - |residual|| / sigma, with the conformal sigma floor applied.
pub fn ence<F: Scalar>(
    sigma: &GridTensor<F>,
    pred: &GridTensor<F>,
    truth: &GridTensor<F>,
    mask: Option<&ActivityMask>,
) -> Result<F> {
    sigma.ensure_same_shape(pred, "ence sigma/pred")?;
    sigma.ensure_same_shape(truth, "ence sigma/truth")?;
    check_mask(sigma, mask)?;
    let mut sum = F::zero();
    let mut n = 0usize;
    for (i, ((&s, &p), &y)) in sigma
        .data()
        .iter()
        .zip(pred.data())
        .zip(truth.data())
        .enumerate()
    {
        masked_cells!(mask, i);
        let s = floor_sigma(s);
        sum += (s - (p - y).abs()).abs() / s;
        n += 1;
    }
    if n == 0 {
        return Err(CoreError::EmptyInput("ence selection"));
    }
    Ok(sum / F::from_usize_c(n))
}

/// Spearman's rank correlation, or an explicit marker when either side has
/// zero rank variance (constant values), which leaves it undefined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpearmanRho<F> {
    Defined(F),
    Undefined,
}

impl<F: Scalar> SpearmanRho<F> {
    pub fn value(self) -> Option<F> {
        match self {
            SpearmanRho::Defined(v) => Some(v),
            SpearmanRho::Undefined => None,
        }
    }
}

/// Average ranks (ties share the mean of their positional ranks), 1-based.
fn average_ranks<F: Scalar>(values: &[F]) -> Vec<F> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut ranks = vec![F::zero(); n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j share the average rank
        let avg = F::from_usize_c(i + 1 + j + 1) / F::from_f64_c(2.0);
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Rank correlation between absolute errors and uncertainties: the Pearson
/// correlation of the two average-rank vectors.
pub fn spearman_rho<F: Scalar>(errors: &[F], sigmas: &[F]) -> Result<SpearmanRho<F>> {
    if errors.len() != sigmas.len() {
        return Err(CoreError::ShapeMismatch("spearman inputs".into()));
    }
    if errors.len() < 2 {
        return Err(CoreError::InsufficientSamples {
            needed: 2,
            got: errors.len(),
        });
    }
    let ra = average_ranks(errors);
    let rb = average_ranks(sigmas);
    let n = F::from_usize_c(ra.len());
    let mean_a: F = ra.iter().copied().sum::<F>() / n;
    let mean_b: F = rb.iter().copied().sum::<F>() / n;
    let mut cov = F::zero();
    let mut var_a = F::zero();
    let mut var_b = F::zero();
    for (&a, &b) in ra.iter().zip(&rb) {
        let da = a - mean_a;
        let db = b - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if var_a == F::zero() || var_b == F::zero() {
        return Ok(SpearmanRho::Undefined);
    }
    Ok(SpearmanRho::Defined(cov / (var_a.sqrt() * var_b.sqrt())))
}

/// Masked (|residual|, sigma) pairs flattened from grids, the inputs the
/// rank correlation runs on.
pub fn residual_sigma_pairs<F: Scalar>(
    pred: &GridTensor<F>,
    truth: &GridTensor<F>,
    sigma: &GridTensor<F>,
    mask: Option<&ActivityMask>,
) -> Result<(Vec<F>, Vec<F>)> {
    pred.ensure_same_shape(truth, "pairs pred/truth")?;
    pred.ensure_same_shape(sigma, "pairs pred/sigma")?;
    check_mask(pred, mask)?;
    let mut errs = Vec::new();
    let mut sigs = Vec::new();
    for (i, ((&p, &y), &s)) in pred
        .data()
        .iter()
        .zip(truth.data())
        .zip(sigma.data())
        .enumerate()
    {
        masked_cells!(mask, i);
        errs.push((p - y).abs());
        sigs.push(s);
    }
    Ok((errs, sigs))
}

/// Mean prediction-interval width over the (masked) cells.
pub fn mpiw<F: Scalar>(
    interval: &PredictionInterval<F>,
    mask: Option<&ActivityMask>,
) -> Result<F> {
    check_mask(&interval.lower, mask)?;
    let mut sum = F::zero();
    let mut n = 0usize;
    for (i, (&lo, &up)) in interval
        .lower
        .data()
        .iter()
        .zip(interval.upper.data())
        .enumerate()
    {
        masked_cells!(mask, i);
        sum += up - lo;
        n += 1;
    }
    if n == 0 {
        return Err(CoreError::EmptyInput("mpiw selection"));
    }
    Ok(sum / F::from_usize_c(n))
}

/// Table-level metric row: scalars pooled over cells and test samples.
#[derive(Debug, Clone)]
pub struct MetricReport {
    pub dataset: String,
    pub method: String,
    pub masked: bool,
    pub mse: f64,
    pub mean_sigma: f64,
    /// Spread of per-sample mean sigma across test samples (the same
    /// population convention as everywhere else), zero for CUB by
    /// construction.
    pub sigma_spread: f64,
    pub mpiw: Option<f64>,
    pub ence: f64,
    pub spearman: Option<f64>,
    pub n_cells: usize,
}

impl MetricReport {
    pub const CSV_HEADER: &'static str =
        "dataset,method,masked,mse,mean_sigma,sigma_spread,mpiw,ence,spearman,n_cells";

    pub fn csv_row(&self) -> String {
        let fmt_opt = |v: Option<f64>| match v {
            Some(x) => format!("{x}"),
            None => "undefined".to_string(),
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.dataset,
            self.method,
            self.masked,
            self.mse,
            self.mean_sigma,
            self.sigma_spread,
            fmt_opt(self.mpiw),
            self.ence,
            fmt_opt(self.spearman),
            self.n_cells
        )
    }
}

/// One test sample's grids for report aggregation.
pub struct SampleMetrics<'a, F: Scalar> {
    pub mu: &'a GridTensor<F>,
    pub sigma: &'a GridTensor<F>,
    pub truth: &'a GridTensor<F>,
    pub interval: Option<&'a PredictionInterval<F>>,
}

/// Pools metrics over test samples: MSE/ENCE/Spearman/MPIW over every
/// (masked) cell of every sample, and the uncertainty column as the mean and
/// across-sample spread of per-sample mean sigma.
pub fn metric_report<F: Scalar>(
    dataset: &str,
    method: &str,
    samples: &[SampleMetrics<'_, F>],
    mask: Option<&ActivityMask>,
) -> Result<MetricReport> {
    if samples.is_empty() {
        return Err(CoreError::EmptyInput("metric samples"));
    }
    let mut sq_sum = 0.0f64;
    let mut ence_sum = 0.0f64;
    let mut n = 0usize;
    let mut errs: Vec<F> = Vec::new();
    let mut sigs: Vec<F> = Vec::new();
    let mut width_sum = 0.0f64;
    let mut width_n = 0usize;
    let mut per_sample_mean_sigma = Vec::with_capacity(samples.len());
    for s in samples {
        s.mu.ensure_same_shape(s.truth, "report mu/truth")?;
        s.mu.ensure_same_shape(s.sigma, "report mu/sigma")?;
        check_mask(s.mu, mask)?;
        let mut sigma_sum = 0.0f64;
        let mut sigma_n = 0usize;
        for (i, ((&p, &y), &sg)) in s
            .mu
            .data()
            .iter()
            .zip(s.truth.data())
            .zip(s.sigma.data())
            .enumerate()
        {
            masked_cells!(mask, i);
            let (p, y) = (p.to_f64().unwrap(), y.to_f64().unwrap());
            let sg64 = sg.to_f64().unwrap();
            let r = p - y;
            sq_sum += r * r;
            let sf = sg64.max(crate::conformal::SIGMA_FLOOR);
            ence_sum += (sf - r.abs()).abs() / sf;
            sigma_sum += sg64;
            sigma_n += 1;
            errs.push(F::from_f64_c(r.abs()));
            sigs.push(sg);
            n += 1;
        }
        if sigma_n == 0 {
            return Err(CoreError::EmptyInput("metric selection"));
        }
        per_sample_mean_sigma.push(sigma_sum / sigma_n as f64);
        if let Some(pi) = s.interval {
            for (i, (&lo, &up)) in pi.lower.data().iter().zip(pi.upper.data()).enumerate() {
                masked_cells!(mask, i);
                width_sum += (up - lo).to_f64().unwrap();
                width_n += 1;
            }
        }
    }
    let spearman = spearman_rho(&errs, &sigs)?
        .value()
        .map(|v| v.to_f64().unwrap());
    let mean_sigma = per_sample_mean_sigma.iter().sum::<f64>() / per_sample_mean_sigma.len() as f64;
    let sigma_spread = {
        let m = mean_sigma;
        (per_sample_mean_sigma
            .iter()
            .map(|v| (v - m) * (v - m))
            .sum::<f64>()
            / per_sample_mean_sigma.len() as f64)
            .sqrt()
    };
    Ok(MetricReport {
        dataset: dataset.into(),
        method: method.into(),
        masked: mask.is_some(),
        mse: sq_sum / n as f64,
        mean_sigma,
        sigma_spread,
        mpiw: if width_n > 0 {
            Some(width_sum / width_n as f64)
        } else {
            None
        },
        ence: ence_sum / n as f64,
        spearman,
        n_cells: n,
    })
}
