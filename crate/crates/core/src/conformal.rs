//! Conformalized prediction intervals: normalized conformity scores,
//! per-cell finite-sample quantiles, symmetric interval construction and the
//! nominal Beta coverage law.

use crate::error::{CoreError, Result};
use crate::grid::{ActivityMask, GridTensor};
use crate::scalar::Scalar;

/// Cells with uncertainty below this are floored before score computation
/// and interval construction, keeping scores finite and intervals
/// degenerate-but-valid in traffic-free regions.
pub const SIGMA_FLOOR: f64 = 1e-6;

pub fn floor_sigma<F: Scalar>(sigma: F) -> F {
    sigma.max(F::from_f64_c(SIGMA_FLOOR))
}

/// Per-cell conformity score lists over C calibration samples, stored
/// sample-major.
#[derive(Debug, Clone)]
pub struct CalibrationSet<F: Scalar> {
    height: usize,
    width: usize,
    channels: usize,
    samples: usize,
    /// Laid out `[sample][cell]`.
    data: Vec<F>,
}

impl<F: Scalar> CalibrationSet<F> {
    pub fn new(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
            samples: 0,
            data: Vec::new(),
        }
    }

    pub fn cells(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn len(&self) -> usize {
        self.samples
    }

    pub fn is_empty(&self) -> bool {
        self.samples == 0
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    /// Appends one calibration sample's score grid.
    pub fn push_scores(&mut self, scores: &GridTensor<F>) -> Result<()> {
        if scores.shape() != self.shape() {
            return Err(CoreError::ShapeMismatch(format!(
                "score grid {:?} vs calibration {:?}",
                scores.shape(),
                self.shape()
            )));
        }
        if scores.data().iter().any(|v| !v.is_finite() || *v < F::zero()) {
            return Err(CoreError::NonFinite("conformity scores"));
        }
        self.data.extend_from_slice(scores.data());
        self.samples += 1;
        Ok(())
    }

    /// All scores of one cell across the calibration samples.
    pub fn cell_scores(&self, cell: usize) -> impl Iterator<Item = F> + '_ {
        let cells = self.cells();
        (0..self.samples).map(move |s| self.data[s * cells + cell])
    }
}

/// Elementwise |y - mu| / sigma with the sigma floor applied.
pub fn conformity_scores<F: Scalar>(
    truth: &GridTensor<F>,
    mu: &GridTensor<F>,
    sigma: &GridTensor<F>,
) -> Result<GridTensor<F>> {
    truth.ensure_same_shape(mu, "conformity truth/mu")?;
    truth.ensure_same_shape(sigma, "conformity truth/sigma")?;
    let mut out = GridTensor::zeros(truth.height(), truth.width(), truth.channels());
    for (((o, &y), &m), &s) in out
        .data_mut()
        .iter_mut()
        .zip(truth.data())
        .zip(mu.data())
        .zip(sigma.data())
    {
        if !y.is_finite() || !m.is_finite() || !s.is_finite() {
            return Err(CoreError::NonFinite("conformity inputs"));
        }
        *o = (y - m).abs() / floor_sigma(s);
    }
    Ok(out)
}

/// Calibrated per-cell scaling quantile.
#[derive(Debug, Clone)]
pub struct QhatGrid<F: Scalar> {
    pub qhat: GridTensor<F>,
    pub alpha: f64,
    pub samples: usize,
    /// Order-statistic rank selected by the finite-sample formula.
    pub rank: usize,
    /// Set when the coverage guarantee is vacuous (rank exceeds C); qhat is
    /// the +infinity sentinel in that case.
    pub vacuous: bool,
}

/// Rank ceil((1 - alpha) (C + 1)) of the finite-sample quantile.
pub fn qhat_rank(samples: usize, alpha: f64) -> usize {
    ((1.0 - alpha) * (samples as f64 + 1.0)).ceil() as usize
}

/// Per-cell empirical quantile at level ceil((1-alpha)(C+1))/C: the order
/// statistic at that rank of the sorted scores. When the rank exceeds C the
/// guarantee is vacuous and every cell gets a +infinity sentinel.
pub fn calibrate_qhat<F: Scalar>(cal: &CalibrationSet<F>, alpha: f64) -> Result<QhatGrid<F>> {
    if cal.is_empty() {
        return Err(CoreError::EmptyInput("calibration set"));
    }
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(CoreError::InvalidParam(format!("alpha {alpha} not in (0,1)")));
    }
    let c = cal.len();
    let rank = qhat_rank(c, alpha);
    let (h, w, ch) = cal.shape();
    if rank > c {
        return Ok(QhatGrid {
            qhat: GridTensor::filled(h, w, ch, F::infinity()),
            alpha,
            samples: c,
            rank,
            vacuous: true,
        });
    }
    let mut qhat = GridTensor::zeros(h, w, ch);
    let mut buf: Vec<F> = Vec::with_capacity(c);
    for cell in 0..cal.cells() {
        buf.clear();
        buf.extend(cal.cell_scores(cell));
        buf.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
        qhat.data_mut()[cell] = buf[rank - 1];
    }
    Ok(QhatGrid {
        qhat,
        alpha,
        samples: c,
        rank,
        vacuous: false,
    })
}

/// Pooled variant for small-C regimes: one global quantile over the scores
/// of every cell, broadcast to the full grid.
pub fn calibrate_qhat_pooled<F: Scalar>(cal: &CalibrationSet<F>, alpha: f64) -> Result<QhatGrid<F>> {
    if cal.is_empty() {
        return Err(CoreError::EmptyInput("calibration set"));
    }
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(CoreError::InvalidParam(format!("alpha {alpha} not in (0,1)")));
    }
    let (h, w, ch) = cal.shape();
    let mut all: Vec<F> = Vec::with_capacity(cal.len() * cal.cells());
    for cell in 0..cal.cells() {
        all.extend(cal.cell_scores(cell));
    }
    all.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    let n = all.len();
    let rank = qhat_rank(n, alpha);
    if rank > n {
        return Ok(QhatGrid {
            qhat: GridTensor::filled(h, w, ch, F::infinity()),
            alpha,
            samples: n,
            rank,
            vacuous: true,
        });
    }
    let q = all[rank - 1];
    Ok(QhatGrid {
        qhat: GridTensor::filled(h, w, ch, q),
        alpha,
        samples: n,
        rank,
        vacuous: false,
    })
}

/// Symmetric per-cell prediction interval [mu - sigma qhat, mu + sigma qhat].
#[derive(Debug, Clone)]
pub struct PredictionInterval<F: Scalar> {
    pub lower: GridTensor<F>,
    pub upper: GridTensor<F>,
    pub alpha: f64,
    pub qhat: GridTensor<F>,
}

pub fn build_interval<F: Scalar>(
    mu: &GridTensor<F>,
    sigma: &GridTensor<F>,
    qhat: &GridTensor<F>,
    alpha: f64,
) -> Result<PredictionInterval<F>> {
    mu.ensure_same_shape(sigma, "interval mu/sigma")?;
    mu.ensure_same_shape(qhat, "interval mu/qhat")?;
    if qhat.data().iter().any(|&q| q < F::zero() || q.is_nan()) {
        return Err(CoreError::InvalidParam("qhat must be >= 0".into()));
    }
    let mut lower = mu.clone();
    let mut upper = mu.clone();
    for (((lo, up), &s), &q) in lower
        .data_mut()
        .iter_mut()
        .zip(upper.data_mut())
        .zip(sigma.data())
        .zip(qhat.data())
    {
        let half = floor_sigma(s) * q;
        *up = *lo + half;
        *lo = *lo - half;
    }
    Ok(PredictionInterval {
        lower,
        upper,
        alpha,
        qhat: qhat.clone(),
    })
}

/// Fraction of (masked) cells whose truth lies inside the interval.
pub fn empirical_coverage<F: Scalar>(
    interval: &PredictionInterval<F>,
    truth: &GridTensor<F>,
    mask: Option<&ActivityMask>,
) -> Result<F> {
    interval.lower.ensure_same_shape(truth, "coverage truth")?;
    if let Some(m) = mask {
        if m.shape() != truth.shape() {
            return Err(CoreError::ShapeMismatch("coverage mask".into()));
        }
    }
    let mut hits = 0usize;
    let mut total = 0usize;
    for (i, ((&lo, &up), &y)) in interval
        .lower
        .data()
        .iter()
        .zip(interval.upper.data())
        .zip(truth.data())
        .enumerate()
    {
        if let Some(m) = mask {
            if !m.is_active_flat(i) {
                continue;
            }
        }
        total += 1;
        if lo <= y && y <= up {
            hits += 1;
        }
    }
    if total == 0 {
        return Err(CoreError::EmptyInput("coverage selection"));
    }
    Ok(F::from_usize_c(hits) / F::from_usize_c(total))
}

/// Nominal distribution of empirical coverage under exchangeability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NominalCoverage {
    Beta { a: f64, b: f64, mean: f64 },
    /// l = floor((C+1) alpha) = 0: the interval is the max score and the
    /// Beta shape degenerates.
    Degenerate,
}

pub fn nominal_coverage_law(samples: usize, alpha: f64) -> Result<NominalCoverage> {
    if samples == 0 {
        return Err(CoreError::EmptyInput("calibration samples"));
    }
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(CoreError::InvalidParam(format!("alpha {alpha} not in (0,1)")));
    }
    let l = ((samples as f64 + 1.0) * alpha).floor();
    if l < 1.0 {
        return Ok(NominalCoverage::Degenerate);
    }
    let a = samples as f64 + 1.0 - l;
    let b = l;
    Ok(NominalCoverage::Beta {
        a,
        b,
        mean: a / (a + b),
    })
}
