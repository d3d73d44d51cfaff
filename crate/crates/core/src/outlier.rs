//! Unsupervised outlier detection from epistemic uncertainty: per-cell
//! Gaussian-kernel densities over training-time uncertainties, upper-tail
//! p-values for test uncertainties, Fisher aggregation across directional
//! channels, and thresholded labels per pixel and channel group.

use crate::error::{CoreError, Result};
use crate::grid::{ChannelLayout, GridTensor};
use crate::scalar::Scalar;
use crate::special::{chi_square_survival, std_normal_survival};
use crate::stats::iqr_sorted;

/// P-values are floored here before logs so Fisher's statistic stays finite.
pub const PVALUE_FLOOR: f64 = 1e-300;

/// Bandwidths never drop below this, so degenerate sample sets still yield a
/// proper density.
pub const BANDWIDTH_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandwidthSource {
    Silverman,
    /// All samples identical (or spread below the floor): the floor was used.
    Floored,
    UserSupplied,
}

/// Gaussian kernel mixture over one cell's training uncertainties. The
/// density integrates to one analytically.
#[derive(Debug, Clone)]
pub struct CellDensity<F: Scalar> {
    samples: Vec<F>,
    bandwidth: F,
    source: BandwidthSource,
}

impl<F: Scalar> CellDensity<F> {
    pub fn samples(&self) -> &[F] {
        &self.samples
    }

    pub fn bandwidth(&self) -> F {
        self.bandwidth
    }

    pub fn bandwidth_source(&self) -> BandwidthSource {
        self.source
    }

    /// True when the bandwidth had to be floored; callers may surface this
    /// as a warning.
    pub fn is_degenerate(&self) -> bool {
        self.source == BandwidthSource::Floored
    }

    /// Mixture density at x.
    pub fn density(&self, x: F) -> F {
        let h = self.bandwidth;
        let norm = F::from_f64_c((2.0 * std::f64::consts::PI).sqrt())
            * h
            * F::from_usize_c(self.samples.len());
        let half = F::from_f64_c(0.5);
        let mut sum = F::zero();
        for &s in &self.samples {
            let z = (x - s) / h;
            sum = sum + (-half * z * z).exp();
        }
        sum / norm
    }
}

/// Fits a Gaussian KDE with Silverman's rule
/// h = 0.9 min(std, IQR/1.34) N^(-1/5), floored at 1e-6.
pub fn fit_kde<F: Scalar>(samples: &[F], bandwidth: Option<F>) -> Result<CellDensity<F>> {
    if samples.len() < 2 {
        return Err(CoreError::InsufficientSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::NonFinite("kde samples"));
    }
    if let Some(h) = bandwidth {
        if h <= F::zero() || !h.is_finite() {
            return Err(CoreError::InvalidParam("bandwidth must be positive".into()));
        }
        return Ok(CellDensity {
            samples: samples.to_vec(),
            bandwidth: h,
            source: BandwidthSource::UserSupplied,
        });
    }
    let n = samples.len();
    let std = crate::scalar::sample_std(samples).expect("n >= 2");
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let iqr = iqr_sorted(&sorted).expect("n >= 2");
    let spread = std.min(iqr / F::from_f64_c(1.34));
    let h = F::from_f64_c(0.9)
        * spread
        * F::from_f64_c((n as f64).powf(-0.2));
    let floor = F::from_f64_c(BANDWIDTH_FLOOR);
    let (h, source) = if h < floor {
        (floor, BandwidthSource::Floored)
    } else {
        (h, BandwidthSource::Silverman)
    };
    Ok(CellDensity {
        samples: samples.to_vec(),
        bandwidth: h,
        source,
    })
}

/// Upper-tail mass of the fitted density beyond sigma_star, in closed form:
/// p = (1/N) sum_n S((sigma* - x_n) / h) with S the standard normal survival
/// function. Strictly decreasing in sigma_star, with values in (0, 1).
pub fn tail_pvalue<F: Scalar>(density: &CellDensity<F>, sigma_star: F) -> F {
    let h = density.bandwidth;
    let n = F::from_usize_c(density.samples.len());
    let mut sum = F::zero();
    for &s in density.samples() {
        sum = sum + std_normal_survival((sigma_star - s) / h);
    }
    sum / n
}

/// Fisher's method over k p-values.
#[derive(Debug, Clone, Copy)]
pub struct FisherOutcome<F> {
    /// Aggregated p-value P(chi^2_{2k} >= X^2).
    pub p: F,
    /// The test statistic X^2 = -2 sum log p_j.
    pub statistic: F,
    /// How many inputs hit the p-value floor.
    pub floored: usize,
}

/// Aggregates k p-values with Fisher's method through the regularized upper
/// incomplete gamma function. Zero inputs are floored to 1e-300 first.
pub fn fisher_aggregate<F: Scalar>(pvals: &[F]) -> Result<FisherOutcome<F>> {
    if pvals.is_empty() {
        return Err(CoreError::EmptyInput("p-values"));
    }
    let floor = F::from_f64_c(PVALUE_FLOOR);
    let one = F::one();
    let mut statistic = F::zero();
    let mut floored = 0usize;
    for &p in pvals {
        if !p.is_finite() || p < F::zero() || p > one {
            return Err(CoreError::InvalidParam(format!(
                "p-value {p} outside [0, 1]"
            )));
        }
        let p = if p < floor {
            floored += 1;
            floor
        } else {
            p
        };
        statistic = statistic - F::from_f64_c(2.0) * p.ln();
    }
    let dof = F::from_usize_c(2 * pvals.len());
    Ok(FisherOutcome {
        p: chi_square_survival(statistic, dof),
        statistic,
        floored,
    })
}

/// Flag direction: the prose of the source text flags small aggregated
/// p-values (p <= epsilon); its algorithm listing literally says ">=", which
/// contradicts the prose and standard practice. The prose reading is the
/// default; the literal one stays available behind this switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FlagRule {
    #[default]
    SmallP,
    LiteralLargeP,
}

impl FlagRule {
    fn flags(self, p: f64, epsilon: f64) -> bool {
        match self {
            FlagRule::SmallP => p <= epsilon,
            FlagRule::LiteralLargeP => p >= epsilon,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct OutlierConfig {
    pub epsilon: f64,
    pub flag_rule: FlagRule,
}

impl OutlierConfig {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            flag_rule: FlagRule::SmallP,
        }
    }
}

/// Per-pixel aggregated p-values and binary labels for one test sample.
#[derive(Debug, Clone)]
pub struct OutlierReport {
    pub height: usize,
    pub width: usize,
    /// Test-sample index this report belongs to.
    pub sample_index: usize,
    pub epsilon: f64,
    /// Aggregated volume-channel p-value per pixel (row-major).
    pub p_vol: Vec<f64>,
    pub p_speed: Vec<f64>,
    pub out_vol: Vec<bool>,
    pub out_speed: Vec<bool>,
    pub out_pixel: Vec<bool>,
    /// Pixels where at least one channel cell lacked enough training
    /// samples; those channels were left out of the aggregation.
    pub partial_pixels: Vec<bool>,
}

impl OutlierReport {
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> usize {
        i * self.width + j
    }

    pub fn flagged_fraction(&self) -> f64 {
        self.out_pixel.iter().filter(|&&b| b).count() as f64 / self.out_pixel.len() as f64
    }
}

/// Cells skipped for insufficient training samples, reported explicitly.
#[derive(Debug, Clone, Default)]
pub struct SkippedCells {
    /// (row, col, channel) triples.
    pub cells: Vec<(usize, usize, usize)>,
}

/// The full detector: per cell, fit a KDE on the training uncertainties and
/// compute upper-tail p-values for every test uncertainty; per pixel,
/// Fisher-aggregate the volume channels and the speed channels separately
/// and threshold at epsilon. The pixel label is the OR of the two groups.
pub fn detect_outliers<F: Scalar>(
    train_sigmas: &[GridTensor<F>],
    test_sigmas: &[GridTensor<F>],
    layout: &ChannelLayout,
    config: OutlierConfig,
) -> Result<(Vec<OutlierReport>, SkippedCells)> {
    let first = train_sigmas
        .first()
        .ok_or(CoreError::EmptyInput("training sigmas"))?;
    if test_sigmas.is_empty() {
        return Err(CoreError::EmptyInput("test sigmas"));
    }
    let (h, w, c) = first.shape();
    if c != layout.n_channels() {
        return Err(CoreError::ShapeMismatch(format!(
            "layout expects {} channels, sigmas have {c}",
            layout.n_channels()
        )));
    }
    for g in train_sigmas.iter().chain(test_sigmas.iter()) {
        first.ensure_same_shape(g, "outlier sigma stacks")?;
    }
    if !(0.0 < config.epsilon && config.epsilon < 1.0) {
        return Err(CoreError::InvalidParam(format!(
            "epsilon {} not in (0,1)",
            config.epsilon
        )));
    }

    let t_test = test_sigmas.len();
    let mut skipped = SkippedCells::default();
    // per-cell p-values for each test sample; NaN marks skipped cells
    let mut pvals = vec![f64::NAN; t_test * h * w * c];
    let mut train_buf: Vec<F> = Vec::with_capacity(train_sigmas.len());
    for i in 0..h {
        for j in 0..w {
            for k in 0..c {
                train_buf.clear();
                for g in train_sigmas {
                    let v = g.get(i, j, k);
                    if v.is_finite() {
                        train_buf.push(v);
                    }
                }
                if train_buf.len() < 2 {
                    skipped.cells.push((i, j, k));
                    continue;
                }
                let density = fit_kde(&train_buf, None)?;
                for (t, g) in test_sigmas.iter().enumerate() {
                    let p = tail_pvalue(&density, g.get(i, j, k));
                    pvals[((t * h + i) * w + j) * c + k] = p.to_f64().expect("finite p");
                }
            }
        }
    }

    let mut reports = Vec::with_capacity(t_test);
    for t in 0..t_test {
        let mut report = OutlierReport {
            height: h,
            width: w,
            sample_index: t,
            epsilon: config.epsilon,
            p_vol: vec![f64::NAN; h * w],
            p_speed: vec![f64::NAN; h * w],
            out_vol: vec![false; h * w],
            out_speed: vec![false; h * w],
            out_pixel: vec![false; h * w],
            partial_pixels: vec![false; h * w],
        };
        for i in 0..h {
            for j in 0..w {
                let px = i * w + j;
                let mut aggregate = |channels: &[usize]| -> Result<Option<f64>> {
                    let mut ps: Vec<f64> = Vec::with_capacity(channels.len());
                    for &k in channels {
                        let p = pvals[((t * h + i) * w + j) * c + k];
                        if p.is_nan() {
                            report.partial_pixels[px] = true;
                        } else {
                            ps.push(p);
                        }
                    }
                    if ps.is_empty() {
                        return Ok(None);
                    }
                    Ok(Some(fisher_aggregate(&ps)?.p))
                };
                if let Some(p) = aggregate(layout.volume_channels())? {
                    report.p_vol[px] = p;
                    report.out_vol[px] = config.flag_rule.flags(p, config.epsilon);
                }
                if let Some(p) = aggregate(layout.speed_channels())? {
                    report.p_speed[px] = p;
                    report.out_speed[px] = config.flag_rule.flags(p, config.epsilon);
                }
                report.out_pixel[px] = report.out_vol[px] || report.out_speed[px];
            }
        }
        reports.push(report);
    }
    Ok((reports, skipped))
}

/// Temporal and spatial share summaries over a report list.
#[derive(Debug, Clone)]
pub struct OutlierShares {
    /// Fraction of pixels flagged per test sample.
    pub temporal: Vec<f64>,
    /// Fraction of test samples flagged per pixel (row-major).
    pub spatial: Vec<f64>,
    pub height: usize,
    pub width: usize,
}

pub fn outlier_share(reports: &[OutlierReport]) -> Result<OutlierShares> {
    let first = reports.first().ok_or(CoreError::EmptyInput("reports"))?;
    let (h, w) = (first.height, first.width);
    let mut temporal = Vec::with_capacity(reports.len());
    let mut spatial = vec![0.0f64; h * w];
    for r in reports {
        if r.height != h || r.width != w {
            return Err(CoreError::ShapeMismatch("report shapes".into()));
        }
        temporal.push(r.flagged_fraction());
        for (s, &flag) in spatial.iter_mut().zip(&r.out_pixel) {
            if flag {
                *s += 1.0;
            }
        }
    }
    let t = reports.len() as f64;
    for s in &mut spatial {
        *s /= t;
    }
    Ok(OutlierShares {
        temporal,
        spatial,
        height: h,
        width: w,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kde_density_integrates_to_one() {
        // trapezoid integration over a wide window
        let samples = vec![0.5f64, 1.0, 1.5, 3.0, 0.2];
        let kde = fit_kde(&samples, None).unwrap();
        let (lo, hi) = (-20.0, 25.0);
        let n = 60_000;
        let dx = (hi - lo) / n as f64;
        let mut integral = 0.0;
        for i in 0..=n {
            let x = lo + i as f64 * dx;
            let wgt = if i == 0 || i == n { 0.5 } else { 1.0 };
            integral += wgt * kde.density(x) * dx;
        }
        assert!((integral - 1.0).abs() < 1e-6, "integral {integral}");
    }

    #[test]
    fn degenerate_samples_floor_the_bandwidth() {
        let kde = fit_kde(&[0.0f64, 0.0, 0.0], None).unwrap();
        assert!(kde.is_degenerate());
        assert_eq!(kde.bandwidth(), BANDWIDTH_FLOOR);
        // density is centered at zero
        assert!(kde.density(0.0) > kde.density(1.0));
    }

    #[test]
    fn kde_recovers_gaussian_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 5_000;
        let true_mean = 4.0;
        let true_std = 1.5;
        let samples: Vec<f64> = (0..n)
            .map(|_| {
                let u1: f64 = rng.random::<f64>().max(1e-12);
                let u2: f64 = rng.random();
                true_mean
                    + true_std
                        * (-2.0 * u1.ln()).sqrt()
                        * (2.0 * std::f64::consts::PI * u2).cos()
            })
            .collect();
        let kde = fit_kde(&samples, None).unwrap();
        // mean of the fitted density by trapezoid integration, compared to
        // the true mean within 3 standard errors
        let (lo, hi) = (true_mean - 12.0 * true_std, true_mean + 12.0 * true_std);
        let steps = 4_000;
        let dx = (hi - lo) / steps as f64;
        let mut kde_mean = 0.0;
        for i in 0..=steps {
            let x = lo + i as f64 * dx;
            let wgt = if i == 0 || i == steps { 0.5 } else { 1.0 };
            kde_mean += wgt * x * kde.density(x) * dx;
        }
        let se = true_std / (n as f64).sqrt();
        assert!(
            (kde_mean - true_mean).abs() < 3.0 * se,
            "kde mean {kde_mean} vs {true_mean} (se {se})"
        );
    }

    #[test]
    fn too_few_samples_error() {
        assert!(fit_kde(&[1.0f64], None).is_err());
    }

    #[test]
    fn tail_pvalue_limits_and_symmetry() {
        let kde = fit_kde(&[2.0f64, 2.0, 2.0, 2.0], None).unwrap();
        // all samples equal c, sigma* = c: Gaussian symmetry gives 1/2
        assert!((tail_pvalue(&kde, 2.0) - 0.5).abs() < 1e-12);
        assert!(tail_pvalue(&kde, -1.0e3) > 1.0 - 1e-12);
        assert!(tail_pvalue(&kde, 1.0e3) < 1e-12);
    }

    #[test]
    fn tail_pvalue_strictly_decreasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let samples: Vec<f64> = (0..40).map(|_| rng.random_range(0.0..5.0)).collect();
        let kde = fit_kde(&samples, None).unwrap();
        let mut prev = f64::INFINITY;
        let mut x = -2.0;
        while x < 8.0 {
            let p = tail_pvalue(&kde, x);
            assert!(p < prev);
            assert!(p > 0.0 && p < 1.0);
            prev = p;
            x += 0.25;
        }
    }

    #[test]
    fn tail_pvalue_matches_adaptive_quadrature() {
        // oracle: adaptive Simpson integration of the mixture density over
        // the upper tail
        fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
            let c = 0.5 * (a + b);
            (b - a) / 6.0 * (f(a) + 4.0 * f(c) + f(b))
        }
        fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, eps: f64, whole: f64, depth: u32) -> f64 {
            let c = 0.5 * (a + b);
            let left = simpson(f, a, c);
            let right = simpson(f, c, b);
            if depth == 0 || (left + right - whole).abs() < 15.0 * eps {
                left + right + (left + right - whole) / 15.0
            } else {
                adaptive(f, a, c, eps / 2.0, left, depth - 1)
                    + adaptive(f, c, b, eps / 2.0, right, depth - 1)
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for trial in 0..10 {
            let samples: Vec<f64> = (0..15 + trial)
                .map(|_| rng.random_range(0.0..4.0))
                .collect();
            let kde = fit_kde(&samples, None).unwrap();
            let sigma_star = rng.random_range(-1.0..6.0);
            let upper = samples.iter().cloned().fold(f64::MIN, f64::max) + 14.0 * kde.bandwidth();
            let f = |x: f64| kde.density(x);
            let oracle = if sigma_star >= upper {
                0.0
            } else {
                let whole = simpson(&f, sigma_star, upper);
                adaptive(&f, sigma_star, upper, 1e-12, whole, 40)
            };
            let got = tail_pvalue(&kde, sigma_star);
            assert!(
                (got - oracle).abs() < 1e-8,
                "trial {trial}: {got} vs {oracle}"
            );
        }
    }

    #[test]
    fn fisher_identity_and_edge_cases() {
        // all ones: statistic 0, aggregate 1
        let ones = fisher_aggregate(&[1.0f64, 1.0, 1.0, 1.0]).unwrap();
        assert!(ones.statistic.abs() < 1e-12);
        assert!((ones.p - 1.0).abs() < 1e-12);
        // k = 1 is the identity
        for &p in &[0.9f64, 0.5, 0.01, 1e-8] {
            let agg = fisher_aggregate(&[p]).unwrap();
            assert!((agg.p - p).abs() < 1e-12 * p.max(1e-6), "{p} -> {}", agg.p);
        }
        // zero floors with a count
        let z = fisher_aggregate(&[0.0f64, 0.5]).unwrap();
        assert_eq!(z.floored, 1);
        assert!(z.p.is_finite());
        // out of range rejected
        assert!(fisher_aggregate(&[1.5f64]).is_err());
        assert!(fisher_aggregate::<f64>(&[]).is_err());
    }

    #[test]
    fn fisher_worked_value_eight_ln_two() {
        // four p-values of 1/2: X^2 = 8 ln 2, aggregate ~ 0.698
        let agg = fisher_aggregate(&[0.5f64; 4]).unwrap();
        assert!((agg.statistic - 8.0 * std::f64::consts::LN_2).abs() < 1e-12);
        // independent oracle: Poisson-sum closed form for even dof
        let x = agg.statistic;
        let mut term = 1.0;
        let mut sum = 1.0;
        for j in 1..4 {
            term *= (x / 2.0) / j as f64;
            sum += term;
        }
        let oracle = (-x / 2.0f64).exp() * sum;
        assert!((agg.p - oracle).abs() < 1e-12);
        assert!((agg.p - 0.698).abs() < 1e-3);
    }

    #[test]
    fn fisher_monotone_in_each_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..50 {
            let base: Vec<f64> = (0..4).map(|_| rng.random_range(0.01..1.0)).collect();
            let p0 = fisher_aggregate(&base).unwrap().p;
            let mut smaller = base.clone();
            let idx = rng.random_range(0..4);
            smaller[idx] *= rng.random_range(0.1..1.0);
            let p1 = fisher_aggregate(&smaller).unwrap().p;
            assert!(p1 <= p0 + 1e-15);
        }
    }

    fn sigma_grid(h: usize, w: usize, mut vals: impl FnMut(usize, usize, usize) -> f64) -> GridTensor<f64> {
        let mut g = GridTensor::zeros(h, w, 8);
        for i in 0..h {
            for j in 0..w {
                for k in 0..8 {
                    g.set(i, j, k, vals(i, j, k));
                }
            }
        }
        g
    }

    #[test]
    fn central_test_values_are_not_outliers() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let layout = ChannelLayout::default_eight();
        // training sigmas jittered around 1.0; median test value
        let train: Vec<GridTensor<f64>> = (0..30)
            .map(|_| sigma_grid(3, 3, |_, _, _| 1.0 + rng.random_range(-0.2..0.2)))
            .collect();
        let test = vec![sigma_grid(3, 3, |_, _, _| 1.0)];
        let (reports, skipped) =
            detect_outliers(&train, &test, &layout, OutlierConfig::new(0.001)).unwrap();
        assert!(skipped.cells.is_empty());
        assert_eq!(reports.len(), 1);
        assert!(reports[0].out_pixel.iter().all(|&b| !b));
        // aggregated p-values are far from the threshold
        assert!(reports[0].p_vol.iter().all(|&p| p > 0.05));
    }

    #[test]
    fn shifted_cells_are_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let layout = ChannelLayout::default_eight();
        let train: Vec<GridTensor<f64>> = (0..60)
            .map(|_| sigma_grid(2, 2, |_, _, _| 1.0 + rng.random_range(-0.3..0.3)))
            .collect();
        // pixel (0,0) shifted far into the tail on all channels
        let test = vec![sigma_grid(2, 2, |i, j, _| if i == 0 && j == 0 { 5.0 } else { 1.0 })];
        let (reports, _) =
            detect_outliers(&train, &test, &layout, OutlierConfig::new(0.001)).unwrap();
        let r = &reports[0];
        assert!(r.out_vol[0] && r.out_speed[0] && r.out_pixel[0]);
        assert!(!r.out_pixel[1] && !r.out_pixel[2] && !r.out_pixel[3]);
    }

    #[test]
    fn literal_flag_rule_is_available() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let layout = ChannelLayout::default_eight();
        let train: Vec<GridTensor<f64>> = (0..30)
            .map(|_| sigma_grid(2, 2, |_, _, _| 1.0 + rng.random_range(-0.2..0.2)))
            .collect();
        let test = vec![sigma_grid(2, 2, |_, _, _| 1.0)];
        let cfg = OutlierConfig {
            epsilon: 0.001,
            flag_rule: FlagRule::LiteralLargeP,
        };
        let (reports, _) = detect_outliers(&train, &test, &layout, cfg).unwrap();
        // central values have large aggregated p, so the literal rule flags
        assert!(reports[0].out_pixel.iter().all(|&b| b));
    }

    #[test]
    fn skipped_cells_are_reported() {
        let layout = ChannelLayout::default_eight();
        // only one training sample: every cell skipped
        let train = vec![sigma_grid(2, 2, |_, _, _| 1.0)];
        let test = vec![sigma_grid(2, 2, |_, _, _| 1.0)];
        let (reports, skipped) =
            detect_outliers(&train, &test, &layout, OutlierConfig::new(0.001)).unwrap();
        assert_eq!(skipped.cells.len(), 2 * 2 * 8);
        assert!(reports[0].partial_pixels.iter().all(|&b| b));
        assert!(reports[0].p_vol.iter().all(|p| p.is_nan()));
        assert!(reports[0].out_pixel.iter().all(|&b| !b));
    }

    #[test]
    fn share_summaries_match_counting_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let (h, w, t) = (4, 3, 6);
        let mut reports = Vec::new();
        for s in 0..t {
            let flags: Vec<bool> = (0..h * w).map(|_| rng.random_bool(0.3)).collect();
            reports.push(OutlierReport {
                height: h,
                width: w,
                sample_index: s,
                epsilon: 0.001,
                p_vol: vec![0.5; h * w],
                p_speed: vec![0.5; h * w],
                out_vol: flags.clone(),
                out_speed: vec![false; h * w],
                out_pixel: flags,
                partial_pixels: vec![false; h * w],
            });
        }
        let shares = outlier_share(&reports).unwrap();
        for (s, r) in shares.temporal.iter().zip(&reports) {
            let expect = r.out_pixel.iter().filter(|&&b| b).count() as f64 / (h * w) as f64;
            assert!((s - expect).abs() < 1e-12);
        }
        for px in 0..h * w {
            let expect =
                reports.iter().filter(|r| r.out_pixel[px]).count() as f64 / t as f64;
            assert!((shares.spatial[px] - expect).abs() < 1e-12);
        }
        // trivial edges
        let none = outlier_share(&reports[..1]).unwrap();
        assert_eq!(none.temporal.len(), 1);
    }
}
