//! Small statistical helpers: empirical quantiles and Kolmogorov-Smirnov
//! tests (one-sample against an arbitrary CDF, and two-sample).

use crate::error::{CoreError, Result};
use crate::scalar::Scalar;
use crate::special::kolmogorov_survival;

/// Linear-interpolation quantile (the common "type 7" definition) on a sorted
/// slice; `q` in [0, 1].
pub fn quantile_sorted<F: Scalar>(sorted: &[F], q: F) -> Option<F> {
    if sorted.is_empty() {
        return None;
    }
    let n = sorted.len();
    if n == 1 {
        return Some(sorted[0]);
    }
    let pos = q.clamp(F::zero(), F::one()) * F::from_usize_c(n - 1);
    let lo = pos.floor().to_usize().unwrap_or(0).min(n - 1);
    let hi = (lo + 1).min(n - 1);
    let frac = pos - F::from_usize_c(lo);
    Some(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

/// Interquartile range of a sorted slice.
pub fn iqr_sorted<F: Scalar>(sorted: &[F]) -> Option<F> {
    let q1 = quantile_sorted(sorted, F::from_f64_c(0.25))?;
    let q3 = quantile_sorted(sorted, F::from_f64_c(0.75))?;
    Some(q3 - q1)
}

#[derive(Debug, Clone, Copy)]
pub struct KsResult<F> {
    pub statistic: F,
    pub p_value: F,
}

/// One-sample Kolmogorov-Smirnov test of `samples` against a reference CDF.
/// The p-value uses the asymptotic Kolmogorov distribution with the Stephens
/// small-sample correction.
pub fn ks_test_1samp<F: Scalar>(samples: &[F], cdf: impl Fn(F) -> F) -> Result<KsResult<F>> {
    if samples.is_empty() {
        return Err(CoreError::EmptyInput("ks samples"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let n = sorted.len();
    let nf = F::from_usize_c(n);
    let mut d = F::zero();
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        let hi = F::from_usize_c(i + 1) / nf - f;
        let lo = f - F::from_usize_c(i) / nf;
        d = d.max(hi).max(lo);
    }
    let sqrt_n = nf.sqrt();
    let lambda = (sqrt_n + F::from_f64_c(0.12) + F::from_f64_c(0.11) / sqrt_n) * d;
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_survival(lambda),
    })
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
pub fn ks_test_2samp<F: Scalar>(a: &[F], b: &[F]) -> Result<KsResult<F>> {
    if a.is_empty() || b.is_empty() {
        return Err(CoreError::EmptyInput("ks samples"));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).expect("finite samples"));
    sb.sort_by(|x, y| x.partial_cmp(y).expect("finite samples"));
    let (n, m) = (sa.len(), sb.len());
    let (nf, mf) = (F::from_usize_c(n), F::from_usize_c(m));
    let mut i = 0;
    let mut j = 0;
    let mut d = F::zero();
    while i < n && j < m {
        let x = sa[i].min(sb[j]);
        while i < n && sa[i] <= x {
            i += 1;
        }
        while j < m && sb[j] <= x {
            j += 1;
        }
        let diff = (F::from_usize_c(i) / nf - F::from_usize_c(j) / mf).abs();
        d = d.max(diff);
    }
    let ne = nf * mf / (nf + mf);
    let sqrt_ne = ne.sqrt();
    let lambda = (sqrt_ne + F::from_f64_c(0.12) + F::from_f64_c(0.11) / sqrt_ne) * d;
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_survival(lambda),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0f64, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.0).unwrap(), 1.0);
        assert_eq!(quantile_sorted(&v, 1.0).unwrap(), 4.0);
        assert!((quantile_sorted(&v, 0.5).unwrap() - 2.5).abs() < 1e-12);
        assert!((iqr_sorted(&v).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn ks_accepts_true_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let samples: Vec<f64> = (0..5000).map(|_| rng.random::<f64>()).collect();
        let res = ks_test_1samp(&samples, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(res.p_value > 0.01, "p {} too small", res.p_value);
    }

    #[test]
    fn ks_rejects_shifted_distribution() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let samples: Vec<f64> = (0..2000).map(|_| rng.random::<f64>() * 0.8).collect();
        let res = ks_test_1samp(&samples, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(res.p_value < 1e-6);
    }

    #[test]
    fn two_sample_ks_same_distribution_passes() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a: Vec<f64> = (0..3000).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..2500).map(|_| rng.random::<f64>()).collect();
        let res = ks_test_2samp(&a, &b).unwrap();
        assert!(res.p_value > 0.01);
        let shifted: Vec<f64> = b.iter().map(|x| x + 0.2).collect();
        let res = ks_test_2samp(&a, &shifted).unwrap();
        assert!(res.p_value < 1e-6);
    }
}
