use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Normalised autocorrelation with the biased (divide by `n`) autocovariance.
pub fn autocorrelation(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if n <= max_lag {
        return Err(invalid(format!("series of length {n} is too short for lag {max_lag}")));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let c0 = dev.iter().map(|d| d * d).sum::<f64>() / n as f64;
    if !(c0 > 0.0) {
        return Err(Error::Undefined("autocorrelation of a constant series".into()));
    }
    Ok((0..=max_lag)
        .map(|lag| {
            if lag == 0 {
                1.0
            } else {
                dev[..n - lag].iter().zip(&dev[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64 / c0
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentMoments {
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    /// `None` when the variance is zero.
    pub skewness: Option<f64>,
    pub excess_kurtosis: Option<f64>,
}

/// Mean, unbiased variance and standardized third and fourth central moments.
pub fn moments_of(xs: &[f64]) -> Result<ComponentMoments> {
    let n = xs.len();
    if n < 4 {
        return Err(invalid(format!("moments need at least 4 samples (got {n})")));
    }
    let nf = n as f64;
    let mean = xs.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in xs {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let variance = m2 / (nf - 1.0);
    let (m2, m3, m4) = (m2 / nf, m3 / nf, m4 / nf);
    let (skewness, excess_kurtosis) =
        if m2 > 0.0 { (Some(m3 / m2.powf(1.5)), Some(m4 / (m2 * m2) - 3.0)) } else { (None, None) };
    Ok(ComponentMoments { mean, variance, skewness, excess_kurtosis })
}

/// Per-component moments of a sample set (rows are samples).
pub fn moments<S: AsRef<[f64]>>(samples: &[S]) -> Result<Vec<ComponentMoments>> {
    let dim = samples.first().map(|s| s.as_ref().len()).unwrap_or(0);
    (0..dim)
        .map(|l| {
            let col: Vec<f64> = samples.iter().map(|s| s.as_ref()[l]).collect();
            moments_of(&col)
        })
        .collect()
}

/// Standard error of the mean of a correlated series from `batches` batch means.
pub fn batch_means_se(series: &[f64], batches: usize) -> Result<f64> {
    let b = series.len() / batches;
    if batches < 2 || b == 0 {
        return Err(invalid("not enough samples for batch means"));
    }
    let means: Vec<f64> = (0..batches).map(|i| series[i * b..(i + 1) * b].iter().sum::<f64>() / b as f64).collect();
    let m = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (batches as f64 - 1.0);
    Ok((var / batches as f64).sqrt())
}

/// `|CMA_n − truth| / |truth|`; with `truth = 0` the absolute error is returned
/// and the flag is set.
pub fn cumulative_relative_error(series: &[f64], truth: f64) -> (Vec<f64>, bool) {
    let absolute = truth == 0.0;
    let scale = if absolute { 1.0 } else { truth.abs() };
    let mut sum = 0.0;
    let errs = series
        .iter()
        .enumerate()
        .map(|(i, x)| {
            sum += x;
            (sum / (i + 1) as f64 - truth).abs() / scale
        })
        .collect();
    (errs, absolute)
}

/// Least-squares slope of `log y` against `log x` over positive pairs.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        x.iter().zip(y).filter(|(a, b)| **a > 0.0 && **b > 0.0).map(|(a, b)| (a.ln(), b.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lag_zero_is_one_and_alternating_is_minus_one() {
        let s: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let a = autocorrelation(&s, 1).unwrap();
        assert_eq!(a[0], 1.0);
        assert!((a[1] + 0.99).abs() < 1e-12);
        assert!(autocorrelation(&[2.0; 10], 1).is_err());
        assert!(autocorrelation(&[1.0, 2.0], 2).is_err());
    }

    #[test]
    fn constant_samples_have_zero_variance() {
        let m = moments_of(&[3.0; 8]).unwrap();
        assert_eq!((m.mean, m.variance, m.skewness), (3.0, 0.0, None));
    }

    #[test]
    fn two_point_sample() {
        let xs: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { -1.0 } else { 1.0 }).collect();
        let m = moments_of(&xs).unwrap();
        assert_eq!(m.mean, 0.0);
        assert!((m.excess_kurtosis.unwrap() + 2.0).abs() < 1e-12);
        let small = moments_of(&[-1.0, 1.0, -1.0, 1.0]).unwrap();
        assert!((small.variance - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn cumulative_error_examples() {
        assert_eq!(cumulative_relative_error(&[2.0, 2.0], 2.0).0, vec![0.0, 0.0]);
        assert_eq!(cumulative_relative_error(&[0.0, 6.0], 3.0).0, vec![1.0, 0.0]);
        assert!(cumulative_relative_error(&[1.0], 0.0).1);
    }

    #[test]
    fn slope_of_power_law() {
        let x: Vec<f64> = (1..50).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v.powf(-0.5)).collect();
        assert!((loglog_slope(&x, &y).unwrap() + 0.5).abs() < 1e-12);
    }
}
