use crate::error::{Error, Result};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.96;

/// Sample mean and the half-width `1.96 * s / sqrt(n)` of its normal
/// 95% confidence interval, `s` being the sample (n - 1) deviation.
pub fn mean_ci95(samples: &[f64]) -> Result<(f64, f64)> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok((mean, Z95 * var.sqrt() / (n as f64).sqrt()))
}

pub fn std_dev(samples: &[f64]) -> Option<f64> {
    let n = samples.len();
    if n < 2 {
        return None;
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    Some((samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_samples() {
        assert_eq!(mean_ci95(&[1.0; 100]).unwrap(), (1.0, 0.0));
    }

    #[test]
    fn half_zeros_half_ones() {
        let mut v = vec![0.0; 50];
        v.extend(vec![1.0; 50]);
        let (mean, hw) = mean_ci95(&v).unwrap();
        assert_eq!(mean, 0.5);
        // s = sqrt(25 / 99) = 0.50252..., hw = 1.96 * s / 10
        let s = (25.0f64 / 99.0).sqrt();
        assert!((hw - 1.96 * s / 10.0).abs() < 1e-15);
        assert!((hw - 0.0985).abs() < 1e-4);
    }

    #[test]
    fn single_sample_is_an_error() {
        assert!(mean_ci95(&[0.3]).is_err());
        assert!(mean_ci95(&[]).is_err());
    }
}
