use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::math::{self, ln, LN_2PI};

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_len(pred.len(), truth.len())?;
    if pred.is_empty() {
        return Ok(0.0);
    }
    let ss: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(math::sqrt(ss / pred.len() as f64))
}

/// `-sum_i log N(truth_i; mean_i, var_i)`
pub fn log_score(mean: &[f64], var: &[f64], truth: &[f64]) -> Result<f64> {
    check_len(mean.len(), var.len())?;
    check_len(mean.len(), truth.len())?;
    let mut s = 0.0;
    for i in 0..mean.len() {
        let v = var[i];
        if !(v > 0.0) {
            return Err(Error::Score(alloc::format!("non-positive predictive variance {v:e} at point {i}")));
        }
        let r = truth[i] - mean[i];
        s += 0.5 * (LN_2PI + ln(v)) + 0.5 * r * r / v;
    }
    Ok(s)
}

/// CRPS of one sample-based forecast via probability-weighted moments.
pub fn crps_samples(samples: &[f64], truth: f64) -> Result<f64> {
    let m = samples.len();
    if m < 2 {
        return Err(Error::Score("CRPS needs at least two samples".into()));
    }
    let mut x: Vec<f64> = samples.to_vec();
    x.sort_by(|a, b| a.total_cmp(b));
    let mae = x.iter().map(|v| (v - truth).abs()).sum::<f64>() / m as f64;
    let b0 = x.iter().sum::<f64>() / m as f64;
    let b1 = x.iter().enumerate().map(|(i, v)| i as f64 * v).sum::<f64>() / (m as f64 * (m - 1) as f64);
    Ok(mae + b0 - 2.0 * b1)
}

/// Mean CRPS over prediction points.
pub fn crps(samples: &[Vec<f64>], truth: &[f64]) -> Result<f64> {
    check_len(samples.len(), truth.len())?;
    if truth.is_empty() {
        return Ok(0.0);
    }
    let mut s = 0.0;
    for (x, &t) in samples.iter().zip(truth) {
        s += crps_samples(x, t)?;
    }
    Ok(s / truth.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn hand_cases() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        let ls = log_score(&[0.0], &[1.0], &[1.0]).unwrap();
        assert!((ls - 1.418_938_533_204_672_7).abs() < 1e-12);
        let exact = log_score(&[1.0, 2.0, 3.0], &[1.0; 3], &[1.0, 2.0, 3.0]).unwrap();
        assert!((exact - 1.5 * LN_2PI).abs() < 1e-12);
        assert!(matches!(log_score(&[0.0], &[0.0], &[0.0]), Err(Error::Score(_))));
    }

    #[test]
    fn degenerate_crps_is_absolute_error() {
        let c = crps(&[vec![2.0; 10], vec![-1.0; 10]], &[3.0, 1.0]).unwrap();
        assert!((c - 1.5).abs() < 1e-12);
    }

    #[test]
    fn crps_matches_gaussian_closed_form() {
        // standard normal forecast, truth 0: CRPS = 2 phi(0) - 1/sqrt(pi)
        let mut r = crate::rng::stream(5, 0);
        let x = crate::rng::normals(&mut r, 200_000);
        let c = crps_samples(&x, 0.0).unwrap();
        let exact = 2.0 * math::norm_pdf(0.0) - 1.0 / math::sqrt(core::f64::consts::PI);
        assert!((c - exact).abs() < 5e-3, "{c} vs {exact}");
    }
}
