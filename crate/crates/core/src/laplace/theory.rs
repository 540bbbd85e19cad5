//! Probe and Lanczos-depth requirements for SLQ log-determinant estimates. Diagnostic only.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::math::{ln, sqrt};

/// `Q_{chi^2_{nt}}(1 - eta/2) / (nt)`
pub fn chi_square_ratio(nt: f64, eta: f64) -> Result<f64> {
    if !(nt > 0.0) || !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidParameter(alloc::format!("need nt > 0 and 0 < eta < 1, got {nt}, {eta}")));
    }
    let chi = ChiSquared::new(nt).map_err(|e| Error::InvalidParameter(alloc::format!("{e}")))?;
    Ok(chi.inverse_cdf(1.0 - eta / 2.0) / nt)
}

/// Required Lanczos depth and probe counts for the additive bound, and for the
/// multiplicative bound when the smallest eigenvalue exceeds one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSize {
    pub l_required: f64,
    pub t_required: f64,
    /// `None` unless `lambda_min > 1`.
    pub l_mult: Option<f64>,
    pub t_mult: f64,
    pub c_nt: f64,
}

/// `kappa` and `lambda_min` refer to the preconditioned matrix; `n`, `t` set `C_nt`.
pub fn slq_sample_size(kappa: f64, lambda_min: f64, epsilon: f64, eta: f64, n: usize, t: usize) -> Result<SampleSize> {
    if !(epsilon > 0.0 && epsilon < 1.0) || !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidParameter("epsilon and eta must lie in (0, 1)".into()));
    }
    if !(kappa >= 1.0) || !(lambda_min > 0.0) || n == 0 || t == 0 {
        return Err(Error::InvalidParameter("need kappa >= 1, lambda_min > 0, n >= 1, t >= 1".into()));
    }
    let c = chi_square_ratio((n as f64) * (t as f64), eta)?;
    let s = sqrt(2.0 * kappa + 1.0);
    let l_required = sqrt(3.0 * kappa) / 4.0 * ln(c * 20.0 * ln(2.0 * (kappa + 1.0)) * s / epsilon);
    let lk = ln(kappa + 1.0);
    let t_required = 32.0 / (epsilon * epsilon) * lk * lk * ln(4.0 / eta);
    let t_mult = 32.0 / (epsilon * epsilon) * ln(4.0 / eta);
    let l_mult = (lambda_min > 1.0).then(|| {
        let num = 4.0 * c * (ln(lambda_min * (kappa + 1.0 - 1.0 / kappa)) + core::f64::consts::PI) * (s + 1.0);
        0.5 * ln(num / (ln(lambda_min) * epsilon)) / ln((s + 1.0) / (s - 1.0))
    });
    Ok(SampleSize { l_required, t_required, l_mult, t_mult, c_nt: c })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_square_ratio_at_large_dof() {
        let c = chi_square_ratio(1e6, 0.1).unwrap();
        // normal approximation: 1 + z_{0.95} sqrt(2 / nt)
        let approx = 1.0 + 1.644_853_626_951_472_2 * sqrt(2.0 / 1e6);
        assert!((c - approx).abs() < 1e-5, "{c} vs {approx}");
        assert!(chi_square_ratio(0.0, 0.1).is_err());
    }

    #[test]
    fn unit_condition_number_collapses() {
        let s = slq_sample_size(1.0, 0.5, 0.1, 0.1, 100, 10).unwrap();
        let expect = sqrt(3.0) / 4.0 * ln(s.c_nt * 20.0 * ln(4.0) * sqrt(3.0) / 0.1);
        assert!((s.l_required - expect).abs() < 1e-12);
        assert!(s.l_mult.is_none());
    }

    #[test]
    fn probes_scale_with_inverse_square_epsilon() {
        let a = slq_sample_size(30.0, 2.0, 0.2, 0.1, 100, 10).unwrap();
        let b = slq_sample_size(30.0, 2.0, 0.1, 0.1, 100, 10).unwrap();
        assert!((b.t_required / a.t_required - 4.0).abs() < 1e-12);
        assert!(a.l_mult.unwrap() > 0.0);
        assert!(slq_sample_size(0.5, 1.0, 0.1, 0.1, 10, 1).is_err());
    }
}
