use alloc::vec::Vec;

use crate::error::{check_len, Result};
use crate::math::{self, dot};

/// Stochastic trace estimate with its standard error and the control-variate weight used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEstimate {
    pub value: f64,
    pub std_error: f64,
    pub c: f64,
}

/// Combines samples `h_i` (unbiased for the target) with samples `r_i` whose mean is the
/// known `exact_trace`: `c * exact_trace + mean(h - c r)`. With `use_cv` false, `c = 0`.
pub fn control_variate_estimate(
    h: &[f64],
    r: &[f64],
    exact_trace: f64,
    use_cv: bool,
) -> Result<TraceEstimate> {
    check_len(h.len(), r.len())?;
    let t = h.len();
    if t == 0 {
        return Ok(TraceEstimate { value: 0.0, std_error: 0.0, c: 0.0 });
    }
    let mut c = 0.0;
    if use_cv && t > 1 {
        let mh = math::mean(h);
        let mr = math::mean(r);
        let mut cov = 0.0;
        let mut var = 0.0;
        for (a, b) in h.iter().zip(r) {
            cov += (a - mh) * (b - mr);
            var += (b - mr) * (b - mr);
        }
        cov /= (t - 1) as f64;
        var /= (t - 1) as f64;
        if var >= 1e-300 {
            c = cov / var;
        }
    }
    let g: Vec<f64> = h.iter().zip(r).map(|(a, b)| a - c * b).collect();
    let value = c * exact_trace + math::mean(&g);
    let std_error = math::sqrt(math::sample_variance(&g) / t as f64);
    Ok(TraceEstimate { value, std_error, c })
}

/// Estimate of `tr(A^{-1} dA)` from probes `z_i ~ N(0, P)`, solves `s_i = A^{-1} z_i` and
/// `w_i = P^{-1} z_i`, using `w_i^T dP w_i` as control variate for `tr(P^{-1} dP)`.
pub fn ste_grad_logdet<DA, DP>(
    solves: &[Vec<f64>],
    precond_solves: &[Vec<f64>],
    da_op: DA,
    dp_trace: f64,
    dp_op: DP,
) -> Result<TraceEstimate>
where
    DA: Fn(&[f64]) -> Vec<f64>,
    DP: Fn(&[f64]) -> Vec<f64>,
{
    check_len(solves.len(), precond_solves.len())?;
    let mut h = Vec::with_capacity(solves.len());
    let mut r = Vec::with_capacity(solves.len());
    for (s, w) in solves.iter().zip(precond_solves) {
        h.push(dot(s, &da_op(w)));
        r.push(dot(w, &dp_op(w)));
    }
    control_variate_estimate(&h, &r, dp_trace, true)
}
