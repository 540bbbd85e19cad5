//! Scalar special functions and small vector kernels usable without `std`.

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;
const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

#[inline]
pub fn lgamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// log(1 + e^x) without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + ln_1p(exp(-x))
    } else {
        ln_1p(exp(x))
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + exp(-x))
    } else {
        let e = exp(x);
        e / (1.0 + e)
    }
}

pub fn norm_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * exp(-0.5 * x * x)
}

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * core::f64::consts::FRAC_1_SQRT_2)
}

// Continued fraction for phi(x)/Phi(x) when x is far in the lower tail.
fn mills_lower_tail(x: f64) -> f64 {
    let t = -x;
    let mut f = t;
    for k in (1..=60).rev() {
        f = t + k as f64 / f;
    }
    f
}

/// phi(x) / Phi(x), accurate in both tails.
pub fn inv_mills(x: f64) -> f64 {
    if x < -8.0 {
        mills_lower_tail(x)
    } else {
        norm_pdf(x) / norm_cdf(x)
    }
}

pub fn log_norm_cdf(x: f64) -> f64 {
    if x < -8.0 {
        -0.5 * x * x - 0.5 * LN_2PI - ln(mills_lower_tail(x))
    } else if x > 5.0 {
        ln_1p(-0.5 * libm::erfc(x * core::f64::consts::FRAC_1_SQRT_2))
    } else {
        ln(norm_cdf(x))
    }
}

/// Digamma function for x > 0.
pub fn digamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv2
        * (1.0 / 12.0
            - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0)))));
    acc + ln(x) - 0.5 * inv - series
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    sqrt(dot(a, a))
}

/// y += alpha * x
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| if v.abs() > m { v.abs() } else { m })
}

pub fn mean(a: &[f64]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.iter().sum::<f64>() / a.len() as f64
}

/// Sample variance with denominator len - 1.
pub fn sample_variance(a: &[f64]) -> f64 {
    if a.len() < 2 {
        return 0.0;
    }
    let m = mean(a);
    a.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (a.len() - 1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digamma_known_values() {
        // psi(1) = -gamma, psi(0.5) = -gamma - 2 ln 2
        let euler = 0.577_215_664_901_532_9;
        assert!((digamma(1.0) + euler).abs() < 1e-13);
        assert!((digamma(0.5) + euler + 2.0 * core::f64::consts::LN_2).abs() < 1e-13);
        // recurrence psi(x+1) = psi(x) + 1/x
        for &x in &[0.3, 2.7, 11.0, 40.5] {
            assert!((digamma(x + 1.0) - digamma(x) - 1.0 / x).abs() < 1e-12);
        }
    }

    #[test]
    fn digamma_is_lgamma_derivative() {
        for &x in &[0.7, 1.9, 5.5, 27.98] {
            let h = 1e-5;
            let fd = (lgamma(x + h) - lgamma(x - h)) / (2.0 * h);
            assert!((fd - digamma(x)).abs() < 1e-8);
        }
    }

    #[test]
    fn mills_ratio_continuity_at_switch() {
        let a = norm_pdf(-8.0) / norm_cdf(-8.0);
        let b = mills_lower_tail(-8.0);
        assert!((a - b).abs() / a < 1e-10);
        let la = ln(norm_cdf(-8.0));
        let lb = log_norm_cdf(-8.0 - 1e-12);
        assert!((la - lb).abs() < 1e-9);
        // far tail: phi/Phi ~ -x
        assert!((inv_mills(-40.0) - 40.0).abs() / 40.0 < 1e-3);
    }

    #[test]
    fn softplus_and_sigmoid_are_stable() {
        assert_eq!(softplus(800.0), 800.0);
        assert!(softplus(-800.0) >= 0.0);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-16);
        assert!((sigmoid(3.0) + sigmoid(-3.0) - 1.0).abs() < 1e-15);
    }
}
