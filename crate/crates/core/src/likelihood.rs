//! Observation models `p(y | mu, xi)` and their derivatives in `mu` and `xi`.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::Distribution;

use crate::error::{check_len, Error, Result};
use crate::math::{self, exp, ln};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "family", rename_all = "kebab-case"))]
pub enum Likelihood {
    BernoulliLogit,
    BernoulliProbit,
    /// `y ~ Gamma(shape, rate = shape * exp(-mu))`, so that `E[y] = exp(mu)`.
    Gamma { shape: f64 },
}

/// Log-density sum and per-observation derivatives in `mu` up to third order.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivs {
    pub logp: f64,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub d3: Vec<f64>,
}

impl Derivs {
    /// Negative second derivative, i.e. the diagonal of `W`.
    pub fn w(&self) -> Vec<f64> {
        self.d2.iter().map(|v| -v).collect()
    }
}

/// Derivatives involving the auxiliary parameters; one entry per parameter.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AuxDerivs {
    pub dlogp: Vec<f64>,
    pub d2_mu: Vec<Vec<f64>>,
    pub d3_mu2: Vec<Vec<f64>>,
}

impl Likelihood {
    pub fn from_name(name: &str, shape: Option<f64>) -> Result<Self> {
        let lik = match name {
            "bernoulli-logit" => Self::BernoulliLogit,
            "bernoulli-probit" => Self::BernoulliProbit,
            "gamma" => Self::Gamma { shape: shape.unwrap_or(1.0) },
            other => return Err(Error::InvalidParameter(format!("unknown likelihood '{other}'"))),
        };
        lik.check_params()?;
        Ok(lik)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::BernoulliLogit => "bernoulli-logit",
            Self::BernoulliProbit => "bernoulli-probit",
            Self::Gamma { .. } => "gamma",
        }
    }

    fn check_params(&self) -> Result<()> {
        if let Self::Gamma { shape } = self {
            if !(*shape > 0.0 && shape.is_finite()) {
                return Err(Error::InvalidParameter(format!("gamma shape must be positive, got {shape}")));
            }
        }
        Ok(())
    }

    pub fn num_aux(&self) -> usize {
        match self {
            Self::Gamma { .. } => 1,
            _ => 0,
        }
    }

    pub fn aux(&self) -> Vec<f64> {
        match self {
            Self::Gamma { shape } => alloc::vec![*shape],
            _ => Vec::new(),
        }
    }

    pub fn with_aux(&self, aux: &[f64]) -> Result<Self> {
        check_len(self.num_aux(), aux.len())?;
        let lik = match self {
            Self::Gamma { .. } => Self::Gamma { shape: aux[0] },
            other => *other,
        };
        lik.check_params()?;
        Ok(lik)
    }

    pub fn is_bernoulli(&self) -> bool {
        matches!(self, Self::BernoulliLogit | Self::BernoulliProbit)
    }

    pub fn validate(&self, y: &[f64]) -> Result<()> {
        let bad: Vec<usize> = y
            .iter()
            .enumerate()
            .filter(|(_, &v)| match self {
                Self::BernoulliLogit | Self::BernoulliProbit => v != 0.0 && v != 1.0,
                Self::Gamma { .. } => !(v > 0.0 && v.is_finite()),
            })
            .map(|(i, _)| i)
            .collect();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Support(bad))
        }
    }

    /// `log p(y | mu)` for one observation, including all normalizing constants.
    pub fn log_density(&self, y: f64, mu: f64) -> f64 {
        match *self {
            Self::BernoulliLogit => y * mu - math::softplus(mu),
            Self::BernoulliProbit => math::log_norm_cdf((2.0 * y - 1.0) * mu),
            Self::Gamma { shape: a } => {
                a * ln(a) - a * mu - math::lgamma(a) + (a - 1.0) * ln(y) - a * y * exp(-mu)
            }
        }
    }

    pub fn log_density_sum(&self, y: &[f64], mu: &[f64]) -> f64 {
        y.iter().zip(mu).map(|(&yi, &mi)| self.log_density(yi, mi)).sum()
    }

    /// First three `mu`-derivatives of `log p` for one observation.
    pub fn derivs_one(&self, y: f64, mu: f64) -> (f64, f64, f64) {
        match *self {
            Self::BernoulliLogit => {
                let p = math::sigmoid(mu);
                let w = p * (1.0 - p);
                (y - p, -w, -w * (1.0 - 2.0 * p))
            }
            Self::BernoulliProbit => {
                let s = 2.0 * y - 1.0;
                let x = s * mu;
                let lam = math::inv_mills(x);
                let d2 = -lam * (x + lam);
                let d3 = s * lam * ((x + lam) * (x + 2.0 * lam) - 1.0);
                (s * lam, d2, d3)
            }
            Self::Gamma { shape: a } => {
                let t = a * y * exp(-mu);
                (t - a, -t, t)
            }
        }
    }

    pub fn derivs(&self, y: &[f64], mu: &[f64]) -> Result<Derivs> {
        check_len(y.len(), mu.len())?;
        self.validate(y)?;
        let n = y.len();
        let (mut d1, mut d2, mut d3) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        let mut logp = 0.0;
        for (&yi, &mi) in y.iter().zip(mu) {
            logp += self.log_density(yi, mi);
            let (a, b, c) = self.derivs_one(yi, mi);
            d1.push(a);
            d2.push(b);
            d3.push(c);
        }
        Ok(Derivs { logp, d1, d2, d3 })
    }

    /// Derivatives in the auxiliary parameters (natural scale); empty without them.
    pub fn aux_derivs(&self, y: &[f64], mu: &[f64]) -> AuxDerivs {
        match *self {
            Self::Gamma { shape: a } => {
                let mut dl = 0.0;
                let mut d2 = Vec::with_capacity(y.len());
                let mut d3 = Vec::with_capacity(y.len());
                let base = ln(a) + 1.0 - math::digamma(a);
                for (&yi, &mi) in y.iter().zip(mu) {
                    let r = yi * exp(-mi);
                    dl += base - mi + ln(yi) - r;
                    d2.push(r - 1.0);
                    d3.push(-r);
                }
                AuxDerivs { dlogp: alloc::vec![dl], d2_mu: alloc::vec![d2], d3_mu2: alloc::vec![d3] }
            }
            _ => AuxDerivs::default(),
        }
    }

    /// Mean of `y` given `mu`.
    pub fn response_mean(&self, mu: f64) -> f64 {
        match self {
            Self::BernoulliLogit => math::sigmoid(mu),
            Self::BernoulliProbit => math::norm_cdf(mu),
            Self::Gamma { .. } => exp(mu),
        }
    }

    pub fn sample_one<R: Rng>(&self, mu: f64, rng: &mut R) -> f64 {
        match *self {
            Self::BernoulliLogit | Self::BernoulliProbit => {
                if rng.random::<f64>() < self.response_mean(mu) {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Gamma { shape } => {
                let g = rand_distr::Gamma::new(shape, exp(mu) / shape).expect("valid gamma parameters");
                g.sample(rng).max(f64::MIN_POSITIVE)
            }
        }
    }

    /// Independent draws of `y_i | mu_i`.
    pub fn sample(&self, mu: &[f64], seed: u64) -> Vec<f64> {
        let mut rng = crate::rng::stream(seed, 0x7e5);
        mu.iter().map(|&m| self.sample_one(m, &mut rng)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn logit_curvature() {
        let l = Likelihood::BernoulliLogit;
        let d = l.derivs(&[1.0], &[0.0]).unwrap();
        assert_eq!(d.w()[0], 0.25);
        for mu in [-5.0, -1.0, 0.3, 2.0, 9.0] {
            assert!(-l.derivs_one(0.0, mu).1 <= 0.25);
        }
    }

    #[test]
    fn probit_score_at_zero() {
        let l = Likelihood::BernoulliProbit;
        let (d1, _, _) = l.derivs_one(1.0, 0.0);
        assert!((d1 - 2.0 * math::norm_pdf(0.0)).abs() < 1e-15);
        assert!((d1 - 0.797_885).abs() < 1e-6);
    }

    #[test]
    fn gamma_closed_forms() {
        let l = Likelihood::Gamma { shape: 2.5 };
        let (y, mu) = (1.7, 0.4);
        let (d1, d2, d3) = l.derivs_one(y, mu);
        let t = 2.5 * y * exp(-mu);
        assert_eq!((d1, d2, d3), (t - 2.5, -t, t));
        let ax = l.aux_derivs(&[y], &[mu]);
        assert!((ax.d2_mu[0][0] - (-1.0 + y * exp(-mu))).abs() < 1e-15);
        assert!((ax.d3_mu2[0][0] + y * exp(-mu)).abs() < 1e-15);
        let at_mean = l.aux_derivs(&[exp(0.8)], &[0.8]);
        assert!(at_mean.d2_mu[0][0].abs() < 1e-15);
    }

    #[test]
    fn unit_exponential_at_its_mean() {
        let l = Likelihood::Gamma { shape: 1.0 };
        let mu = [0.2, -0.7, 1.3];
        let y: Vec<f64> = mu.iter().map(|&m| exp(m)).collect();
        let logp = l.log_density_sum(&y, &mu);
        // -log p = sum(mu) + sum(y e^{-mu}) = sum(mu) + n; the -n is the density at the mean
        assert!((-logp - (mu.iter().sum::<f64>() + 3.0)).abs() < 1e-12);
    }

    #[test]
    fn support_violations_are_listed() {
        let l = Likelihood::BernoulliLogit;
        assert!(matches!(l.validate(&[0.0, 0.5, 1.0, 2.0]), Err(Error::Support(v)) if v == vec![1, 3]));
        let g = Likelihood::Gamma { shape: 1.0 };
        assert!(matches!(g.derivs(&[1.0, 0.0], &[0.0, 0.0]), Err(Error::Support(v)) if v == vec![1]));
        assert!(Likelihood::from_name("poisson", None).is_err());
        assert!(Likelihood::from_name("gamma", Some(-1.0)).is_err());
    }

    #[test]
    fn sampling() {
        let l = Likelihood::BernoulliLogit;
        assert!(l.sample(&[50.0; 100], 1).iter().all(|&v| v == 1.0));
        assert_eq!(l.sample(&[0.1; 20], 4), l.sample(&[0.1; 20], 4));
        let g = Likelihood::Gamma { shape: 2.0 };
        let n = 100_000;
        let ys = g.sample(&vec![0.3; n], 9);
        let m = math::mean(&ys);
        let se = math::sqrt(math::sample_variance(&ys) / n as f64);
        assert!((m - exp(0.3)).abs() < 3.0 * se, "mean {m}");
    }

    fn fd_check(l: Likelihood, y: f64, mu: f64) -> core::result::Result<(), TestCaseError> {
        let h = 1e-6;
        let f = |m: f64| l.log_density(y, m);
        let g = |m: f64| l.derivs_one(y, m);
        let (d1, d2, d3) = g(mu);
        let fd1 = (f(mu + h) - f(mu - h)) / (2.0 * h);
        let fd2 = (g(mu + h).0 - g(mu - h).0) / (2.0 * h);
        // d2 carries cancellation in the probit tail, so difference it on a wider step
        let h3 = 1e-4;
        let fd3 = (g(mu + h3).1 - g(mu - h3).1) / (2.0 * h3);
        prop_assert!((fd1 - d1).abs() <= 1e-5 * d1.abs().max(1e-2), "d1 {} {}", fd1, d1);
        prop_assert!((fd2 - d2).abs() <= 1e-5 * d2.abs().max(1e-2), "d2 {} {}", fd2, d2);
        prop_assert!((fd3 - d3).abs() <= 1e-5 * d3.abs().max(1e-2), "d3 {} {}", fd3, d3);
        prop_assert!(d2 <= 0.0);
        Ok(())
    }

    proptest! {
        #[test]
        fn logit_derivatives(y in 0u8..2, mu in -8.0f64..8.0) {
            fd_check(Likelihood::BernoulliLogit, y as f64, mu)?;
        }

        #[test]
        fn probit_derivatives(y in 0u8..2, mu in -12.0f64..12.0) {
            fd_check(Likelihood::BernoulliProbit, y as f64, mu)?;
        }

        #[test]
        fn gamma_derivatives(y in 0.01f64..20.0, mu in -3.0f64..3.0, a in 0.2f64..40.0) {
            let l = Likelihood::Gamma { shape: a };
            fd_check(l, y, mu)?;
            prop_assert!(l.derivs_one(y, mu).1 < 0.0);
            let h = 1e-6 * a;
            let la = |aa: f64| Likelihood::Gamma { shape: aa };
            let ax = l.aux_derivs(&[y], &[mu]);
            let fd = (la(a + h).log_density(y, mu) - la(a - h).log_density(y, mu)) / (2.0 * h);
            prop_assert!((fd - ax.dlogp[0]).abs() <= 1e-5 * fd.abs().max(1e-2));
            let fd2 = (la(a + h).derivs_one(y, mu).0 - la(a - h).derivs_one(y, mu).0) / (2.0 * h);
            prop_assert!((fd2 - ax.d2_mu[0][0]).abs() <= 1e-5 * fd2.abs().max(1e-2));
            let fd3 = (la(a + h).derivs_one(y, mu).1 - la(a - h).derivs_one(y, mu).1) / (2.0 * h);
            prop_assert!((fd3 - ax.d3_mu2[0][0]).abs() <= 1e-5 * fd3.abs().max(1e-2));
        }
    }
}
