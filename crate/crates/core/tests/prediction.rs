use std::sync::Arc;

use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;
use vlgp_core::covariance::{CovarianceSpec, Locations, Smoothness};
use vlgp_core::laplace::{find_mode, BackendConfig, LaplaceState, NewtonConfig, Prior};
use vlgp_core::likelihood::Likelihood;
use vlgp_core::precond::{LanczosVariant, PreconditionerKind};
use vlgp_core::predict::{self, latent_var_exact, latent_var_lanczos, latent_var_sim};
use vlgp_core::rng;
use vlgp_core::vecchia::{prediction_blocks, PredictionBlocks, VecchiaStructure};

struct Fixture {
    structure: Arc<VecchiaStructure>,
    spec: CovarianceSpec,
    prior: Prior,
    state: LaplaceState,
    pred: Locations,
    blocks: PredictionBlocks,
    y: Vec<f64>,
}

// With full conditioning sets the Vecchia prior is the exact GP.
fn fixture(n: usize, np: usize, m: usize) -> Fixture {
    let mut r = rng::stream(11, 0);
    let coords: Vec<f64> = (0..2 * n).map(|_| rng::uniform(&mut r)).collect();
    let locs = Locations::new(coords, 2).unwrap();
    let pc: Vec<f64> = (0..2 * np).map(|_| rng::uniform(&mut r)).collect();
    let pred = Locations::new(pc, 2).unwrap();
    let structure = Arc::new(VecchiaStructure::new(&locs, m, 4));
    let spec = CovarianceSpec::new(Smoothness::ThreeHalves, 1.2, 0.3).unwrap();
    let prior = Prior::new(&structure, &spec, &BackendConfig::cholesky(), false).unwrap();
    let y: Vec<f64> = (0..n).map(|i| 0.2 + ((i * 37) % 11) as f64 / 4.0).collect();
    let lik = Likelihood::Gamma { shape: 2.0 };
    let state = find_mode(
        &prior,
        &lik,
        &y,
        &vec![0.0; n],
        &BackendConfig::cholesky(),
        &NewtonConfig { grad_tol: 1e-11, ..NewtonConfig::default() },
        None,
    )
    .unwrap();
    let blocks = prediction_blocks(&structure, &pred, &spec, (m + 1).min(n)).unwrap();
    Fixture { structure, spec, prior, state, pred, blocks, y }
}

fn cov(spec: &CovarianceSpec, a: &Locations, b: &Locations) -> Mat<f64> {
    Mat::from_fn(a.len(), b.len(), |i, j| {
        let d: f64 = a.point(i).iter().zip(b.point(j)).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let s = 3f64.sqrt() * d / spec.range();
        spec.variance() * (1.0 + s) * (-s).exp()
    })
}

// Sigma_pp - K_po (Sigma + W^{-1})^{-1} K_op and K_po Sigma^{-1} b*
fn gp_oracle(f: &Fixture) -> (Vec<f64>, Vec<f64>) {
    let train = f.structure.locations();
    let n = train.len();
    let s = cov(&f.spec, train, train);
    let k = cov(&f.spec, &f.pred, train);
    let mut sw = s.clone();
    for i in 0..n {
        sw[(i, i)] += 1.0 / f.state.w[i];
    }
    let inv = sw.llt(faer::Side::Lower).unwrap().inverse();
    let kinv = &k * &inv;
    // at the mode Sigma^{-1} b* equals the score of the likelihood
    let lik = Likelihood::Gamma { shape: 2.0 };
    let score: Vec<f64> = (0..n).map(|i| lik.derivs_one(f.y[i], f.state.mu[i]).0).collect();
    let mean = (0..f.pred.len()).map(|p| (0..n).map(|j| k[(p, j)] * score[j]).sum()).collect();
    let var = (0..f.pred.len())
        .map(|p| f.spec.variance() - (0..n).map(|j| kinv[(p, j)] * k[(p, j)]).sum::<f64>())
        .collect();
    (mean, var)
}

fn assert_close(a: &[f64], b: &[f64], tol: f64, what: &str) {
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        assert!((x - y).abs() <= tol * y.abs().max(1e-3), "{what} at {i}: {x} vs {y}");
    }
}

#[test]
fn exact_variances_match_the_gp_posterior_under_full_conditioning() {
    let f = fixture(70, 15, 69);
    let (mean, var) = gp_oracle(&f);
    let got_mean = predict::latent_mean(&f.state, &f.blocks, &vec![0.0; 15]).unwrap();
    assert_close(&got_mean, &mean, 1e-6, "mean");
    let (v, full) = latent_var_exact(&f.prior, &f.state, &f.blocks, true).unwrap();
    assert_close(&v, &var, 1e-6, "var");
    let full = full.unwrap();
    for p in 0..15 {
        assert!((full[(p, p)] - v[p]).abs() < 1e-12);
        for q in 0..15 {
            assert!((full[(p, q)] - full[(q, p)]).abs() < 1e-12);
        }
    }
}

#[test]
fn full_rank_lanczos_is_exact_for_all_variants() {
    let f = fixture(50, 12, 10);
    let (exact, _) = latent_var_exact(&f.prior, &f.state, &f.blocks, false).unwrap();
    for variant in [LanczosVariant::None, LanczosVariant::L1, LanczosVariant::L2] {
        let (v, rank, _) = latent_var_lanczos(&f.prior, &f.state, &f.blocks, 50, variant).unwrap();
        assert!(rank <= 50);
        assert_close(&v, &exact, 1e-6, variant.name());
    }
}

#[test]
fn lanczos_variances_never_exceed_prior_conditional_plus_exact_and_improve_with_rank() {
    let f = fixture(120, 20, 10);
    let (exact, _) = latent_var_exact(&f.prior, &f.state, &f.blocks, false).unwrap();
    let err = |k: usize| {
        let (v, _, _) = latent_var_lanczos(&f.prior, &f.state, &f.blocks, k, LanczosVariant::None).unwrap();
        // a Krylov projection underestimates the quadratic term
        for (a, b) in v.iter().zip(&exact) {
            assert!(*a <= b + 1e-10);
        }
        v.iter().zip(&exact).map(|(a, b)| (a - b).abs()).sum::<f64>()
    };
    assert!(err(40) <= err(5) + 1e-12);
}

#[test]
fn simulated_variances_are_unbiased() {
    let f = fixture(60, 10, 10);
    let (exact, _) = latent_var_exact(&f.prior, &f.state, &f.blocks, false).unwrap();
    let dp = f.blocks.prior_conditional_variance();
    let cfg = BackendConfig::iterative(PreconditionerKind::Vadu);
    let samples = 4000;
    let v = latent_var_sim(&f.prior, &f.state, &f.blocks, samples, 3, &cfg).unwrap();
    for p in 0..10 {
        // the sampled part is a mean of squared normals with variance q, so sd = q sqrt(2/s)
        let q = exact[p] - dp[p];
        let sd = q * (2.0 / samples as f64).sqrt();
        assert!((v[p] - exact[p]).abs() < 5.0 * sd + 1e-9, "point {p}: {} vs {}", v[p], exact[p]);
    }
    let again = latent_var_sim(&f.prior, &f.state, &f.blocks, samples, 3, &cfg).unwrap();
    assert_eq!(v, again);
}

#[test]
fn gamma_response_moments_match_lognormal_mixture() {
    let lik = Likelihood::Gamma { shape: 3.0 };
    let closed = predict::response_moments(&[0.4], &[0.3], &lik, predict::ResponseMethod::ClosedForm).unwrap();
    let sims = predict::response_moments(
        &[0.4],
        &[0.3],
        &lik,
        predict::ResponseMethod::Simulation { samples: 200_000, seed: 9 },
    )
    .unwrap();
    assert!((closed.mean[0] - sims.mean[0]).abs() / closed.mean[0] < 0.01);
    assert!((closed.var[0] - sims.var[0]).abs() / closed.var[0] < 0.03);
    let m = (0.4f64 + 0.15).exp();
    assert!((closed.mean[0] - m).abs() < 1e-12);
}
