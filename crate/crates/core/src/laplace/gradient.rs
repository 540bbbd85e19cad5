use alloc::vec::Vec;

use faer::Mat;

use super::eval::{Cache, Evaluation};
use super::mode::LatentSolver;
use super::{BackendConfig, Design, LaplaceState, NewtonConfig, Prior};
use crate::covariance::CovParam;
use crate::dense;
use crate::error::{check_len, Error, Result};
use crate::iterative::control_variate_estimate;
use crate::likelihood::Likelihood;
use crate::math::dot;
use crate::precond::{covariance_low_rank_derivative, PreconditionerKind, System};
use crate::vecchia::{VecchiaFactor, VecchiaGradient};

/// Gradient of the negative log-marginal likelihood on the natural parameter scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    /// `d/d sigma^2`, `d/d rho`
    pub cov: [f64; 2],
    pub beta: Vec<f64>,
    /// Auxiliary likelihood parameters.
    pub aux: Vec<f64>,
    /// Derivative in the fixed effects `F` (ordered coordinates).
    pub fixed: Vec<f64>,
    /// `d log det(Sigma~ W + I) / d theta` at fixed `mu`.
    pub logdet_cov: [f64; 2],
    /// Standard errors of the stochastic part of `logdet_cov` (zero when exact).
    pub logdet_cov_se: [f64; 2],
}

/// `d log det(Sigma~ W + I)` in `mu`, the covariance parameters and the auxiliary
/// parameters, with standard errors for the covariance part.
struct LogdetDerivs {
    mu: Vec<f64>,
    cov: [f64; 2],
    cov_se: [f64; 2],
    aux: Vec<f64>,
}

/// Sparse row `r` of `B` including its unit diagonal.
fn b_row(factor: &VecchiaFactor, r: usize) -> (Vec<usize>, Vec<f64>) {
    let (cols, vals) = factor.b().row(r);
    let mut c = cols.to_vec();
    let mut v = vals.to_vec();
    c.push(r);
    v.push(1.0);
    (c, v)
}

fn dense_derivs(
    factor: &VecchiaFactor,
    grads: &[VecchiaGradient; 2],
    ainv: &Mat<f64>,
    dw: &[f64],
    dw_aux: &[Vec<f64>],
) -> LogdetDerivs {
    let n = factor.n();
    let d = factor.d();
    let mu = (0..n).map(|j| ainv[(j, j)] * dw[j]).collect();
    let mut cov = [0.0; 2];
    for (k, g) in grads.iter().enumerate() {
        let rows = crate::par::map(n, |r| {
            let (bc, bv) = b_row(factor, r);
            let (dc, dv) = g.db.row(r);
            // B_r A^{-1} B_r^T and dB_r A^{-1} B_r^T
            let mut bab = 0.0;
            let mut dab = 0.0;
            for (&i, &bi) in bc.iter().zip(&bv) {
                let mut s = 0.0;
                for (&j, &bj) in bc.iter().zip(&bv) {
                    s += ainv[(i, j)] * bj;
                }
                bab += bi * s;
            }
            for (&i, &di) in dc.iter().zip(dv) {
                let mut s = 0.0;
                for (&j, &bj) in bc.iter().zip(&bv) {
                    s += ainv[(i, j)] * bj;
                }
                dab += di * s;
            }
            g.dd[r] / d[r] + 2.0 * dab / d[r] - g.dd[r] / (d[r] * d[r]) * bab
        });
        cov[k] = rows.iter().sum();
    }
    let aux = dw_aux.iter().map(|dwa| (0..n).map(|j| ainv[(j, j)] * dwa[j]).sum()).collect();
    LogdetDerivs { mu, cov, cov_se: [0.0; 2], aux }
}

/// `(dB w)^T W (B w)` helper pieces for the VADU control variate.
fn vadu_theta_cv(factor: &VecchiaFactor, g: &VecchiaGradient, w: &[f64], wv: &[f64]) -> Result<f64> {
    let bw = factor.b().mul(wv);
    let dbw = g.db.mul(wv);
    let dq = factor.apply_precision_derivative(g, wv)?;
    let mut cross = 0.0;
    for i in 0..w.len() {
        cross += dbw[i] * w[i] * bw[i];
    }
    Ok(dot(wv, &dq) + 2.0 * cross)
}

#[allow(clippy::too_many_arguments)]
fn iterative_derivs(
    prior: &Prior,
    grads: &[VecchiaGradient; 2],
    w: &[f64],
    dw: &[f64],
    dw_aux: &[Vec<f64>],
    system: System,
    precond: &crate::precond::Preconditioner,
    solves: &[Vec<f64>],
    psolves: &[Vec<f64>],
    cfg: &BackendConfig,
) -> Result<LogdetDerivs> {
    let factor = &prior.factor;
    let n = factor.n();
    let d = factor.d();
    let t = solves.len();
    let use_cv = cfg.control_variates;
    let kind = cfg.preconditioner;
    let mut mu = alloc::vec![0.0; n];
    let mut cov = [0.0; 2];
    let mut cov_se = [0.0; 2];
    let mut aux = alloc::vec![0.0; dw_aux.len()];
    match system {
        System::Precision => {
            let vadu = kind == PreconditionerKind::Vadu;
            let s_diag: Vec<f64> = d.iter().zip(w).map(|(di, wi)| wi + 1.0 / di).collect();
            let bw: Vec<Vec<f64>> = if vadu {
                crate::par::map(t, |i| factor.b().mul(&psolves[i]))
            } else {
                Vec::new()
            };
            // mu: per-coordinate estimates
            let mut h = alloc::vec![0.0; t];
            let mut r = alloc::vec![0.0; t];
            for j in 0..n {
                for i in 0..t {
                    h[i] = solves[i][j] * psolves[i][j];
                    if vadu {
                        r[i] = bw[i][j] * bw[i][j];
                    }
                }
                let est = control_variate_estimate(&h, &r, 1.0 / s_diag[j], vadu && use_cv)?;
                mu[j] = dw[j] * est.value;
            }
            for (k, g) in grads.iter().enumerate() {
                let pairs = crate::par::try_map(t, |i| {
                    let dq = factor.apply_precision_derivative(g, &psolves[i])?;
                    let hi = dot(&solves[i], &dq);
                    let ri = if vadu { vadu_theta_cv(factor, g, w, &psolves[i])? } else { 0.0 };
                    Ok((hi, ri))
                })?;
                let (hs, rs): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
                let tr_p: f64 = (0..n).map(|i| -(g.dd[i] / (d[i] * d[i])) / s_diag[i]).sum();
                let est = control_variate_estimate(&hs, &rs, tr_p, vadu && use_cv)?;
                let exact: f64 = g.dd.iter().zip(d).map(|(dd, di)| dd / di).sum();
                cov[k] = exact + est.value;
                cov_se[k] = est.std_error;
            }
            for (a, dwa) in dw_aux.iter().enumerate() {
                let mut hs = Vec::with_capacity(t);
                let mut rs = Vec::with_capacity(t);
                for i in 0..t {
                    let mut hi = 0.0;
                    let mut ri = 0.0;
                    for j in 0..n {
                        hi += solves[i][j] * dwa[j] * psolves[i][j];
                        if vadu {
                            ri += bw[i][j] * bw[i][j] * dwa[j];
                        }
                    }
                    hs.push(hi);
                    rs.push(ri);
                }
                let tr_p: f64 = (0..n).map(|j| dwa[j] / s_diag[j]).sum();
                aux[a] = control_variate_estimate(&hs, &rs, tr_p, vadu && use_cv)?.value;
            }
        }
        System::Covariance => {
            let lrac = kind == PreconditionerKind::Lrac;
            let lowrank = if lrac {
                Some(prior.lowrank.as_ref().ok_or_else(|| {
                    Error::Capability("LRAC gradient needs the covariance low-rank factor".into())
                })?)
            } else {
                None
            };
            // (L M^{-1} L^T)_jj and M^{-1}
            let (lml, minv) = match lowrank {
                Some(pc) => {
                    let minv = precond
                        .capacitance_inverse()
                        .ok_or_else(|| Error::Capability("LRAC preconditioner expected".into()))?;
                    let l = &pc.factor;
                    let k = l.ncols();
                    let diag = crate::par::map(n, |j| {
                        let mut s = 0.0;
                        for a in 0..k {
                            let mut u = 0.0;
                            for b in 0..k {
                                u += minv[(a, b)] * l[(j, b)];
                            }
                            s += l[(j, a)] * u;
                        }
                        s
                    });
                    (diag, Some(minv))
                }
                None => (Vec::new(), None),
            };
            let mut h = alloc::vec![0.0; t];
            let mut r = alloc::vec![0.0; t];
            for j in 0..n {
                let inv_w2 = 1.0 / (w[j] * w[j]);
                for i in 0..t {
                    h[i] = -solves[i][j] * psolves[i][j] * inv_w2;
                    if lrac {
                        r[i] = -psolves[i][j] * psolves[i][j] * inv_w2;
                    }
                }
                let tr_p = if lrac { lml[j] - 1.0 / w[j] } else { 0.0 };
                let est = control_variate_estimate(&h, &r, tr_p, lrac && use_cv)?;
                mu[j] = dw[j] / w[j] + dw[j] * est.value;
            }
            let st_s = crate::par::try_map(t, |i| factor.apply_sigma_tilde(&solves[i]))?;
            let st_w = crate::par::try_map(t, |i| factor.apply_sigma_tilde(&psolves[i]))?;
            for (k, g) in grads.iter().enumerate() {
                let hs = crate::par::try_map(t, |i| {
                    Ok(-dot(&st_w[i], &factor.apply_precision_derivative(g, &st_s[i])?))
                })?;
                let (rs, tr_p) = match (lowrank, &minv) {
                    (Some(pc), Some(minv)) => {
                        let spec = factor.spec();
                        let locs = factor.structure().locations();
                        let dl = covariance_low_rank_derivative(pc, spec, locs, g.param)?;
                        let l = &pc.factor;
                        let rs = crate::par::map(t, |i| {
                            let a = dense::mat_t_vec(dl.as_ref(), &psolves[i]);
                            let b = dense::mat_t_vec(l.as_ref(), &psolves[i]);
                            2.0 * dot(&a, &b)
                        });
                        // tr(M^{-1} L^T W dL)
                        let kk = l.ncols();
                        let lwdl = Mat::from_fn(kk, kk, |a, b| {
                            let mut s = 0.0;
                            for j in 0..n {
                                s += l[(j, a)] * w[j] * dl[(j, b)];
                            }
                            s
                        });
                        let mut tr = 0.0;
                        for a in 0..kk {
                            for b in 0..kk {
                                tr += minv[(a, b)] * lwdl[(b, a)];
                            }
                        }
                        (rs, 2.0 * tr)
                    }
                    _ => (alloc::vec![0.0; t], 0.0),
                };
                let est = control_variate_estimate(&hs, &rs, tr_p, lrac && use_cv)?;
                cov[k] = est.value;
                cov_se[k] = est.std_error;
            }
            for (a, dwa) in dw_aux.iter().enumerate() {
                let exact: f64 = (0..n).map(|j| dwa[j] / w[j]).sum();
                let mut hs = Vec::with_capacity(t);
                let mut rs = Vec::with_capacity(t);
                for i in 0..t {
                    let mut hi = 0.0;
                    let mut ri = 0.0;
                    for j in 0..n {
                        let c = dwa[j] / (w[j] * w[j]);
                        hi -= solves[i][j] * psolves[i][j] * c;
                        ri -= psolves[i][j] * psolves[i][j] * c;
                    }
                    hs.push(hi);
                    rs.push(ri);
                }
                let tr_p = if lrac { (0..n).map(|j| dwa[j] * (lml[j] - 1.0 / w[j])).sum() } else { 0.0 };
                aux[a] = exact + control_variate_estimate(&hs, &rs, tr_p, lrac && use_cv)?.value;
            }
        }
    }
    Ok(LogdetDerivs { mu, cov, cov_se, aux })
}

/// Gradient of the negative log-marginal likelihood at the mode, using the probes and
/// solves cached in `eval`. `prior` must carry the factor derivatives.
pub fn gradient(
    prior: &Prior,
    lik: &Likelihood,
    y: &[f64],
    design: Option<&Design>,
    state: &LaplaceState,
    eval: &Evaluation,
    cfg: &BackendConfig,
) -> Result<Gradient> {
    let factor = &prior.factor;
    let n = factor.n();
    check_len(n, y.len())?;
    check_len(n, state.mu.len())?;
    if let Some(x) = design {
        check_len(n, x.nrows())?;
    }
    let grads = prior
        .grads
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("prior was built without factor derivatives".into()))?;
    let der = lik.derivs(y, &state.mu)?;
    let w = der.w();
    let dw: Vec<f64> = der.d3.iter().map(|v| -v).collect();
    let aux_d = lik.aux_derivs(y, &state.mu);
    let dw_aux: Vec<Vec<f64>> = aux_d.d3_mu2.iter().map(|v| v.iter().map(|x| -x).collect()).collect();

    let tol = cfg.cg_tol.min(NewtonConfig::default().cg_tol_cap);
    let (ld, v) = match &eval.cache {
        Cache::Dense { llt } => {
            let ainv = dense::llt_inverse(llt);
            let ld = dense_derivs(factor, grads, &ainv, &dw, &dw_aux);
            let g_mu: Vec<f64> = ld.mu.iter().map(|x| 0.5 * x).collect();
            let v = dense::mat_vec(ainv.as_ref(), &g_mu);
            (ld, v)
        }
        Cache::Iterative { system, precond, solves, psolves } => {
            let ld = iterative_derivs(prior, grads, &w, &dw, &dw_aux, *system, precond, solves, psolves, cfg)?;
            let solver = LatentSolver::Iterative {
                factor,
                w: w.clone(),
                system: *system,
                precond: precond.clone(),
                max_iter: cfg.cg_max_iter,
                criterion: cfg.cg_criterion,
            };
            let g_mu: Vec<f64> = ld.mu.iter().map(|x| 0.5 * x).collect();
            let (v, _) = solver.solve_relative(&g_mu, tol)?;
            (ld, v)
        }
    };

    let b = &state.mode;
    let mut cov = [0.0; 2];
    for (k, g) in grads.iter().enumerate() {
        debug_assert_eq!(g.param, CovParam::ALL[k]);
        let q = factor.apply_precision_derivative(g, b)?;
        cov[k] = 0.5 * dot(b, &q) + 0.5 * ld.cov[k] - dot(&v, &q);
    }
    let fixed: Vec<f64> = (0..n).map(|i| -der.d1[i] + 0.5 * ld.mu[i] - w[i] * v[i]).collect();
    let beta = match design {
        Some(x) => x.t_mul(&fixed)?,
        None => Vec::new(),
    };
    let aux = (0..lik.num_aux())
        .map(|a| -aux_d.dlogp[a] + 0.5 * ld.aux[a] + dot(&v, &aux_d.d2_mu[a]))
        .collect();
    Ok(Gradient {
        cov,
        beta,
        aux,
        fixed,
        logdet_cov: ld.cov,
        logdet_cov_se: [ld.cov_se[0], ld.cov_se[1]],
    })
}
