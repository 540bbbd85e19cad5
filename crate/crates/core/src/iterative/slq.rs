use super::Tridiagonal;
use crate::error::{check_len, Result};

/// `(1/t) sum_i w_i e_1^T log(T_i) e_1` with `w_i = z_i^T P^{-1} z_i`, an estimate of
/// `log det(P^{-1/2} A P^{-T/2})`.
pub fn slq_logdet(weights: &[f64], tridiags: &[Tridiagonal]) -> Result<f64> {
    check_len(weights.len(), tridiags.len())?;
    if weights.is_empty() {
        return Ok(0.0);
    }
    let mut s = 0.0;
    for (w, t) in weights.iter().zip(tridiags) {
        if t.is_empty() {
            continue;
        }
        s += w * t.log_quadratic_e1()?;
    }
    Ok(s / weights.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::super::{pcg_solve, DenseOperator, FnOperator, PcgOptions};
    use super::*;
    use alloc::vec::Vec;
    use faer::Mat;

    #[test]
    fn exact_preconditioner_gives_zero() {
        let n = 100;
        let diag: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 * 0.1).collect();
        let a = Mat::from_fn(n, n, |i, j| if i == j { diag[i] } else { 0.0 });
        let p = FnOperator { n, f: |r: &[f64]| r.iter().zip(&diag).map(|(x, d)| x / d).collect() };
        let mut weights = Vec::new();
        let mut tris = Vec::new();
        for k in 0..10 {
            let mut rng = crate::rng::stream(4, k);
            let z: Vec<f64> = crate::rng::normals(&mut rng, n).iter().zip(&diag).map(|(g, d)| g * d.sqrt()).collect();
            let opts = PcgOptions { tol: 1e-10, max_iter: 100, capture_tridiag: true, ..Default::default() };
            let r = pcg_solve(&DenseOperator(a.as_ref()), &z, &p, &opts).unwrap();
            weights.push(r.initial_rz);
            tris.push(r.tridiag.unwrap());
        }
        assert!(slq_logdet(&weights, &tris).unwrap().abs() < 1e-6);
    }
}
