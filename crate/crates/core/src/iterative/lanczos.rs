use alloc::vec::Vec;

use super::{LinearOperator, Tridiagonal};
use crate::error::{check_len, Error, Result};
use crate::math::{axpy, dot, norm2};

#[derive(Debug, Clone, PartialEq)]
pub struct LanczosResult {
    /// Orthonormal Lanczos vectors, one per achieved step.
    pub q: Vec<Vec<f64>>,
    pub t: Tridiagonal,
    /// True when an invariant subspace was found before `k` steps.
    pub breakdown: bool,
}

impl LanczosResult {
    pub fn rank(&self) -> usize {
        self.q.len()
    }
}

const BREAKDOWN_TOL: f64 = 1e-12;

/// `k` steps of Lanczos from `start` with full reorthogonalization.
pub fn lanczos_partial<A: LinearOperator + ?Sized>(a: &A, start: &[f64], k: usize) -> Result<LanczosResult> {
    let n = a.dim();
    check_len(n, start.len())?;
    if k == 0 || k > n {
        return Err(Error::Rank { rank: k, n });
    }
    let s = norm2(start);
    if s == 0.0 {
        return Err(Error::InvalidParameter("Lanczos start vector is zero".into()));
    }
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(k);
    q.push(start.iter().map(|v| v / s).collect());
    let mut diag = Vec::with_capacity(k);
    let mut off = Vec::with_capacity(k);
    let mut scale = 0.0f64;
    let mut breakdown = false;
    for j in 0..k {
        let mut w = a.apply(&q[j]);
        let alpha = dot(&q[j], &w);
        diag.push(alpha);
        scale = scale.max(alpha.abs());
        if j + 1 == k {
            break;
        }
        // two passes of classical Gram-Schmidt against every previous vector
        for _ in 0..2 {
            for qi in &q {
                let c = dot(qi, &w);
                axpy(-c, qi, &mut w);
            }
        }
        let beta = norm2(&w);
        if beta <= BREAKDOWN_TOL * scale.max(1.0) {
            breakdown = true;
            break;
        }
        off.push(beta);
        scale = scale.max(beta);
        q.push(w.iter().map(|v| v / beta).collect());
    }
    Ok(LanczosResult { q, t: Tridiagonal::new(diag, off), breakdown })
}
