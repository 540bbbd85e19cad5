//! Matrix-free Krylov kernels: preconditioned CG with tridiagonal extraction, Lanczos
//! with full reorthogonalization, SLQ log-determinants and stochastic trace estimates.

mod lanczos;
mod pcg;
mod slq;
mod ste;
mod tridiag;

use alloc::vec::Vec;

use faer::MatRef;

pub use lanczos::{lanczos_partial, LanczosResult};
pub use pcg::{pcg_solve, CgCriterion, PcgOptions, PcgResult, DEFAULT_CG_TOL, DEFAULT_MAX_ITER};
pub use slq::slq_logdet;
pub use ste::{control_variate_estimate, ste_grad_logdet, TraceEstimate};
pub use tridiag::Tridiagonal;

/// Symmetric positive-definite operator `x -> A x`.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
}

/// Exact solves `r -> P^{-1} r` with a preconditioner.
pub trait PrecondSolve: Sync {
    fn dim(&self) -> usize;
    fn solve(&self, r: &[f64]) -> Vec<f64>;
}

/// Identity operator, usable as matrix and as preconditioner.
#[derive(Debug, Clone, Copy)]
pub struct Identity(pub usize);

impl LinearOperator for Identity {
    fn dim(&self) -> usize {
        self.0
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }
}

impl PrecondSolve for Identity {
    fn dim(&self) -> usize {
        self.0
    }
    fn solve(&self, r: &[f64]) -> Vec<f64> {
        r.to_vec()
    }
}

/// Dense symmetric matrix as an operator.
pub struct DenseOperator<'a>(pub MatRef<'a, f64>);

impl LinearOperator for DenseOperator<'_> {
    fn dim(&self) -> usize {
        self.0.nrows()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        crate::dense::mat_vec(self.0, x)
    }
}

/// Operator defined by a closure.
pub struct FnOperator<F> {
    pub n: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> Vec<f64> + Sync> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.n
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        (self.f)(x)
    }
}

impl<F: Fn(&[f64]) -> Vec<f64> + Sync> PrecondSolve for FnOperator<F> {
    fn dim(&self) -> usize {
        self.n
    }
    fn solve(&self, r: &[f64]) -> Vec<f64> {
        (self.f)(r)
    }
}
