//! Preconditioners for the Newton/Laplace systems `W + B^T D^{-1} B` and
//! `Sigma~ + W^{-1}`, with exact solves, log-determinants and sampling.

mod pivoted_cholesky;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use faer::linalg::solvers::Llt;
use faer::Mat;

pub use pivoted_cholesky::{
    covariance_low_rank, covariance_low_rank_derivative, pivoted_cholesky, precision_diagonal,
    CovarianceAccessor, PivotedCholesky, PrecisionAccessor, SymmetricAccessor,
};

use crate::dense;
use crate::error::{check_len, Error, Result};
use crate::iterative::PrecondSolve;
use crate::math::{self, ln, sqrt};
use crate::vecchia::{SparseLower, SparseRows, VecchiaFactor};

/// Which of the two equivalent linear systems a preconditioner targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum System {
    /// `W + Sigma~^{-1}`
    Precision,
    /// `Sigma~ + W^{-1}`
    Covariance,
}

/// Preconditioners selectable for likelihood evaluation and gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum PreconditionerKind {
    Vadu,
    Lva,
    Lrac,
    #[cfg_attr(feature = "serde", serde(rename = "diag"))]
    Diagonal,
    #[cfg_attr(feature = "serde", serde(rename = "pchol-precision"))]
    PivotedCholeskyPrecision,
    #[cfg_attr(feature = "serde", serde(rename = "rowsel"))]
    RowSelection,
    Identity,
}

impl PreconditionerKind {
    pub const ALL: [PreconditionerKind; 7] = [
        Self::Vadu,
        Self::Lva,
        Self::Lrac,
        Self::Diagonal,
        Self::PivotedCholeskyPrecision,
        Self::RowSelection,
        Self::Identity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Vadu => "vadu",
            Self::Lva => "lva",
            Self::Lrac => "lrac",
            Self::Diagonal => "diag",
            Self::PivotedCholeskyPrecision => "pchol-precision",
            Self::RowSelection => "rowsel",
            Self::Identity => "identity",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown preconditioner '{name}'")))
    }

    /// System the preconditioner approximates; identity works with either.
    pub fn natural_system(self) -> System {
        match self {
            Self::Lrac => System::Covariance,
            _ => System::Precision,
        }
    }

    pub fn is_low_rank(self) -> bool {
        matches!(self, Self::Lrac | Self::PivotedCholeskyPrecision | Self::RowSelection)
    }
}

/// Preconditioning used for Lanczos predictive variances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum LanczosVariant {
    None,
    L1,
    L2,
}

impl LanczosVariant {
    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::L1 => "l1",
            Self::L2 => "l2",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "none" => Ok(Self::None),
            "l1" => Ok(Self::L1),
            "l2" => Ok(Self::L2),
            other => Err(Error::InvalidParameter(format!("unknown Lanczos variant '{other}'"))),
        }
    }
}

/// Default rank for the low-rank preconditioners: `200 min(1, n/10^4)` clamped to `[20, 200]`
/// and to `n`.
pub fn default_rank(n: usize) -> usize {
    let k = libm::round(200.0 * (n as f64 / 1e4).min(1.0)) as usize;
    k.clamp(20, 200).min(n)
}

/// Variant tag of a built preconditioner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Vadu,
    Lva,
    Lrac,
    P1,
    P2,
    P3,
    L1,
    L2,
    Identity,
}

#[derive(Debug, Clone)]
enum LowRankFactor {
    Dense(Mat<f64>),
    /// Rows of `U^T`.
    SparseT(SparseRows),
}

impl LowRankFactor {
    fn rank(&self) -> usize {
        match self {
            Self::Dense(m) => m.ncols(),
            Self::SparseT(s) => s.nrows(),
        }
    }

    fn t_mul(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Self::Dense(m) => dense::mat_t_vec(m.as_ref(), x),
            Self::SparseT(s) => s.mul(x),
        }
    }

    fn mul(&self, y: &[f64]) -> Vec<f64> {
        match self {
            Self::Dense(m) => dense::mat_vec(m.as_ref(), y),
            Self::SparseT(s) => s.mul_t(y),
        }
    }

    /// `U^T diag(scale) U`
    fn gram(&self, scale: &[f64]) -> Mat<f64> {
        match self {
            Self::Dense(m) => {
                let scaled = Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * scale[i]);
                m.transpose() * scaled
            }
            Self::SparseT(s) => {
                let k = s.nrows();
                let mut g = Mat::zeros(k, k);
                let mut buf = alloc::vec![0.0; s.ncols()];
                for a in 0..k {
                    let (ca, va) = s.row(a);
                    for (&j, &v) in ca.iter().zip(va) {
                        buf[j] = v * scale[j];
                    }
                    for b in 0..=a {
                        let (cb, vb) = s.row(b);
                        let dotv: f64 = cb.iter().zip(vb).map(|(&j, &v)| buf[j] * v).sum();
                        g[(a, b)] = dotv;
                        g[(b, a)] = dotv;
                    }
                    for &j in ca {
                        buf[j] = 0.0;
                    }
                }
                g
            }
        }
    }
}

#[derive(Debug, Clone)]
enum Inner {
    Identity,
    /// `B^T diag(s) B`
    Banded { b: SparseLower, s: Vec<f64> },
    Diagonal(Vec<f64>),
    /// `diag(base) + U U^T` via Woodbury
    LowRank { base: Vec<f64>, u: LowRankFactor, cap: Llt<f64>, logdet: f64 },
}

/// A built preconditioner `P`. All operations are exact (direct).
#[derive(Debug, Clone)]
pub struct Preconditioner {
    variant: Variant,
    n: usize,
    inner: Inner,
}

fn require_positive_w(w: &[f64], what: &str) -> Result<()> {
    if let Some(i) = w.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::Capability(format!(
            "{what} needs strictly positive W, but W[{i}] = {:e}",
            w[i]
        )));
    }
    Ok(())
}

fn low_rank(variant: Variant, base: Vec<f64>, u: LowRankFactor) -> Result<Preconditioner> {
    let n = base.len();
    let inv: Vec<f64> = base.iter().map(|v| 1.0 / v).collect();
    let mut cap = u.gram(&inv);
    for i in 0..cap.nrows() {
        cap[(i, i)] += 1.0;
    }
    let cap = dense::cholesky(cap.as_ref())?;
    let logdet = base.iter().map(|&v| ln(v)).sum::<f64>() + dense::llt_logdet(&cap);
    Ok(Preconditioner { variant, n, inner: Inner::LowRank { base, u, cap, logdet } })
}

impl Preconditioner {
    pub fn identity(n: usize) -> Self {
        Self { variant: Variant::Identity, n, inner: Inner::Identity }
    }

    /// Builds an estimation preconditioner. `lrac` must hold the covariance low-rank
    /// factor for [`PreconditionerKind::Lrac`]; `rank` is used by the precision-based
    /// low-rank variants.
    pub fn build(
        kind: PreconditionerKind,
        factor: &VecchiaFactor,
        w: &[f64],
        lrac: Option<&PivotedCholesky>,
        rank: usize,
    ) -> Result<Self> {
        let n = factor.n();
        check_len(n, w.len())?;
        if kind.is_low_rank() {
            if rank > n {
                return Err(Error::Rank { rank, n });
            }
            if rank == 0 {
                return Err(Error::InvalidParameter("low-rank preconditioner needs rank >= 1".into()));
            }
        }
        let d = factor.d();
        match kind {
            PreconditionerKind::Identity => Ok(Self::identity(n)),
            PreconditionerKind::Vadu => Ok(Self::vadu(Variant::Vadu, factor, w)),
            PreconditionerKind::Lva => Ok(Self {
                variant: Variant::Lva,
                n,
                inner: Inner::Banded { b: factor.b().clone(), s: d.iter().map(|v| 1.0 / v).collect() },
            }),
            PreconditionerKind::Diagonal => {
                let diag = precision_diagonal(factor).iter().zip(w).map(|(q, wi)| q + wi).collect();
                Ok(Self { variant: Variant::P1, n, inner: Inner::Diagonal(diag) })
            }
            PreconditionerKind::Lrac => {
                require_positive_w(w, "the LRAC preconditioner")?;
                let pc = lrac.ok_or_else(|| {
                    Error::Capability("LRAC needs the low-rank factor of the covariance".into())
                })?;
                check_len(n, pc.factor.nrows())?;
                let base: Vec<f64> = w.iter().map(|v| 1.0 / v).collect();
                low_rank(Variant::Lrac, base, LowRankFactor::Dense(pc.factor.clone()))
            }
            PreconditionerKind::PivotedCholeskyPrecision => {
                require_positive_w(w, "the pivoted-Cholesky precision preconditioner")?;
                let acc = PrecisionAccessor::new(factor);
                let trace: f64 = acc.diagonal().iter().sum();
                let pc = pivoted_cholesky(&acc, rank, 1e-12 * trace)?;
                low_rank(Variant::P2, w.to_vec(), LowRankFactor::Dense(pc.factor))
            }
            PreconditionerKind::RowSelection => {
                require_positive_w(w, "the row-selection preconditioner")?;
                let rows = select_rows(factor, rank);
                let mut sets = Vec::with_capacity(rank);
                let mut vals = Vec::new();
                for &s in &rows {
                    let (cols, bv) = factor.b().row(s);
                    let scale = 1.0 / sqrt(d[s]);
                    let mut set = cols.to_vec();
                    set.push(s);
                    vals.extend(bv.iter().map(|v| v * scale));
                    vals.push(scale);
                    sets.push(set);
                }
                let ut = SparseRows::new(n, crate::vecchia::NeighborSets::from_sets(&sets), vals);
                low_rank(Variant::P3, w.to_vec(), LowRankFactor::SparseT(ut))
            }
        }
    }

    fn vadu(variant: Variant, factor: &VecchiaFactor, w: &[f64]) -> Self {
        let s = factor.d().iter().zip(w).map(|(d, wi)| wi + 1.0 / d).collect();
        Self { variant, n: factor.n(), inner: Inner::Banded { b: factor.b().clone(), s } }
    }

    /// Preconditioner for Lanczos predictive variances; `None` for the unpreconditioned run.
    pub fn build_lanczos(variant: LanczosVariant, factor: &VecchiaFactor, w: &[f64]) -> Result<Option<Self>> {
        check_len(factor.n(), w.len())?;
        Ok(match variant {
            LanczosVariant::None => None,
            LanczosVariant::L1 => Some(Self::vadu(Variant::L1, factor, w)),
            LanczosVariant::L2 => {
                require_positive_w(w, "the L2 Lanczos preconditioner")?;
                // Vecchia marginal variances are replaced by the prior variance
                let var = factor.spec().variance();
                let diag = w.iter().map(|wi| var + 1.0 / wi).collect();
                Some(Self { variant: Variant::L2, n: factor.n(), inner: Inner::Diagonal(diag) })
            }
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn name(&self) -> String {
        String::from(match self.variant {
            Variant::Vadu => "vadu",
            Variant::Lva => "lva",
            Variant::Lrac => "lrac",
            Variant::P1 => "diag",
            Variant::P2 => "pchol-precision",
            Variant::P3 => "rowsel",
            Variant::L1 => "l1",
            Variant::L2 => "l2",
            Variant::Identity => "identity",
        })
    }

    /// `P^{-1} b`
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        match &self.inner {
            Inner::Identity => b.to_vec(),
            Inner::Banded { b: bm, s } => {
                let mut u = bm.solve_t(b);
                for (ui, si) in u.iter_mut().zip(s) {
                    *ui /= si;
                }
                bm.solve(&u)
            }
            Inner::Diagonal(d) => b.iter().zip(d).map(|(x, di)| x / di).collect(),
            Inner::LowRank { base, u, cap, .. } => {
                use faer::linalg::solvers::Solve;
                let scaled: Vec<f64> = b.iter().zip(base).map(|(x, d)| x / d).collect();
                let t = u.t_mul(&scaled);
                let c = cap.solve(dense::from_col(&t));
                let corr = u.mul(&dense::col_to_vec(c.as_ref(), 0));
                scaled.iter().zip(&corr).zip(base).map(|((s, c), d)| s - c / d).collect()
            }
        }
    }

    /// `P b`
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match &self.inner {
            Inner::Identity => x.to_vec(),
            Inner::Banded { b, s } => {
                let mut u = b.mul(x);
                for (ui, si) in u.iter_mut().zip(s) {
                    *ui *= si;
                }
                b.mul_t(&u)
            }
            Inner::Diagonal(d) => x.iter().zip(d).map(|(a, b)| a * b).collect(),
            Inner::LowRank { base, u, .. } => {
                let t = u.mul(&u.t_mul(x));
                x.iter().zip(base).zip(&t).map(|((a, b), c)| a * b + c).collect()
            }
        }
    }

    pub fn logdet(&self) -> f64 {
        match &self.inner {
            Inner::Identity => 0.0,
            Inner::Banded { s, .. } => s.iter().map(|&v| ln(v)).sum(),
            Inner::Diagonal(d) => d.iter().map(|&v| ln(v)).sum(),
            Inner::LowRank { logdet, .. } => *logdet,
        }
    }

    /// Length of the standard-normal vector consumed by [`Self::sample_from`].
    pub fn sample_dim(&self) -> usize {
        match &self.inner {
            Inner::LowRank { u, .. } => self.n + u.rank(),
            _ => self.n,
        }
    }

    /// Maps standard normals `g` to a draw from `N(0, P)`.
    pub fn sample_from(&self, g: &[f64]) -> Result<Vec<f64>> {
        check_len(self.sample_dim(), g.len())?;
        Ok(match &self.inner {
            Inner::LowRank { base, u, .. } => {
                let (gn, gk) = g.split_at(self.n);
                let t = u.mul(gk);
                gn.iter().zip(base).zip(&t).map(|((a, b), c)| a * sqrt(*b) + c).collect()
            }
            _ => self.sym_factor_apply(g, false)?,
        })
    }

    pub fn sample(&self, seed: u64) -> Result<Vec<f64>> {
        let mut rng = crate::rng::stream(seed, 0);
        let g = crate::rng::normals(&mut rng, self.sample_dim());
        self.sample_from(&g)
    }

    fn factor_unsupported(&self) -> Error {
        Error::Capability(format!("preconditioner '{}' has no symmetric factor", self.name()))
    }

    /// `P^{1/2} b` (or `P^{T/2} b` with `transpose`) where `P = P^{1/2} P^{T/2}`.
    pub fn sym_factor_apply(&self, b: &[f64], transpose: bool) -> Result<Vec<f64>> {
        check_len(self.n, b.len())?;
        match &self.inner {
            Inner::Identity => Ok(b.to_vec()),
            Inner::Diagonal(d) => Ok(b.iter().zip(d).map(|(x, di)| x * sqrt(*di)).collect()),
            Inner::Banded { b: bm, s } => {
                if transpose {
                    let u = bm.mul(b);
                    Ok(u.iter().zip(s).map(|(x, si)| x * sqrt(*si)).collect())
                } else {
                    let u: Vec<f64> = b.iter().zip(s).map(|(x, si)| x * sqrt(*si)).collect();
                    Ok(bm.mul_t(&u))
                }
            }
            Inner::LowRank { .. } => Err(self.factor_unsupported()),
        }
    }

    /// `P^{-1/2} b` (or `P^{-T/2} b` with `transpose`).
    pub fn sym_factor_solve(&self, b: &[f64], transpose: bool) -> Result<Vec<f64>> {
        check_len(self.n, b.len())?;
        match &self.inner {
            Inner::Identity => Ok(b.to_vec()),
            Inner::Diagonal(d) => Ok(b.iter().zip(d).map(|(x, di)| x / sqrt(*di)).collect()),
            Inner::Banded { b: bm, s } => {
                if transpose {
                    let u: Vec<f64> = b.iter().zip(s).map(|(x, si)| x / sqrt(*si)).collect();
                    Ok(bm.solve(&u))
                } else {
                    let u = bm.solve_t(b);
                    Ok(u.iter().zip(s).map(|(x, si)| x / sqrt(*si)).collect())
                }
            }
            Inner::LowRank { .. } => Err(self.factor_unsupported()),
        }
    }

    /// Diagonal of the diagonal variants.
    pub fn diagonal(&self) -> Option<&[f64]> {
        match &self.inner {
            Inner::Diagonal(d) => Some(d),
            _ => None,
        }
    }

    /// Diagonal scaling `s` of the banded variants `B^T diag(s) B`.
    pub fn banded_scaling(&self) -> Option<&[f64]> {
        match &self.inner {
            Inner::Banded { s, .. } => Some(s),
            _ => None,
        }
    }

    /// Inverse of the small capacitance matrix `(I + U^T base^{-1} U)^{-1}` for low-rank variants.
    pub fn capacitance_inverse(&self) -> Option<Mat<f64>> {
        match &self.inner {
            Inner::LowRank { cap, .. } => {
                use faer::linalg::solvers::DenseSolveCore;
                Some(cap.inverse())
            }
            _ => None,
        }
    }

    /// Dense `P`, for tests and small problems.
    pub fn to_dense(&self) -> Mat<f64> {
        let n = self.n;
        let mut m = Mat::zeros(n, n);
        let mut e = alloc::vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let c = self.apply(&e);
            for i in 0..n {
                m[(i, j)] = c[i];
            }
            e[j] = 0.0;
        }
        m
    }
}

impl PrecondSolve for Preconditioner {
    fn dim(&self) -> usize {
        self.n
    }
    fn solve(&self, r: &[f64]) -> Vec<f64> {
        Preconditioner::solve(self, r)
    }
}

/// Rows with the largest `D_i^{-1} (1 + sum_j B_ij^2)`, ties to the lower index.
pub fn select_rows(factor: &VecchiaFactor, k: usize) -> Vec<usize> {
    let d = factor.d();
    let scores: Vec<f64> = (0..factor.n())
        .map(|i| {
            let (_, vals) = factor.b().row(i);
            (1.0 + math::dot(vals, vals)) / d[i]
        })
        .collect();
    let mut idx: Vec<usize> = (0..factor.n()).collect();
    let k = k.min(idx.len());
    let cmp = |a: &usize, b: &usize| scores[*b].total_cmp(&scores[*a]).then(a.cmp(b));
    if k < idx.len() && k > 0 {
        idx.select_nth_unstable_by(k - 1, cmp);
    }
    idx.truncate(k);
    idx.sort_by(cmp);
    idx
}
