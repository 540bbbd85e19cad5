use alloc::format;
use alloc::vec::Vec;

use super::factor::{VecchiaStructure, CONDITIONAL_VARIANCE_FLOOR};
use super::neighbors::{nearest_in, NeighborSets};
use super::sparse::{SparseLower, SparseRows};
use crate::covariance::{distance, CovarianceSpec, Locations};
use crate::dense::SmallChol;
use crate::error::{check_len, Error, Result};
use crate::math;

/// Prediction points closer than this to a training point are rejected.
pub const DUPLICATE_TOLERANCE: f64 = 1e-12;

/// Blocks of the joint Vecchia precision for prediction points that condition on
/// training points only: `B_p` (identity), `B_po` and `D_p`.
#[derive(Debug, Clone)]
pub struct PredictionBlocks {
    pub bp: SparseLower,
    pub bpo: SparseRows,
    pub dp: Vec<f64>,
}

impl PredictionBlocks {
    pub fn n_pred(&self) -> usize {
        self.dp.len()
    }

    pub fn neighbors(&self) -> &NeighborSets {
        self.bpo.pattern()
    }

    /// `B_p^{-1} B_po v`
    pub fn coupling(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.bpo.ncols(), v.len())?;
        Ok(self.bp.solve(&self.bpo.mul(v)))
    }

    /// `B_po^T B_p^{-T} u`
    pub fn coupling_t(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n_pred(), u.len())?;
        Ok(self.bpo.mul_t(&self.bp.solve_t(u)))
    }

    /// Diagonal of `B_p^{-1} D_p B_p^{-T}`.
    pub fn prior_conditional_variance(&self) -> Vec<f64> {
        // B_p is the identity here, so the diagonal is D_p itself.
        debug_assert_eq!(self.bp.values().len(), 0);
        self.dp.clone()
    }
}

/// Builds prediction blocks using the `m` nearest training points of each prediction point.
/// Training locations are taken in the structure's ordered positions.
pub fn prediction_blocks(
    structure: &VecchiaStructure,
    pred: &Locations,
    spec: &CovarianceSpec,
    m: usize,
) -> Result<PredictionBlocks> {
    let train = structure.locations();
    if pred.len() > 0 {
        check_len(train.dim(), pred.dim())?;
    }
    let (nb, closest) = nearest_in(train, pred, m);
    if let Some(p) = closest.iter().position(|&d2| d2 <= DUPLICATE_TOLERANCE * DUPLICATE_TOLERANCE) {
        let j = nb.of(p)[0];
        return Err(Error::InvalidData(format!(
            "prediction point {p} coincides with training point {}",
            structure.perm()[j]
        )));
    }
    let rows = crate::par::try_map(pred.len(), |p| {
        let idx = nb.of(p);
        let k = idx.len();
        let q = pred.point(p);
        let mut kmat = alloc::vec![0.0; k * k];
        let mut kvec = alloc::vec![0.0; k];
        for a in 0..k {
            let pa = train.point(idx[a]);
            kvec[a] = spec.at_distance(distance(pa, q));
            for c in 0..=a {
                kmat[a * k + c] = spec.at_distance(distance(pa, train.point(idx[c])));
            }
        }
        let chol = SmallChol::factor(kmat, k).ok_or_else(|| {
            Error::Breakdown(format!("neighbor block of prediction point {p} is not positive definite"))
        })?;
        let mut a = kvec.clone();
        chol.solve_in_place(&mut a);
        let d = spec.variance() - math::dot(&a, &kvec);
        if !(d >= CONDITIONAL_VARIANCE_FLOOR * spec.variance()) {
            return Err(Error::InvalidData(format!(
                "prediction point {p} is numerically a duplicate of its neighbors"
            )));
        }
        Ok((a.iter().map(|v| -v).collect::<Vec<f64>>(), d))
    })?;
    let mut vals = Vec::with_capacity(nb.nnz());
    let mut dp = Vec::with_capacity(rows.len());
    for (a, d) in rows {
        vals.extend_from_slice(&a);
        dp.push(d);
    }
    Ok(PredictionBlocks {
        bp: SparseLower::identity(pred.len()),
        bpo: SparseRows::new(train.len(), nb, vals),
        dp,
    })
}
