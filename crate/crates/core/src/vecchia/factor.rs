use alloc::format;
use alloc::string::ToString;
use alloc::sync::Arc;
use alloc::vec::Vec;

use faer::Mat;

use super::neighbors::{find_neighbors_ordered, order_random, NeighborSets};
use super::sparse::SparseLower;
use crate::covariance::{distance, CovParam, CovarianceSpec, Locations};
use crate::dense::SmallChol;
use crate::error::{check_len, Error, Result};
use crate::math;

/// Relative floor on conditional variances below which inputs are treated as duplicates.
pub const CONDITIONAL_VARIANCE_FLOOR: f64 = 1e-10;

/// Ordering and conditioning sets; independent of the covariance parameters.
#[derive(Debug, Clone)]
pub struct VecchiaStructure {
    perm: Vec<usize>,
    locs: Locations,
    neighbors: Arc<NeighborSets>,
    m: usize,
}

impl VecchiaStructure {
    /// Random ordering drawn from `seed`, then `m` nearest previous neighbors.
    pub fn new(locs: &Locations, m: usize, seed: u64) -> Self {
        let perm = order_random(locs.len(), seed);
        Self::from_valid_permutation(locs, perm, m)
    }

    pub fn with_permutation(locs: &Locations, perm: Vec<usize>, m: usize) -> Result<Self> {
        check_len(locs.len(), perm.len())?;
        let mut seen = alloc::vec![false; perm.len()];
        for &p in &perm {
            if p >= perm.len() || seen[p] {
                return Err(Error::InvalidParameter("ordering is not a permutation".to_string()));
            }
            seen[p] = true;
        }
        Ok(Self::from_valid_permutation(locs, perm, m))
    }

    fn from_valid_permutation(locs: &Locations, perm: Vec<usize>, m: usize) -> Self {
        let ordered = locs.permuted(&perm);
        let neighbors = Arc::new(find_neighbors_ordered(&ordered, m));
        Self { perm, locs: ordered, neighbors, m }
    }

    /// Custom conditioning sets on already-ordered locations (each `N(i)` must lie in `0..i`).
    pub fn from_parts(ordered: Locations, perm: Vec<usize>, neighbors: NeighborSets) -> Result<Self> {
        check_len(ordered.len(), perm.len())?;
        check_len(ordered.len(), neighbors.len())?;
        for i in 0..neighbors.len() {
            if let Some(&j) = neighbors.of(i).iter().find(|&&j| j >= i) {
                return Err(Error::InvalidParameter(format!(
                    "neighbor {j} of point {i} does not precede it"
                )));
            }
        }
        let m = neighbors.max_size();
        Ok(Self { perm, locs: ordered, neighbors: Arc::new(neighbors), m })
    }

    pub fn n(&self) -> usize {
        self.perm.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn neighbors(&self) -> &Arc<NeighborSets> {
        &self.neighbors
    }

    /// Locations in ordered position.
    pub fn locations(&self) -> &Locations {
        &self.locs
    }

    /// `out[i] = v[perm[i]]`
    pub fn to_ordered(&self, v: &[f64]) -> Vec<f64> {
        self.perm.iter().map(|&p| v[p]).collect()
    }

    /// Inverse of [`Self::to_ordered`].
    pub fn to_original(&self, v: &[f64]) -> Vec<f64> {
        let mut out = alloc::vec![0.0; v.len()];
        for (i, &p) in self.perm.iter().enumerate() {
            out[p] = v[i];
        }
        out
    }
}

/// `Sigma~^{-1} = B^T D^{-1} B` in ordered coordinates.
#[derive(Debug, Clone)]
pub struct VecchiaFactor {
    structure: Arc<VecchiaStructure>,
    spec: CovarianceSpec,
    b: SparseLower,
    d: Vec<f64>,
}

/// Derivative of `B` (same off-diagonal pattern, zero diagonal) and `D` for one parameter.
#[derive(Debug, Clone)]
pub struct VecchiaGradient {
    pub param: CovParam,
    pub db: SparseLower,
    pub dd: Vec<f64>,
}

struct RowFactor {
    b: Vec<f64>,
    d: f64,
    db_range: Vec<f64>,
    dd_range: f64,
}

fn factor_row(
    structure: &VecchiaStructure,
    spec: &CovarianceSpec,
    i: usize,
    with_grad: bool,
) -> Result<RowFactor> {
    let locs = &structure.locs;
    let nb = structure.neighbors.of(i);
    let k = nb.len();
    let fail = |reason: &str| Error::Factorization {
        index: structure.perm[i],
        position: i,
        reason: reason.to_string(),
    };
    let pi = locs.point(i);
    let mut kmat = alloc::vec![0.0; k * k];
    let mut kvec = alloc::vec![0.0; k];
    let mut dist = alloc::vec![0.0; k * k];
    let mut dvec = alloc::vec![0.0; k];
    for a in 0..k {
        let pa = locs.point(nb[a]);
        dvec[a] = distance(pa, pi);
        kvec[a] = spec.at_distance(dvec[a]);
        for c in 0..=a {
            let r = distance(pa, locs.point(nb[c]));
            dist[a * k + c] = r;
            kmat[a * k + c] = spec.at_distance(r);
        }
    }
    let chol = SmallChol::factor(kmat, k)
        .ok_or_else(|| fail("neighbor covariance block is not positive definite"))?;
    let mut a = kvec.clone();
    chol.solve_in_place(&mut a);
    let d = spec.variance() - math::dot(&a, &kvec);
    if !(d >= CONDITIONAL_VARIANCE_FLOOR * spec.variance()) {
        return Err(fail(&format!("conditional variance {d:e} below floor (near-duplicate locations?)")));
    }
    let (mut db_range, mut dd_range) = (Vec::new(), 0.0);
    if with_grad {
        // d a = K^{-1} (dk - dK a);  dD = dc - da.k - a.dk
        let mut rhs = alloc::vec![0.0; k];
        let dk: Vec<f64> = dvec.iter().map(|&r| spec.grad_at_distance(r, CovParam::Range)).collect();
        for r in 0..k {
            let mut s = dk[r];
            for c in 0..k {
                let (hi, lo) = if r >= c { (r, c) } else { (c, r) };
                s -= spec.grad_at_distance(dist[hi * k + lo], CovParam::Range) * a[c];
            }
            rhs[r] = s;
        }
        chol.solve_in_place(&mut rhs);
        dd_range = -math::dot(&rhs, &kvec) - math::dot(&a, &dk);
        db_range = rhs.iter().map(|v| -v).collect();
    }
    Ok(RowFactor { b: a.iter().map(|v| -v).collect(), d, db_range, dd_range })
}

fn assemble(
    structure: &Arc<VecchiaStructure>,
    spec: &CovarianceSpec,
    with_grad: bool,
) -> Result<(VecchiaFactor, Option<[VecchiaGradient; 2]>)> {
    let rows = crate::par::try_map(structure.n(), |i| factor_row(structure, spec, i, with_grad))?;
    let nnz = structure.neighbors.nnz();
    let mut bvals = Vec::with_capacity(nnz);
    let mut d = Vec::with_capacity(rows.len());
    let mut dbr = Vec::with_capacity(if with_grad { nnz } else { 0 });
    let mut ddr = Vec::with_capacity(rows.len());
    for r in rows {
        bvals.extend_from_slice(&r.b);
        d.push(r.d);
        dbr.extend_from_slice(&r.db_range);
        ddr.push(r.dd_range);
    }
    let pattern = structure.neighbors.clone();
    let grads = with_grad.then(|| {
        let dd_var: Vec<f64> = d.iter().map(|v| v / spec.variance()).collect();
        [
            VecchiaGradient {
                param: CovParam::Variance,
                db: SparseLower::new(pattern.clone(), alloc::vec![0.0; nnz], false),
                dd: dd_var,
            },
            VecchiaGradient {
                param: CovParam::Range,
                db: SparseLower::new(pattern.clone(), dbr, false),
                dd: ddr,
            },
        ]
    });
    let factor = VecchiaFactor {
        structure: structure.clone(),
        spec: *spec,
        b: SparseLower::new(pattern, bvals, true),
        d,
    };
    Ok((factor, grads))
}

/// Builds `B` and `D` row by row from the neighbor blocks.
pub fn build_factor(structure: &Arc<VecchiaStructure>, spec: &CovarianceSpec) -> Result<VecchiaFactor> {
    Ok(assemble(structure, spec, false)?.0)
}

/// Factor together with both parameter derivatives, sharing the block factorizations.
pub fn build_factor_with_gradients(
    structure: &Arc<VecchiaStructure>,
    spec: &CovarianceSpec,
) -> Result<(VecchiaFactor, [VecchiaGradient; 2])> {
    let (f, g) = assemble(structure, spec, true)?;
    Ok((f, g.expect("gradients requested")))
}

/// Derivative of the factor with respect to parameter `k` (0 = variance, 1 = range).
pub fn factor_gradient(factor: &VecchiaFactor, k: usize) -> Result<VecchiaGradient> {
    let param = CovParam::from_index(k)?;
    let (_, grads) = build_factor_with_gradients(&factor.structure, &factor.spec)?;
    let [gv, gr] = grads;
    Ok(match param {
        CovParam::Variance => gv,
        CovParam::Range => gr,
    })
}

impl VecchiaFactor {
    pub fn n(&self) -> usize {
        self.d.len()
    }

    pub fn m(&self) -> usize {
        self.structure.m
    }

    pub fn structure(&self) -> &Arc<VecchiaStructure> {
        &self.structure
    }

    pub fn spec(&self) -> &CovarianceSpec {
        &self.spec
    }

    pub fn perm(&self) -> &[usize] {
        &self.structure.perm
    }

    pub fn neighbors(&self) -> &NeighborSets {
        &self.structure.neighbors
    }

    pub fn b(&self) -> &SparseLower {
        &self.b
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    /// `B^T D^{-1} B v`
    pub fn apply_precision(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n(), v.len())?;
        let mut u = self.b.mul(v);
        for (ui, di) in u.iter_mut().zip(&self.d) {
            *ui /= di;
        }
        Ok(self.b.mul_t(&u))
    }

    /// `B^{-1} D B^{-T} v`
    pub fn apply_sigma_tilde(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n(), v.len())?;
        let mut u = self.b.solve_t(v);
        for (ui, di) in u.iter_mut().zip(&self.d) {
            *ui *= di;
        }
        Ok(self.b.solve(&u))
    }

    /// `(dSigma~^{-1}/dtheta) v = (dB^T D^{-1} B + B^T D^{-1} dB - B^T D^{-1} dD D^{-1} B) v`
    pub fn apply_precision_derivative(&self, g: &VecchiaGradient, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n(), v.len())?;
        let bv = self.b.mul(v);
        let dbv = g.db.mul(v);
        let mut left = alloc::vec![0.0; self.n()];
        let mut right = alloc::vec![0.0; self.n()];
        for i in 0..self.n() {
            let di = self.d[i];
            left[i] = bv[i] / di;
            right[i] = dbv[i] / di - g.dd[i] * bv[i] / (di * di);
        }
        let mut out = g.db.mul_t(&left);
        let t = self.b.mul_t(&right);
        for (o, ti) in out.iter_mut().zip(&t) {
            *o += ti;
        }
        Ok(out)
    }

    pub fn logdet_sigma_tilde(&self) -> f64 {
        self.d.iter().map(|&v| math::ln(v)).sum()
    }

    /// Dense `B^T D^{-1} B`, accumulated row by row.
    pub fn precision_dense(&self) -> Mat<f64> {
        let n = self.n();
        let mut q = Mat::zeros(n, n);
        for r in 0..n {
            let (cols, vals) = self.b.row(r);
            let mut idx: Vec<usize> = cols.to_vec();
            let mut v: Vec<f64> = vals.to_vec();
            idx.push(r);
            v.push(1.0);
            let inv = 1.0 / self.d[r];
            for (a, &i) in idx.iter().enumerate() {
                for (b, &j) in idx.iter().enumerate() {
                    q[(i, j)] += v[a] * v[b] * inv;
                }
            }
        }
        q
    }

    pub fn sigma_tilde_dense(&self) -> Mat<f64> {
        let n = self.n();
        let mut m = Mat::zeros(n, n);
        let mut e = alloc::vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.apply_sigma_tilde(&e).expect("length matches");
            for i in 0..n {
                m[(i, j)] = col[i];
            }
            e[j] = 0.0;
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{cov_matrix, Smoothness};
    use crate::dense;
    use alloc::vec;

    fn random_locs(n: usize, seed: u64) -> Locations {
        let mut rng = crate::rng::stream(seed, 1);
        Locations::new((0..2 * n).map(|_| crate::rng::uniform(&mut rng)).collect(), 2).unwrap()
    }

    fn spec(range: f64) -> CovarianceSpec {
        CovarianceSpec::new(Smoothness::ThreeHalves, 1.0, range).unwrap()
    }

    #[test]
    fn no_neighbors_gives_identity() {
        let locs = random_locs(20, 1);
        let s = Arc::new(VecchiaStructure::new(&locs, 0, 3));
        let sp = CovarianceSpec::new(Smoothness::Half, 2.0, 0.1).unwrap();
        let (f, [gv, gr]) = build_factor_with_gradients(&s, &sp).unwrap();
        assert!(f.b.values().is_empty());
        assert!(f.d.iter().all(|&v| v == 2.0));
        assert!(gv.dd.iter().all(|&v| v == 1.0));
        assert!(gr.dd.iter().all(|&v| v == 0.0));
        let unit = CovarianceSpec::new(Smoothness::ThreeHalves, 1.0, 0.1).unwrap();
        let f1 = build_factor(&s, &unit).unwrap();
        let v: Vec<f64> = (0..20).map(|i| i as f64).collect();
        assert_eq!(f1.apply_precision(&v).unwrap(), v);
    }

    #[test]
    fn full_conditioning_is_exact() {
        let n = 50;
        let locs = random_locs(n, 2);
        let s = Arc::new(VecchiaStructure::new(&locs, n - 1, 7));
        let sp = spec(0.2);
        let f = build_factor(&s, &sp).unwrap();
        let sigma = cov_matrix(&sp, s.locations());
        let inv = dense::llt_inverse(&dense::cholesky(sigma.as_ref()).unwrap());
        let err = dense::max_abs_diff(f.precision_dense().as_ref(), inv.as_ref());
        let scale = dense::max_abs_diff(inv.as_ref(), Mat::<f64>::zeros(n, n).as_ref());
        assert!(err < 1e-8 * scale.max(1.0), "err {err}");
        let logdet = dense::llt_logdet(&dense::cholesky(sigma.as_ref()).unwrap());
        assert!((logdet - f.logdet_sigma_tilde()).abs() < 1e-8);
    }

    #[test]
    fn three_point_hand_example() {
        let locs = Locations::new(vec![0.0, 1.0, 3.0], 1).unwrap();
        let s = Arc::new(VecchiaStructure::with_permutation(&locs, vec![0, 1, 2], 1).unwrap());
        let sp = CovarianceSpec::new(Smoothness::Half, 1.0, 1.0).unwrap();
        let f = build_factor(&s, &sp).unwrap();
        // point 1 conditions on 0 (distance 1), point 2 on 1 (distance 2)
        let c1 = math::exp(-1.0);
        let c2 = math::exp(-2.0);
        assert!((f.b.row(1).1[0] + c1).abs() < 1e-15);
        assert!((f.b.row(2).1[0] + c2).abs() < 1e-15);
        assert_eq!(f.b.row(2).0, &[1]);
        assert!((f.d[1] - (1.0 - c1 * c1)).abs() < 1e-15);
        assert!((f.d[2] - (1.0 - c2 * c2)).abs() < 1e-15);
    }

    #[test]
    fn sigma_tilde_inverts_precision() {
        let locs = random_locs(200, 3);
        let s = Arc::new(VecchiaStructure::new(&locs, 10, 1));
        let f = build_factor(&s, &spec(0.1)).unwrap();
        let mut rng = crate::rng::stream(1, 2);
        let v = crate::rng::normals(&mut rng, 200);
        let back = f.apply_sigma_tilde(&f.apply_precision(&v).unwrap()).unwrap();
        for i in 0..200 {
            assert!((back[i] - v[i]).abs() < 1e-10);
        }
        assert!(f.apply_precision(&v[..10]).is_err());
    }

    #[test]
    fn precision_product_matches_dense() {
        let locs = random_locs(100, 4);
        let s = Arc::new(VecchiaStructure::new(&locs, 8, 2));
        let f = build_factor(&s, &spec(0.15)).unwrap();
        let mut rng = crate::rng::stream(3, 2);
        let v = crate::rng::normals(&mut rng, 100);
        let dense_out = dense::mat_vec(f.precision_dense().as_ref(), &v);
        let out = f.apply_precision(&v).unwrap();
        for i in 0..100 {
            assert!((dense_out[i] - out[i]).abs() < 1e-12 * (1.0 + dense_out[i].abs()));
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..20 {
            let n = 4 + (seed as usize % 9);
            let locs = random_locs(n, 10 + seed);
            let s = Arc::new(VecchiaStructure::new(&locs, 2 + seed as usize % 2, seed));
            let range = 0.1 + 0.05 * seed as f64;
            let sp = CovarianceSpec::new(Smoothness::ThreeHalves, 1.3, range).unwrap();
            let (f, grads) = build_factor_with_gradients(&s, &sp).unwrap();
            for g in &grads {
                let theta = sp.params()[g.param as usize];
                let h = 1e-6 * theta;
                let shift = |t: f64| match g.param {
                    CovParam::Variance => sp.with_params(t, range).unwrap(),
                    CovParam::Range => sp.with_params(1.3, t).unwrap(),
                };
                let up = build_factor(&s, &shift(theta + h)).unwrap();
                let dn = build_factor(&s, &shift(theta - h)).unwrap();
                for (k, &v) in g.db.values().iter().enumerate() {
                    let fd = (up.b.values()[k] - dn.b.values()[k]) / (2.0 * h);
                    // B is scale free in the variance, so the FD there is pure roundoff
                    assert!((fd - v).abs() <= 1e-5 * fd.abs().max(1e-3) + 1e-7, "dB {fd} vs {v}");
                }
                for i in 0..n {
                    let fd = (up.d[i] - dn.d[i]) / (2.0 * h);
                    assert!((fd - g.dd[i]).abs() <= 1e-5 * fd.abs().max(1e-3) + 1e-7, "dD {fd} vs {}", g.dd[i]);
                }
                assert_eq!(g.db.pattern().nnz(), f.b.pattern().nnz());
            }
            let gv = factor_gradient(&f, 0).unwrap();
            assert!(gv.db.values().iter().all(|&v| v == 0.0));
            for i in 0..n {
                assert!((gv.dd[i] - f.d[i] / 1.3).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn precision_derivative_matches_dense() {
        let locs = random_locs(40, 5);
        let s = Arc::new(VecchiaStructure::new(&locs, 5, 9));
        let sp = spec(0.2);
        let (f, grads) = build_factor_with_gradients(&s, &sp).unwrap();
        let h = 1e-6 * sp.range();
        let up = build_factor(&s, &sp.with_params(1.0, sp.range() + h).unwrap()).unwrap();
        let dn = build_factor(&s, &sp.with_params(1.0, sp.range() - h).unwrap()).unwrap();
        let fd = (up.precision_dense() - dn.precision_dense()) * faer::Scale(1.0 / (2.0 * h));
        let mut rng = crate::rng::stream(5, 5);
        let v = crate::rng::normals(&mut rng, 40);
        let exp = dense::mat_vec(fd.as_ref(), &v);
        let got = f.apply_precision_derivative(&grads[1], &v).unwrap();
        for i in 0..40 {
            assert!((exp[i] - got[i]).abs() < 1e-5 * (1.0 + exp[i].abs()));
        }
    }

    #[test]
    fn near_duplicates_are_reported() {
        let locs = Locations::new(vec![0.0, 0.0, 0.5, 0.5, 0.0, 1e-14], 2).unwrap();
        let s = Arc::new(VecchiaStructure::with_permutation(&locs, vec![0, 1, 2], 2).unwrap());
        let err = build_factor(&s, &spec(0.3)).unwrap_err();
        assert!(matches!(err, Error::Factorization { index: 2, .. }), "{err:?}");
    }

    #[test]
    fn approximation_improves_with_m() {
        // KL(N(0, Sigma) || N(0, Sigma~)) for increasing conditioning sets
        let n = 500;
        for seed in 0..5 {
            let locs = random_locs(n, 100 + seed);
            let sp = spec(0.1);
            let sigma = cov_matrix(&sp, &locs.permuted(&order_random(n, seed)));
            let logdet_sigma = dense::llt_logdet(&dense::cholesky(sigma.as_ref()).unwrap());
            let mut last = f64::INFINITY;
            for m in [1, 5, 10, 20] {
                let s = Arc::new(VecchiaStructure::new(&locs, m, seed));
                let f = build_factor(&s, &sp).unwrap();
                let prec = f.precision_dense();
                let mut tr = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        tr += prec[(i, j)] * sigma[(j, i)];
                    }
                }
                let kl = 0.5 * (tr - n as f64 + f.logdet_sigma_tilde() - logdet_sigma);
                assert!(kl <= last + 1e-9, "m={m} kl={kl} last={last}");
                last = kl;
            }
        }
    }
}
