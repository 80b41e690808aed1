//! Dense linear algebra shared by every other module: metric adjoints,
//! symmetric square roots, self-adjoint eigenproblems relative to a metric,
//! eigenvalue clustering, commutators and numerical rank.
//!
//! Every tolerance test is relative to `max(1, |M|_inf)`, with `|M|_inf` the
//! max-row-sum bound on the spectral norm, so checks are scale invariant for
//! large inputs and absolute for tiny ones.

use nalgebra::{Cholesky, ComplexField, DMatrix, DVector, Dyn, SymmetricEigen, SVD};

use crate::error::{Error, Result};

pub type RealMatrix = DMatrix<f64>;
pub type RealVector = DVector<f64>;
pub type Complex = nalgebra::Complex<f64>;
pub type ComplexMatrix = DMatrix<Complex>;

/// Numerical tolerances. `rel` gates every residual test, `cluster_gap`
/// decides when two eigenvalues count as the same.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    rel: f64,
    cluster_gap: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { rel: 1e-9, cluster_gap: 1e-7 }
    }
}

impl Tolerance {
    pub fn new(rel: f64, cluster_gap: f64) -> Result<Self> {
        if !(rel.is_finite() && rel > 0.0) {
            return Err(Error::InvalidTolerance(format!("rel must be positive, got {rel}")));
        }
        if !(cluster_gap.is_finite() && cluster_gap > 0.0) {
            return Err(Error::InvalidTolerance(format!(
                "cluster_gap must be positive, got {cluster_gap}"
            )));
        }
        if cluster_gap < rel {
            return Err(Error::InvalidTolerance(format!(
                "cluster_gap ({cluster_gap}) must be >= rel ({rel})"
            )));
        }
        Ok(Tolerance { rel, cluster_gap })
    }

    /// Overrides `rel`, raising `cluster_gap` if needed to keep `cluster_gap >= rel`.
    pub fn with_rel(rel: f64) -> Result<Self> {
        let d = Tolerance::default();
        Tolerance::new(rel, d.cluster_gap.max(rel))
    }

    pub fn rel(&self) -> f64 {
        self.rel
    }

    pub fn cluster_gap(&self) -> f64 {
        self.cluster_gap
    }
}

pub fn inf_norm(m: &RealMatrix) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `max(1, |m|_inf)`.
pub fn scale(m: &RealMatrix) -> f64 {
    inf_norm(m).max(1.0)
}

pub fn max_abs(m: &RealMatrix) -> f64 {
    m.iter().fold(0.0_f64, |a, x| a.max(x.abs()))
}

pub fn ensure_square(m: &RealMatrix) -> Result<usize> {
    if m.nrows() == 0 {
        return Err(Error::Empty);
    }
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(m.nrows())
}

pub fn ensure_same_dim(a: &RealMatrix, b: &RealMatrix) -> Result<usize> {
    let n = ensure_square(a)?;
    let m = ensure_square(b)?;
    if n != m {
        return Err(Error::DimensionMismatch { expected: n, found: m });
    }
    Ok(n)
}

/// `|m - m^T|_F / scale(m)`.
pub fn asymmetry(m: &RealMatrix) -> f64 {
    (m - m.transpose()).norm() / scale(m)
}

/// `|m + m^T|_F / scale(m)`.
pub fn skewness_defect(m: &RealMatrix) -> f64 {
    (m + m.transpose()).norm() / scale(m)
}

pub fn symmetric_part(m: &RealMatrix) -> RealMatrix {
    (m + m.transpose()) * 0.5
}

pub(crate) fn cholesky(g: &RealMatrix) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(symmetric_part(g)).ok_or_else(|| Error::NotPositiveDefinite(min_eigenvalue(g)))
}

pub(crate) fn min_eigenvalue(m: &RealMatrix) -> f64 {
    SymmetricEigen::new(symmetric_part(m))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Symmetric eigendecomposition with eigenvalues sorted ascending; ties keep
/// the solver's order.
pub(crate) fn sorted_symmetric_eigen(m: &RealMatrix) -> (Vec<f64>, RealMatrix) {
    let eig = SymmetricEigen::new(symmetric_part(m));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = RealMatrix::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Adjoint of `a` with respect to the metric `g`: `g^-1 a^T g`, the unique
/// operator with `g(a' x, y) = g(x, a y)`.
pub fn metric_adjoint(a: &RealMatrix, g: &RealMatrix) -> Result<RealMatrix> {
    ensure_same_dim(a, g)?;
    let chol = cholesky(g)?;
    Ok(chol.solve(&(a.transpose() * g)))
}

/// Symmetric nonnegative square root; eigenvalues slightly below zero from
/// rounding are clipped.
pub fn sym_sqrt(m: &RealMatrix, tol: &Tolerance) -> Result<RealMatrix> {
    ensure_square(m)?;
    let asym = asymmetry(m);
    if asym > tol.rel() {
        return Err(Error::NotSymmetric(asym));
    }
    let (values, q) = sorted_symmetric_eigen(m);
    let floor = -tol.rel() * scale(m);
    if let Some(&lo) = values.first() {
        if lo < floor {
            return Err(Error::NegativeEigenvalue(lo));
        }
    }
    let roots = RealVector::from_iterator(values.len(), values.iter().map(|v| v.max(0.0).sqrt()));
    let p = &q * RealMatrix::from_diagonal(&roots) * q.transpose();
    Ok(symmetric_part(&p))
}

/// Eigenpairs of an operator that is self-adjoint for the metric `g`.
#[derive(Debug, Clone)]
pub struct SelfAdjointEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Columns are `g`-orthonormal eigenvectors, in the order of `values`.
    pub basis: RealMatrix,
}

impl SelfAdjointEigen {
    /// Columns `start..start+len` of the basis.
    pub fn columns(&self, start: usize, len: usize) -> RealMatrix {
        self.basis.columns(start, len).into_owned()
    }
}

/// Diagonalizes a `g`-self-adjoint operator by whitening: with `g = L L^T`
/// the conjugate `L^T A L^-T` is symmetric, its orthonormal eigenvectors `Q`
/// map back to `L^-T Q`.
pub fn eig_self_adjoint(a: &RealMatrix, g: &RealMatrix, tol: &Tolerance) -> Result<SelfAdjointEigen> {
    let n = ensure_same_dim(a, g)?;
    let ga = g * a;
    let defect = (&ga - ga.transpose()).norm() / (scale(g) * scale(a));
    if defect > tol.rel() {
        return Err(Error::NotSelfAdjoint(defect));
    }
    let chol = cholesky(g)?;
    let l = chol.l();
    let l_inv = l
        .solve_lower_triangular(&RealMatrix::identity(n, n))
        .ok_or(Error::NotPositiveDefinite(0.0))?;
    let l_inv_t = l_inv.transpose();
    let whitened = l.transpose() * a * &l_inv_t;
    let (values, q) = sorted_symmetric_eigen(&whitened);
    Ok(SelfAdjointEigen { values, basis: l_inv_t * q })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cluster {
    /// Mean of the merged values.
    pub value: f64,
    pub multiplicity: usize,
    /// Index of the first member in the input list.
    pub start: usize,
}

/// Merges consecutive sorted values whose gap is at most
/// `cluster_gap * max(1, |value|)`.
pub fn cluster_eigenvalues(values: &[f64], cluster_gap: f64) -> Vec<Cluster> {
    let mut out: Vec<Cluster> = Vec::new();
    let mut sum = 0.0;
    for (i, &v) in values.iter().enumerate() {
        let merge = i > 0 && {
            let prev = values[i - 1];
            (v - prev).abs() <= cluster_gap * prev.abs().max(v.abs()).max(1.0)
        };
        if merge {
            let c = out.last_mut().expect("merge implies a previous cluster");
            c.multiplicity += 1;
            sum += v;
            c.value = sum / c.multiplicity as f64;
        } else {
            sum = v;
            out.push(Cluster { value: v, multiplicity: 1, start: i });
        }
    }
    out
}

pub fn commutator(a: &RealMatrix, b: &RealMatrix) -> Result<RealMatrix> {
    ensure_same_dim(a, b)?;
    Ok(a * b - b * a)
}

/// `basis^T g op basis`: the matrix of `op` on the span of `g`-orthonormal
/// columns, assuming that span is invariant.
pub fn restrict(op: &RealMatrix, basis: &RealMatrix, g: &RealMatrix) -> RealMatrix {
    basis.transpose() * g * op * basis
}

/// Singular-value rank decision and the spectrum around the threshold.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RankReport {
    pub rank: usize,
    /// Descending.
    pub singular_values: Vec<f64>,
    pub threshold: f64,
    /// Smallest singular value counted in the rank (`inf` when rank is 0).
    pub smallest_kept: f64,
    /// Largest singular value treated as zero (`0` when none).
    pub largest_dropped: f64,
}

impl RankReport {
    /// Ratio between the retained and dropped parts of the spectrum.
    pub fn gap(&self) -> f64 {
        if self.largest_dropped == 0.0 {
            f64::INFINITY
        } else {
            self.smallest_kept / self.largest_dropped
        }
    }
}

/// Singular values closer than this factor to the threshold (on either side)
/// make a rank decision ambiguous.
pub const RANK_BAND: f64 = 100.0;

fn rank_report(mut sv: Vec<f64>, rel: f64, floor: f64) -> RankReport {
    sv.sort_by(|a, b| b.total_cmp(a));
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let threshold = rel * sigma_max.max(floor);
    let rank = sv.iter().filter(|&&s| s > threshold).count();
    RankReport {
        rank,
        smallest_kept: if rank == 0 { f64::INFINITY } else { sv[rank - 1] },
        largest_dropped: sv.get(rank).copied().unwrap_or(0.0),
        singular_values: sv,
        threshold,
    }
}

/// Numerical rank with threshold `rel * max(sigma_max, floor)`.
pub fn numerical_rank<T>(m: &DMatrix<T>, rel: f64, floor: f64) -> RankReport
where
    T: ComplexField<RealField = f64>,
{
    if m.is_empty() {
        return rank_report(Vec::new(), rel, floor);
    }
    let svd = SVD::new(m.clone(), false, false);
    rank_report(svd.singular_values.iter().copied().collect(), rel, floor)
}

/// Orthonormal basis of the null space of `m` (as columns) and the rank
/// report it was decided from. Fails when a singular value sits within
/// `RANK_BAND` of the threshold.
pub fn null_space<T>(m: &DMatrix<T>, rel: f64, floor: f64) -> Result<(DMatrix<T>, RankReport)>
where
    T: ComplexField<RealField = f64>,
{
    let cols = m.ncols();
    // pad so the SVD exposes all `cols` right singular vectors
    let padded = if m.nrows() < cols {
        let mut p = DMatrix::<T>::zeros(cols, cols);
        p.rows_mut(0, m.nrows()).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = SVD::new(padded, false, true);
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let report = rank_report(sv.clone(), rel, floor);
    let t = report.threshold;
    if let Some(&s) = report.singular_values.iter().find(|&&s| s > t / RANK_BAND && s <= t * RANK_BAND) {
        return Err(Error::RankAmbiguous { value: s, threshold: t });
    }
    let null: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] <= report.threshold).collect();
    let mut basis = DMatrix::<T>::zeros(cols, null.len());
    for (k, &i) in null.iter().enumerate() {
        basis.set_column(k, &v_t.row(i).adjoint());
    }
    Ok((basis, report))
}

/// Modified Gram-Schmidt (two passes) in the Euclidean inner product;
/// vectors whose remainder falls below `drop * original norm` are skipped.
pub fn orthonormalize(vectors: &[RealVector], drop: f64) -> Vec<RealVector> {
    let mut out: Vec<RealVector> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let norm0 = v.norm();
        if norm0 == 0.0 {
            continue;
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &out {
                let c = q.dot(&w);
                w.axpy(-c, q, 1.0);
            }
        }
        let norm = w.norm();
        if norm > drop * norm0 {
            out.push(w / norm);
        }
    }
    out
}

pub fn vectorize(m: &RealMatrix) -> RealVector {
    RealVector::from_column_slice(m.as_slice())
}

pub fn unvectorize(v: &RealVector, n: usize) -> RealMatrix {
    RealMatrix::from_column_slice(n, n, v.as_slice())
}
