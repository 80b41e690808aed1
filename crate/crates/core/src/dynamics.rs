//! Linear dynamics that are Hamiltonian for both triples of a compatible pair.
//!
//! The bi-preserving algebra is every `A` with `g_a A + A^T g_a = 0` and
//! `omega_a A + A^T omega_a = 0` for `a = 1, 2`. The recursion operator `T`
//! generates the commuting family `J_1, T J_1, ..., T^(n-1) J_1` inside it.

use serde::Serialize;

use crate::compatibility::CompatiblePair;
use crate::error::{Check, Error, Result};
use crate::linalg::{
    cluster_eigenvalues, commutator, eig_self_adjoint, null_space, numerical_rank, orthonormalize, scale,
    unvectorize, vectorize, RankReport, RealMatrix, RealVector, RANK_BAND,
};
use crate::par::{self, Execution};
use crate::structures::{preservation_residuals, LinearField};

/// Orthonormal (Frobenius) basis of the Lie algebra of fields preserving
/// `g_1, omega_1, g_2, omega_2`.
#[derive(Debug, Clone)]
pub struct BiPreservingAlgebra {
    basis: Vec<RealMatrix>,
    /// Rank decision on the constraints left after solving for triple 1.
    pub constraint_rank: RankReport,
}

impl BiPreservingAlgebra {
    pub fn basis(&self) -> &[RealMatrix] {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// `|A - P A| / |A|` with `P` the Frobenius projection onto the algebra.
    pub fn projection_residual(&self, a: &RealMatrix) -> f64 {
        let norm = a.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let mut r = a.clone();
        for b in &self.basis {
            let c = b.dot(&r);
            r -= b * c;
        }
        r.norm() / norm
    }
}

/// Realization of the complex unit on `(e, J e)` pairs.
fn unit_block(re: f64, im: f64) -> [[f64; 2]; 2] {
    [[re, -im], [im, re]]
}

/// Unit-Frobenius real matrices spanning `u(n)` in a frame where `g = I` and
/// `J` is the blockwise realization of `i`: real antisymmetric plus `i` times
/// real symmetric.
fn unitary_algebra_basis(n: usize) -> Vec<RealMatrix> {
    let mut out = Vec::with_capacity(n * n);
    let put = |m: &mut RealMatrix, k: usize, l: usize, b: [[f64; 2]; 2]| {
        for (r, row) in b.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                m[(2 * k + r, 2 * l + c)] += v;
            }
        }
    };
    for k in 0..n {
        for l in k..n {
            if k < l {
                let mut x = RealMatrix::zeros(2 * n, 2 * n);
                put(&mut x, k, l, unit_block(1.0, 0.0));
                put(&mut x, l, k, unit_block(-1.0, 0.0));
                out.push(x / 2.0);
            }
            let mut y = RealMatrix::zeros(2 * n, 2 * n);
            put(&mut y, k, l, unit_block(0.0, 1.0));
            if k < l {
                put(&mut y, l, k, unit_block(0.0, 1.0));
            }
            let norm = y.norm();
            out.push(y / norm);
        }
    }
    out
}

fn upper_entries(m: &RealMatrix, strict: bool, out: &mut Vec<f64>) {
    for c in 0..m.ncols() {
        let end = if strict { c } else { c + 1 };
        for r in 0..end {
            out.push(m[(r, c)]);
        }
    }
}

/// Solves the four preservation constraints. Triple 1's constraints are
/// solved in closed form by working in its adapted frame; triple 2's are a
/// homogeneous system over the `n^2` coordinates of `u(n)`, assembled in
/// parallel and solved by SVD.
pub fn bi_preserving_algebra(p: &CompatiblePair) -> Result<BiPreservingAlgebra> {
    bi_preserving_algebra_with(p, Execution::default())
}

pub fn bi_preserving_algebra_with(p: &CompatiblePair, exec: Execution) -> Result<BiPreservingAlgebra> {
    let n = p.t1().complex_dim();
    let frame = p.t1().adapted_frame();
    let g2 = frame.transpose() * p.t2().g() * &frame;
    let w2 = frame.transpose() * p.t2().omega() * &frame;
    let (sg, sw) = (scale(&g2), scale(&w2));
    let params = unitary_algebra_basis(n);
    let columns = par::map(exec, &params, |a| {
        let mut col = Vec::new();
        let ga = &g2 * a;
        upper_entries(&((&ga + ga.transpose()) / sg), false, &mut col);
        let wa = &w2 * a;
        upper_entries(&((&wa - wa.transpose()) / sw), true, &mut col);
        RealVector::from_vec(col)
    });
    let system = RealMatrix::from_columns(&columns);
    let (null, constraint_rank) = null_space(&system, p.tol().rel(), 1.0)?;

    let back = frame.transpose() * p.t1().g();
    let mapped: Vec<RealVector> = null
        .column_iter()
        .map(|c| {
            let local = params.iter().zip(c.iter()).fold(RealMatrix::zeros(2 * n, 2 * n), |acc, (e, &x)| acc + e * x);
            vectorize(&(&frame * local * &back))
        })
        .collect();
    let ortho = orthonormalize(&mapped, 1e-12);
    if ortho.len() != mapped.len() {
        return Err(Error::RankAmbiguous { value: 1e-12, threshold: 1e-12 });
    }
    let basis = ortho.iter().map(|v| unvectorize(v, 2 * n)).collect();
    Ok(BiPreservingAlgebra { basis, constraint_rank })
}

/// `[J_1, T J_1, ..., T^(n-1) J_1]`.
#[derive(Debug, Clone)]
pub struct RecursionBasis {
    pub fields: Vec<RealMatrix>,
}

pub fn recursion_basis(p: &CompatiblePair) -> RecursionBasis {
    let n = p.t1().complex_dim();
    let mut fields = Vec::with_capacity(n);
    let mut current = p.t1().j().clone();
    for _ in 0..n {
        let next = p.big_t() * &current;
        fields.push(current);
        current = next;
    }
    RecursionBasis { fields }
}

/// Relative residual of `[T A, T] = T [A, T]`, which holds exactly for any
/// constant `T` and `A`.
pub fn nijenhuis_residual(t: &RealMatrix, a: &RealMatrix) -> Result<f64> {
    let lhs = commutator(&(t * a), t)?;
    let rhs = t * commutator(a, t)?;
    let denom = t.norm() * t.norm() * a.norm();
    Ok(if denom == 0.0 { 0.0 } else { (lhs - rhs).norm() / denom })
}

#[derive(Debug, Clone, Serialize)]
pub struct RecursionCertificate {
    /// Worst preservation residual over the family, one check per tensor.
    pub preservation: Vec<Check>,
    /// Worst `|[A_i, A_j]| / (|A_i| |A_j|)`.
    pub commutation: Check,
    /// Dimension of the span of the family.
    pub rank: usize,
    pub expected_rank: usize,
    pub rank_ambiguous: bool,
    /// Normalized Lanczos residuals `h_k / |T|` of the Krylov sequence
    /// `T^k J_1`; the rank is one plus the number of leading entries above
    /// `rel`.
    pub krylov_residuals: Vec<f64>,
    /// Rank of the column-normalized monomials, for information only: they
    /// are Vandermonde-like and lose rank numerically before the span does.
    pub monomial_rank: RankReport,
    /// Distinct eigenvalue clusters of `T`.
    pub t_clusters: usize,
    /// `rank = min(clusters, n)`.
    pub vandermonde_consistent: bool,
    pub nijenhuis: Check,
}

impl RecursionCertificate {
    pub fn rank_passed(&self) -> bool {
        self.rank == self.expected_rank && !self.rank_ambiguous
    }

    pub fn passed(&self) -> bool {
        self.preservation.iter().all(|c| c.passed)
            && self.commutation.passed
            && self.rank_passed()
            && self.vandermonde_consistent
            && self.nijenhuis.passed
    }
}

pub const NIJENHUIS_TOL: f64 = 1e-12;

pub fn certify_recursion(rb: &RecursionBasis, p: &CompatiblePair) -> Result<RecursionCertificate> {
    let tol = p.tol();
    let rel = tol.rel();
    let n = p.t1().complex_dim();
    let (g1, w1, g2, w2) = (p.t1().g(), p.t1().omega(), p.t2().g(), p.t2().omega());

    let mut worst = [0.0f64; 4];
    for a in &rb.fields {
        let (o1, m1) = preservation_residuals(a, g1, w1);
        let (o2, m2) = preservation_residuals(a, g2, w2);
        for (w, r) in worst.iter_mut().zip([m1, o1, m2, o2]) {
            *w = w.max(r);
        }
    }
    let preservation = ["g1", "omega1", "g2", "omega2"]
        .iter()
        .zip(worst)
        .map(|(name, r)| Check::new(format!("T^k J1 preserves {name}"), r, rel))
        .collect();

    let mut comm = 0.0f64;
    for (i, a) in rb.fields.iter().enumerate() {
        for b in &rb.fields[i + 1..] {
            comm = comm.max(commutator(a, b)?.norm() / (a.norm() * b.norm()));
        }
    }
    let commutation = Check::new("[T^i J1, T^k J1] = 0", comm, rel);

    let eig = eig_self_adjoint(p.big_t(), g1, tol)?;
    let t_norm = eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let t_clusters = cluster_eigenvalues(&eig.values, tol.cluster_gap()).len();

    // Lanczos on X -> T X with <X, Y> = tr(X^T g1 Y), full reorthogonalization
    let inner = |x: &RealMatrix, y: &RealMatrix| (x.transpose() * g1 * y).trace();
    let mut krylov: Vec<RealMatrix> = Vec::new();
    let mut krylov_residuals = Vec::new();
    if let Some(first) = rb.fields.first() {
        krylov.push(first / inner(first, first).sqrt());
    }
    while krylov.len() < rb.fields.len() {
        let mut w = p.big_t() * krylov.last().expect("nonempty");
        for _ in 0..2 {
            for q in &krylov {
                let c = inner(q, &w);
                w -= q * c;
            }
        }
        let h = inner(&w, &w).max(0.0).sqrt();
        let normalized = if t_norm == 0.0 { 0.0 } else { h / t_norm };
        krylov_residuals.push(normalized);
        if normalized <= rel {
            break;
        }
        krylov.push(w / h);
    }
    let rank = krylov.len();
    let rank_ambiguous = krylov_residuals.iter().any(|&h| h > rel / RANK_BAND && h <= rel * RANK_BAND);

    let monomials: Vec<RealVector> = rb.fields.iter().map(|a| vectorize(a) / a.norm()).collect();
    let monomial_rank = if monomials.is_empty() {
        numerical_rank(&RealMatrix::zeros(0, 0), rel, 0.0)
    } else {
        numerical_rank(&RealMatrix::from_columns(&monomials), rel, 0.0)
    };

    let nijenhuis = Check::new("[T J1, T] = T [J1, T]", nijenhuis_residual(p.big_t(), p.t1().j())?, NIJENHUIS_TOL);

    Ok(RecursionCertificate {
        preservation,
        commutation,
        rank,
        expected_rank: n,
        rank_ambiguous,
        krylov_residuals,
        monomial_rank,
        t_clusters,
        vandermonde_consistent: rank == t_clusters.min(n),
        nijenhuis,
    })
}

/// `exp(t A)`. Uses `cos(c) I + sin(c)/c K` for `K = t A` when `K^2 = -c^2 I`,
/// and nalgebra's scaling-and-squaring exponential otherwise.
pub fn flow(field: &LinearField, t: f64) -> Result<RealMatrix> {
    if !t.is_finite() {
        return Err(Error::NonFinite);
    }
    let a = field.matrix();
    let n = a.nrows();
    let id = RealMatrix::identity(n, n);
    let k = a * t;
    let k2 = &k * &k;
    let c2 = -k2.trace() / n as f64;
    if c2 == 0.0 && k.norm() == 0.0 {
        return Ok(id);
    }
    if c2 > 0.0 && (&k2 + &id * c2).norm() <= 1e-12 * c2 * (n as f64).sqrt() {
        let c = c2.sqrt();
        return Ok(id * c.cos() + k * (c.sin() / c));
    }
    let e = k.exp();
    if e.iter().all(|v| v.is_finite()) {
        Ok(e)
    } else {
        Err(Error::Overflow(t.abs() * a.norm()))
    }
}

/// Worst finite-time drift `|O^T tau O - tau| / |tau|` of each tensor.
#[derive(Debug, Clone, Serialize)]
pub struct ConservationReport {
    pub g1: f64,
    pub omega1: f64,
    pub g2: f64,
    pub omega2: f64,
    pub samples: usize,
}

impl ConservationReport {
    pub fn max_drift(&self) -> f64 {
        self.g1.max(self.omega1).max(self.g2).max(self.omega2)
    }
}

pub fn conservation_probe(field: &LinearField, p: &CompatiblePair, times: &[f64]) -> Result<ConservationReport> {
    conservation_probe_with(field, p, times, Execution::default())
}

/// Flows are evaluated concurrently under `Execution::Parallel`; the maxima
/// are taken afterwards in input order.
pub fn conservation_probe_with(
    field: &LinearField,
    p: &CompatiblePair,
    times: &[f64],
    exec: Execution,
) -> Result<ConservationReport> {
    let tensors = [p.t1().g(), p.t1().omega(), p.t2().g(), p.t2().omega()];
    let drifts = par::map(exec, times, |&t| -> Result<[f64; 4]> {
        let o = flow(field, t)?;
        let ot = o.transpose();
        Ok(tensors.map(|tau| (&ot * tau * &o - tau).norm() / tau.norm()))
    });
    let mut worst = [0.0f64; 4];
    for d in drifts {
        for (w, v) in worst.iter_mut().zip(d?) {
            *w = w.max(v);
        }
    }
    let [g1, omega1, g2, omega2] = worst;
    Ok(ConservationReport { g1, omega1, g2, omega2, samples: times.len() })
}
