//! The complex formulation: two Hermitian forms on `C^n`, the operator
//! `F = h_1^-1 h_2` relating them, and its commutant and bicommutant.
//!
//! Forms are conjugate-linear in the first argument, `(x, y) = x^H h y`, so
//! `(x, y)_2 = (F x, y)_1` gives `F = h_1^-1 h_2` as matrices.

use nalgebra::{Complex, DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::compatibility::CompatiblePair;
use crate::decomposition::{decompose, Sign};
use crate::error::{Error, Result};
use crate::linalg::{cluster_eigenvalues, null_space, ComplexMatrix, RankReport, Tolerance, RANK_BAND};

fn c_scale(m: &ComplexMatrix) -> f64 {
    let inf = m.row_iter().map(|r| r.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max);
    inf.max(1.0)
}

fn hermitian_defect(m: &ComplexMatrix) -> f64 {
    (m - m.adjoint()).norm() / c_scale(m)
}

/// Ascending eigenvalues and matching unit eigenvectors of a Hermitian matrix.
fn sorted_hermitian_eigen(m: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = eig.eigenvectors.select_columns(&order);
    (values, vectors)
}

/// Positive-definite Hermitian form `x^H h y`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianForm(ComplexMatrix);

impl HermitianForm {
    /// Replaces `h` by its Hermitian part when the defect is below `tol.rel()`.
    pub fn new(h: ComplexMatrix, tol: &Tolerance) -> Result<Self> {
        if h.is_empty() {
            return Err(Error::Empty);
        }
        if !h.is_square() {
            return Err(Error::NotSquare { rows: h.nrows(), cols: h.ncols() });
        }
        if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let defect = hermitian_defect(&h);
        if defect > tol.rel() {
            return Err(Error::NotSelfAdjoint(defect));
        }
        let h = (&h + h.adjoint()) * Complex::new(0.5, 0.0);
        let (values, _) = sorted_hermitian_eigen(&h);
        if values[0] <= tol.rel() * c_scale(&h) {
            return Err(Error::NotPositiveDefinite(values[0]));
        }
        Ok(HermitianForm(h))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }
}

#[derive(Debug, Clone)]
pub struct OperatorF {
    f: ComplexMatrix,
    h1: HermitianForm,
    h2: HermitianForm,
    eigenvalues: Vec<f64>,
    eigenbasis: ComplexMatrix,
    tol: Tolerance,
}

impl OperatorF {
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.f
    }

    pub fn h1(&self) -> &HermitianForm {
        &self.h1
    }

    pub fn h2(&self) -> &HermitianForm {
        &self.h2
    }

    /// Ascending; all positive.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Columns are eigenvectors of `F`, orthonormal for `h_1`.
    pub fn eigenbasis(&self) -> &ComplexMatrix {
        &self.eigenbasis
    }

    pub fn dim(&self) -> usize {
        self.f.nrows()
    }

    /// Multiplicities of the eigenvalue clusters, in ascending order.
    pub fn multiplicities(&self) -> Vec<usize> {
        cluster_eigenvalues(&self.eigenvalues, self.tol.cluster_gap()).iter().map(|c| c.multiplicity).collect()
    }
}

/// `F = h_1^-1 h_2`, with its spectrum from the whitened pencil
/// `L^-1 h_2 L^-H`.
pub fn build_f(h1: &HermitianForm, h2: &HermitianForm, tol: &Tolerance) -> Result<OperatorF> {
    if h1.dim() != h2.dim() {
        return Err(Error::DimensionMismatch { expected: h1.dim(), found: h2.dim() });
    }
    let chol = h1.0.clone().cholesky().ok_or(Error::NotPositiveDefinite(0.0))?;
    let f = chol.solve(&h2.0);
    let l = chol.l();
    let l_inv = l.clone().try_inverse().ok_or(Error::NotPositiveDefinite(0.0))?;
    let whitened = &l_inv * &h2.0 * l_inv.adjoint();
    let whitened = (&whitened + whitened.adjoint()) * Complex::new(0.5, 0.0);
    let (eigenvalues, q) = sorted_hermitian_eigen(&whitened);
    if eigenvalues[0] <= 0.0 {
        return Err(Error::NotPositiveDefinite(eigenvalues[0]));
    }
    let eigenbasis = l_inv.adjoint() * q;

    // self-adjoint for both forms: h_a F Hermitian
    for h in [&h1.0, &h2.0] {
        let defect = hermitian_defect(&(h * &f)) / c_scale(h);
        if defect > tol.rel() * c_scale(&f) {
            return Err(Error::NotSelfAdjoint(defect));
        }
    }
    Ok(OperatorF { f, h1: h1.clone(), h2: h2.clone(), eigenvalues, eigenbasis, tol: *tol })
}

/// Best constants with `A |x|_2 <= |x|_1 <= B |x|_2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormBounds {
    pub a: f64,
    pub b: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// `|F|_1 - 1/B^2`; nonnegative when the lower half of the chain holds.
    pub lower_slack: f64,
    /// `1/A^2 - |F|_1`; nonnegative when the upper half holds.
    pub upper_slack: f64,
}

impl NormBounds {
    pub fn chain_holds(&self, slack: f64) -> bool {
        self.lower_slack >= -slack && self.upper_slack >= -slack
    }
}

/// `|x|_2^2 = (F x, x)_1` lies in `[lambda_min, lambda_max] |x|_1^2`, so
/// `A = 1/sqrt(lambda_max)` and `B = 1/sqrt(lambda_min)`. `|F|_1 = lambda_max`.
pub fn norm_bounds(f: &OperatorF) -> NormBounds {
    let lambda_min = f.eigenvalues[0];
    let lambda_max = *f.eigenvalues.last().expect("nonempty");
    let a = 1.0 / lambda_max.sqrt();
    let b = 1.0 / lambda_min.sqrt();
    let op_norm = lambda_max;
    NormBounds {
        a,
        b,
        lambda_min,
        lambda_max,
        lower_slack: op_norm - 1.0 / (b * b),
        upper_slack: 1.0 / (a * a) - op_norm,
    }
}

/// Frobenius-orthonormal basis of `{X : F X = X F}` and its rank report.
pub fn commutant_basis(f: &OperatorF) -> Result<(Vec<ComplexMatrix>, RankReport)> {
    let n = f.dim();
    let id = ComplexMatrix::identity(n, n);
    let system = id.kronecker(&f.f) - f.f.transpose().kronecker(&id);
    let (null, report) = null_space(&system, f.tol.rel(), 1.0)?;
    let basis = null.column_iter().map(|c| ComplexMatrix::from_column_slice(n, n, c.as_slice())).collect();
    Ok((basis, report))
}

pub fn commutant_dim(f: &OperatorF) -> Result<usize> {
    Ok(commutant_basis(f)?.0.len())
}

/// Basis of the joint commutant of the commutant, and the eigenvalues of the
/// normal matrix it was read from.
///
/// The joint null space of `K_j = I (x) X_j - X_j^T (x) I` is the null space
/// of `sum_j K_j^H K_j`, assembled from Kronecker identities without forming
/// any `K_j`. Its eigenvalues are squared singular values, so the cut is
/// `rel * mu_max`.
pub fn bicommutant_basis(f: &OperatorF) -> Result<(Vec<ComplexMatrix>, Vec<f64>)> {
    let n = f.dim();
    let (commutant, _) = commutant_basis(f)?;
    let id = ComplexMatrix::identity(n, n);
    let mut left = ComplexMatrix::zeros(n, n);
    let mut right = ComplexMatrix::zeros(n, n);
    let mut cross = ComplexMatrix::zeros(n * n, n * n);
    for x in &commutant {
        left += x.adjoint() * x;
        right += x.conjugate() * x.transpose();
        cross += x.transpose().kronecker(&x.adjoint()) + x.conjugate().kronecker(x);
    }
    let normal = id.kronecker(&left) - cross + right.kronecker(&id);
    let normal = (&normal + normal.adjoint()) * Complex::new(0.5, 0.0);
    let (mu, vectors) = sorted_hermitian_eigen(&normal);
    let mu_max = mu.last().copied().unwrap_or(0.0).max(1.0);
    let cut = f.tol.rel() * mu_max;
    if let Some(&m) = mu.iter().find(|&&m| m > cut / RANK_BAND && m <= cut * RANK_BAND) {
        return Err(Error::RankAmbiguous { value: m, threshold: cut });
    }
    let basis = mu
        .iter()
        .enumerate()
        .filter(|(_, &m)| m <= cut)
        .map(|(i, _)| ComplexMatrix::from_column_slice(n, n, vectors.column(i).as_slice()))
        .collect();
    Ok((basis, mu))
}

/// Cross-checked against the minimal polynomial: `F` is diagonalizable, so
/// `F''` is spanned by powers of `F` and has one dimension per distinct eigenvalue.
pub fn bicommutant_dim(f: &OperatorF) -> Result<usize> {
    let (basis, mu) = bicommutant_basis(f)?;
    let distinct = f.multiplicities().len();
    if basis.len() != distinct {
        let value = mu.get(distinct.min(mu.len().saturating_sub(1))).copied().unwrap_or(f64::NAN);
        return Err(Error::RankAmbiguous { value, threshold: f.tol.rel() });
    }
    Ok(basis.len())
}

/// `F'' = F'`, cross-checked against simplicity of every eigenvalue cluster.
pub fn is_generic_f(f: &OperatorF) -> Result<bool> {
    let generic = commutant_dim(f)? == bicommutant_dim(f)?;
    let simple = f.multiplicities().iter().all(|&m| m == 1);
    if generic != simple {
        return Err(Error::RankAmbiguous { value: f64::NAN, threshold: f.tol.cluster_gap() });
    }
    Ok(generic)
}

#[derive(Debug, Clone)]
pub struct BiunitarySample {
    pub u: ComplexMatrix,
    /// `|U^H h_a U - h_a| / |h_a|` for `a = 1, 2`.
    pub residuals: [f64; 2],
}

/// `exp(i p(F) t)` for the real polynomial `p(x) = sum_k coeffs[k] x^k`,
/// computed on the eigenbasis of `F`.
pub fn biunitary_sample(f: &OperatorF, poly_coeffs: &[f64], t: f64) -> Result<BiunitarySample> {
    if !t.is_finite() || poly_coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite);
    }
    let p = |x: f64| poly_coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c);
    let phases = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        f.dim(),
        f.eigenvalues.iter().map(|&l| Complex::from_polar(1.0, p(l) * t)),
    ));
    let v = &f.eigenbasis;
    let u = v * phases * v.adjoint() * f.h1.matrix();
    let residual = |h: &ComplexMatrix| (u.adjoint() * h * &u - h).norm() / h.norm();
    let residuals = [residual(f.h1.matrix()), residual(f.h2.matrix())];
    Ok(BiunitarySample { u, residuals })
}

/// Hermitian forms of a real compatible pair on `C^n`, with complex
/// multiplication `(a + ib) x = a x + b J_1 x`.
#[derive(Debug, Clone)]
pub struct Complexified {
    pub h1: HermitianForm,
    pub h2: HermitianForm,
    /// Sign of each block of the real decomposition. On `-` blocks `omega_2`
    /// is anti-linear for `J_1`, so `h_2` is taken conjugated there.
    pub sign_pattern: Vec<Sign>,
}

/// Builds `h_a(e_k, e_l) = g_a(e_k, e_l) + i g_a(J_1 e_k, e_l)` on the
/// adapted frame of triple 1. This is the form of `(g_a, omega_a)` wherever
/// `J_a = J_1` and its conjugate where `J_a = -J_1`.
pub fn complexify(p: &CompatiblePair) -> Result<Complexified> {
    let frame = p.t1().adapted_frame();
    let n = p.t1().complex_dim();
    let j1 = p.t1().j();
    let form = |g: &crate::linalg::RealMatrix| {
        let gf = g * &frame;
        let jf = j1 * &frame;
        DMatrix::from_fn(n, n, |k, l| {
            let (ek, el) = (frame.column(2 * k), gf.column(2 * l));
            Complex::new(ek.dot(&el), jf.column(2 * k).dot(&el))
        })
    };
    let tol = p.tol();
    let h1 = HermitianForm::new(form(p.t1().g()), tol)?;
    let h2 = HermitianForm::new(form(p.t2().g()), tol)?;
    let sign_pattern = decompose(p)?.blocks().iter().map(|b| b.sign).collect();
    Ok(Complexified { h1, h2, sign_pattern })
}
