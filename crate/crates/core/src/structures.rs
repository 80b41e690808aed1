//! Single-structure objects: metrics, symplectic forms, complex structures,
//! admissible triples and the linear fields and quadratic functions built on
//! them.
//!
//! Matrix conventions used throughout the crate:
//!
//! * a metric `g` and a symplectic form `omega` evaluate as `x^T g y` and
//!   `x^T omega y`;
//! * the complex structure of a triple is `J = g^-1 omega`, so `omega = g J`;
//! * a linear field `X_A` and the (1,1) tensor `T_A` share the matrix `A`.

use nalgebra::SVD;

use crate::error::{Check, Error, Result, Violation};
use crate::linalg::{
    asymmetry, cholesky, commutator, ensure_same_dim, ensure_square, eig_self_adjoint, min_eigenvalue, scale,
    skewness_defect, symmetric_part, RealMatrix, RealVector, Tolerance,
};

/// Symmetric positive-definite bilinear form.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTensor(RealMatrix);

impl MetricTensor {
    /// Symmetrizes inputs whose asymmetry is below `tol.rel()` and rejects the rest.
    pub fn new(m: RealMatrix, tol: &Tolerance) -> Result<Self> {
        ensure_square(&m)?;
        let asym = asymmetry(&m);
        if asym > tol.rel() {
            return Err(Error::NotSymmetric(asym));
        }
        let m = symmetric_part(&m);
        let lo = min_eigenvalue(&m);
        if lo <= tol.rel() * scale(&m) {
            return Err(Error::NotPositiveDefinite(lo));
        }
        Ok(MetricTensor(m))
    }

    pub fn matrix(&self) -> &RealMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }
}

/// Antisymmetric nondegenerate bilinear form on an even-dimensional space.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticForm(RealMatrix);

impl SymplecticForm {
    pub fn new(m: RealMatrix, tol: &Tolerance) -> Result<Self> {
        let n = ensure_square(&m)?;
        if n % 2 != 0 {
            return Err(Error::OddDimension(n));
        }
        let defect = skewness_defect(&m);
        if defect > tol.rel() {
            return Err(Error::NotAntisymmetric(defect));
        }
        let m = (&m - m.transpose()) * 0.5;
        let smin = SVD::new(m.clone(), false, false).singular_values.min();
        if smin <= tol.rel() * scale(&m) {
            return Err(Error::Degenerate(smin));
        }
        Ok(SymplecticForm(m))
    }

    /// `S + S + ... + S` with `S = [[0, 1], [-1, 0]]`.
    pub fn standard(dim: usize) -> Result<Self> {
        if dim == 0 || !dim.is_multiple_of(2) {
            return Err(Error::OddDimension(dim));
        }
        Ok(SymplecticForm(standard_omega(dim)))
    }

    pub fn matrix(&self) -> &RealMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }
}

pub fn standard_omega(dim: usize) -> RealMatrix {
    let mut m = RealMatrix::zeros(dim, dim);
    for k in (0..dim).step_by(2) {
        m[(k, k + 1)] = 1.0;
        m[(k + 1, k)] = -1.0;
    }
    m
}

/// Linear operator with `J^2 = -I`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexStructure(RealMatrix);

impl ComplexStructure {
    pub fn new(m: RealMatrix, tol: &Tolerance) -> Result<Self> {
        let n = ensure_square(&m)?;
        let r = square_defect(&m);
        if r > tol.rel() * n as f64 {
            return Err(Error::NotComplexStructure(r));
        }
        Ok(ComplexStructure(m))
    }

    pub fn matrix(&self) -> &RealMatrix {
        &self.0
    }
}

/// `|J^2 + I|_F`.
fn square_defect(j: &RealMatrix) -> f64 {
    let n = j.nrows();
    (j * j + RealMatrix::identity(n, n)).norm()
}

/// A validated `(g, omega, J)` with `J = g^-1 omega`, `J^2 = -I` and `g`
/// Hermitian with respect to `J`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibleTriple {
    g: MetricTensor,
    omega: SymplecticForm,
    j: ComplexStructure,
}

impl AdmissibleTriple {
    pub fn g(&self) -> &RealMatrix {
        self.g.matrix()
    }

    pub fn omega(&self) -> &RealMatrix {
        self.omega.matrix()
    }

    pub fn j(&self) -> &RealMatrix {
        self.j.matrix()
    }

    pub fn metric(&self) -> &MetricTensor {
        &self.g
    }

    pub fn symplectic(&self) -> &SymplecticForm {
        &self.omega
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    /// Half the real dimension.
    pub fn complex_dim(&self) -> usize {
        self.dim() / 2
    }

    /// Residuals of every triple invariant, all relative to the scale of
    /// the tensor involved.
    pub fn certificate(&self, tol: &Tolerance) -> Vec<Check> {
        triple_checks(self.g(), self.omega(), self.j(), tol)
    }

    /// `g`-orthonormal basis `(e_1, J e_1, ..., e_n, J e_n)` built by
    /// pivoted complex Gram-Schmidt from the standard basis. In it `g`
    /// becomes the identity and `J` becomes `[[0,-1],[1,0]]` blockwise.
    pub fn adapted_frame(&self) -> RealMatrix {
        let dim = self.dim();
        hermitian_frame(&RealMatrix::identity(dim, dim), self.g(), self.j(), dim)
    }
}

/// Pivoted complex Gram-Schmidt: picks, among `candidates` (columns spanning
/// a `J`-invariant subspace), the one with the largest `g`-norm remainder,
/// normalizes it to `e` and appends `e, J e`, until `target_dim` columns
/// exist. Each `e` is signed so its largest entry is positive.
pub(crate) fn hermitian_frame(candidates: &RealMatrix, g: &RealMatrix, j: &RealMatrix, target_dim: usize) -> RealMatrix {
    let mut frame: Vec<RealVector> = Vec::with_capacity(target_dim);
    let mut g_frame: Vec<RealVector> = Vec::with_capacity(target_dim);
    let residual = |v: RealVector, frame: &[RealVector], g_frame: &[RealVector]| {
        let mut w = v;
        for _ in 0..2 {
            for (q, gq) in frame.iter().zip(g_frame) {
                let c = gq.dot(&w);
                w.axpy(-c, q, 1.0);
            }
        }
        w
    };
    let g_norm = |w: &RealVector| w.dot(&(g * w)).max(0.0).sqrt();
    while frame.len() < target_dim {
        let mut best: Option<(f64, RealVector)> = None;
        for c in candidates.column_iter() {
            let w = residual(c.into_owned(), &frame, &g_frame);
            let norm = g_norm(&w);
            if best.as_ref().is_none_or(|(b, _)| norm > *b) {
                best = Some((norm, w));
            }
        }
        let Some((norm, w)) = best else { break };
        if norm == 0.0 {
            break;
        }
        let e = residual(w / norm, &frame, &g_frame);
        let mut e = &e / g_norm(&e);
        let pivot = e.iamax();
        if e[pivot] < 0.0 {
            e.neg_mut();
        }
        let je = j * &e;
        g_frame.push(g * &e);
        frame.push(e);
        g_frame.push(g * &je);
        frame.push(je);
    }
    RealMatrix::from_columns(&frame)
}

fn triple_checks(g: &RealMatrix, omega: &RealMatrix, j: &RealMatrix, tol: &Tolerance) -> Vec<Check> {
    let n = g.nrows();
    let rel = tol.rel();
    vec![
        Check::new("J^2 = -I", square_defect(j), rel * n as f64),
        Check::new("J^T g J = g", (j.transpose() * g * j - g).norm() / scale(g), rel),
        Check::new("g J + J^T g = 0", (g * j + j.transpose() * g).norm() / scale(g), rel),
        Check::new("J^T omega J = omega", (j.transpose() * omega * j - omega).norm() / scale(omega), rel),
    ]
}

/// Residual checks of the admissibility test for `(g, omega)` together with
/// `J = g^-1 omega`.
pub fn admissibility_checks(
    g: &MetricTensor,
    omega: &SymplecticForm,
    tol: &Tolerance,
) -> Result<(RealMatrix, Vec<Check>)> {
    ensure_same_dim(g.matrix(), omega.matrix())?;
    let j = cholesky(g.matrix())?.solve(omega.matrix());
    let checks = triple_checks(g.matrix(), omega.matrix(), &j, tol);
    Ok((j, checks))
}

/// Builds `J = g^-1 omega` and accepts the pair iff `J^2 = -I` (with the
/// remaining triple invariants) holds within tolerance.
pub fn check_admissible(g: &MetricTensor, omega: &SymplecticForm, tol: &Tolerance) -> Result<AdmissibleTriple> {
    let (j, checks) = admissibility_checks(g, omega, tol)?;
    if checks.iter().any(|c| !c.passed) {
        return Err(Violation { subject: "admissibility".into(), checks }.into());
    }
    Ok(AdmissibleTriple { g: g.clone(), omega: omega.clone(), j: ComplexStructure(j) })
}

/// `g_s = (J^T g J + g) / 2`, the `J`-Hermitian average of `g`.
pub fn symmetrize_metric(g: &RealMatrix, j: &ComplexStructure, tol: &Tolerance) -> Result<MetricTensor> {
    let g = MetricTensor::new(g.clone(), tol)?;
    ensure_same_dim(g.matrix(), j.matrix())?;
    let jm = j.matrix();
    let gs = (jm.transpose() * g.matrix() * jm + g.matrix()) * 0.5;
    MetricTensor::new(gs, tol)
}

/// Repairs a non-admissible `(g, omega)` by polar decomposition of the Riesz
/// operator `A = g^-1 omega`: with `P = (-A^2)^{1/2}` (as a `g`-self-adjoint
/// operator) the triple `(g P, omega, A P^-1)` is admissible.
pub fn polar_admissible(g: &MetricTensor, omega: &SymplecticForm, tol: &Tolerance) -> Result<AdmissibleTriple> {
    let dim = ensure_same_dim(g.matrix(), omega.matrix())?;
    let gm = g.matrix();
    let a = cholesky(gm)?.solve(omega.matrix());
    let skew = (gm * &a + a.transpose() * gm).norm() / (scale(gm) * scale(&a));
    if skew > tol.rel() {
        return Err(Error::NotSkewAdjoint(skew));
    }
    let neg_sq = -(&a * &a);
    let eig = eig_self_adjoint(&neg_sq, gm, tol)?;
    let lo = eig.values.first().copied().unwrap_or(0.0);
    if lo <= tol.rel() * scale(&neg_sq) {
        return Err(Error::Degenerate(lo));
    }
    let b = &eig.basis;
    // b^-1 = b^T g for g-orthonormal columns
    let b_inv = b.transpose() * gm;
    let diag = |f: fn(f64) -> f64| RealMatrix::from_diagonal(&RealVector::from_iterator(dim, eig.values.iter().map(|&v| f(v))));
    let p = b * diag(f64::sqrt) * &b_inv;
    let g_omega = symmetric_part(&(gm * &p));
    check_admissible(&MetricTensor::new(g_omega, tol)?, omega, tol)
}

/// Completes a metric to an admissible triple `(g, g J, J)`, taking `J` from
/// the polar construction against the standard symplectic form.
pub fn admissible_from_metric(g: &MetricTensor, tol: &Tolerance) -> Result<AdmissibleTriple> {
    let seed = SymplecticForm::standard(g.dim())?;
    let j = polar_admissible(g, &seed, tol)?.j().clone();
    let omega = SymplecticForm::new(g.matrix() * &j, tol)?;
    check_admissible(g, &omega, tol)
}

/// `h(x, y) = g(x, y) + i omega(x, y)` with `omega(x, y) = x^T omega y = g(x, J y)`.
pub fn hermitian_value(t: &AdmissibleTriple, x: &RealVector, y: &RealVector) -> Result<(f64, f64)> {
    if x.len() != t.dim() || y.len() != t.dim() {
        return Err(Error::DimensionMismatch { expected: t.dim(), found: x.len().max(y.len()) });
    }
    let re = x.dot(&(t.g() * y));
    let im = x.dot(&(t.omega() * y));
    Ok((re, im))
}

/// Linear vector field `x -> A x`; its matrix also serves as the (1,1) tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearField(RealMatrix);

impl LinearField {
    pub fn new(a: RealMatrix) -> Result<Self> {
        ensure_square(&a)?;
        Ok(LinearField(a))
    }

    /// The dilation field, matrix `I`.
    pub fn liouville(dim: usize) -> Self {
        LinearField(RealMatrix::identity(dim, dim))
    }

    pub fn matrix(&self) -> &RealMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> RealMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }
}

/// Quadratic function `x -> x^T f x / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm(RealMatrix);

impl QuadraticForm {
    pub fn new(f: RealMatrix, tol: &Tolerance) -> Result<Self> {
        ensure_square(&f)?;
        let asym = asymmetry(&f);
        if asym > tol.rel() {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(QuadraticForm(symmetric_part(&f)))
    }

    /// `g(Delta, Delta) / 2` for the metric of a triple.
    pub fn energy(t: &AdmissibleTriple) -> Self {
        QuadraticForm(t.g().clone())
    }

    pub fn matrix(&self) -> &RealMatrix {
        &self.0
    }

    pub fn value(&self, x: &RealVector) -> f64 {
        0.5 * x.dot(&(&self.0 * x))
    }
}

/// The phase generator `Gamma = J(Delta)`, i.e. the field with matrix `J`.
pub fn gamma_field(t: &AdmissibleTriple) -> LinearField {
    LinearField(t.j().clone())
}

/// `|-omega^-1 g - J|_F / scale(J)`: the Hamiltonian field of `g/2` under
/// `i_Gamma omega = -d(g/2)` must be `J`.
pub fn gamma_residual(t: &AdmissibleTriple) -> f64 {
    let hamiltonian = -t.omega().clone().lu().solve(t.g()).expect("omega is nondegenerate");
    (hamiltonian - t.j()).norm() / scale(t.j())
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Preservation {
    pub preserves: bool,
    /// `|omega A - (omega A)^T| / |omega A|`.
    pub omega_residual: f64,
    /// `|g A + (g A)^T| / |g A|`.
    pub metric_residual: f64,
}

/// Whether the linear field preserves both tensors of the triple: `omega A`
/// symmetric and `g A` skew.
pub fn field_preserves(field: &LinearField, t: &AdmissibleTriple, tol: &Tolerance) -> Result<Preservation> {
    ensure_same_dim(field.matrix(), t.g())?;
    let (omega_residual, metric_residual) = preservation_residuals(field.matrix(), t.g(), t.omega());
    Ok(Preservation {
        preserves: omega_residual <= tol.rel() && metric_residual <= tol.rel(),
        omega_residual,
        metric_residual,
    })
}

pub(crate) fn preservation_residuals(a: &RealMatrix, g: &RealMatrix, omega: &RealMatrix) -> (f64, f64) {
    let ratio = |num: f64, den: f64| if num == 0.0 { 0.0 } else { num / den };
    let wa = omega * a;
    let ga = g * a;
    (
        ratio((&wa - wa.transpose()).norm(), wa.norm()),
        ratio((&ga + ga.transpose()).norm(), ga.norm()),
    )
}

/// `O(t) = cos(t) I + sin(t) J`.
pub fn phase_group(t: &AdmissibleTriple, time: f64) -> RealMatrix {
    let n = t.dim();
    RealMatrix::identity(n, n) * time.cos() + t.j() * time.sin()
}

/// `[X_A, X_B] = -X_[A,B]`.
pub fn lie_bracket_fields(x: &LinearField, y: &LinearField) -> Result<LinearField> {
    Ok(LinearField(-commutator(x.matrix(), y.matrix())?))
}

/// Matrix of the Hamiltonian field of `x^T f x / 2`: `-omega^-1 f`.
pub fn hamiltonian_matrix(f: &QuadraticForm, omega: &SymplecticForm) -> Result<RealMatrix> {
    ensure_same_dim(f.matrix(), omega.matrix())?;
    let lu = omega.matrix().clone().lu();
    lu.solve(f.matrix())
        .map(|m| -m)
        .ok_or(Error::Degenerate(0.0))
}

/// `{f, h} = omega(X_h, X_f)`, returned as the quadratic form whose value
/// equals the bracket pointwise.
pub fn poisson_bracket(f: &QuadraticForm, h: &QuadraticForm, omega: &SymplecticForm) -> Result<QuadraticForm> {
    let mf = hamiltonian_matrix(f, omega)?;
    let mh = hamiltonian_matrix(h, omega)?;
    let q = mh.transpose() * omega.matrix() * mf;
    Ok(QuadraticForm(&q + q.transpose()))
}
