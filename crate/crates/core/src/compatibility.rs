//! Compatibility of two admissible triples, the derived tensors
//! `G = g_1^-1 g_2` and `T = omega_1^-1 omega_2`, and the pencil
//! `g_1 + gamma g_2`, `omega_1 + gamma omega_2`.

use serde::Serialize;

use crate::decomposition::{decompose, Sign};
use crate::error::{Check, Error, Result, Violation};
use crate::linalg::{
    cholesky, commutator, ensure_same_dim, eig_self_adjoint, metric_adjoint, restrict, scale, RealMatrix,
    Tolerance,
};
use crate::structures::{hamiltonian_matrix, poisson_bracket, AdmissibleTriple, MetricTensor, QuadraticForm, SymplecticForm};

/// Two compatible triples with their `G`, `T` tensors and the residuals
/// that certified them.
#[derive(Debug, Clone)]
pub struct CompatiblePair {
    t1: AdmissibleTriple,
    t2: AdmissibleTriple,
    big_g: RealMatrix,
    big_t: RealMatrix,
    tol: Tolerance,
    certificate: Vec<Check>,
}

impl CompatiblePair {
    pub fn t1(&self) -> &AdmissibleTriple {
        &self.t1
    }

    pub fn t2(&self) -> &AdmissibleTriple {
        &self.t2
    }

    /// `G = g_1^-1 g_2`.
    pub fn big_g(&self) -> &RealMatrix {
        &self.big_g
    }

    /// `T = omega_1^-1 omega_2`, the recursion operator.
    pub fn big_t(&self) -> &RealMatrix {
        &self.big_t
    }

    pub fn tol(&self) -> &Tolerance {
        &self.tol
    }

    pub fn certificate(&self) -> &[Check] {
        &self.certificate
    }

    pub fn dim(&self) -> usize {
        self.t1.dim()
    }
}

fn rel_norm(m: &RealMatrix, scales: &[&RealMatrix]) -> f64 {
    m.norm() / scales.iter().map(|s| scale(s)).product::<f64>()
}

fn is_sym(m: &RealMatrix) -> RealMatrix {
    m - m.transpose()
}

fn is_skew(m: &RealMatrix) -> RealMatrix {
    m + m.transpose()
}

/// Every residual behind a compatibility verdict: the four matrix
/// conditions, the commutation and bracket consequences, and the `G`/`T`
/// invariants. Returns the checks with `G` and `T`.
pub fn compatibility_checks(
    t1: &AdmissibleTriple,
    t2: &AdmissibleTriple,
    tol: &Tolerance,
) -> Result<(Vec<Check>, RealMatrix, RealMatrix)> {
    ensure_same_dim(t1.g(), t2.g())?;
    let rel = tol.rel();
    let (g1, w1, j1) = (t1.g(), t1.omega(), t1.j());
    let (g2, w2, j2) = (t2.g(), t2.omega(), t2.j());

    let big_g = cholesky(g1)?.solve(g2);
    let big_t = w1.clone().lu().solve(w2).ok_or(Error::Degenerate(0.0))?;

    let e1 = QuadraticForm::energy(t1);
    let e2 = QuadraticForm::energy(t2);
    let bracket = |w: &SymplecticForm| -> Result<f64> {
        let b = poisson_bracket(&e1, &e2, w)?;
        let m1 = hamiltonian_matrix(&e1, w)?;
        let m2 = hamiltonian_matrix(&e2, w)?;
        Ok(rel_norm(b.matrix(), &[&m2, w.matrix(), &m1]))
    };

    let checks = vec![
        Check::new("g2 J1 + J1^T g2 = 0", rel_norm(&is_skew(&(g2 * j1)), &[g2, j1]), rel),
        Check::new("omega2 J1 symmetric", rel_norm(&is_sym(&(w2 * j1)), &[w2, j1]), rel),
        Check::new("g1 J2 + J2^T g1 = 0", rel_norm(&is_skew(&(g1 * j2)), &[g1, j2]), rel),
        Check::new("omega1 J2 symmetric", rel_norm(&is_sym(&(w1 * j2)), &[w1, j2]), rel),
        Check::new("[J1,J2] = 0", rel_norm(&commutator(j1, j2)?, &[j1, j2]), rel),
        Check::new("{g1,g2}_1 = 0", bracket(t1.symplectic())?, rel),
        Check::new("{g1,g2}_2 = 0", bracket(t2.symplectic())?, rel),
        Check::new("[G,T] = 0", rel_norm(&commutator(&big_g, &big_t)?, &[&big_g, &big_t]), rel),
        Check::new("G = -J1 T J2", rel_norm(&(&big_g + j1 * &big_t * j2), &[j1, &big_t, j2]), rel),
        Check::new("G g1-self-adjoint", rel_norm(&is_sym(&(g1 * &big_g)), &[g1, &big_g]), rel),
        Check::new("G g2-self-adjoint", rel_norm(&is_sym(&(g2 * &big_g)), &[g2, &big_g]), rel),
        Check::new("T g1-self-adjoint", rel_norm(&is_sym(&(g1 * &big_t)), &[g1, &big_t]), rel),
        Check::new("T g2-self-adjoint", rel_norm(&is_sym(&(g2 * &big_t)), &[g2, &big_t]), rel),
    ];
    Ok((checks, big_g, big_t))
}

/// Accepts the pair iff `Gamma_1 = J_1` preserves `(g_2, omega_2)`, `Gamma_2`
/// preserves `(g_1, omega_1)`, and every derived invariant holds.
pub fn check_compatible(t1: &AdmissibleTriple, t2: &AdmissibleTriple, tol: &Tolerance) -> Result<CompatiblePair> {
    let (checks, big_g, big_t) = compatibility_checks(t1, t2, tol)?;
    if checks.iter().any(|c| !c.passed) {
        return Err(Violation { subject: "compatibility".into(), checks }.into());
    }
    Ok(CompatiblePair { t1: t1.clone(), t2: t2.clone(), big_g, big_t, tol: *tol, certificate: checks })
}

/// Residuals of the full relation suite between `G`, `T`, `J_1`, `J_2` and
/// both metrics, computed from explicit metric adjoints.
pub fn verify_relation_suite(p: &CompatiblePair) -> Result<Vec<Check>> {
    let rel = p.tol.rel();
    let (g1, g2) = (p.t1.g(), p.t2.g());
    let (j1, j2) = (p.t1.j(), p.t2.j());
    let (bg, bt) = (&p.big_g, &p.big_t);
    let adj_defect = |a: &RealMatrix, g: &RealMatrix, sign: f64| -> Result<f64> {
        Ok((metric_adjoint(a, g)? - a * sign).norm() / scale(a))
    };
    Ok(vec![
        Check::new("G = -J1 T J2", rel_norm(&(bg + j1 * bt * j2), &[j1, bt, j2]), rel),
        Check::new("[G,J1] = 0", rel_norm(&commutator(bg, j1)?, &[bg, j1]), rel),
        Check::new("[G,J2] = 0", rel_norm(&commutator(bg, j2)?, &[bg, j2]), rel),
        Check::new("[T,J1] = 0", rel_norm(&commutator(bt, j1)?, &[bt, j1]), rel),
        Check::new("[T,J2] = 0", rel_norm(&commutator(bt, j2)?, &[bt, j2]), rel),
        Check::new("[G,T] = 0", rel_norm(&commutator(bg, bt)?, &[bg, bt]), rel),
        Check::new("(G^+)_1 = G", adj_defect(bg, g1, 1.0)?, rel),
        Check::new("(G^+)_2 = G", adj_defect(bg, g2, 1.0)?, rel),
        Check::new("(T^+)_1 = T", adj_defect(bt, g1, 1.0)?, rel),
        Check::new("(T^+)_2 = T", adj_defect(bt, g2, 1.0)?, rel),
        Check::new("(J1^+)_2 = -J1", adj_defect(j1, g2, -1.0)?, rel),
        Check::new("(J2^+)_1 = -J2", adj_defect(j2, g1, -1.0)?, rel),
        Check::new("g1(Gx,y) = g2(x,y)", (bg.transpose() * g1 - g2).norm() / scale(g2), rel),
    ])
}

#[derive(Debug, Clone, Serialize)]
pub struct PencilBlock {
    pub lambda: f64,
    pub sign: Sign,
    pub dim: usize,
    /// `(1 + sign gamma lambda) / (1 + gamma lambda)`: `J_gamma` on the block
    /// is this multiple of `J_1`.
    pub predicted_factor: f64,
    /// Matrix of `J_gamma^2` on the block in its `g_1`-orthonormal basis.
    #[serde(skip)]
    pub j_squared: RealMatrix,
    /// `|J_gamma^2 + I|_F` on the block.
    pub residual: f64,
    pub admissible: bool,
}

#[derive(Debug, Clone)]
pub struct PencilMember {
    pub gamma: f64,
    pub g_gamma: RealMatrix,
    pub omega_gamma: RealMatrix,
    /// `g_gamma^-1 omega_gamma`.
    pub j_gamma: RealMatrix,
    /// `|J_gamma^2 + I|_F` on the whole space.
    pub residual: f64,
    pub admissible: bool,
    pub blocks: Vec<PencilBlock>,
}

/// Builds `(g_1 + gamma g_2, omega_1 + gamma omega_2, J_gamma)` and reports
/// whether it is admissible globally and on each joint eigenspace.
pub fn pencil_member(p: &CompatiblePair, gamma: f64) -> Result<PencilMember> {
    let tol = p.tol;
    let g_gamma = p.t1.g() + p.t2.g() * gamma;
    let omega_gamma = p.t1.omega() + p.t2.omega() * gamma;
    let metric = MetricTensor::new(g_gamma.clone(), &tol).map_err(|_| Error::PencilNotPositive(gamma))?;
    let j_gamma = cholesky(metric.matrix())?.solve(&omega_gamma);
    let dim = p.dim();
    let residual = (&j_gamma * &j_gamma + RealMatrix::identity(dim, dim)).norm();
    let admissible = residual <= tol.rel() * dim as f64;

    let d = decompose(p)?;
    let blocks = d
        .blocks()
        .iter()
        .map(|b| {
            let jb = restrict(&j_gamma, &b.basis, p.t1.g());
            let j_squared = &jb * &jb;
            let residual = (&j_squared + RealMatrix::identity(b.dim, b.dim)).norm();
            PencilBlock {
                lambda: b.lambda,
                sign: b.sign,
                dim: b.dim,
                predicted_factor: (1.0 + b.sign.value() * gamma * b.lambda) / (1.0 + gamma * b.lambda),
                j_squared,
                residual,
                admissible: residual <= tol.rel() * b.dim as f64,
            }
        })
        .collect();
    Ok(PencilMember { gamma, g_gamma, omega_gamma, j_gamma, residual, admissible, blocks })
}

/// Open interval of `gamma` for which `g_1 + gamma g_2` is positive-definite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PositivityRange {
    pub lower: f64,
    /// Always `+inf`: every eigenvalue of `G` is positive.
    #[serde(serialize_with = "serialize_unbounded")]
    pub upper: f64,
}

fn serialize_unbounded<S: serde::Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

impl PositivityRange {
    pub fn contains(&self, gamma: f64) -> bool {
        gamma > self.lower && gamma < self.upper
    }
}

/// `g_gamma = g_1 (I + gamma G)` is positive-definite iff `1 + gamma lambda > 0`
/// for every eigenvalue `lambda` of `G`.
pub fn positivity_range(p: &CompatiblePair) -> Result<PositivityRange> {
    let eig = eig_self_adjoint(&p.big_g, p.t1.g(), &p.tol)?;
    let lambda_max = eig.values.last().copied().unwrap_or(1.0);
    Ok(PositivityRange { lower: -1.0 / lambda_max, upper: f64::INFINITY })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structures::check_admissible;
    use nalgebra::dmatrix;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn triple(g: RealMatrix, w: RealMatrix) -> AdmissibleTriple {
        check_admissible(&MetricTensor::new(g, &tol()).unwrap(), &SymplecticForm::new(w, &tol()).unwrap(), &tol())
            .unwrap()
    }

    /// Admissible "+" triple for a diagonal 2D metric.
    fn diag2(a: f64, b: f64) -> AdmissibleTriple {
        let s = (a * b).sqrt();
        triple(dmatrix![a, 0.0; 0.0, b], dmatrix![0.0, s; -s, 0.0])
    }

    #[test]
    fn compatible_2d_reference() {
        let p = check_compatible(&diag2(1.0, 4.0), &diag2(2.0, 8.0), &tol()).unwrap();
        assert!((p.big_g() - dmatrix![2.0, 0.0; 0.0, 2.0]).norm() < 1e-15);
        assert!((p.big_t() - dmatrix![2.0, 0.0; 0.0, 2.0]).norm() < 1e-15);
        assert!(verify_relation_suite(&p).unwrap().iter().all(|c| c.residual < 1e-12));
    }

    #[test]
    fn incompatible_2d_reference() {
        let err = check_compatible(&diag2(1.0, 4.0), &diag2(2.0, 6.0), &tol()).unwrap_err();
        let Error::Violation(v) = err else { panic!() };
        assert!(v.failed_names().contains(&"[J1,J2] = 0".to_string()));
        // J1 = [[0,2],[-1/2,0]], J2 = [[0,sqrt3],[-1/sqrt3,0]]:
        // [J1,J2] = diag(-1/(2 sqrt3), 1/(2 sqrt3)) by hand
        let j1 = diag2(1.0, 4.0).j().clone();
        let j2 = diag2(2.0, 6.0).j().clone();
        let c = commutator(&j1, &j2).unwrap();
        let entry = 1.0 / (2.0 * 3f64.sqrt());
        assert!((c - dmatrix![-entry, 0.0; 0.0, entry]).norm() < 1e-15);
    }

    #[test]
    fn self_compatibility() {
        let t = diag2(3.0, 0.5);
        let p = check_compatible(&t, &t, &tol()).unwrap();
        assert!((p.big_g() - RealMatrix::identity(2, 2)).norm() < 1e-15);
        assert!((p.big_t() - RealMatrix::identity(2, 2)).norm() < 1e-15);
        assert!(verify_relation_suite(&p).unwrap().iter().all(|c| c.residual < 1e-14));
        let r = positivity_range(&p).unwrap();
        assert!((r.lower + 1.0).abs() < 1e-15 && r.upper.is_infinite());
    }

    #[test]
    fn verdict_is_symmetric() {
        let (a, b, c) = (diag2(1.0, 4.0), diag2(2.0, 8.0), diag2(2.0, 6.0));
        assert!(check_compatible(&b, &a, &tol()).is_ok());
        assert!(check_compatible(&c, &a, &tol()).is_err());
    }

    #[test]
    fn pencil_2d() {
        let p = check_compatible(&diag2(1.0, 4.0), &diag2(2.0, 8.0), &tol()).unwrap();
        let m0 = pencil_member(&p, 0.0).unwrap();
        assert_eq!(&m0.g_gamma, p.t1().g());
        assert_eq!(&m0.j_gamma, p.t1().j());
        let m = pencil_member(&p, 1.0).unwrap();
        assert!((m.g_gamma - dmatrix![3.0, 0.0; 0.0, 12.0]).norm() < 1e-15);
        assert!((m.omega_gamma - dmatrix![0.0, 6.0; -6.0, 0.0]).norm() < 1e-15);
        assert!((&m.j_gamma - p.t1().j()).norm() < 1e-15);
        assert!(m.admissible && m.blocks.iter().all(|b| b.admissible));
        let r = positivity_range(&p).unwrap();
        assert!((r.lower + 0.5).abs() < 1e-15);
        assert!(matches!(pencil_member(&p, -0.6), Err(Error::PencilNotPositive(_))));
    }
}
