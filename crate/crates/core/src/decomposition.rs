//! Joint eigenspaces of `G` and `T` for a compatible pair.
//!
//! `G` is self-adjoint for `g_1`, so its eigenspaces are `g_1`-orthogonal and
//! invariant under both complex structures. Inside each eigenspace `T` acts
//! as `+lambda` or `-lambda`, splitting it into blocks `W_{lambda,+}` and
//! `W_{lambda,-}`. On a block `g_2 = lambda g_1`, `omega_2 = sign lambda omega_1`
//! and `J_2 = sign J_1`.

use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::SplitMix64;
use serde::{Serialize, Serializer};

use crate::compatibility::{check_compatible, CompatiblePair};
use crate::error::{Check, Error, Result};
use crate::linalg::{
    cluster_eigenvalues, eig_self_adjoint, restrict, scale, sorted_symmetric_eigen, symmetric_part, RealMatrix,
    Tolerance,
};
use crate::structures::{check_admissible, hermitian_frame, standard_omega, MetricTensor, SymplecticForm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }
}

impl Serialize for Sign {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_i8(self.value() as i8)
    }
}

/// Residuals of the per-block proportionalities, measured in the block's
/// `g_1`-orthonormal basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockResiduals {
    /// `|B^T (g_2 - lambda g_1) B| / |g_2|`.
    pub metric: f64,
    /// `|B^T (omega_2 - sign lambda omega_1) B| / |omega_2|`.
    pub symplectic: f64,
    /// `|J_2 - sign J_1|` restricted to the block.
    pub complex: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Block {
    /// Eigenvalue of `G` on the block (cluster mean).
    pub lambda: f64,
    pub sign: Sign,
    /// Real dimension; always even.
    pub dim: usize,
    /// Columns `(e_1, J_1 e_1, ...)`, orthonormal for `g_1`.
    #[serde(skip)]
    pub basis: RealMatrix,
    /// Measured ratio `tr(B^T g_2 B) / dim`.
    pub rho: f64,
    /// Angular rate of `exp(t J_1)` on the block, `sqrt(-tr(R^2) / dim)` for
    /// the restriction `R`. Equals 1 whenever `J_1^2 = -I`.
    pub rotation_rate: f64,
    pub residuals: BlockResiduals,
}

impl Block {
    pub fn complex_dim(&self) -> usize {
        self.dim / 2
    }
}

#[derive(Debug, Clone)]
pub struct BlockDecomposition {
    blocks: Vec<Block>,
    dim: usize,
    tol: Tolerance,
}

impl BlockDecomposition {
    /// Blocks by ascending `lambda`, `+` before `-` for equal `lambda`.
    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tol(&self) -> &Tolerance {
        &self.tol
    }

    /// All block bases side by side; a `g_1`-orthonormal basis of the space.
    pub fn basis(&self) -> RealMatrix {
        let cols: Vec<_> = self.blocks.iter().flat_map(|b| b.basis.column_iter().map(|c| c.into_owned())).collect();
        RealMatrix::from_columns(&cols)
    }
}

pub fn decompose(p: &CompatiblePair) -> Result<BlockDecomposition> {
    let tol = *p.tol();
    let (g1, g2) = (p.t1().g(), p.t2().g());
    let (w1, w2) = (p.t1().omega(), p.t2().omega());
    let (j1, j2) = (p.t1().j(), p.t2().j());
    let gap = tol.cluster_gap();

    let eig = eig_self_adjoint(p.big_g(), g1, &tol)?;
    let mut blocks = Vec::new();
    for cluster in cluster_eigenvalues(&eig.values, gap) {
        let lambda = cluster.value;
        let space = eig.columns(cluster.start, cluster.multiplicity);
        let t_local = symmetric_part(&restrict(p.big_t(), &space, g1));
        let (mus, q) = sorted_symmetric_eigen(&t_local);
        let slack = gap * cluster.multiplicity as f64 * lambda.max(1.0);
        let mut plus = Vec::new();
        let mut minus = Vec::new();
        for (i, &mu) in mus.iter().enumerate() {
            if (mu.abs() - lambda).abs() > slack {
                return Err(Error::SpectrumMismatch { lambda, mu });
            }
            if mu > 0.0 { plus.push(i) } else { minus.push(i) }
        }
        for (sign, idx) in [(Sign::Plus, plus), (Sign::Minus, minus)] {
            if idx.is_empty() {
                continue;
            }
            if idx.len() % 2 == 1 {
                return Err(Error::OddBlock(idx.len()));
            }
            let candidates = &space * q.select_columns(&idx);
            let basis = hermitian_frame(&candidates, g1, j1, idx.len());
            if basis.ncols() != idx.len() {
                return Err(Error::OddBlock(basis.ncols()));
            }
            let s = sign.value();
            let dim = idx.len();
            let rho = (basis.transpose() * g2 * &basis).trace() / dim as f64;
            let r = basis.transpose() * w1 * &basis;
            let rotation_rate = (-(&r * &r).trace() / dim as f64).max(0.0).sqrt();
            let residuals = BlockResiduals {
                metric: (basis.transpose() * (g2 - g1 * lambda) * &basis).norm() / scale(g2),
                symplectic: (basis.transpose() * (w2 - w1 * (s * lambda)) * &basis).norm() / scale(w2),
                complex: restrict(&(j2 - j1 * s), &basis, g1).norm(),
            };
            for (what, r) in [("g2 = lambda g1", residuals.metric), ("omega2 = sign lambda omega1", residuals.symplectic), ("J2 = sign J1", residuals.complex)] {
                if r.is_nan() || r > gap {
                    return Err(Error::Proportionality { what: what.into(), residual: r });
                }
            }
            blocks.push(Block { lambda, sign, dim, basis, rho, rotation_rate, residuals });
        }
    }
    Ok(BlockDecomposition { blocks, dim: p.dim(), tol })
}

/// Every block is two-dimensional.
pub fn is_generic(d: &BlockDecomposition) -> bool {
    d.blocks.iter().all(|b| b.dim == 2)
}

/// Normal form `(e_1, e_2 = J_1 e_1)` of a two-dimensional block.
///
/// With `omega = g J` as matrices, `omega_1(e_1, e_2) = -g_1(e_1, e_1)`, so
/// the normalization is stated as `omega_1(e_2, e_1) = g_1(e_1, e_1)`.
#[derive(Debug, Clone)]
pub struct CanonicalBasis {
    pub e1: crate::linalg::RealVector,
    pub e2: crate::linalg::RealVector,
    pub lambda: f64,
    pub rho: f64,
    pub sign: Sign,
    pub checks: Vec<Check>,
}

pub fn canonical_basis(block: &Block, p: &CompatiblePair) -> Result<CanonicalBasis> {
    if block.dim != 2 {
        return Err(Error::NotTwoDimensional(block.dim));
    }
    let rel = p.tol().rel();
    let (g1, w1, j1) = (p.t1().g(), p.t1().omega(), p.t1().j());
    let (g2, j2) = (p.t2().g(), p.t2().j());
    let e1 = block.basis.column(0).into_owned();
    let e2 = j1 * &e1;
    let form = |m: &RealMatrix, x: &crate::linalg::RealVector, y: &crate::linalg::RealVector| x.dot(&(m * y));
    let n11 = form(g1, &e1, &e1);
    let rho = form(g2, &e1, &e1) / n11;
    let local = RealMatrix::from_columns(&[e1.clone(), e2.clone()]);
    let g2_local = local.transpose() * g2 * &local;
    let checks = vec![
        Check::new("g1(e1,e2) = 0", form(g1, &e1, &e2).abs() / scale(g1), rel),
        Check::new("g1(e2,e2) = g1(e1,e1)", (form(g1, &e2, &e2) - n11).abs() / scale(g1), rel),
        Check::new("omega1(e2,e1) = g1(e1,e1)", (form(w1, &e2, &e1) - n11).abs() / scale(g1), rel),
        Check::new("g2 = rho g1 on block", (&g2_local - RealMatrix::identity(2, 2) * (rho * n11)).norm() / scale(g2), rel),
        Check::new("rho = lambda", (rho - block.lambda).abs() / block.lambda, p.tol().cluster_gap()),
        Check::new("J2 e1 = sign J1 e1", (j2 * &e1 - &e2 * block.sign.value()).norm() / scale(j2), rel),
    ];
    Ok(CanonicalBasis { e1, e2, lambda: block.lambda, rho, sign: block.sign, checks })
}

/// Multiset of complex block dimensions `r_k`: the group preserving both
/// triples is the product of `U(r_k)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroupSignature {
    pub ranks: Vec<usize>,
}

impl GroupSignature {
    pub fn complex(&self) -> String {
        self.ranks.iter().map(|r| format!("U({r})")).collect::<Vec<_>>().join("×")
    }

    /// Real forms of the factors: `SO(2)` for `r = 1`, else the unitary group
    /// of the block as a real `2r`-dimensional space.
    pub fn real(&self) -> String {
        self.ranks
            .iter()
            .map(|&r| if r == 1 { "SO(2)".to_string() } else { format!("U_r({};g,ω)", 2 * r) })
            .collect::<Vec<_>>()
            .join("×")
    }

    /// Real dimension of the group, `sum r_k^2`.
    pub fn group_dim(&self) -> usize {
        self.ranks.iter().map(|r| r * r).sum()
    }
}

pub fn group_signature(d: &BlockDecomposition) -> GroupSignature {
    GroupSignature { ranks: d.blocks.iter().map(Block::complex_dim).collect() }
}

/// One `(lambda, sign, multiplicity)` entry of a synthesis request.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockSpec {
    pub lambda: f64,
    pub sign: Sign,
    /// Complex dimension of the block.
    pub multiplicity: usize,
}

/// Parses `lambda:sign:multiplicity` entries separated by commas, for
/// example `2:+:1,3:-:1`.
pub fn parse_spec(s: &str) -> Result<Vec<BlockSpec>> {
    let bad = |why: &str| Error::InvalidSpec(format!("{why} in `{s}`"));
    s.split(',')
        .map(|entry| {
            let parts: Vec<&str> = entry.trim().split(':').collect();
            let [l, sg, m] = parts.as_slice() else {
                return Err(bad("expected lambda:sign:multiplicity"));
            };
            let lambda: f64 = l.trim().parse().map_err(|_| bad("bad lambda"))?;
            let sign = match sg.trim() {
                "+" | "+1" | "1" => Sign::Plus,
                "-" | "-1" => Sign::Minus,
                _ => return Err(bad("bad sign")),
            };
            let multiplicity: usize = m.trim().parse().map_err(|_| bad("bad multiplicity"))?;
            Ok(BlockSpec { lambda, sign, multiplicity })
        })
        .collect()
}

fn validate_spec(spec: &[BlockSpec], tol: &Tolerance) -> Result<()> {
    if spec.is_empty() {
        return Err(Error::InvalidSpec("no blocks".into()));
    }
    for (i, b) in spec.iter().enumerate() {
        if !(b.lambda.is_finite() && b.lambda > 0.0) {
            return Err(Error::InvalidSpec(format!("lambda must be positive and finite, got {}", b.lambda)));
        }
        if b.multiplicity == 0 {
            return Err(Error::InvalidSpec("multiplicity must be at least 1".into()));
        }
        for c in &spec[..i] {
            let close = (b.lambda - c.lambda).abs() <= tol.cluster_gap() * b.lambda.max(c.lambda).max(1.0);
            if close && b.sign == c.sign {
                return Err(Error::InvalidSpec(format!("duplicate block ({}, {})", b.lambda, b.sign.symbol())));
            }
        }
    }
    Ok(())
}

/// Raw tensors `(g_1, omega_1, g_2, omega_2)` with the requested joint
/// spectrum, conjugated by a seeded random unitary of `(g_1, J_1)`.
pub fn synthesize_tensors(spec: &[BlockSpec], seed: u64, tol: &Tolerance) -> Result<[RealMatrix; 4]> {
    validate_spec(spec, tol)?;
    let n: usize = spec.iter().map(|b| b.multiplicity).sum();
    let dim = 2 * n;
    let g1 = RealMatrix::identity(dim, dim);
    let w1 = standard_omega(dim);
    let mut g2 = RealMatrix::zeros(dim, dim);
    let mut w2 = RealMatrix::zeros(dim, dim);
    let mut at = 0;
    for b in spec {
        let len = 2 * b.multiplicity;
        g2.view_mut((at, at), (len, len)).fill_diagonal(b.lambda);
        let s = standard_omega(len) * (b.sign.value() * b.lambda);
        w2.view_mut((at, at), (len, len)).copy_from(&s);
        at += len;
    }

    let mut rng = SplitMix64::seed_from_u64(seed);
    let z = DMatrix::<Complex<f64>>::from_fn(n, n, |_, _| {
        Complex::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    });
    let u = z.qr().q();
    // a + ib becomes a I - b S on each coordinate pair, which commutes with J_1 = S
    let r = RealMatrix::from_fn(dim, dim, |i, k| {
        let c = u[(i / 2, k / 2)];
        match (i % 2, k % 2) {
            (0, 0) | (1, 1) => c.re,
            (0, 1) => -c.im,
            _ => c.im,
        }
    });
    let conj = |m: &RealMatrix| r.transpose() * m * &r;
    Ok([conj(&g1), conj(&w1), conj(&g2), conj(&w2)])
}

/// Builds and certifies a compatible pair with the requested block structure.
pub fn synthesize_pair(spec: &[BlockSpec], seed: u64, tol: &Tolerance) -> Result<CompatiblePair> {
    let [g1, w1, g2, w2] = synthesize_tensors(spec, seed, tol)?;
    let t1 = check_admissible(&MetricTensor::new(g1, tol)?, &SymplecticForm::new(w1, tol)?, tol)?;
    let t2 = check_admissible(&MetricTensor::new(g2, tol)?, &SymplecticForm::new(w2, tol)?, tol)?;
    check_compatible(&t1, &t2, tol)
}
