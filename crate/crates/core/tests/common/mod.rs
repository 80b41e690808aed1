#![allow(dead_code)]

use biham::compatibility::{check_compatible, CompatiblePair};
use biham::decomposition::{synthesize_tensors, BlockDecomposition, BlockSpec, Sign};
use biham::linalg::{Complex, ComplexMatrix, RealMatrix, Tolerance};
use biham::operator_f::HermitianForm;
use biham::structures::{check_admissible, MetricTensor, SymplecticForm};
use rand::{Rng, RngCore, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::SplitMix64;

pub fn rng(seed: u64) -> SplitMix64 {
    SplitMix64::seed_from_u64(seed)
}

pub fn tol() -> Tolerance {
    Tolerance::default()
}

/// Splits complex dimension `n` into at most `max_blocks` blocks with
/// pairwise distinct `(lambda, sign)`. Eigenvalues come from a grid with
/// spacing 0.37 so clusters stay well separated.
pub fn random_spec(r: &mut impl RngCore, n: usize, max_blocks: usize) -> Vec<BlockSpec> {
    let blocks = r.random_range(1..=max_blocks.min(n));
    let mut sizes = vec![1usize; blocks];
    for _ in blocks..n {
        let k = r.random_range(0..blocks);
        sizes[k] += 1;
    }
    let mut used: Vec<(usize, bool)> = Vec::new();
    sizes
        .into_iter()
        .map(|multiplicity| loop {
            let slot = r.random_range(0..40usize);
            let plus = r.random_bool(0.5);
            if !used.contains(&(slot, plus)) {
                used.push((slot, plus));
                let sign = if plus { Sign::Plus } else { Sign::Minus };
                break BlockSpec { lambda: 0.5 + 0.37 * slot as f64, sign, multiplicity };
            }
        })
        .collect()
}

/// Exactly `k` blocks with distinct `T`-eigenvalues `sign * lambda`.
pub fn spec_with_clusters(r: &mut impl RngCore, n: usize, k: usize) -> Vec<BlockSpec> {
    loop {
        let spec = random_spec(r, n, k);
        if spec.len() == k {
            return spec;
        }
    }
}

pub fn pair_from(g1: RealMatrix, w1: RealMatrix, g2: RealMatrix, w2: RealMatrix) -> CompatiblePair {
    let t = tol();
    let a = check_admissible(&MetricTensor::new(g1, &t).unwrap(), &SymplecticForm::new(w1, &t).unwrap(), &t).unwrap();
    let b = check_admissible(&MetricTensor::new(g2, &t).unwrap(), &SymplecticForm::new(w2, &t).unwrap(), &t).unwrap();
    check_compatible(&a, &b, &t).unwrap()
}

pub fn gaussian(r: &mut impl RngCore, rows: usize, cols: usize) -> RealMatrix {
    RealMatrix::from_fn(rows, cols, |_, _| r.sample::<f64, _>(StandardNormal))
}

/// Synthesized pair pushed through a random well-conditioned congruence
/// `P = I + 0.3 N / sqrt(dim)`, so `g_1` is no longer the identity.
pub fn scrambled_pair(spec: &[BlockSpec], seed: u64) -> CompatiblePair {
    let [g1, w1, g2, w2] = synthesize_tensors(spec, seed, &tol()).unwrap();
    let dim = g1.nrows();
    let mut r = rng(seed ^ 0x5eed);
    let p = RealMatrix::identity(dim, dim) + gaussian(&mut r, dim, dim) * (0.3 / (dim as f64).sqrt());
    let c = |m: &RealMatrix| p.transpose() * m * &p;
    pair_from(c(&g1), c(&w1), c(&g2), c(&w2))
}

/// `(lambda, sign, multiplicity)` sorted like the decomposition's blocks.
pub fn expected(spec: &[BlockSpec]) -> Vec<(f64, Sign, usize)> {
    let mut v: Vec<_> = spec.iter().map(|b| (b.lambda, b.sign, b.multiplicity)).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    v
}

pub fn recovered(d: &BlockDecomposition) -> Vec<(f64, Sign, usize)> {
    d.blocks().iter().map(|b| (b.lambda, b.sign, b.complex_dim())).collect()
}

/// Largest relative `lambda` error, or `None` if signs or multiplicities differ.
pub fn round_trip_error(spec: &[BlockSpec], d: &BlockDecomposition) -> Option<f64> {
    let (want, got) = (expected(spec), recovered(d));
    if want.len() != got.len() {
        return None;
    }
    let mut worst = 0.0f64;
    for (w, g) in want.iter().zip(&got) {
        if w.1 != g.1 || w.2 != g.2 {
            return None;
        }
        worst = worst.max((w.0 - g.0).abs() / w.0);
    }
    Some(worst)
}

/// Largest `|B_i^T g B_j|` over distinct blocks and both metrics.
pub fn cross_block_coupling(p: &CompatiblePair, d: &BlockDecomposition) -> f64 {
    let mut worst = 0.0f64;
    for (i, a) in d.blocks().iter().enumerate() {
        for b in &d.blocks()[i + 1..] {
            for g in [p.t1().g(), p.t2().g()] {
                worst = worst.max((a.basis.transpose() * g * &b.basis).norm());
            }
        }
    }
    worst
}

pub fn random_complex(r: &mut impl RngCore, n: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, n, |_, _| Complex::new(r.sample(StandardNormal), r.sample(StandardNormal)))
}

/// Hermitian forms `h1 = P^H P`, `h2 = P^H D P` with `F = P^-1 D P`. The
/// diagonal `D` repeats grid values with random multiplicities, returned in
/// ascending order of value.
pub fn random_hermitian_pair(r: &mut impl RngCore, n: usize) -> (HermitianForm, HermitianForm, Vec<usize>) {
    let clusters = r.random_range(1..=n);
    let mut mult = vec![1usize; clusters];
    for _ in clusters..n {
        let k = r.random_range(0..clusters);
        mult[k] += 1;
    }
    let mut slots: Vec<usize> = Vec::new();
    while slots.len() < clusters {
        let s = r.random_range(0..60usize);
        if !slots.contains(&s) {
            slots.push(s);
        }
    }
    let mut pairs: Vec<(usize, usize)> = slots.into_iter().zip(mult).collect();
    pairs.sort();
    let values: Vec<f64> = pairs.iter().flat_map(|&(s, m)| std::iter::repeat_n(0.25 + 0.31 * s as f64, m)).collect();
    let d = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, values.iter().map(|&v| Complex::new(v, 0.0))));
    let p = ComplexMatrix::identity(n, n) + random_complex(r, n) * Complex::new(0.3 / (n as f64).sqrt(), 0.0);
    let h1 = p.adjoint() * &p;
    let h2 = p.adjoint() * d * &p;
    let t = tol();
    (HermitianForm::new(h1, &t).unwrap(), HermitianForm::new(h2, &t).unwrap(), pairs.iter().map(|p| p.1).collect())
}
