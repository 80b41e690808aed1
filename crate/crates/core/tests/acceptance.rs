//! Acceptance suite: one PASS/FAIL line per criterion, every tolerance pinned.
//! Runs without the libtest harness so the lines always reach stdout.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use biham::compatibility::{check_compatible, pencil_member, positivity_range};
use biham::decomposition::{decompose, group_signature, is_generic, synthesize_pair, BlockSpec, Sign};
use biham::dynamics::{bi_preserving_algebra, certify_recursion, conservation_probe, flow, nijenhuis_residual, recursion_basis};
use biham::linalg::{Complex, RealMatrix};
use biham::operator_f::{
    biunitary_sample, build_f, bicommutant_dim, commutant_dim, complexify, is_generic_f, norm_bounds,
};
use biham::structures::{admissible_from_metric, phase_group, standard_omega, LinearField, MetricTensor};
use common::*;
use nalgebra::dmatrix;
use rand::Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

const DIMS: [usize; 5] = [2, 4, 8, 16, 32];

fn criterion_1() -> Verdict {
    const EXACT: f64 = 1e-12;
    let mut r = rng(1);
    let (mut j_err, mut w_err, mut flow_err) = (0.0f64, 0.0f64, 0.0f64);
    let mut verdict_errors = 0;
    let mut cases = 0;
    for _ in 0..100 {
        let (r1, r2) = (r.random_range(0.1..10.0), r.random_range(0.1..10.0));
        let t1 = admissible_from_metric(&MetricTensor::new(dmatrix![r1, 0.0; 0.0, r2], &tol()).unwrap(), &tol()).unwrap();
        let j = dmatrix![0.0, (r2 / r1).sqrt(); -(r1 / r2).sqrt(), 0.0];
        let w = dmatrix![0.0, (r1 * r2).sqrt(); -(r1 * r2).sqrt(), 0.0];
        j_err = j_err.max((t1.j() - j).amax());
        w_err = w_err.max((t1.omega() - w).amax());

        // second metric: proportional (compatible) or with the ratio moved
        // by a relative 1e-6 .. 1 (incompatible)
        let c = r.random_range(0.2..5.0);
        let shift = match r.random_range(0..3) {
            0 => 0.0,
            1 => 10f64.powf(r.random_range(-6.0..-3.0)),
            _ => r.random_range(0.001..1.0),
        };
        let (s1, s2) = (c * r1, c * r2 * (1.0 + shift));
        let t2 = admissible_from_metric(&MetricTensor::new(dmatrix![s1, 0.0; 0.0, s2], &tol()).unwrap(), &tol()).unwrap();
        let ratio_gap = (r2 / r1 - s2 / s1).abs() / (r2 / r1);
        let expect = ratio_gap <= tol().rel();
        if check_compatible(&t1, &t2, &tol()).is_ok() != expect {
            verdict_errors += 1;
        }
        cases += 1;

        let gamma = LinearField::new(t1.j().clone()).unwrap();
        for k in 0..=20 {
            let t = 0.5 * k as f64;
            flow_err = flow_err.max((flow(&gamma, t).unwrap() - phase_group(&t1, t)).amax());
        }
    }
    let pass = j_err <= EXACT && w_err <= EXACT && flow_err <= EXACT && verdict_errors == 0;
    verdict(
        pass,
        format!(
            "{cases} rho pairs: max |J1 err| {j_err:.1e}, |omega1 err| {w_err:.1e}, |O1(t) err| {flow_err:.1e} (tol {EXACT:.0e}); verdict mismatches {verdict_errors} (ratio tol {:.0e})",
            tol().rel()
        ),
    )
}

fn criterion_2() -> Verdict {
    const LAMBDA: f64 = 1e-8;
    const ORTHO: f64 = 1e-9;
    const PROP: f64 = 1e-9;
    let mut r = rng(2);
    let (mut lam, mut ortho, mut prop) = (0.0f64, 0.0f64, 0.0f64);
    let mut mismatches = 0;
    let mut cases = 0;
    for (i, &dim) in DIMS.iter().cycle().take(110).enumerate() {
        let spec = random_spec(&mut r, dim / 2, 6);
        let p = synthesize_pair(&spec, 1000 + i as u64, &tol()).unwrap();
        let d = decompose(&p).unwrap();
        cases += 1;
        match round_trip_error(&spec, &d) {
            Some(e) => lam = lam.max(e),
            None => mismatches += 1,
        }
        ortho = ortho.max(cross_block_coupling(&p, &d));
        let (g1, w1, j1) = (p.t1().g(), p.t1().omega(), p.t1().j());
        let (g2, w2, j2) = (p.t2().g(), p.t2().omega(), p.t2().j());
        for b in d.blocks() {
            let (l, s, bb) = (b.lambda, b.sign.value(), &b.basis);
            prop = prop.max((bb.transpose() * (g2 - g1 * l) * bb).norm() / g2.norm());
            prop = prop.max((bb.transpose() * (w2 - w1 * (s * l)) * bb).norm() / w2.norm());
            prop = prop.max((bb.transpose() * g1 * (j2 - j1 * s) * bb).norm());
        }
    }
    verdict(
        mismatches == 0 && lam <= LAMBDA && ortho <= ORTHO && prop <= PROP,
        format!(
            "{cases} specs over dims {DIMS:?}: multiset mismatches {mismatches}; max rel lambda err {lam:.1e} (tol {LAMBDA:.0e}); cross-block coupling {ortho:.1e} (tol {ORTHO:.0e}); per-block proportionality {prop:.1e} (tol {PROP:.0e})"
        ),
    )
}

fn criterion_3() -> Verdict {
    const COMM: f64 = 1e-10;
    const SPAN: f64 = 1e-9;
    let mut r = rng(3);
    let (mut dim_errors, mut generic_cases, mut generic_errors) = (0, 0, 0);
    let (mut comm, mut span) = (0.0f64, 0.0f64);
    let mut cases = 0;
    for (i, &dim) in DIMS.iter().cycle().take(40).enumerate() {
        let n = dim / 2;
        // every other case is forced generic: n simple blocks
        let spec = if i % 2 == 0 { random_spec(&mut r, n, 4) } else { spec_with_clusters(&mut r, n, n) };
        let p = synthesize_pair(&spec, 3000 + i as u64, &tol()).unwrap();
        let d = decompose(&p).unwrap();
        let alg = bi_preserving_algebra(&p).unwrap();
        cases += 1;
        if alg.dim() != group_signature(&d).group_dim() {
            dim_errors += 1;
        }
        if is_generic(&d) {
            generic_cases += 1;
            let rb = recursion_basis(&p);
            let cert = certify_recursion(&rb, &p).unwrap();
            if alg.dim() != n || cert.rank != n {
                generic_errors += 1;
            }
            comm = comm.max(cert.commutation.residual);
            for a in &rb.fields {
                span = span.max(alg.projection_residual(a));
            }
        }
    }
    verdict(
        dim_errors == 0 && generic_errors == 0 && generic_cases > 0 && comm <= COMM && span <= SPAN,
        format!(
            "{cases} pairs: algebra dim != sum r^2 in {dim_errors}; {generic_cases} generic with dim/rank != n in {generic_errors}; max rel commutator {comm:.1e} (tol {COMM:.0e}); recursion fields outside algebra {span:.1e} (tol {SPAN:.0e})"
        ),
    )
}

fn criterion_4() -> Verdict {
    const NIJ: f64 = 1e-12;
    let mut r = rng(4);
    let mut wrong = Vec::new();
    let mut cases = 0;
    for n in [2usize, 4, 8] {
        for k in [1usize, 2, 3] {
            if k > n {
                continue;
            }
            for rep in 0..3 {
                let spec = spec_with_clusters(&mut r, n, k);
                let p = synthesize_pair(&spec, 4000 + (n * 100 + k * 10 + rep) as u64, &tol()).unwrap();
                let cert = certify_recursion(&recursion_basis(&p), &p).unwrap();
                cases += 1;
                if cert.rank != k || cert.rank_ambiguous || cert.t_clusters != k {
                    wrong.push((n, k, cert.rank));
                }
            }
        }
    }
    let mut nij = 0.0f64;
    for i in 0..200 {
        let dim = 2 + 2 * (i % 16);
        let t = gaussian(&mut r, dim, dim);
        let a = gaussian(&mut r, dim, dim);
        nij = nij.max(nijenhuis_residual(&t, &a).unwrap());
    }
    verdict(
        wrong.is_empty() && nij <= NIJ,
        format!("{cases} (n, k) cases with rank != k: {wrong:?}; Nijenhuis residual over 200 random (T, A): {nij:.1e} (tol {NIJ:.0e})"),
    )
}

fn criterion_5() -> Verdict {
    const EIG: f64 = 1e-9;
    const UNITARY: f64 = 1e-10;
    const SLACK: f64 = -1e-12;
    let mut r = rng(5);
    let mut count_errors = 0;
    let mut worst_unitary = 0.0f64;
    let mut worst_slack = f64::INFINITY;
    for i in 0..100 {
        let n = 1 + i % 16;
        let (h1, h2, mult) = random_hermitian_pair(&mut r, n);
        let f = build_f(&h1, &h2, &tol()).unwrap();
        let comm = commutant_dim(&f).unwrap();
        let bicomm = bicommutant_dim(&f).unwrap();
        let simple = mult.iter().all(|&m| m == 1);
        if comm != mult.iter().map(|m| m * m).sum::<usize>()
            || bicomm != mult.len()
            || is_generic_f(&f).unwrap() != simple
        {
            count_errors += 1;
        }
        let coeffs: Vec<f64> = (0..r.random_range(1..4)).map(|_| r.random_range(-1.0..1.0)).collect();
        let s = biunitary_sample(&f, &coeffs, r.random_range(-3.0..3.0)).unwrap();
        worst_unitary = worst_unitary.max(s.residuals[0]).max(s.residuals[1]);

        let nb = norm_bounds(&f);
        worst_slack = worst_slack.min(nb.lower_slack).min(nb.upper_slack);
        for _ in 0..10 {
            let x = nalgebra::DVector::from_fn(n, |_, _| Complex::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)));
            let n1 = (x.adjoint() * h1.matrix() * &x)[(0, 0)].re.sqrt();
            let n2 = (x.adjoint() * h2.matrix() * &x)[(0, 0)].re.sqrt();
            worst_slack = worst_slack.min((n1 - nb.a * n2) / n1).min((nb.b * n2 - n1) / n1);
        }
    }

    let mut eig_err = 0.0f64;
    for (i, &dim) in DIMS.iter().cycle().take(20).enumerate() {
        let spec = random_spec(&mut r, dim / 2, 5);
        let p = synthesize_pair(&spec, 5000 + i as u64, &tol()).unwrap();
        let cx = complexify(&p).unwrap();
        let f = build_f(&cx.h1, &cx.h2, &tol()).unwrap();
        let mut want: Vec<f64> = spec.iter().flat_map(|b| std::iter::repeat_n(b.lambda, b.multiplicity)).collect();
        want.sort_by(f64::total_cmp);
        for (g, w) in f.eigenvalues().iter().zip(&want) {
            eig_err = eig_err.max((g - w).abs() / w);
        }
    }
    verdict(
        count_errors == 0 && eig_err <= EIG && worst_unitary <= UNITARY && worst_slack >= SLACK,
        format!(
            "100 Hermitian pairs: dimension/genericity mismatches {count_errors}; bi-unitarity residual {worst_unitary:.1e} (tol {UNITARY:.0e}); min norm-chain slack {worst_slack:.1e} (tol {SLACK:.0e}); complexify eigenvalue err {eig_err:.1e} (tol {EIG:.0e})"
        ),
    )
}

fn criterion_6() -> Verdict {
    const DRIFT: f64 = 1e-9;
    let times: Vec<f64> = (0..100).map(|i| 10.0 * i as f64 / 99.0).collect();
    let mut r = rng(6);
    let specs: Vec<Vec<BlockSpec>> = vec![
        random_spec(&mut r, 1, 1),
        random_spec(&mut r, 2, 2),
        random_spec(&mut r, 4, 3),
        random_spec(&mut r, 8, 3),
        spec_with_clusters(&mut r, 16, 16),
    ];
    let mut worst = 0.0f64;
    let mut fields = 0;
    for (i, spec) in specs.iter().enumerate() {
        let p = scrambled_pair(spec, 6000 + i as u64);
        let alg = bi_preserving_algebra(&p).unwrap();
        for a in alg.basis() {
            let field = LinearField::new(a.clone()).unwrap();
            worst = worst.max(conservation_probe(&field, &p, &times).unwrap().max_drift());
            fields += 1;
        }
    }
    verdict(worst <= DRIFT, format!("{fields} basis fields x 100 times in [0,10]: max drift {worst:.1e} (tol {DRIFT:.0e})"))
}

fn criterion_7() -> Verdict {
    const EXACT: f64 = 1e-12;
    let s = standard_omega(2);
    let mut w1 = RealMatrix::zeros(4, 4);
    let mut w2 = RealMatrix::zeros(4, 4);
    w1.view_mut((0, 0), (2, 2)).copy_from(&s);
    w1.view_mut((2, 2), (2, 2)).copy_from(&s);
    w2.view_mut((0, 0), (2, 2)).copy_from(&(&s * 2.0));
    w2.view_mut((2, 2), (2, 2)).copy_from(&(&s * -3.0));
    let g2 = RealMatrix::from_diagonal(&nalgebra::dvector![2.0, 2.0, 3.0, 3.0]);
    let p = pair_from(RealMatrix::identity(4, 4), w1, g2, w2);
    let m = pencil_member(&p, 1.0).unwrap();
    let range = positivity_range(&p).unwrap();
    let block2 = (&m.blocks[1].j_squared + RealMatrix::identity(2, 2) * 0.25).amax();
    let lower = (range.lower + 1.0 / 3.0).abs();
    let pass = m.blocks.len() == 2
        && m.blocks[0].admissible
        && !m.blocks[1].admissible
        && m.blocks[1].sign == Sign::Minus
        && block2 <= EXACT
        && lower <= EXACT
        && range.upper == f64::INFINITY;
    verdict(
        pass,
        format!(
            "gamma = 1: block1 admissible {}, block2 admissible {}; |J_gamma^2 + 0.25 I| on block2 {block2:.1e}; positivity range ({}, {}) with lower err {lower:.1e} (tol {EXACT:.0e})",
            m.blocks[0].admissible, m.blocks[1].admissible, range.lower, range.upper
        ),
    )
}

fn criterion_8() -> Verdict {
    let bin = env!("CARGO_BIN_EXE_biham");
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let run = |args: &[&str]| {
        let out = Command::new(bin).args(args).env_remove("BIHAM_TOL").output().expect("binary runs");
        (out.status.code().unwrap_or(-1), out.stdout)
    };
    let mut problems = Vec::new();
    let mut runs = 0;
    for file in ["compatible_2d", "incompatible_2d", "reference_4d", "identical_4d", "malformed_odd"] {
        let path = fixtures.join(format!("{file}.json"));
        let path = path.to_str().unwrap();
        for cmd in [vec!["check", path], vec!["decompose", path], vec!["recursion", path], vec!["pencil", path, "--gamma", "1"], vec!["commutant", path]] {
            let a = run(&cmd);
            let b = run(&cmd);
            runs += 2;
            if a != b {
                problems.push(format!("{} {file}: reports differ", cmd[0]));
            }
        }
    }
    for (file, code) in [("compatible_2d", 0), ("incompatible_2d", 1), ("malformed_odd", 2)] {
        let path = fixtures.join(format!("{file}.json"));
        let got = run(&["check", path.to_str().unwrap()]).0;
        if got != code {
            problems.push(format!("check {file}: exit {got}, want {code}"));
        }
    }
    verdict(problems.is_empty(), format!("{runs} runs over 5 fixtures x 5 commands; exit codes 0/1/2 for compatible/incompatible/malformed; problems: {problems:?}"))
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 8] = [
        ("2D example reproduction", criterion_1),
        ("block decomposition round trip", criterion_2),
        ("group-theory consistency", criterion_3),
        ("recursion degeneration", criterion_4),
        ("operator F suite", criterion_5),
        ("conservation", criterion_6),
        ("pencil", criterion_7),
        ("CLI determinism", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            verdict(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        if !v.pass {
            failed += 1;
        }
        println!(
            "criterion {} [{name}]: {} ({:.1}s) {}",
            i + 1,
            if v.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            v.detail
        );
    }
    if failed > 0 {
        println!("acceptance: {failed} of 8 criteria failed");
        std::process::exit(1);
    }
    println!("acceptance: all 8 criteria passed");
}
