//! `biham` command-line front end.
//!
//! Inputs are JSON documents with row-major matrices. Every analysis command
//! prints (or atomically writes) one JSON report. Exit codes: `0` when every
//! check passes, `1` when a mathematical check fails, `2` for unreadable or
//! malformed input.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::compatibility::{check_compatible, compatibility_checks, pencil_member, positivity_range, CompatiblePair};
use crate::decomposition::{decompose, group_signature, is_generic, parse_spec, synthesize_pair, synthesize_tensors};
use crate::dynamics::{bi_preserving_algebra, certify_recursion, conservation_probe, recursion_basis};
use crate::error::{Check, Error, Result};
use crate::linalg::{RealMatrix, Tolerance};
use crate::operator_f::{build_f, commutant_dim, bicommutant_dim, complexify, is_generic_f, norm_bounds};
use crate::structures::{admissibility_checks, check_admissible, AdmissibleTriple, LinearField, MetricTensor, SymplecticForm};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOL_ENV: &str = "BIHAM_TOL";

#[derive(Debug, Parser)]
#[command(name = "biham", version, about = "Analyze pairs of compatible Hermitian structures")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct Common {
    /// Input document.
    pub file: PathBuf,
    /// Relative tolerance, overriding the file and the environment.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Write the report here (atomically) instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Admissibility of each triple and compatibility of the pair.
    Check(Common),
    /// Joint block decomposition, genericity and group signature.
    Decompose(Common),
    /// Recursion-operator basis certificate and conservation drifts.
    Recursion(Common),
    /// Member `g1 + gamma g2` of the pencil.
    Pencil {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_negative_numbers = true)]
        gamma: f64,
    },
    /// Commutant and bicommutant of the complexified operator F.
    Commutant(Common),
    /// Write a random compatible pair with a prescribed block structure.
    Synth {
        /// Comma-separated `lambda:sign:multiplicity` entries, e.g. `2:+:1,3:-:1`.
        #[arg(long)]
        spec: String,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TolSpec {
    Rel(f64),
    Full { rel: f64, cluster_gap: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputDocument {
    pub dim: usize,
    pub g1: Vec<Vec<f64>>,
    pub omega1: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g2: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega2: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<TolSpec>,
}

/// Exit status and captured output of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Why a command stopped: bad input (exit 2) or a failed check (exit 1).
enum Failure {
    Input(String),
    Math(Box<Report>),
}

fn is_input_error(e: &Error) -> bool {
    matches!(
        e,
        Error::DimensionMismatch { .. }
            | Error::NotSquare { .. }
            | Error::Empty
            | Error::NonFinite
            | Error::OddDimension(_)
            | Error::InvalidTolerance(_)
            | Error::InvalidSpec(_)
    )
}

fn to_matrix(name: &str, rows: &[Vec<f64>], dim: usize) -> std::result::Result<RealMatrix, String> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(format!("{name} must be a {dim}x{dim} array of rows"));
    }
    let m = RealMatrix::from_fn(dim, dim, |i, j| rows[i][j]);
    if m.iter().any(|v| !v.is_finite()) {
        return Err(format!("{name} has non-finite entries"));
    }
    Ok(m)
}

fn from_matrix(m: &RealMatrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

struct Parsed {
    g1: RealMatrix,
    omega1: RealMatrix,
    second: Option<(RealMatrix, RealMatrix)>,
    tol: Tolerance,
}

fn resolve_tol(doc: Option<TolSpec>, flag: Option<f64>, env: Option<String>) -> std::result::Result<Tolerance, String> {
    let err = |e: Error| e.to_string();
    if let Some(rel) = flag {
        return Tolerance::with_rel(rel).map_err(err);
    }
    match doc {
        Some(TolSpec::Rel(rel)) => return Tolerance::with_rel(rel).map_err(err),
        Some(TolSpec::Full { rel, cluster_gap }) => return Tolerance::new(rel, cluster_gap).map_err(err),
        None => {}
    }
    match env {
        Some(s) => {
            let rel: f64 = s.trim().parse().map_err(|_| format!("{TOL_ENV} is not a number: `{s}`"))?;
            Tolerance::with_rel(rel).map_err(err)
        }
        None => Ok(Tolerance::default()),
    }
}

fn load(path: &Path, flag: Option<f64>) -> std::result::Result<Parsed, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let doc: InputDocument = serde_json::from_str(&text).map_err(|e| format!("invalid input document: {e}"))?;
    if doc.dim == 0 || doc.dim % 2 == 1 {
        return Err(Error::OddDimension(doc.dim).to_string());
    }
    let tol = resolve_tol(doc.tol, flag, std::env::var(TOL_ENV).ok())?;
    let g1 = to_matrix("g1", &doc.g1, doc.dim)?;
    let omega1 = to_matrix("omega1", &doc.omega1, doc.dim)?;
    let second = match (&doc.g2, &doc.omega2) {
        (Some(g2), Some(w2)) => Some((to_matrix("g2", g2, doc.dim)?, to_matrix("omega2", w2, doc.dim)?)),
        (None, None) => None,
        _ => return Err("g2 and omega2 must be given together".into()),
    };
    Ok(Parsed { g1, omega1, second, tol })
}

/// The report document. Fields not computed by a command stay `null`.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub verdict: String,
    pub admissible: BTreeMap<String, bool>,
    pub compatible: Option<Value>,
    pub blocks: Option<Value>,
    pub generic: Option<Value>,
    pub signature_complex: Option<String>,
    pub signature_real: Option<String>,
    pub recursion: Option<Value>,
    pub pencil_range: Option<Value>,
    pub algebra_dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pencil: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub operator_f: Option<Value>,
    pub residuals: BTreeMap<String, f64>,
}

impl Report {
    fn new(command: &str) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            command: command.into(),
            verdict: String::new(),
            admissible: BTreeMap::new(),
            compatible: None,
            blocks: None,
            generic: None,
            signature_complex: None,
            signature_real: None,
            recursion: None,
            pencil_range: None,
            algebra_dim: None,
            pencil: None,
            operator_f: None,
            residuals: BTreeMap::new(),
        }
    }

    fn record(&mut self, prefix: &str, checks: &[Check]) {
        for c in checks {
            self.residuals.insert(format!("{prefix}/{}", c.name), c.residual);
        }
    }

    fn fail(mut self, verdict: String) -> Failure {
        self.verdict = verdict;
        Failure::Math(Box::new(self))
    }
}

/// `"[J1,J2] = 0"` becomes `"[J1,J2] ≠ 0"`.
fn negate(name: &str) -> String {
    if name.contains(" = ") {
        name.replacen(" = ", " ≠ ", 1)
    } else if name.contains(" symmetric") {
        name.replacen(" symmetric", " not symmetric", 1)
    } else {
        format!("not ({name})")
    }
}

fn failed_list(checks: &[Check]) -> Vec<String> {
    checks.iter().filter(|c| !c.passed).map(|c| negate(&c.name)).collect()
}

fn triple(report: &mut Report, name: &str, g: &RealMatrix, w: &RealMatrix, tol: &Tolerance) -> std::result::Result<AdmissibleTriple, Failure> {
    let built = MetricTensor::new(g.clone(), tol).and_then(|g| Ok((g, SymplecticForm::new(w.clone(), tol)?)));
    let (metric, form) = match built {
        Ok(v) => v,
        Err(e) if is_input_error(&e) => return Err(Failure::Input(e.to_string())),
        Err(e) => {
            report.admissible.insert(name.into(), false);
            return Err(report.clone().fail(format!("{name} not admissible: {e}")));
        }
    };
    let (_, checks) = admissibility_checks(&metric, &form, tol).map_err(|e| Failure::Input(e.to_string()))?;
    report.record(name, &checks);
    match check_admissible(&metric, &form, tol) {
        Ok(t) => {
            report.admissible.insert(name.into(), true);
            Ok(t)
        }
        Err(_) => {
            report.admissible.insert(name.into(), false);
            Err(report.clone().fail(format!("{name} not admissible: {}", failed_list(&checks).join(", "))))
        }
    }
}

fn math(report: &Report, e: Error) -> Failure {
    if is_input_error(&e) {
        Failure::Input(e.to_string())
    } else {
        report.clone().fail(format!("analysis failed: {e}"))
    }
}

/// Admissibility, compatibility and the structural summary every pair
/// command shares.
fn analyze(report: &mut Report, parsed: &Parsed) -> std::result::Result<Option<CompatiblePair>, Failure> {
    let tol = &parsed.tol;
    let t1 = triple(report, "t1", &parsed.g1, &parsed.omega1, tol)?;
    let Some((g2, w2)) = &parsed.second else {
        return Ok(None);
    };
    let t2 = triple(report, "t2", g2, w2, tol)?;
    let (checks, _, _) = compatibility_checks(&t1, &t2, tol).map_err(|e| math(report, e))?;
    report.record("compatibility", &checks);
    let failed = failed_list(&checks);
    report.compatible = Some(json!({ "ok": failed.is_empty(), "failed": failed }));
    if !failed.is_empty() {
        return Err(report.clone().fail(format!("incompatible: {}", failed.join(", "))));
    }
    let pair = check_compatible(&t1, &t2, tol).map_err(|e| math(report, e))?;

    let d = decompose(&pair).map_err(|e| math(report, e))?;
    for (k, b) in d.blocks().iter().enumerate() {
        let prefix = format!("block{}", k + 1);
        report.residuals.insert(format!("{prefix}/g2 = lambda g1"), b.residuals.metric);
        report.residuals.insert(format!("{prefix}/omega2 = sign lambda omega1"), b.residuals.symplectic);
        report.residuals.insert(format!("{prefix}/J2 = sign J1"), b.residuals.complex);
    }
    report.blocks = Some(serde_json::to_value(d.blocks()).expect("serializable"));
    let sig = group_signature(&d);
    report.signature_complex = Some(sig.complex());
    report.signature_real = Some(sig.real());
    let cx = complexify(&pair).map_err(|e| math(report, e))?;
    let f = build_f(&cx.h1, &cx.h2, tol).map_err(|e| math(report, e))?;
    let generic_f = is_generic_f(&f).map_err(|e| math(report, e))?;
    report.generic = Some(json!({ "real": is_generic(&d), "operator_f": generic_f }));
    let range = positivity_range(&pair).map_err(|e| math(report, e))?;
    report.pencil_range = Some(serde_json::to_value(range).expect("serializable"));
    let alg = bi_preserving_algebra(&pair).map_err(|e| math(report, e))?;
    report.algebra_dim = Some(alg.dim());
    let cert = certify_recursion(&recursion_basis(&pair), &pair).map_err(|e| math(report, e))?;
    report.recursion = Some(json!({
        "rank": cert.rank,
        "expected_rank": cert.expected_rank,
        "passed": cert.passed(),
    }));
    Ok(Some(pair))
}

fn need_pair(pair: Option<CompatiblePair>, command: &str) -> std::result::Result<CompatiblePair, Failure> {
    pair.ok_or_else(|| Failure::Input(format!("`{command}` needs a second triple (g2, omega2)")))
}

fn execute(command: &str, parsed: &Parsed, gamma: Option<f64>) -> std::result::Result<Report, Failure> {
    let mut report = Report::new(command);
    let pair = analyze(&mut report, parsed)?;
    match command {
        "check" => {
            report.verdict = if pair.is_some() { "compatible".into() } else { "admissible".into() };
        }
        "decompose" => {
            need_pair(pair, command)?;
            report.verdict = "compatible".into();
        }
        "recursion" => {
            let pair = need_pair(pair, command)?;
            let rb = recursion_basis(&pair);
            let cert = certify_recursion(&rb, &pair).map_err(|e| math(&report, e))?;
            report.record("recursion", &cert.preservation);
            report.record("recursion", &[cert.commutation.clone(), cert.nijenhuis.clone()]);
            let times: Vec<f64> = (1..=100).map(|i| i as f64 * 0.1).collect();
            let mut drifts = Vec::new();
            let mut worst = 0.0f64;
            for a in &rb.fields {
                let field = LinearField::new(a.clone()).map_err(|e| math(&report, e))?;
                let r = conservation_probe(&field, &pair, &times).map_err(|e| math(&report, e))?;
                worst = worst.max(r.max_drift());
                drifts.push(r);
            }
            report.residuals.insert("recursion/conservation drift".into(), worst);
            let mut value = serde_json::to_value(&cert).expect("serializable");
            value["passed"] = json!(cert.passed());
            value["conservation"] = serde_json::to_value(&drifts).expect("serializable");
            report.recursion = Some(value);
            let conserved = worst <= parsed.tol.rel();
            if !cert.passed() || !conserved {
                let mut failed = failed_list(&cert.preservation);
                failed.extend(failed_list(&[cert.commutation.clone(), cert.nijenhuis.clone()]));
                if !cert.rank_passed() {
                    failed.push(format!("rank {} ≠ {}", cert.rank, cert.expected_rank));
                }
                if !cert.vandermonde_consistent {
                    failed.push(format!("rank {} inconsistent with {} eigenvalue clusters of T", cert.rank, cert.t_clusters));
                }
                if !conserved {
                    failed.push(format!("conservation drift {worst:e} > {:e}", parsed.tol.rel()));
                }
                return Err(report.fail(format!("recursion certificate failed: {}", failed.join(", "))));
            }
            report.verdict = format!("recursion basis certified: rank {}", cert.rank);
        }
        "pencil" => {
            let pair = need_pair(pair, command)?;
            let gamma = gamma.expect("clap requires --gamma");
            let m = match pencil_member(&pair, gamma) {
                Ok(m) => m,
                Err(e @ Error::PencilNotPositive(_)) => return Err(report.fail(e.to_string())),
                Err(e) => return Err(math(&report, e)),
            };
            let summary = m
                .blocks
                .iter()
                .enumerate()
                .map(|(k, b)| format!("block{} {}", k + 1, if b.admissible { "yes" } else { "no" }))
                .collect::<Vec<_>>()
                .join(", ");
            report.residuals.insert("pencil/J_gamma^2 + I".into(), m.residual);
            for (k, b) in m.blocks.iter().enumerate() {
                report.residuals.insert(format!("pencil/block{}/J_gamma^2 + I", k + 1), b.residual);
            }
            report.pencil = Some(json!({
                "gamma": gamma,
                "admissible": m.admissible,
                "residual": m.residual,
                "blocks": serde_json::to_value(&m.blocks).expect("serializable"),
                "j_gamma": from_matrix(&m.j_gamma),
            }));
            report.verdict = format!("admissible: {summary}");
        }
        "commutant" => {
            let pair = need_pair(pair, command)?;
            let cx = complexify(&pair).map_err(|e| math(&report, e))?;
            let f = build_f(&cx.h1, &cx.h2, &parsed.tol).map_err(|e| math(&report, e))?;
            let comm = commutant_dim(&f).map_err(|e| math(&report, e))?;
            let bicomm = bicommutant_dim(&f).map_err(|e| math(&report, e))?;
            let bounds = norm_bounds(&f);
            report.operator_f = Some(json!({
                "eigenvalues": f.eigenvalues(),
                "multiplicities": f.multiplicities(),
                "commutant_dim": comm,
                "bicommutant_dim": bicomm,
                "generic": comm == bicomm,
                "norm_bounds": bounds,
                "sign_pattern": cx.sign_pattern,
            }));
            report.verdict = format!("commutant {comm}, bicommutant {bicomm}");
        }
        other => unreachable!("unknown command {other}"),
    }
    Ok(report)
}

fn write_atomically(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn render(report: &Report) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("serializable");
    s.push('\n');
    s
}

fn synth(spec: &str, seed: u64, out: &Path) -> Outcome {
    let tol = match resolve_tol(None, None, std::env::var(TOL_ENV).ok()) {
        Ok(t) => t,
        Err(e) => return input_failure(e),
    };
    let run = || -> Result<InputDocument> {
        let blocks = parse_spec(spec)?;
        synthesize_pair(&blocks, seed, &tol)?;
        let [g1, w1, g2, w2] = synthesize_tensors(&blocks, seed, &tol)?;
        Ok(InputDocument {
            dim: g1.nrows(),
            g1: from_matrix(&g1),
            omega1: from_matrix(&w1),
            g2: Some(from_matrix(&g2)),
            omega2: Some(from_matrix(&w2)),
            tol: None,
        })
    };
    match run() {
        Ok(doc) => {
            let mut text = serde_json::to_string_pretty(&doc).expect("serializable");
            text.push('\n');
            match write_atomically(out, &text) {
                Ok(()) => Outcome { code: 0, stdout: format!("wrote {}\n", out.display()), stderr: String::new() },
                Err(e) => input_failure(format!("cannot write {}: {e}", out.display())),
            }
        }
        Err(e) if is_input_error(&e) => input_failure(e.to_string()),
        Err(e) => Outcome { code: 1, stdout: String::new(), stderr: format!("error: {e}\n") },
    }
}

fn input_failure(msg: String) -> Outcome {
    Outcome { code: 2, stdout: String::new(), stderr: format!("error: {msg}\n") }
}

/// Runs one invocation; `args[0]` is the program name.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            let code = e.exit_code();
            return if code == 0 {
                Outcome { code, stdout: text, stderr: String::new() }
            } else {
                Outcome { code: 2, stdout: String::new(), stderr: text }
            };
        }
    };
    let (name, common, gamma) = match &cli.command {
        Command::Check(c) => ("check", c, None),
        Command::Decompose(c) => ("decompose", c, None),
        Command::Recursion(c) => ("recursion", c, None),
        Command::Pencil { common, gamma } => ("pencil", common, Some(*gamma)),
        Command::Commutant(c) => ("commutant", c, None),
        Command::Synth { spec, seed, out } => return synth(spec, *seed, out),
    };
    let parsed = match load(&common.file, common.tol) {
        Ok(p) => p,
        Err(msg) => return input_failure(msg),
    };
    let (code, report) = match execute(name, &parsed, gamma) {
        Ok(r) => (0, r),
        Err(Failure::Input(msg)) => return input_failure(msg),
        Err(Failure::Math(r)) => (1, *r),
    };
    let text = render(&report);
    match &common.output {
        Some(path) => match write_atomically(path, &text) {
            Ok(()) => Outcome { code, stdout: String::new(), stderr: String::new() },
            Err(e) => input_failure(format!("cannot write {}: {e}", path.display())),
        },
        None => Outcome { code, stdout: text, stderr: String::new() },
    }
}
