//! `freehull`: membership, separation, GNS and scenario runs from the shell.
//!
//! Exit codes: 0 success or feasible, 1 infeasible / negative answer,
//! 2 usage error, 3 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use freehull::gns::{self, DEFAULT_RANK_TOL};
use freehull::io::{read_json, PointFile};
use freehull::moments::{MomentFile, MomentSequence};
use freehull::ncpoly::infer_g;
use freehull::relax::{self, archimedean_residual, quad_module_membership, QuadModuleOutcome, RelaxConfig};
use freehull::scenarios::{run_scenario, ScenarioConfig, SCENARIO_IDS};
use freehull::sdp::{verify_certificate, SolverConfig, Status};
use freehull::{eval_poly, matops, parse_poly, Error, MatrixPoly, MatrixTuple};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "freehull", version, about = "Moment relaxations of free semialgebraic sets")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Is the point in the level-d relaxation of {X : p(X) ⪰ 0}?
    Member(RelaxArgs),
    /// Affine functional separating an infeasible point from the relaxation.
    Separate(RelaxArgs),
    /// Representing tuple from a flat truncated moment sequence.
    Gns(GnsArgs),
    /// Is q in the truncated quadratic module of p?
    Soscheck(SosArgs),
    /// Checks K² − Σ x_j² = Σ s*s + Σ f* p f exactly.
    ArchVerify(ArchArgs),
    /// Runs a canned scenario (or `all`).
    Scenario(ScenarioArgs),
    /// Evaluates p at a point.
    Eval(EvalArgs),
}

#[derive(Args)]
struct Output {
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct RelaxArgs {
    /// Polynomial text, or a file containing it.
    #[arg(long, allow_hyphen_values = true)]
    poly: String,
    /// Point file {"g", "n", "matrices"}.
    #[arg(long)]
    point: PathBuf,
    #[arg(long, default_value_t = 0)]
    level: usize,
    /// Expected matrix size of the point.
    #[arg(long)]
    n: Option<usize>,
    /// Box radius R for the lifted variables.
    #[arg(long = "box")]
    box_radius: Option<f64>,
    /// Archimedean constant C used for the default box radius.
    #[arg(long)]
    arch: Option<f64>,
    /// Feasibility threshold on the margin.
    #[arg(long)]
    tol: Option<f64>,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct GnsArgs {
    /// Moment file {"g", "n", "max_deg", "values"}.
    #[arg(long)]
    moments: PathBuf,
    #[arg(long)]
    degree: usize,
    /// Optional p for the positivity diagnostics.
    #[arg(long, allow_hyphen_values = true)]
    poly: Option<String>,
    /// Relative rank tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct SosArgs {
    /// Scalar polynomial q.
    #[arg(long, allow_hyphen_values = true)]
    q: String,
    #[arg(long, allow_hyphen_values = true)]
    poly: String,
    /// Degree bound on the sums of squares part.
    #[arg(long)]
    alpha: usize,
    /// Degree bound on the f_j.
    #[arg(long)]
    beta: usize,
    #[arg(long)]
    tol: Option<f64>,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct ArchArgs {
    #[arg(long, allow_hyphen_values = true)]
    poly: String,
    /// The constant K².
    #[arg(long)]
    k2: f64,
    /// A sum-of-squares term s_j (repeatable).
    #[arg(long = "s", allow_hyphen_values = true)]
    s: Vec<String>,
    /// A column f_j as comma-separated scalar entries (repeatable).
    #[arg(long = "f", allow_hyphen_values = true)]
    f: Vec<String>,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario id, or `all`.
    id: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, allow_hyphen_values = true)]
    poly: String,
    #[arg(long)]
    point: PathBuf,
    #[arg(long)]
    n: Option<usize>,
    #[command(flatten)]
    out: Output,
}

struct Report {
    value: Value,
    code: u8,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 2 } else { 0 });
        }
    };
    let (result, out) = match cli.cmd {
        Command::Member(a) => (member(&a), a.out.json),
        Command::Separate(a) => (separate(&a), a.out.json),
        Command::Gns(a) => (gns_cmd(&a), a.out.json),
        Command::Soscheck(a) => (soscheck(&a), a.out.json),
        Command::ArchVerify(a) => (arch_verify(&a), a.out.json),
        Command::Scenario(a) => (scenario(&a), a.out.json),
        Command::Eval(a) => (eval(&a), a.out.json),
    };
    match result.and_then(|r| emit(&r.value, out.as_deref()).map(|_| r.code)) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let code = exit_code(&e);
            eprintln!("{}", json!({ "error": format!("{e:#}"), "exit_code": code }));
            ExitCode::from(code)
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(
            Error::NoConvergence(_)
            | Error::DimensionCap { .. }
            | Error::NotFlat { .. }
            | Error::NotPsd(_)
            | Error::NotIsometry(_)
            | Error::NotStrictlyFeasible(_),
        ) => 3,
        _ => 2,
    }
}

fn emit(value: &Value, path: Option<&Path>) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

/// The argument itself, or the contents of the file it names.
fn poly_text(arg: &str) -> anyhow::Result<String> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {arg}"))?;
        return Ok(text.trim().to_string());
    }
    Ok(arg.to_string())
}

fn load_poly(arg: &str, g: usize) -> anyhow::Result<MatrixPoly> {
    let text = poly_text(arg)?;
    if infer_g(&text) > g {
        return Err(anyhow!(Error::Shape(format!("polynomial uses x{} but the data has g = {g}", infer_g(&text)))));
    }
    Ok(parse_poly(&text, g)?)
}

fn load_point(path: &Path, n: Option<usize>) -> anyhow::Result<MatrixTuple> {
    let file: PointFile = read_json(path).with_context(|| format!("reading point {}", path.display()))?;
    let x = file.to_tuple()?;
    if let Some(n) = n {
        if x.n() != n {
            return Err(anyhow!(Error::Shape(format!("--n {n} but the point is {0}x{0}", x.n()))));
        }
    }
    Ok(x)
}

fn relax_config(a: &RelaxArgs) -> RelaxConfig {
    let mut cfg = RelaxConfig { box_radius: a.box_radius, archimedean_c: a.arch, ..RelaxConfig::default() };
    if let Some(t) = a.tol {
        cfg.solver.eps_feas = t;
    }
    cfg
}

fn status_name(s: Status) -> &'static str {
    match s {
        Status::StrictlyFeasible => "strictly_feasible",
        Status::Infeasible => "infeasible",
        Status::Marginal => "marginal",
    }
}

fn member(a: &RelaxArgs) -> anyhow::Result<Report> {
    let x = load_point(&a.point, a.n)?;
    let p = load_poly(&a.poly, x.g())?;
    let cfg = relax_config(a);
    let m = relax::membership(&p, &x, a.level, &cfg)?;
    let v = &m.verdict;
    let certificate_verified = match &v.certificate {
        Some(c) => {
            let (_, problem) = relax::assemble(&p, &x, a.level, &cfg)?;
            Some(verify_certificate(c, &problem)?)
        }
        None => None,
    };
    let value = json!({
        "command": "member",
        "poly": p.to_string(),
        "level": a.level,
        "g": x.g(),
        "n": x.n(),
        "status": status_name(v.status),
        "margin": v.margin,
        "dual_bound": v.dual_bound,
        "box_radius": m.box_radius,
        "iterations": v.iterations,
        "certificate_verified": certificate_verified,
        "witness_margins": m.witness_margins.map(|(h, l)| json!({ "hankel": h, "localizing": l })),
        "witness": m.witness.as_ref().map(MomentSequence::to_file),
    });
    let code = match v.status {
        Status::StrictlyFeasible => 0,
        Status::Infeasible => 1,
        Status::Marginal => 3,
    };
    Ok(Report { value, code })
}

fn separate(a: &RelaxArgs) -> anyhow::Result<Report> {
    let x = load_point(&a.point, a.n)?;
    let p = load_poly(&a.poly, x.g())?;
    let cfg = relax_config(a);
    match relax::separate(&p, &x, a.level, &cfg) {
        Ok((f, v)) => {
            let at_point = f.eval(&x)?;
            let value = json!({
                "command": "separate",
                "poly": p.to_string(),
                "level": a.level,
                "status": status_name(v.status),
                "dual_bound": v.dual_bound,
                "functional": f,
                "value_at_point": at_point,
            });
            Ok(Report { value, code: 0 })
        }
        Err(Error::NoSeparation(reason)) => {
            let value = json!({
                "command": "separate",
                "poly": p.to_string(),
                "level": a.level,
                "functional": null,
                "reason": reason,
            });
            Ok(Report { value, code: 1 })
        }
        Err(e) => Err(e.into()),
    }
}

fn gns_cmd(a: &GnsArgs) -> anyhow::Result<Report> {
    let file: MomentFile = read_json(&a.moments).with_context(|| format!("reading moments {}", a.moments.display()))?;
    let y = MomentSequence::from_file(&file)?;
    let p = a.poly.as_deref().map(|t| load_poly(t, y.g())).transpose()?;
    let r = gns::reconstruct(&y, a.degree, a.tol.unwrap_or(DEFAULT_RANK_TOL), p.as_ref())?;
    let mut value = serde_json::to_value(&r)?;
    value["command"] = json!("gns");
    value["dim"] = json!(r.dim());
    Ok(Report { value, code: 0 })
}

fn soscheck(a: &SosArgs) -> anyhow::Result<Report> {
    let (qt, pt) = (poly_text(&a.q)?, poly_text(&a.poly)?);
    let g = infer_g(&qt).max(infer_g(&pt));
    let q = parse_poly(&qt, g)?;
    let p = parse_poly(&pt, g)?;
    let mut cfg = SolverConfig::default();
    if let Some(t) = a.tol {
        cfg.eps_feas = t;
    }
    let value = match quad_module_membership(&q, &p, a.alpha, a.beta, &cfg)? {
        QuadModuleOutcome::Found(c) => json!({
            "command": "soscheck",
            "found": true,
            "alpha": a.alpha,
            "beta": a.beta,
            "certificate": c,
        }),
        QuadModuleOutcome::NotFound { reason, verdict } => json!({
            "command": "soscheck",
            "found": false,
            "alpha": a.alpha,
            "beta": a.beta,
            "reason": reason,
            "status": verdict.as_ref().map(|v| status_name(v.status)),
            "dual_bound": verdict.as_ref().map(|v| v.dual_bound),
        }),
    };
    let code = if value["found"] == json!(true) { 0 } else { 1 };
    Ok(Report { value, code })
}

fn arch_verify(a: &ArchArgs) -> anyhow::Result<Report> {
    let pt = poly_text(&a.poly)?;
    let s_texts: Vec<String> = a.s.iter().map(|t| poly_text(t)).collect::<anyhow::Result<_>>()?;
    let f_texts: Vec<Vec<String>> =
        a.f.iter().map(|col| col.split(',').map(|e| e.trim().to_string()).collect()).collect();
    let g = std::iter::once(&pt).chain(&s_texts).chain(f_texts.iter().flatten()).map(|t| infer_g(t)).max().unwrap_or(1);
    let p = parse_poly(&pt, g)?;
    let s = s_texts.iter().map(|t| parse_poly(t, g)).collect::<freehull::Result<Vec<_>>>()?;
    let f = f_texts
        .iter()
        .map(|col| col.iter().map(|t| parse_poly(t, g)).collect::<freehull::Result<Vec<_>>>())
        .collect::<freehull::Result<Vec<_>>>()?;
    let residual = archimedean_residual(a.k2, &p, &s, &f)?;
    let exact = residual.is_zero();
    let value = json!({
        "command": "arch-verify",
        "k2": a.k2,
        "poly": p.to_string(),
        "identity_holds": exact,
        "residual": residual.to_string(),
        "residual_terms": residual.num_terms(),
    });
    Ok(Report { value, code: if exact { 0 } else { 1 } })
}

fn scenario(a: &ScenarioArgs) -> anyhow::Result<Report> {
    let cfg = ScenarioConfig::with_seed(a.seed);
    let ids: Vec<&str> = if a.id == "all" { SCENARIO_IDS.to_vec() } else { vec![a.id.as_str()] };
    let mut reports = Vec::with_capacity(ids.len());
    for id in ids {
        let r = run_scenario(id, &cfg)?;
        eprintln!("{} {} ({:.1}s)", if r.passed { "PASS" } else { "FAIL" }, r.id, r.elapsed.as_secs_f64());
        reports.push(r);
    }
    let passed = reports.iter().all(|r| r.passed);
    let value = if reports.len() == 1 { serde_json::to_value(&reports[0])? } else { serde_json::to_value(&reports)? };
    Ok(Report { value, code: if passed { 0 } else { 1 } })
}

fn eval(a: &EvalArgs) -> anyhow::Result<Report> {
    let x = load_point(&a.point, a.n)?;
    let p = load_poly(&a.poly, x.g())?;
    let v = eval_poly(&p, &x)?;
    let min_eig = matops::min_eig(&matops::symmetrize(&v))?;
    let value = json!({
        "command": "eval",
        "poly": p.to_string(),
        "value": freehull::io::to_rows(&v),
        "min_eig": min_eig,
        "psd": min_eig >= -matops::DEFAULT_PSD_TOL,
    });
    Ok(Report { value, code: 0 })
}
