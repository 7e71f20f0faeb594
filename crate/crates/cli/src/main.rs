//! `ermakov` command-line front end.

mod args;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ermakov_core::exactlab::QuadFormParams;
use ermakov_core::numeric::{integrate, probe_singularity, ComplexPath, System, METHOD};
use ermakov_core::ode::{ParamEnv, ERMAKOV_PINNEY};
use ermakov_core::report::{
    self, exact_lab_checks, exact_lab_json, probe_json, run_analysis, text_summary, to_json_string, ReportOptions,
    SCHEMA_VERSION,
};
use ermakov_core::{Error, C64};
use serde_json::{json, Value};

use args::{parse_complex, parse_free, parse_ic, parse_param, parse_path};

#[derive(Parser)]
#[command(name = "ermakov", version, about = "Movable-singularity analyzer for autonomous algebraic ODEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: balances, series, closed forms, laboratory checks, probes and the discrepancy ledger.
    Analyze(AnalyzeArgs),
    /// Dominant balances and local series.
    Series(SymbolicArgs),
    /// Closed-form candidates and period comparison.
    ClosedForm(SymbolicArgs),
    /// Integrate EP or the linear oscillator along a complex path.
    Integrate(IntegrateArgs),
    /// Locate a movable singularity and fit its local exponent.
    Probe(ProbeArgs),
    /// Closed-form laboratory checks.
    VerifyExact(VerifyArgs),
    /// Render a saved report, or run the analysis when no input is given.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Args)]
struct Output {
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SymbolicArgs {
    /// ODE text, or `@file` to read it from a file.
    #[arg(long, default_value = ERMAKOV_PINNEY)]
    ode: String,
    /// Parameter binding `name=value` (repeatable); omega defaults to 1.
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, C64)>,
    /// Series truncation order K.
    #[arg(long, default_value_t = 12)]
    order: usize,
    /// Largest branch order n in the balance search.
    #[arg(long, default_value_t = 4)]
    branch_max: u32,
    /// Free value `index=value` at a resonant index (repeatable).
    #[arg(long = "free", value_parser = parse_free)]
    free: Vec<(i64, C64)>,
    /// Real c in the claimed residue a_-1 = c i.
    #[arg(long, default_value_t = 1.0)]
    residue_scale: f64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    symbolic: SymbolicArgs,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Initial condition `alpha,alpha'` for the configured probes.
    #[arg(long, value_parser = parse_ic)]
    ic: Option<(C64, C64)>,
    /// Probe path `a:b[:c...]` (repeatable).
    #[arg(long = "path", value_parser = parse_path)]
    paths: Vec<ComplexPath>,
    #[arg(long = "A", default_value_t = 2.0)]
    a: f64,
    #[arg(long = "B", default_value_t = 1.0)]
    b: f64,
    #[arg(long = "C", default_value_t = 1.0)]
    c: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum SystemArg {
    Ep,
    Linear,
}

#[derive(Args)]
struct IntegrateArgs {
    #[arg(long, value_enum, default_value = "ep")]
    system: SystemArg,
    #[arg(long, value_parser = parse_complex, default_value = "1")]
    omega: C64,
    #[arg(long, value_parser = parse_ic, default_value = "1,0")]
    ic: (C64, C64),
    #[arg(long, value_parser = parse_path, default_value = "0:10")]
    path: ComplexPath,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Text output is CSV.
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(long, value_parser = parse_complex, default_value = "0")]
    omega: C64,
    #[arg(long, value_parser = parse_ic, default_value = "1,0")]
    ic: (C64, C64),
    #[arg(long, value_parser = parse_path, default_value = "0:0.999i")]
    path: ComplexPath,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Re-integrations toward the current estimate.
    #[arg(long, default_value_t = 2)]
    refinements: usize,
    /// Fraction of the remaining distance covered by each refinement.
    #[arg(long, default_value_t = 0.9)]
    approach: f64,
    #[command(flatten)]
    output: Output,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Case {
    Pinney,
    Cruz,
    Invariant,
    Riccati,
    ThirdOrder,
    Mobius,
    All,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value = "all")]
    case: Case,
    #[arg(long = "A", default_value_t = 2.0)]
    a: f64,
    #[arg(long = "B", default_value_t = 1.0)]
    b: f64,
    #[arg(long = "C", default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 1.0)]
    omega: f64,
    /// Cruz initial value alpha(0).
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    alpha0: f64,
    /// Cruz initial derivative alpha'(0).
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    dalpha0: f64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct ReportArgs {
    /// Saved JSON report to render.
    #[arg(long)]
    input: Option<PathBuf>,
    #[command(flatten)]
    analyze: AnalyzeArgs,
}

enum Failure {
    Input(String),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::DegenerateFamily
            | Error::TruncationInsufficient { .. }
            | Error::SingularStep { .. }
            | Error::ZeroSeriesInversion => Failure::Internal(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn read_ode(text: &str) -> CliResult<String> {
    match text.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path)
            .map(|s| s.trim().to_string())
            .map_err(|e| Failure::Input(format!("cannot read ODE file {path:?}: {e}"))),
        None => Ok(text.to_string()),
    }
}

fn options(sym: &SymbolicArgs) -> CliResult<ReportOptions> {
    let mut opts = ReportOptions { ode_text: read_ode(&sym.ode)?, ..ReportOptions::default() };
    let mut env = ParamEnv::from_pairs([("omega", C64::new(1.0, 0.0))]);
    for (k, v) in &sym.params {
        env.bind(k, *v);
    }
    opts.env = env;
    opts.order = sym.order;
    opts.branch_max = sym.branch_max;
    opts.residue_scale = sym.residue_scale;
    opts.free = sym.free.iter().copied().collect::<BTreeMap<_, _>>();
    Ok(opts)
}

fn analyze_options(a: &AnalyzeArgs) -> CliResult<ReportOptions> {
    let mut opts = options(&a.symbolic)?;
    if !(1e-13..=1e-6).contains(&a.tol) {
        return Err(Failure::Input(format!("tol {} outside [1e-13, 1e-6]", a.tol)));
    }
    opts.tol = a.tol;
    if let Some(ic) = a.ic {
        opts.ic = ic;
    }
    if !a.paths.is_empty() {
        opts.probe_paths = a.paths.clone();
    }
    opts.pinney = QuadFormParams::new(a.a, a.b, a.c);
    Ok(opts)
}

fn emit(output: &Output, json_value: &Value, text: impl FnOnce() -> String) -> CliResult<()> {
    let body = match output.format {
        Format::Json => to_json_string(json_value),
        Format::Text => text(),
    };
    match &output.out {
        Some(p) => std::fs::write(p, body).map_err(|e| Failure::Input(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

/// `key.path = value` lines for sections without a dedicated text layout.
fn flatten_text(v: &Value) -> String {
    fn walk(prefix: &str, v: &Value, out: &mut String) {
        match v {
            Value::Object(m) => m.iter().for_each(|(k, x)| {
                walk(&if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") }, x, out)
            }),
            Value::Array(a) if a.iter().any(|x| x.is_object() || x.is_array()) && !is_pair(a) => {
                a.iter().enumerate().for_each(|(i, x)| walk(&format!("{prefix}[{i}]"), x, out))
            }
            _ => out.push_str(&format!("{prefix} = {v}\n")),
        }
    }
    fn is_pair(a: &[Value]) -> bool {
        a.len() == 2 && a.iter().all(Value::is_number)
    }
    let mut out = String::new();
    walk("", v, &mut out);
    out
}

fn run_symbolic(sym: &SymbolicArgs, closed_form: bool) -> CliResult<()> {
    let opts = options(sym)?;
    let a = run_analysis(&opts)?;
    let value = if closed_form {
        json!({
            "schema_version": SCHEMA_VERSION,
            "ode": a.ode_json(),
            "closed_form": a.closed_form_json(),
            "period_comparison": a.period_json(),
            "reference_checks": a.reference_json(),
        })
    } else {
        json!({
            "schema_version": SCHEMA_VERSION,
            "ode": a.ode_json(),
            "balance": a.balance_json(),
            "local_series": a.series_json(),
            "claimed_coefficients": a.table_json(),
        })
    };
    emit(&sym.output, &value, || {
        let mut s = text_summary(&value);
        if !closed_form {
            s.push_str(&flatten_text(&json!({ "local_series": value["local_series"] })));
        } else {
            s.push_str(&flatten_text(&json!({ "period_comparison": value["period_comparison"] })));
        }
        s
    })
}

fn run_integrate(a: &IntegrateArgs) -> CliResult<()> {
    let sys = match a.system {
        SystemArg::Ep => System::Ep { omega: a.omega },
        SystemArg::Linear => System::LinearOsc { omega: a.omega },
    };
    let traj = integrate(sys, a.ic, &a.path, a.tol)?;
    let value = json!({
        "schema_version": SCHEMA_VERSION,
        "system": serde_json::to_value(sys).map_err(|e| Failure::Internal(e.to_string()))?,
        "method": METHOD,
        "tol": a.tol,
        "halt": serde_json::to_value(traj.halt).map_err(|e| Failure::Internal(e.to_string()))?,
        "stats": serde_json::to_value(traj.stats).map_err(|e| Failure::Internal(e.to_string()))?,
        "columns": ["re_t", "im_t", "re_alpha", "im_alpha", "re_dalpha", "im_dalpha"],
        "samples": traj.rows(),
    });
    emit(&a.output, &value, || traj.to_csv())
}

fn run_probe(a: &ProbeArgs) -> CliResult<()> {
    if !(0.0..1.0).contains(&a.approach) {
        return Err(Failure::Input(format!("approach {} outside [0, 1)", a.approach)));
    }
    let (traj, probe) = probe_singularity(System::Ep { omega: a.omega }, a.ic, &a.path, a.tol, a.refinements, a.approach)?;
    let value = json!({
        "schema_version": SCHEMA_VERSION,
        "omega": [a.omega.re, a.omega.im],
        "ic": [[a.ic.0.re, a.ic.0.im], [a.ic.1.re, a.ic.1.im]],
        "path": a.path.waypoints().iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
        "halt": serde_json::to_value(traj.halt).map_err(|e| Failure::Internal(e.to_string()))?,
        "samples": traj.samples.len(),
        "probe": probe_json(&probe),
    });
    emit(&a.output, &value, || flatten_text(&value))
}

fn run_verify(a: &VerifyArgs) -> CliResult<()> {
    if !(1e-13..=1e-6).contains(&a.tol) {
        return Err(Failure::Input(format!("tol {} outside [1e-13, 1e-6]", a.tol)));
    }
    let lab = exact_lab_checks(
        C64::new(a.omega, 0.0),
        QuadFormParams::new(a.a, a.b, a.c),
        (a.alpha0, a.dalpha0),
        a.tol,
    )?;
    let full = exact_lab_json(&lab);
    let keys: &[&str] = match a.case {
        Case::Pinney => &["pinney", "constraint"],
        Case::Cruz => &["cruz"],
        Case::Invariant => &["invariant"],
        Case::Riccati => &["riccati_max_residual"],
        Case::ThirdOrder => &["third_order_max_residual"],
        Case::Mobius => &["mobius_composition_max_error"],
        Case::All => &[],
    };
    let mut value = if keys.is_empty() {
        full
    } else {
        Value::Object(keys.iter().map(|k| (k.to_string(), full[*k].clone())).collect())
    };
    value["schema_version"] = json!(SCHEMA_VERSION);
    value["omega"] = json!(a.omega);
    emit(&a.output, &value, || flatten_text(&value))
}

fn run_report(a: &ReportArgs) -> CliResult<()> {
    let value = match &a.input {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Failure::Input(format!("cannot read report {}: {e}", p.display())))?;
            let v: Value =
                serde_json::from_str(&text).map_err(|e| Failure::Input(format!("invalid report JSON: {e}")))?;
            if v.get("schema_version").and_then(Value::as_str) != Some(SCHEMA_VERSION) {
                return Err(Failure::Input(format!("report schema_version is not {SCHEMA_VERSION}")));
            }
            v
        }
        None => report::analyze(&analyze_options(&a.analyze)?)?.value,
    };
    emit(&a.analyze.symbolic.output, &value, || text_summary(&value))
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Analyze(a) => {
            let rep = report::analyze(&analyze_options(&a)?)?;
            if rep.ledger().iter().any(|c| c["anchor"].as_str().is_none_or(str::is_empty)) {
                return Err(Failure::Internal("ledger claim without anchor".into()));
            }
            emit(&a.symbolic.output, &rep.value, || rep.to_text())
        }
        Command::Series(s) => run_symbolic(&s, false),
        Command::ClosedForm(s) => run_symbolic(&s, true),
        Command::Integrate(a) => run_integrate(&a),
        Command::Probe(a) => run_probe(&a),
        Command::VerifyExact(a) => run_verify(&a),
        Command::Report(a) => run_report(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(m)) => {
            eprintln!("internal inconsistency: {m}");
            ExitCode::from(3)
        }
    }
}
