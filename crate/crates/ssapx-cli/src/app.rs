//! Command-line definitions and the `solve`, `bench` and `gen` commands.

use std::io::Read;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ssapx::solvers::{partition_approx_with, subset_sum_weak_approx_with, unbounded_subset_sum_weak_approx, RegimePolicy};
use ssapx::{Eps, SolveResult};

use crate::generate::{gen_instance, GenSpec, Kind, TargetRule};
use crate::instance::{InstanceFile, Problem};
use crate::oracles::{exact_subset_sum_dp, exact_unbounded_dp, subset_sum_bound, OptBound};

/// Process exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitCode {
    Ok = 0,
    Failed = 1,
    Input = 2,
    Budget = 3,
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum CliError {
    #[error("i/o error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("resource budget exceeded: {0}")]
    Budget(String),
    #[error("verification failed: {0}")]
    Verify(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn code(&self) -> ExitCode {
        match self {
            CliError::Io(_) | CliError::Parse(_) | CliError::Input(_) => ExitCode::Input,
            CliError::Budget(_) => ExitCode::Budget,
            CliError::Verify(_) | CliError::Internal(_) => ExitCode::Failed,
        }
    }
}

impl From<ssapx::Error> for CliError {
    fn from(e: ssapx::Error) -> Self {
        use ssapx::Error as E;
        match e {
            E::Budget(_) | E::ConvolutionLimit { .. } => CliError::Budget(e.to_string()),
            E::InvalidInput(_) | E::Overflow(_) => CliError::Input(e.to_string()),
            E::NotStored(_) | E::Internal(_) => CliError::Internal(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "ssapx", version, about = "Weak approximation schemes for subset sum, partition and unbounded subset sum")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve one instance and print the result.
    Solve(SolveArgs),
    /// Sweep eps and n over generated instances and print a CSV table.
    Bench(BenchArgs),
    /// Print a generated instance file.
    Gen(GenArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Approx,
    Exact,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutFormat {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RegimeArg {
    Auto,
    Dense,
}

impl RegimeArg {
    fn policy(self) -> RegimePolicy {
        match self {
            RegimeArg::Auto => RegimePolicy::Auto,
            RegimeArg::Dense => RegimePolicy::PreferDense,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct SolveArgs {
    /// Problem; required with --gen, checked against the file with --input.
    #[arg(long, value_enum)]
    pub problem: Option<Problem>,
    #[arg(long, default_value_t = 0.05)]
    pub eps: f64,
    /// Smoothness parameter (even).
    #[arg(long, default_value_t = 12)]
    pub d: u32,
    /// Instance file, or `-` for stdin.
    #[arg(long, conflicts_with = "gen", required_unless_present = "gen")]
    pub input: Option<String>,
    /// Generator spec such as `uniform:n=50,seed=1`.
    #[arg(long)]
    pub gen: Option<String>,
    #[arg(long, value_enum, default_value_t = Mode::Approx)]
    pub mode: Mode,
    #[arg(long, value_enum, default_value_t = OutFormat::Json)]
    pub out: OutFormat,
    /// Compare against the oracle; exit 1 on violation.
    #[arg(long)]
    pub verify: bool,
    /// Include the solver trace.
    #[arg(long)]
    pub trace: bool,
    /// Include per-phase wall-clock timings.
    #[arg(long)]
    pub timings: bool,
    #[arg(long, value_enum, default_value_t = RegimeArg::Auto)]
    pub regime: RegimeArg,
}

#[derive(Args, Debug, Clone)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value_t = Problem::SubsetSum)]
    pub problem: Problem,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.05,0.02")]
    pub eps: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "100")]
    pub n: Vec<usize>,
    #[arg(long, default_value = "uniform")]
    pub kind: String,
    #[arg(long, default_value_t = 1_000_000_000)]
    pub max: u64,
    /// Target rule: half, third, quarter, a fraction, or abs:N.
    #[arg(long, default_value = "half")]
    pub t: String,
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    #[arg(long, default_value_t = 12)]
    pub d: u32,
    #[arg(long, value_enum, default_value_t = RegimeArg::Auto)]
    pub regime: RegimeArg,
    /// Skip the oracle columns.
    #[arg(long)]
    pub no_oracle: bool,
}

#[derive(Args, Debug, Clone)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub problem: Problem,
    /// Generator spec such as `dense-window:n=40,seed=2,max=100000`.
    pub spec: String,
}

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct Report {
    pub value: u64,
    /// `[index, copies]` pairs.
    pub items: Vec<(usize, u64)>,
    /// `[value, copies]` pairs.
    pub witness: Vec<(u64, u64)>,
    pub certificate: ssapx::core::Certificate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<(String, String)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<Vec<(String, f64)>>,
}

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct Verification {
    /// `exact-dp` or `scaled-dp` (an upper bound on the optimum).
    pub oracle: &'static str,
    pub opt: u64,
    pub ratio: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
}

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct SolveOutput {
    pub problem: Problem,
    pub n: usize,
    pub target: u64,
    pub eps: f64,
    pub d: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub approx: Option<Report>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<Report>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verify: Option<Verification>,
}

fn round_us(ms: f64) -> f64 {
    (ms * 1e3).round() / 1e3
}

fn report(r: SolveResult, trace: bool, timings: bool) -> Report {
    Report {
        value: r.value,
        items: r.items,
        witness: r.witness.iter().collect(),
        certificate: r.certificate,
        trace: trace.then_some(r.trace),
        timings_ms: timings.then(|| r.timings.into_iter().map(|(k, v)| (k, round_us(v))).collect()),
    }
}

fn load(args: &SolveArgs) -> Result<InstanceFile, CliError> {
    let inst = match (&args.input, &args.gen) {
        (Some(path), _) => {
            let text = if path == "-" {
                let mut s = String::new();
                std::io::stdin().read_to_string(&mut s).map_err(|e| CliError::Io(e.to_string()))?;
                s
            } else {
                std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{path}: {e}")))?
            };
            InstanceFile::parse(&text).map_err(CliError::Parse)?
        }
        (None, Some(spec)) => {
            let problem = args.problem.ok_or_else(|| CliError::Input("--gen needs --problem".into()))?;
            gen_instance(problem, &GenSpec::parse(spec).map_err(CliError::Input)?).map_err(CliError::Input)?
        }
        (None, None) => return Err(CliError::Input("either --input or --gen is required".into())),
    };
    if let Some(p) = args.problem {
        if p != inst.problem {
            return Err(CliError::Input(format!("file holds a {} instance", inst.problem.name())));
        }
    }
    Ok(inst)
}

fn parse_eps(eps: f64) -> Result<Eps, CliError> {
    Eps::new(eps).map_err(|e| CliError::Input(e.to_string()))
}

/// Runs the approximate solver for the instance.
pub fn solve_approx(inst: &InstanceFile, eps: Eps, d: u32, policy: RegimePolicy) -> Result<SolveResult, CliError> {
    let x = &inst.items;
    Ok(match inst.problem {
        Problem::Partition => partition_approx_with(x, eps, d, policy)?,
        Problem::SubsetSum => subset_sum_weak_approx_with(x, inst.effective_target(), eps, d, policy)?,
        Problem::Unbounded => unbounded_subset_sum_weak_approx(x, inst.effective_target(), eps)?,
    })
}

/// Runs the exact oracle for the instance.
pub fn solve_exact(inst: &InstanceFile) -> Result<SolveResult, CliError> {
    let t = inst.effective_target();
    Ok(match inst.problem {
        Problem::Partition | Problem::SubsetSum => exact_subset_sum_dp(&inst.items, t)?,
        Problem::Unbounded => exact_unbounded_dp(&inst.items, t)?,
    })
}

/// Optimum or an upper bound on it.
pub fn opt_bound(inst: &InstanceFile) -> Result<OptBound, CliError> {
    let t = inst.effective_target();
    Ok(match inst.problem {
        Problem::Partition | Problem::SubsetSum => subset_sum_bound(&inst.items, t)?,
        Problem::Unbounded => OptBound { value: exact_unbounded_dp(&inst.items, t)?.value, exact: true },
    })
}

/// Checks the weak guarantee `(1 - delta) OPT <= value <= (1 + delta) t` for a report.
pub fn check(inst: &InstanceFile, r: &Report, bound: OptBound) -> Verification {
    let t = inst.effective_target() as f64;
    let c = &r.certificate;
    let v = r.value as f64;
    let slack = 1e-9 * t.max(1.0);
    let upper_ok = match inst.problem {
        Problem::Partition => {
            let total: f64 = inst.items.iter().map(|&x| x as f64).sum();
            v <= total / 2.0 + c.delta * total + slack
        }
        _ => v <= (1.0 + c.delta_upper) * t + slack,
    };
    Verification {
        oracle: if bound.exact { "exact-dp" } else { "scaled-dp" },
        opt: bound.value,
        ratio: if bound.value == 0 { 1.0 } else { v / bound.value as f64 },
        lower_ok: v >= (1.0 - c.delta_lower) * bound.value as f64 - slack,
        upper_ok,
    }
}

const CSV_HEADER: &str = "problem,n,eps,d,mode,value,opt,ratio,delta_cert,exact";

fn solve_csv(out: &SolveOutput) -> String {
    let mut s = format!("{CSV_HEADER}\n");
    for (mode, r) in [("approx", &out.approx), ("exact", &out.exact)] {
        if let Some(r) = r {
            let (opt, ratio) = match &out.verify {
                Some(v) => (v.opt.to_string(), format!("{:.6}", v.ratio)),
                None => (String::new(), String::new()),
            };
            s.push_str(&format!(
                "{},{},{},{},{mode},{},{opt},{ratio},{:.6},{}\n",
                out.problem.name(),
                out.n,
                out.eps,
                out.d,
                r.value,
                r.certificate.delta,
                r.certificate.exact
            ));
        }
    }
    s
}

/// `solve`: returns the text for stdout and an error to report, if any.
pub fn solve(args: &SolveArgs) -> (String, Option<CliError>) {
    match solve_inner(args) {
        Ok((out, err)) => (out, err),
        Err(e) => (String::new(), Some(e)),
    }
}

fn solve_inner(args: &SolveArgs) -> Result<(String, Option<CliError>), CliError> {
    let inst = load(args)?;
    let eps = parse_eps(args.eps)?;
    let approx = match args.mode {
        Mode::Approx | Mode::Both => Some(report(solve_approx(&inst, eps, args.d, args.regime.policy())?, args.trace, args.timings)),
        Mode::Exact => None,
    };
    let exact = match args.mode {
        Mode::Exact | Mode::Both => Some(report(solve_exact(&inst)?, args.trace, args.timings)),
        Mode::Approx => None,
    };
    let mut failure = None;
    let verify = if args.verify {
        let bound = opt_bound(&inst)?;
        let subject = approx.as_ref().or(exact.as_ref()).expect("one mode runs");
        let v = check(&inst, subject, bound);
        if !(v.lower_ok && v.upper_ok) {
            failure = Some(CliError::Verify(format!("value {} against oracle {}", subject.value, v.opt)));
        }
        if let (Some(e), true) = (&exact, bound.exact) {
            if e.value != bound.value {
                failure = Some(CliError::Verify(format!("exact value {} differs from oracle {}", e.value, bound.value)));
            }
        }
        Some(v)
    } else {
        None
    };
    for r in approx.iter().chain(exact.iter()) {
        let resum: u128 = r.witness.iter().map(|&(v, c)| v as u128 * c as u128).sum();
        if resum != r.value as u128 {
            return Err(CliError::Internal("witness does not re-sum to the value".into()));
        }
    }
    let out = SolveOutput {
        problem: inst.problem,
        n: inst.items.len(),
        target: inst.effective_target(),
        eps: args.eps,
        d: args.d,
        approx,
        exact,
        verify,
    };
    let text = match args.out {
        OutFormat::Json => serde_json::to_string_pretty(&out).map_err(|e| CliError::Internal(e.to_string()))? + "\n",
        OutFormat::Csv => solve_csv(&out),
    };
    Ok((text, failure))
}

pub const BENCH_HEADER: &str =
    "problem,n,eps,d,seed,value,opt,opt_exact,ratio,delta_cert,preprocess_ms,group_ms,merge_ms,backtrack_ms,time_ms";

fn phase(r: &SolveResult, name: &str) -> f64 {
    r.timings.iter().filter(|p| p.0 == name).map(|p| p.1).sum()
}

/// `bench`: one CSV row per (eps, n, seed), in that nesting order.
pub fn bench(args: &BenchArgs) -> Result<String, CliError> {
    let kind = Kind::parse(&args.kind).map_err(CliError::Input)?;
    let rule = TargetRule::parse(&args.t).map_err(CliError::Input)?;
    let mut out = format!("{BENCH_HEADER}\n");
    for &e in &args.eps {
        let eps = parse_eps(e)?;
        for &n in &args.n {
            for seed in 0..args.seeds {
                let inst = gen_instance(args.problem, &GenSpec::new(kind, n, seed, args.max, rule)).map_err(CliError::Input)?;
                let start = Instant::now();
                let r = solve_approx(&inst, eps, args.d, args.regime.policy())?;
                let total = start.elapsed().as_secs_f64() * 1e3;
                let (opt, opt_exact, ratio) = if args.no_oracle {
                    (String::new(), String::new(), String::new())
                } else {
                    let b = opt_bound(&inst)?;
                    let ratio = if b.value == 0 { 1.0 } else { r.value as f64 / b.value as f64 };
                    (b.value.to_string(), b.exact.to_string(), format!("{ratio:.6}"))
                };
                out.push_str(&format!(
                    "{},{n},{e},{},{seed},{},{opt},{opt_exact},{ratio},{:.6},{:.3},{:.3},{:.3},{:.3},{:.3}\n",
                    args.problem.name(),
                    args.d,
                    r.value,
                    r.certificate.delta,
                    phase(&r, "preprocess"),
                    phase(&r, "group"),
                    phase(&r, "merge"),
                    phase(&r, "backtrack"),
                    total
                ));
            }
        }
    }
    Ok(out)
}

/// Dispatches a parsed command line.
pub fn run(cli: &Cli) -> (String, Option<CliError>) {
    match &cli.command {
        Command::Solve(a) => solve(a),
        Command::Bench(a) => match bench(a) {
            Ok(s) => (s, None),
            Err(e) => (String::new(), Some(e)),
        },
        Command::Gen(a) => match GenSpec::parse(&a.spec).and_then(|s| gen_instance(a.problem, &s)) {
            Ok(f) => (f.to_canonical() + "\n", None),
            Err(e) => (String::new(), Some(CliError::Input(e))),
        },
    }
}
