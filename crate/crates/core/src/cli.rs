//! Command-line front end.
//!
//! Every command reads an instance file, applies `--set section.key=value`
//! overrides, writes one CSV to the output path and a `.meta` sidecar with
//! the resolved parameters next to it.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 infeasible instance,
//! unreachable target or a certificate that does not pass.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

use crate::certify::{certify_opt, certify_pess, Certificate, Verdict};
use crate::coeff::{c_opt, c_pess, watershed_sweep, Mode};
use crate::config::{parse_config, Config, ConfigErrors};
use crate::csv::{line, num};
use crate::error::Error;
use crate::gaussian::ProbLevel;
use crate::individual::{kkt_check, solve_portfolio, PortfolioOptions};
use crate::joint::{envelope_sweep, min_cost};

pub const DEFAULT_SAMPLES: u64 = 100_000;
const SOLVER_TOL: f64 = 1e-8;
const DEFAULT_KKT_TOL: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "wasscc", version, about = "Wasserstein chance-constraint solvers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandLine,
}

#[derive(Debug, Subcommand)]
pub enum CommandLine {
    /// Pessimistic or optimistic SOC coefficient over a grid of risk levels.
    Coeff(RunArgs),
    /// Radius at which the optimistic coefficient vanishes, over a grid.
    Watershed(RunArgs),
    /// Optimal portfolio under the chance constraint.
    Portfolio(RunArgs),
    /// Risk envelope of the production planning model over budgets.
    Envelope(RunArgs),
    /// Cheapest production plan whose envelope reaches the radius.
    SolvePp(RunArgs),
    /// Sample-based certificate for a given decision.
    Certify(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Instance file.
    #[arg(short = 'c', long = "config")]
    pub config: PathBuf,
    /// Output CSV; the sidecar is written to `<output>.meta`.
    #[arg(short = 'o', long = "output")]
    pub output: PathBuf,
    /// Override a key, e.g. `--set ambiguity.eps=0.1`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Coeff,
    Watershed,
    Portfolio,
    Envelope,
    SolvePp,
    Certify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Coeff => "coeff",
            Command::Watershed => "watershed",
            Command::Portfolio => "portfolio",
            Command::Envelope => "envelope",
            Command::SolvePp => "solve-pp",
            Command::Certify => "certify",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub instance_path: PathBuf,
    pub output_path: PathBuf,
    pub overrides: Vec<String>,
}

impl From<CommandLine> for RunConfig {
    fn from(c: CommandLine) -> Self {
        let (command, a) = match c {
            CommandLine::Coeff(a) => (Command::Coeff, a),
            CommandLine::Watershed(a) => (Command::Watershed, a),
            CommandLine::Portfolio(a) => (Command::Portfolio, a),
            CommandLine::Envelope(a) => (Command::Envelope, a),
            CommandLine::SolvePp(a) => (Command::SolvePp, a),
            CommandLine::Certify(a) => (Command::Certify, a),
        };
        RunConfig {
            command,
            instance_path: a.config,
            output_path: a.output,
            overrides: a.set,
        }
    }
}

/// Why a run did not succeed.
#[derive(Debug)]
pub enum Failure {
    /// Bad invocation or input: exit 1.
    Input(String),
    /// Infeasible, unreachable or not certified: exit 2.
    Verdict(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Input(_) => 1,
            Failure::Verdict(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Verdict(m) => m,
        }
    }
}

impl From<ConfigErrors> for Failure {
    fn from(e: ConfigErrors) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Infeasible(_) | Error::Unreachable { .. } | Error::EmptyPolytope => Failure::Verdict(e.to_string()),
            other => Failure::Input(other.to_string()),
        }
    }
}

/// Load the instance file and apply the overrides, collecting every error.
pub fn load(rc: &RunConfig) -> Result<Config, Failure> {
    let text = fs::read_to_string(&rc.instance_path)
        .map_err(|e| Failure::Input(format!("{}: {e}", rc.instance_path.display())))?;
    let mut cfg = parse_config(&text)?;
    let errors: Vec<_> = rc.overrides.iter().filter_map(|o| cfg.set(o).err()).collect();
    if !errors.is_empty() {
        return Err(ConfigErrors(errors).into());
    }
    Ok(cfg)
}

/// Command output: the CSV body, extra sidecar entries and the exit verdict.
struct Output {
    csv: String,
    notes: Vec<(String, String)>,
    verdict: Option<Failure>,
}

impl Output {
    fn ok(csv: String) -> Self {
        Self {
            csv,
            notes: Vec::new(),
            verdict: None,
        }
    }
}

/// Execute one command, writing the CSV and its sidecar.
pub fn run(rc: &RunConfig) -> Result<(), Failure> {
    let cfg = load(rc)?;
    let out = match rc.command {
        Command::Coeff => coeff(&cfg)?,
        Command::Watershed => watershed(&cfg)?,
        Command::Portfolio => portfolio(&cfg)?,
        Command::Envelope => envelope(&cfg)?,
        Command::SolvePp => solve_pp(&cfg)?,
        Command::Certify => certify(&cfg)?,
    };
    write(&rc.output_path, &out.csv)?;
    write(&meta_path(&rc.output_path), &meta(rc, &cfg, &out.notes))?;
    match out.verdict {
        Some(f) => Err(f),
        None => Ok(()),
    }
}

pub fn meta_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn meta(rc: &RunConfig, cfg: &Config, notes: &[(String, String)]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "command = {}", rc.command.name());
    let _ = writeln!(s, "config = {}", rc.instance_path.display());
    let _ = writeln!(s, "version = {}", env!("CARGO_PKG_VERSION"));
    let seed = cfg
        .int("certify.seed")
        .or_else(|| cfg.int("production.random_seed"))
        .map_or("none".to_string(), |v| v.to_string());
    let _ = writeln!(s, "seed = {seed}");
    let threads = std::env::var("WASSCC_THREADS").unwrap_or_else(|_| "default".into());
    let _ = writeln!(s, "threads = {threads}");
    s.push_str("\n[resolved]\n");
    for (k, v) in cfg.resolved() {
        let _ = writeln!(s, "{k} = {v}");
    }
    if !notes.is_empty() {
        s.push_str("\n[result]\n");
        for (k, v) in notes {
            let _ = writeln!(s, "{k} = {v}");
        }
    }
    s
}

fn levels(grid: &[f64]) -> Result<Vec<ProbLevel>, Failure> {
    grid.iter()
        .map(|&e| ProbLevel::new(e).map_err(Failure::from))
        .collect()
}

fn coeff(cfg: &Config) -> Result<Output, Failure> {
    let amb = cfg.ambiguity()?;
    let grid = levels(&cfg.eps_grid()?)?;
    let mode = cfg.mode();
    let mut csv = line(["epsi", "delta", "c", "argopt_eps_prime"]);
    for eps in grid {
        let r = match mode {
            Mode::Pessimistic => c_pess(eps, amb.delta)?,
            Mode::Optimistic => c_opt(eps, amb.delta)?,
        };
        csv += &line([num(eps.get()), num(amb.delta), num(r.c), num(r.argopt_eps_prime)]);
    }
    let mut out = Output::ok(csv);
    out.notes.push(("mode".into(), mode.to_string()));
    Ok(out)
}

fn watershed(cfg: &Config) -> Result<Output, Failure> {
    let grid = levels(&cfg.eps_grid()?)?;
    let mut csv = line(["epsi", "delta"]);
    for p in watershed_sweep(&grid)? {
        csv += &line([num(p.eps), num(p.delta_star)]);
    }
    Ok(Output::ok(csv))
}

fn portfolio(cfg: &Config) -> Result<Output, Failure> {
    let inst = cfg.portfolio()?;
    let mode = cfg.mode();
    let opts = PortfolioOptions {
        allow_nonconvex: cfg.flag("portfolio.allow_nonconvex").unwrap_or(false),
    };
    let sol = solve_portfolio(&inst, mode, SOLVER_TOL, opts)?;
    let kkt = kkt_check(&inst, &sol, cfg.real("portfolio.kkt_tol").unwrap_or(DEFAULT_KKT_TOL));
    let mut csv = line(inst.labels());
    csv += &line(sol.allocation.iter().map(|&v| num(v)));
    let mut out = Output::ok(csv);
    out.notes = vec![
        ("mode".into(), mode.to_string()),
        ("objective".into(), num(sol.objective)),
        ("margin".into(), num(sol.margin)),
        ("coefficient".into(), num(sol.coefficient)),
        ("degenerate".into(), sol.degenerate.to_string()),
        ("kkt_ok".into(), kkt.ok.to_string()),
        ("kkt_stationarity".into(), num(kkt.stationarity)),
    ];
    Ok(out)
}

fn envelope(cfg: &Config) -> Result<Output, Failure> {
    let inst = cfg.production()?;
    let grid = cfg.budget_grid()?;
    let opts = cfg.bca_options();
    let mut csv = line(["budget", "radius"]);
    for (u, r) in envelope_sweep(&inst, &grid, &opts)? {
        csv += &line([num(u), num(r)]);
    }
    Ok(Output::ok(csv))
}

fn solve_pp(cfg: &Config) -> Result<Output, Failure> {
    let inst = cfg.production()?;
    let opts = cfg.bca_options();
    let r = min_cost(&inst, &opts)?;
    let mut header = vec!["budget".to_string(), "radius".to_string()];
    header.extend((1..=inst.n()).map(|i| format!("x{i}")));
    let mut csv = line(header);
    let mut row = vec![num(r.budget), num(r.rho)];
    row.extend(r.x.iter().map(|&v| num(v)));
    csv += &line(row);
    let mut out = Output::ok(csv);
    out.notes.push(("budget_tolerance".into(), num(r.tol_u)));
    Ok(out)
}

fn certify(cfg: &Config) -> Result<Output, Failure> {
    let x: DVector<f64> = cfg
        .vector("certify.x")
        .ok_or_else(|| Failure::Input("`certify.x`: required key is missing".into()))?;
    let n = cfg.int("certify.n_samples").unwrap_or(DEFAULT_SAMPLES) as usize;
    let seed = cfg.int("certify.seed").unwrap_or(0);
    let mode = cfg.mode();
    let target = cfg.word("certify.target").unwrap_or("portfolio");
    let cert: Certificate = match (target, mode) {
        ("portfolio", Mode::Pessimistic) => certify_pess(&cfg.portfolio()?, &x, n, seed)?,
        ("portfolio", Mode::Optimistic) => certify_opt(&cfg.portfolio()?, &x, n, seed)?,
        ("individual", Mode::Pessimistic) => certify_pess(&cfg.individual()?, &x, n, seed)?,
        ("individual", Mode::Optimistic) => certify_opt(&cfg.individual()?, &x, n, seed)?,
        (_, Mode::Pessimistic) => certify_pess(&cfg.production()?, &x, n, seed)?,
        (_, Mode::Optimistic) => certify_opt(&cfg.production()?, &x, n, seed)?,
    };
    let mut out = Output::ok(format!("{}\n{}\n", Certificate::HEADER, cert.record()));
    out.notes.push(("mode".into(), mode.to_string()));
    if cert.verdict != Verdict::Pass {
        out.verdict = Some(Failure::Verdict(format!("certificate verdict: {}", cert.verdict)));
    }
    Ok(out)
}

/// Size the global thread pool from `WASSCC_THREADS`, if set.
pub fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("WASSCC_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| Failure::Input(format!("WASSCC_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Input(e.to_string()))
}
