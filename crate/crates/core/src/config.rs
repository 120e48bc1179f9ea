//! Line-oriented instance files.
//!
//! ```text
//! # comment
//! [section]
//! key = 0.15            # real, integer or word
//! key = 1, 2, 3         # vector
//! key = [               # matrix, one row per line
//!   1, 0
//!   0, 1
//! ]
//! ```
//!
//! Keys are addressed as `section.key` and checked against [`SCHEMA`].
//! Parsing reports every problem it finds, each with its line number.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::coeff::Mode;
use crate::individual::{IndividualInstance, PortfolioInstance};
use crate::joint::{BcaOptions, ProductionInstance};
use crate::model::{AmbiguitySpec, GaussianReference};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kind {
    /// Real in the open unit interval.
    Prob,
    NonNeg,
    Pos,
    Real,
    /// Integer `>= 1`.
    Count,
    /// Any 64-bit unsigned integer.
    Seed,
    Flag,
    Choice(&'static [&'static str]),
    Vector,
    Matrix,
}

impl Kind {
    fn describe(self) -> String {
        match self {
            Kind::Prob => "a real in (0, 1)".into(),
            Kind::NonNeg => "a real >= 0".into(),
            Kind::Pos => "a real > 0".into(),
            Kind::Real => "a finite real".into(),
            Kind::Count => "an integer >= 1".into(),
            Kind::Seed => "an unsigned 64-bit integer".into(),
            Kind::Flag => "true or false".into(),
            Kind::Choice(c) => format!("one of {}", c.join(", ")),
            Kind::Vector => "a comma-separated list of reals".into(),
            Kind::Matrix => "a matrix block".into(),
        }
    }
}

const MODES: &[&str] = &["pessimistic", "optimistic"];

/// Every recognized key.
pub const SCHEMA: &[(&str, Kind)] = &[
    ("ambiguity.eps", Kind::Prob),
    ("ambiguity.delta", Kind::NonNeg),
    ("ambiguity.mode", Kind::Choice(MODES)),
    ("grid.eps", Kind::Vector),
    ("grid.eps_from", Kind::Prob),
    ("grid.eps_to", Kind::Prob),
    ("grid.points", Kind::Count),
    ("grid.budgets", Kind::Vector),
    ("grid.budget_from", Kind::NonNeg),
    ("grid.budget_to", Kind::NonNeg),
    ("portfolio.preset", Kind::Choice(&["paper"])),
    ("portfolio.stocks", Kind::Vector),
    ("portfolio.deposit", Kind::Flag),
    ("portfolio.mean", Kind::Vector),
    ("portfolio.covariance", Kind::Matrix),
    ("portfolio.riskless_rate", Kind::Real),
    ("portfolio.target_return", Kind::Real),
    ("portfolio.allow_nonconvex", Kind::Flag),
    ("portfolio.kkt_tol", Kind::Pos),
    ("individual.mean", Kind::Vector),
    ("individual.covariance", Kind::Matrix),
    ("individual.a0", Kind::Vector),
    ("individual.a_lin", Kind::Matrix),
    ("individual.b0", Kind::Real),
    ("individual.b_lin", Kind::Vector),
    ("production.t", Kind::Matrix),
    ("production.cost", Kind::Vector),
    ("production.upper", Kind::Pos),
    ("production.mean", Kind::Vector),
    ("production.std", Kind::Vector),
    ("production.std_ratio", Kind::Pos),
    ("production.random_seed", Kind::Seed),
    ("production.n", Kind::Count),
    ("production.m", Kind::Count),
    ("bca.y_tol", Kind::Pos),
    ("bca.max_iter", Kind::Count),
    ("bca.eps1", Kind::Pos),
    ("certify.target", Kind::Choice(&["portfolio", "individual", "production"])),
    ("certify.x", Kind::Vector),
    ("certify.n_samples", Kind::Count),
    ("certify.seed", Kind::Seed),
];

pub fn kind_of(key: &str) -> Option<Kind> {
    SCHEMA.iter().find(|(k, _)| *k == key).map(|&(_, kind)| kind)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Real(f64),
    Int(u64),
    Flag(bool),
    Word(String),
    Vector(Vec<f64>),
    Matrix(DMatrix<f64>),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:?}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        match self {
            Value::Real(v) => write!(f, "{v:?}"),
            Value::Int(v) => write!(f, "{v}"),
            Value::Flag(v) => write!(f, "{v}"),
            Value::Word(w) => f.write_str(w),
            Value::Vector(v) => f.write_str(&join(v)),
            Value::Matrix(m) => {
                f.write_str("[")?;
                for r in 0..m.nrows() {
                    let row: Vec<f64> = m.row(r).iter().copied().collect();
                    write!(f, "\n  {}", join(&row))?;
                }
                f.write_str("\n]")
            }
        }
    }
}

/// Where a value came from: a line of the file, or a command-line override.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Override,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Line(l) => write!(f, "line {l}"),
            Origin::Override => f.write_str("override"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub origin: Option<Origin>,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(o) = self.origin {
            write!(f, "{o}: ")?;
        }
        if let Some(k) = &self.key {
            write!(f, "`{k}`: ")?;
        }
        f.write_str(&self.message)
    }
}

/// All problems found in a configuration.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

impl ConfigErrors {
    fn push(&mut self, origin: Option<Origin>, key: Option<&str>, message: impl Into<String>) {
        self.0.push(ConfigError {
            origin,
            key: key.map(str::to_string),
            message: message.into(),
        });
    }

    fn into_result<T>(self, ok: T) -> Result<T, ConfigErrors> {
        if self.0.is_empty() {
            Ok(ok)
        } else {
            Err(self)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: Value,
    origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Config {
    entries: BTreeMap<String, Entry>,
}

fn parse_reals(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("`{s}` is not a finite real"))
        })
        .collect()
}

/// Type-check a scalar or list written on one line.
fn typed(kind: Kind, raw: &str) -> Result<Value, String> {
    let bad = || format!("expected {}, got `{raw}`", kind.describe());
    let real = || raw.parse::<f64>().ok().filter(|v| v.is_finite());
    match kind {
        Kind::Prob => match real() {
            Some(v) if v > 0.0 && v < 1.0 => Ok(Value::Real(v)),
            _ => Err(bad()),
        },
        Kind::NonNeg => match real() {
            Some(v) if v >= 0.0 => Ok(Value::Real(v)),
            _ => Err(bad()),
        },
        Kind::Pos => match real() {
            Some(v) if v > 0.0 => Ok(Value::Real(v)),
            _ => Err(bad()),
        },
        Kind::Real => real().map(Value::Real).ok_or_else(bad),
        Kind::Count => match raw.parse::<u64>() {
            Ok(v) if v >= 1 => Ok(Value::Int(v)),
            _ => Err(bad()),
        },
        Kind::Seed => raw.parse::<u64>().map(Value::Int).map_err(|_| bad()),
        Kind::Flag => raw.parse::<bool>().map(Value::Flag).map_err(|_| bad()),
        Kind::Choice(c) => {
            if c.contains(&raw) {
                Ok(Value::Word(raw.to_string()))
            } else {
                Err(bad())
            }
        }
        Kind::Vector => parse_reals(raw).map(Value::Vector),
        Kind::Matrix => Err("matrices are written as a `[` ... `]` block".into()),
    }
}

fn strip_comment(line: &str) -> &str {
    line.split_once('#').map_or(line, |(a, _)| a).trim()
}

/// Parse and type-check a configuration text.
pub fn parse_config(text: &str) -> Result<Config, ConfigErrors> {
    let mut errors = ConfigErrors::default();
    let mut cfg = Config::default();
    let mut section: Option<String> = None;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    while let Some((no, line)) = lines.next() {
        let line = strip_comment(line);
        if line.is_empty() {
            continue;
        }
        let here = Some(Origin::Line(no));
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim();
            if name.is_empty() || !SCHEMA.iter().any(|(k, _)| k.starts_with(&format!("{name}."))) {
                errors.push(here, None, format!("unknown section [{name}]"));
            }
            section = Some(name.to_string());
            continue;
        }
        let Some((key, raw)) = line.split_once('=') else {
            errors.push(here, None, format!("expected `key = value`, got `{line}`"));
            continue;
        };
        let (key, raw) = (key.trim(), raw.trim());
        let full = match &section {
            Some(s) => format!("{s}.{key}"),
            None => key.to_string(),
        };
        let kind = kind_of(&full);
        let value = if raw == "[" {
            // Consume the block even when the key is bad, so its rows are
            // not reported as separate errors.
            let mut rows: Vec<Vec<f64>> = Vec::new();
            let mut closed = false;
            let mut ok = true;
            for (rno, rline) in lines.by_ref() {
                let rline = strip_comment(rline);
                if rline == "]" {
                    closed = true;
                    break;
                }
                if rline.is_empty() {
                    continue;
                }
                match parse_reals(rline) {
                    Ok(r) => rows.push(r),
                    Err(e) => {
                        errors.push(Some(Origin::Line(rno)), Some(&full), e);
                        ok = false;
                    }
                }
            }
            if !closed {
                errors.push(here, Some(&full), "matrix block is not closed by `]`");
                continue;
            }
            if !ok {
                continue;
            }
            match kind {
                Some(Kind::Matrix) => match to_matrix(&rows) {
                    Ok(m) => Ok(Value::Matrix(m)),
                    Err(e) => Err(e),
                },
                Some(k) => Err(format!("expected {}, got a matrix block", k.describe())),
                None => Err("unknown key".into()),
            }
        } else {
            match kind {
                Some(k) => typed(k, raw),
                None => Err("unknown key".into()),
            }
        };
        match value {
            Ok(v) => {
                if let Some(prev) = cfg.entries.get(&full) {
                    errors.push(here, Some(&full), format!("duplicate key, first set on {}", prev.origin));
                } else {
                    cfg.entries.insert(
                        full,
                        Entry {
                            value: v,
                            origin: Origin::Line(no),
                        },
                    );
                }
            }
            Err(e) => errors.push(here, Some(&full), e),
        }
    }
    errors.into_result(cfg)
}

fn to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, String> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 {
        return Err("empty matrix".into());
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(format!("row {} has {} entries, expected {ncols}", i + 1, r.len()));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |r, c| rows[r][c]))
}

impl Config {
    /// Apply a `section.key=value` override; matrices cannot be overridden.
    pub fn set(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let err = |key: Option<&str>, message: String| ConfigError {
            origin: Some(Origin::Override),
            key: key.map(str::to_string),
            message,
        };
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| err(None, format!("expected `section.key=value`, got `{assignment}`")))?;
        let (key, raw) = (key.trim(), raw.trim());
        let kind = kind_of(key).ok_or_else(|| err(Some(key), "unknown key".into()))?;
        let value = typed(kind, raw).map_err(|e| err(Some(key), e))?;
        self.entries.insert(
            key.to_string(),
            Entry {
                value,
                origin: Origin::Override,
            },
        );
        Ok(())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.entries.get(key).map(|e| &e.value)
    }

    pub fn origin(&self, key: &str) -> Option<Origin> {
        self.entries.get(key).map(|e| e.origin)
    }

    /// Resolved `section.key = value` lines, sorted by key.
    pub fn resolved(&self) -> Vec<(String, String)> {
        self.entries
            .iter()
            .map(|(k, e)| (k.clone(), e.value.to_string()))
            .collect()
    }

    pub fn real(&self, key: &str) -> Option<f64> {
        match self.get(key) {
            Some(Value::Real(v)) => Some(*v),
            _ => None,
        }
    }

    pub fn int(&self, key: &str) -> Option<u64> {
        match self.get(key) {
            Some(Value::Int(v)) => Some(*v),
            _ => None,
        }
    }

    pub fn flag(&self, key: &str) -> Option<bool> {
        match self.get(key) {
            Some(Value::Flag(v)) => Some(*v),
            _ => None,
        }
    }

    pub fn word(&self, key: &str) -> Option<&str> {
        match self.get(key) {
            Some(Value::Word(v)) => Some(v),
            _ => None,
        }
    }

    pub fn vector(&self, key: &str) -> Option<DVector<f64>> {
        match self.get(key) {
            Some(Value::Vector(v)) => Some(DVector::from_column_slice(v)),
            _ => None,
        }
    }

    pub fn matrix(&self, key: &str) -> Option<&DMatrix<f64>> {
        match self.get(key) {
            Some(Value::Matrix(v)) => Some(v),
            _ => None,
        }
    }
}

/// Typed access that records missing keys and failed checks.
pub struct Reader<'a> {
    cfg: &'a Config,
    errors: ConfigErrors,
}

impl<'a> Reader<'a> {
    pub fn new(cfg: &'a Config) -> Self {
        Self {
            cfg,
            errors: ConfigErrors::default(),
        }
    }

    fn missing(&mut self, key: &str) {
        self.errors.push(None, Some(key), "required key is missing");
    }

    /// Record a problem attributed to `key`.
    pub fn fail(&mut self, key: &str, message: impl Into<String>) {
        let origin = self.cfg.origin(key);
        self.errors.push(origin, Some(key), message);
    }

    pub fn real(&mut self, key: &str) -> Option<f64> {
        let v = self.cfg.real(key);
        if v.is_none() {
            self.missing(key);
        }
        v
    }

    pub fn vector(&mut self, key: &str) -> Option<DVector<f64>> {
        let v = self.cfg.vector(key);
        if v.is_none() {
            self.missing(key);
        }
        v
    }

    pub fn matrix(&mut self, key: &str) -> Option<DMatrix<f64>> {
        let v = self.cfg.matrix(key).cloned();
        if v.is_none() {
            self.missing(key);
        }
        v
    }

    pub fn count(&mut self, key: &str) -> Option<usize> {
        let v = self.cfg.int(key).map(|v| v as usize);
        if v.is_none() {
            self.missing(key);
        }
        v
    }

    pub fn finish<T>(self, value: Option<T>) -> Result<T, ConfigErrors> {
        match (self.errors.0.is_empty(), value) {
            (true, Some(v)) => Ok(v),
            (true, None) => Err(ConfigErrors(vec![ConfigError {
                origin: None,
                key: None,
                message: "incomplete configuration".into(),
            }])),
            (false, _) => Err(self.errors),
        }
    }
}

fn domain_error(r: &mut Reader<'_>, key: &str, e: crate::Error) {
    r.fail(key, e.to_string());
}

impl Config {
    pub fn ambiguity(&self) -> Result<AmbiguitySpec, ConfigErrors> {
        let mut r = Reader::new(self);
        let eps = r.real("ambiguity.eps");
        let delta = r.real("ambiguity.delta");
        let amb = match (eps, delta) {
            (Some(e), Some(d)) => match AmbiguitySpec::new(d, e) {
                Ok(a) => Some(a),
                Err(err) => {
                    domain_error(&mut r, "ambiguity.delta", err);
                    None
                }
            },
            _ => None,
        };
        r.finish(amb)
    }

    /// `ambiguity.mode`, pessimistic by default.
    pub fn mode(&self) -> Mode {
        match self.word("ambiguity.mode") {
            Some("optimistic") => Mode::Optimistic,
            _ => Mode::Pessimistic,
        }
    }

    /// Risk levels from `grid.eps`, or `points` evenly spaced levels in
    /// `[eps_from, eps_to]`; falls back to `ambiguity.eps`.
    pub fn eps_grid(&self) -> Result<Vec<f64>, ConfigErrors> {
        let mut r = Reader::new(self);
        let grid = if let Some(v) = self.vector("grid.eps") {
            if v.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
                r.fail("grid.eps", "every level must lie in (0, 1)");
            }
            Some(v.iter().copied().collect())
        } else if self.contains("grid.eps_from") || self.contains("grid.eps_to") {
            let (a, b, n) = (r.real("grid.eps_from"), r.real("grid.eps_to"), r.count("grid.points"));
            match (a, b, n) {
                (Some(a), Some(b), Some(n)) => Some(linspace(a, b, n)),
                _ => None,
            }
        } else {
            r.real("ambiguity.eps").map(|e| vec![e])
        };
        if let Some(g) = &grid {
            if g.windows(2).any(|w| w[1] <= w[0]) {
                r.fail("grid.eps", "levels must be strictly increasing");
            }
        }
        r.finish(grid)
    }

    /// Budgets from `grid.budgets`, or `points` evenly spaced budgets in
    /// `[budget_from, budget_to]`.
    pub fn budget_grid(&self) -> Result<Vec<f64>, ConfigErrors> {
        let mut r = Reader::new(self);
        let grid = if let Some(v) = self.vector("grid.budgets") {
            if v.iter().any(|&u| u < 0.0) {
                r.fail("grid.budgets", "budgets must be nonnegative");
            }
            Some(v.iter().copied().collect::<Vec<_>>())
        } else {
            let (a, b, n) = (
                r.real("grid.budget_from"),
                r.real("grid.budget_to"),
                r.count("grid.points"),
            );
            match (a, b, n) {
                (Some(a), Some(b), Some(n)) => Some(linspace(a, b, n)),
                _ => None,
            }
        };
        if let Some(g) = &grid {
            if g.windows(2).any(|w| w[1] < w[0]) {
                r.fail("grid.budgets", "budgets must be nondecreasing");
            }
        }
        r.finish(grid)
    }

    pub fn bca_options(&self) -> BcaOptions {
        let d = BcaOptions::default();
        BcaOptions {
            y_tol: self.real("bca.y_tol").unwrap_or(d.y_tol),
            max_iter: self.int("bca.max_iter").map_or(d.max_iter, |v| v as usize),
            eps1: self.real("bca.eps1").unwrap_or(d.eps1),
            eps0_sequence: d.eps0_sequence,
        }
    }

    /// `[portfolio]` with `preset = paper` (optionally restricted to
    /// `stocks` and `deposit`), or explicit `mean` and `covariance`.
    pub fn portfolio(&self) -> Result<PortfolioInstance, ConfigErrors> {
        let amb = self.ambiguity();
        let mut r = Reader::new(self);
        let amb = match amb {
            Ok(a) => Some(a),
            Err(e) => {
                r.errors.0.extend(e.0);
                None
            }
        };
        let inst = if self.word("portfolio.preset") == Some("paper") {
            let stocks: Vec<usize> = match self.vector("portfolio.stocks") {
                Some(v) => {
                    if v.iter().any(|&s| s.fract() != 0.0 || !(1.0..=10.0).contains(&s)) {
                        r.fail("portfolio.stocks", "stock indices must be integers in 1..=10");
                    }
                    v.iter().map(|&s| s as usize).collect()
                }
                None => (1..=10).collect(),
            };
            let deposit = self.flag("portfolio.deposit").unwrap_or(true);
            amb.and_then(|a| {
                match PortfolioInstance::paper_subset(&stocks, deposit, a.delta, a.eps.get()) {
                    Ok(p) => Some(p),
                    Err(e) => {
                        domain_error(&mut r, "portfolio.preset", e);
                        None
                    }
                }
            })
        } else {
            let mean = r.vector("portfolio.mean");
            let cov = r.matrix("portfolio.covariance");
            let eta = r.real("portfolio.target_return");
            let rf = self.real("portfolio.riskless_rate");
            match (mean, cov, eta, amb) {
                (Some(m), Some(c), Some(eta), Some(a)) => {
                    if c.nrows() != m.len() || c.ncols() != m.len() {
                        r.fail(
                            "portfolio.covariance",
                            format!("is {}x{}, expected {n}x{n}", c.nrows(), c.ncols(), n = m.len()),
                        );
                        None
                    } else {
                        match PortfolioInstance::new(m, c, rf, eta, a) {
                            Ok(p) => Some(p),
                            Err(e) => {
                                domain_error(&mut r, "portfolio.covariance", e);
                                None
                            }
                        }
                    }
                }
                _ => None,
            }
        };
        r.finish(inst)
    }

    pub fn individual(&self) -> Result<IndividualInstance, ConfigErrors> {
        let amb = self.ambiguity();
        let mut r = Reader::new(self);
        let amb = match amb {
            Ok(a) => Some(a),
            Err(e) => {
                r.errors.0.extend(e.0);
                None
            }
        };
        let mean = r.vector("individual.mean");
        let cov = r.matrix("individual.covariance");
        let a0 = r.vector("individual.a0");
        let a_lin = r.matrix("individual.a_lin");
        let b0 = r.real("individual.b0");
        let b_lin = r.vector("individual.b_lin");
        let inst = match (mean, cov, a0, a_lin, b0, b_lin, amb) {
            (Some(m), Some(c), Some(a0), Some(al), Some(b0), Some(bl), Some(amb)) => {
                match GaussianReference::new(m, c) {
                    Ok(reference) => match IndividualInstance::new(reference, a0, al, b0, bl, amb) {
                        Ok(i) => Some(i),
                        Err(e) => {
                            domain_error(&mut r, "individual.a_lin", e);
                            None
                        }
                    },
                    Err(e) => {
                        domain_error(&mut r, "individual.covariance", e);
                        None
                    }
                }
            }
            _ => None,
        };
        r.finish(inst)
    }

    /// `[production]` with explicit `t`, `cost`, `upper`, `mean` (and `std`
    /// or `std_ratio`), or a random instance from `random_seed`, `n`, `m`.
    pub fn production(&self) -> Result<ProductionInstance, ConfigErrors> {
        let amb = self.ambiguity();
        let mut r = Reader::new(self);
        let amb = match amb {
            Ok(a) => Some(a),
            Err(e) => {
                r.errors.0.extend(e.0);
                None
            }
        };
        let upper = r.real("production.upper");
        let inst = if let Some(seed) = self.int("production.random_seed") {
            let (n, m) = (r.count("production.n"), r.count("production.m"));
            match (n, m, upper, amb) {
                (Some(n), Some(m), Some(u), Some(a)) => match ProductionInstance::random(seed, n, m, u, a) {
                    Ok(p) => Some(p),
                    Err(e) => {
                        domain_error(&mut r, "production.random_seed", e);
                        None
                    }
                },
                _ => None,
            }
        } else {
            let t = r.matrix("production.t");
            let cost = r.vector("production.cost");
            let mean = r.vector("production.mean");
            let std = match (self.vector("production.std"), &mean) {
                (Some(s), _) => Some(s),
                (None, Some(m)) => Some(m * self.real("production.std_ratio").unwrap_or(0.1)),
                (None, None) => None,
            };
            match (t, cost, mean, std, upper, amb) {
                (Some(t), Some(c), Some(m), Some(s), Some(u), Some(a)) => {
                    match ProductionInstance::new(t, c, u, m, s, a) {
                        Ok(p) => Some(p),
                        Err(e) => {
                            domain_error(&mut r, "production.t", e);
                            None
                        }
                    }
                }
                _ => None,
            }
        };
        r.finish(inst)
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalars_lists_and_blocks() {
        let cfg = parse_config(
            "# header\n[ambiguity]\neps = 0.15 # level\ndelta = 0\n[portfolio]\nmean = 1, 2\ncovariance = [\n 1, 0\n 0, 1\n]\n",
        )
        .unwrap();
        assert_eq!(cfg.real("ambiguity.eps"), Some(0.15));
        assert_eq!(cfg.vector("portfolio.mean").unwrap().len(), 2);
        assert_eq!(cfg.matrix("portfolio.covariance").unwrap(), &DMatrix::identity(2, 2));
    }

    #[test]
    fn all_errors_are_reported_with_lines() {
        let err = parse_config("[ambiguity]\neps = 1.5\nbogus = 1\ndelta = -1\n[nowhere]\n").unwrap_err();
        let lines: Vec<_> = err.0.iter().map(|e| e.origin).collect();
        assert_eq!(
            lines,
            [2, 3, 4, 5].map(|l| Some(Origin::Line(l))).to_vec(),
            "{err}"
        );
        assert!(err.to_string().contains("line 2: `ambiguity.eps`"));
    }

    #[test]
    fn ragged_and_unclosed_matrices() {
        let e = parse_config("[portfolio]\ncovariance = [\n1, 2\n3\n]\n").unwrap_err();
        assert!(e.0[0].message.contains("row 2"));
        let e = parse_config("[portfolio]\ncovariance = [\n1, 2\n").unwrap_err();
        assert!(e.0[0].message.contains("not closed"));
    }

    #[test]
    fn overrides_are_typed() {
        let mut cfg = parse_config("[ambiguity]\neps = 0.1\n").unwrap();
        cfg.set("ambiguity.eps=0.2").unwrap();
        assert_eq!(cfg.real("ambiguity.eps"), Some(0.2));
        assert!(cfg.set("ambiguity.eps=2").is_err());
        assert!(cfg.set("nope.key=1").is_err());
    }

    #[test]
    fn missing_keys_are_listed() {
        let cfg = parse_config("[portfolio]\nmean = 1, 2\n").unwrap();
        let e = cfg.portfolio().unwrap_err();
        let keys: Vec<_> = e.0.iter().filter_map(|e| e.key.as_deref()).collect();
        for k in ["ambiguity.eps", "ambiguity.delta", "portfolio.covariance", "portfolio.target_return"] {
            assert!(keys.contains(&k), "{keys:?}");
        }
    }

    #[test]
    fn displayed_values_reparse() {
        let m = DMatrix::from_row_slice(2, 2, &[0.1, 1e-20, -3.0, 4.5]);
        let text = format!("[portfolio]\ncovariance = {}\n", Value::Matrix(m.clone()));
        let cfg = parse_config(&text).unwrap();
        assert_eq!(cfg.matrix("portfolio.covariance").unwrap(), &m);
    }
}
