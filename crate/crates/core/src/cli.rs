//! Command-line front end. Every subcommand is a pure function of its flags
//! and writes one CSV or JSON document.

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::bell::{self, BellResult, BellSettings, Tolerances, DEFAULT_SIGMA_TOL};
use crate::error::{Error, Result};
use crate::fockspace::{default_outcome_trunc, pair_coherent, DEFAULT_TAIL_TOL};
use crate::homodyne::{self, QuadratureGrid};
use crate::lhv;
use crate::specfun::GaussianNoise;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "MACROBELL_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Parser)]
#[command(name = "macrobell", version, about = "Noisy sign-measurement Bell ratios for pair-coherent states")]
#[command(after_help = "Environment:\n  MACROBELL_THREADS  maximum number of worker threads (default: all cores)")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Subcommand)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    /// Six probabilities and S for one (alpha, sigma), as JSON
    Bell {
        #[command(flatten)]
        common: Common,
        /// Local-oscillator amplitude alpha (dimensionless, >= 0)
        #[arg(long, allow_negative_numbers = true)]
        alpha: f64,
        /// Detection noise sigma (photon counts, >= 0)
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        sigma: f64,
    },
    /// S against alpha at fixed sigma, as CSV alpha,s
    ScanAlpha {
        #[command(flatten)]
        common: Common,
        /// Comma-separated ascending alpha values (dimensionless)
        #[arg(long, value_delimiter = ',', required = true)]
        alphas: Vec<f64>,
        /// Detection noise sigma (photon counts, >= 0)
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        sigma: f64,
    },
    /// Largest violating sigma against alpha, as CSV alpha,sigma_max
    ScanSigmaMax {
        #[command(flatten)]
        common: Common,
        /// Comma-separated ascending alpha values (dimensionless)
        #[arg(long, value_delimiter = ',', required = true)]
        alphas: Vec<f64>,
        /// Bisection tolerance (photon counts)
        #[arg(long, default_value_t = DEFAULT_SIGMA_TOL)]
        tol: f64,
    },
    /// Quadrature-sign limit: probabilities and S at noise sigma0, as JSON
    Homodyne {
        #[command(flatten)]
        common: Common,
        /// Quadrature noise sigma0 (vacuum quadrature units, >= 0)
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        sigma0: f64,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Largest violating quadrature noise sigma0, as JSON
    Sigma0Cutoff {
        #[command(flatten)]
        common: Common,
        /// Bisection tolerance (vacuum quadrature units)
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Seeded local and macroscopic hidden-variable suites, as JSON
    LhvSuite {
        #[command(flatten)]
        common: Common,
        /// Random models per suite (count)
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// First seed; trial k uses seed + k (integer)
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Noise-to-shift ratio sigma/M for the macroscopic suite (dimensionless)
        #[arg(long, default_value_t = 100.0)]
        ratio: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
pub struct Common {
    /// Pair-coherent amplitude r0 (dimensionless, >= 0)
    #[arg(long, default_value_t = 1.1, allow_negative_numbers = true)]
    pub r0: f64,
    /// Analyzer angle theta at A (radians)
    #[arg(long, default_value_t = BellSettings::STANDARD.theta, allow_hyphen_values = true)]
    pub theta: f64,
    /// Analyzer angle phi at B (radians)
    #[arg(long, default_value_t = BellSettings::STANDARD.phi, allow_hyphen_values = true)]
    pub phi: f64,
    /// Second analyzer angle theta' at A (radians)
    #[arg(long, default_value_t = BellSettings::STANDARD.theta_prime, allow_hyphen_values = true)]
    pub theta2: f64,
    /// Second analyzer angle phi' at B (radians)
    #[arg(long, default_value_t = BellSettings::STANDARD.phi_prime, allow_hyphen_values = true)]
    pub phi2: f64,
    /// Tail mass dropped from the pair-coherent expansion (probability)
    #[arg(long, default_value_t = DEFAULT_TAIL_TOL)]
    pub tail_tol: f64,
    /// Photon-count truncation per output mode (counts; default from alpha)
    #[arg(long)]
    pub outcome_trunc: Option<usize>,
    /// Output file (default: standard output)
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Output format (default: csv for scans, json otherwise)
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

impl Common {
    fn settings(&self) -> BellSettings {
        BellSettings { theta: self.theta, theta_prime: self.theta2, phi: self.phi, phi_prime: self.phi2 }
    }

    fn tolerances(&self) -> Tolerances {
        Tolerances { tail_tol: self.tail_tol, outcome_trunc: self.outcome_trunc }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
pub struct GridArgs {
    /// Quadrature integration half-width (vacuum quadrature units)
    #[arg(long, default_value_t = QuadratureGrid::default().half_width)]
    pub grid_half_width: f64,
    /// Quadrature nodes per axis (count, >= 2)
    #[arg(long, default_value_t = QuadratureGrid::default().nodes)]
    pub grid_nodes: usize,
}

impl GridArgs {
    fn grid(&self) -> Result<QuadratureGrid> {
        if !(self.grid_half_width > 0.0) || self.grid_nodes < 2 {
            return Err(Error::InvalidInput("grid needs half-width > 0 and at least 2 nodes".into()));
        }
        Ok(QuadratureGrid { half_width: self.grid_half_width, nodes: self.grid_nodes })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Column names plus rows of JSON scalars.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }
}

fn render_csv(table: &Table) -> String {
    let mut out = table.columns.join(",");
    out.push('\n');
    for row in &table.rows {
        let cells: Vec<String> = row
            .iter()
            .map(|v| match v {
                Value::String(s) => s.clone(),
                Value::Null => String::new(),
                other => other.to_string(),
            })
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn render_json(table: &Table, meta: &Value) -> String {
    let data: Vec<Value> = table
        .rows
        .iter()
        .map(|row| Value::Object(table.columns.iter().cloned().zip(row.iter().cloned()).collect()))
        .collect();
    let mut s = serde_json::to_string_pretty(&json!({ "meta": meta, "data": data })).expect("serializable");
    s.push('\n');
    s
}

/// Renders `table` and writes it to `path`, or standard output for `None`.
pub fn write_table(table: &Table, format: Format, meta: &Value, path: Option<&Path>) -> Result<()> {
    let text = match format {
        Format::Csv => render_csv(table),
        Format::Json => render_json(table, meta),
    };
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| Error::Io { path: p.display().to_string(), source }),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|source| Error::Io { path: "<stdout>".into(), source }),
    }
}

fn bell_row(r: &BellResult) -> Vec<Value> {
    let mut row = vec![json!(r.s)];
    row.extend(r.p_pp.iter().map(|p| json!(p)));
    row.extend([json!(r.p_a), json!(r.p_b)]);
    row
}

const BELL_COLUMNS: [&str; 7] = ["s", "p_pp_theta_phi", "p_pp_theta_phi2", "p_pp_theta2_phi", "p_pp_theta2_phi2", "p_a_theta2", "p_b_phi"];

fn fock_truncations(common: &Common, alphas: &[f64]) -> Result<Value> {
    let n_pc = pair_coherent(common.r0, common.tail_tol)?.cutoff();
    let trunc: Vec<usize> =
        alphas.iter().map(|&a| common.outcome_trunc.unwrap_or_else(|| default_outcome_trunc(a))).collect();
    Ok(json!({ "tail_tol": common.tail_tol, "pair_coherent_cutoff": n_pc, "outcome_trunc": trunc }))
}

fn execute(cfg: &RunConfig) -> Result<(Table, Format, Value, Option<PathBuf>)> {
    let (table, default_format, truncations, common) = match &cfg.command {
        Command::Bell { common, alpha, sigma } => {
            let r = bell::bell_ratio(common.r0, *alpha, GaussianNoise::new(*sigma)?, &common.settings(), &common.tolerances())?;
            let mut t = Table::new(&BELL_COLUMNS);
            t.rows.push(bell_row(&r));
            (t, Format::Json, fock_truncations(common, &[*alpha])?, common)
        }
        Command::ScanAlpha { common, alphas, sigma } => {
            let pts = bell::scan_alpha(common.r0, GaussianNoise::new(*sigma)?, &common.settings(), alphas, &common.tolerances())?;
            let mut t = Table::new(&["alpha", "s"]);
            t.rows = pts.into_iter().map(|(a, s)| vec![json!(a), json!(s)]).collect();
            (t, Format::Csv, fock_truncations(common, alphas)?, common)
        }
        Command::ScanSigmaMax { common, alphas, tol } => {
            let pts = bell::scan_sigma_max(common.r0, &common.settings(), alphas, *tol, &common.tolerances())?;
            let mut t = Table::new(&["alpha", "sigma_max"]);
            t.rows = pts.into_iter().map(|(a, s)| vec![json!(a), json!(s)]).collect();
            (t, Format::Csv, fock_truncations(common, alphas)?, common)
        }
        Command::Homodyne { common, sigma0, grid } => {
            let g = grid.grid()?;
            let r = homodyne::bell_ratio_homodyne(common.r0, &common.settings(), *sigma0, &g)?;
            let mut t = Table::new(&BELL_COLUMNS);
            t.rows.push(bell_row(&r));
            (t, Format::Json, json!({ "tail_tol": DEFAULT_TAIL_TOL, "grid": g }), common)
        }
        Command::Sigma0Cutoff { common, tol, grid } => {
            let g = grid.grid()?;
            let c = homodyne::sigma0_cutoff(common.r0, &common.settings(), *tol, &g)?;
            let mut t = Table::new(&["sigma0_cutoff"]);
            t.rows.push(vec![json!(c)]);
            (t, Format::Json, json!({ "tail_tol": DEFAULT_TAIL_TOL, "grid": g }), common)
        }
        Command::LhvSuite { common, trials, seed, ratio } => {
            if !(*ratio > 0.0) {
                return Err(Error::InvalidInput(format!("ratio must be > 0, got {ratio}")));
            }
            let settings = common.settings();
            let mut t = Table::new(&["suite", "sigma_over_m", "trials", "max_s", "violations", "min_margin", "worst_seed"]);
            let mut push = |name: &str, ratio: Value, r: lhv::SuiteReport| {
                t.rows.push(vec![
                    json!(name),
                    ratio,
                    json!(r.trials),
                    json!(r.max_s),
                    json!(r.violations),
                    json!(r.min_margin),
                    json!(r.worst_seed),
                ]);
            };
            push("local", Value::Null, lhv::local_suite(*trials, *seed, &settings)?);
            push("macroscopic", json!(ratio), lhv::macroscopic_suite(*trials, *seed, &settings, *ratio)?);
            push("microscopic", json!(1.0), lhv::macroscopic_suite(*trials, *seed, &settings, 1.0)?);
            (t, Format::Json, Value::Null, common)
        }
    };
    let meta = json!({
        "config": cfg,
        "truncations": truncations,
        "version": env!("CARGO_PKG_VERSION"),
    });
    Ok((table, common.format.unwrap_or(default_format), meta, common.output.clone()))
}

fn validate(cfg: &RunConfig) -> Result<()> {
    let common = match &cfg.command {
        Command::Bell { common, .. }
        | Command::ScanAlpha { common, .. }
        | Command::ScanSigmaMax { common, .. }
        | Command::Homodyne { common, .. }
        | Command::Sigma0Cutoff { common, .. }
        | Command::LhvSuite { common, .. } => common,
    };
    common.settings().validate()?;
    if !(common.r0 >= 0.0) || !(common.tail_tol > 0.0 && common.tail_tol < 1.0) {
        return Err(Error::InvalidInput("need r0 >= 0 and 0 < tail-tol < 1".into()));
    }
    Ok(())
}

fn run_config(cfg: &RunConfig) -> Result<()> {
    validate(cfg)?;
    let (table, format, meta, path) = execute(cfg)?;
    write_table(&table, format, &meta, path.as_deref())
}

#[cfg(feature = "parallel")]
fn with_workers<T: Send>(f: impl FnOnce() -> T + Send) -> std::result::Result<T, String> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(f()),
        Ok(v) => {
            let n: usize = v.parse().ok().filter(|n| *n > 0).ok_or(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))?;
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| e.to_string())?;
            Ok(pool.install(f))
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn with_workers<T: Send>(f: impl FnOnce() -> T + Send) -> std::result::Result<T, String> {
    Ok(f())
}

/// Parses `argv` (including the program name) and runs it.
///
/// Exit codes: 0 success, 1 argument or I/O error, 2 numerical failure.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cfg = match RunConfig::try_parse_from(argv) {
        Ok(cfg) => cfg,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match with_workers(|| run_config(&cfg)) {
        Ok(Ok(())) => 0,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
        Err(msg) => {
            eprintln!("error: {msg}");
            1
        }
    }
}
