//! Command-line front end: argument parsing, result records and their serialization.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::keyrate::{self, Analysis, CoefficientSource, ThresholdResult};
use crate::mcsim::{self, SimConfig};
use crate::registry::{self, Bound};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const CSV_HEADER: [&str; 5] = ["protocol", "bound", "epsilon_star", "p_star", "fidelity_star"];

#[derive(Parser, Debug)]
#[command(name = "effchan", version, about = "Threshold error rates of symmetric prepare-and-measure QKD protocols")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Threshold error rate of one protocol.
    Threshold {
        #[arg(long)]
        protocol: String,
        #[arg(long, value_enum)]
        bound: Option<BoundArg>,
        /// Where the CSS phase-error coefficient comes from.
        #[arg(long, value_enum, default_value = "registered")]
        coefficient: CoefficientArg,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// All five named qutrit/qubit protocols with their default bounds.
    Table {
        #[arg(long, value_enum, default_value = "registered")]
        coefficient: CoefficientArg,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Monte Carlo run of the protocol under depolarizing noise.
    Simulate {
        #[arg(long)]
        protocol: String,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 1_000_000)]
        rounds: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        shuffle: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Group orders, decoding counts and the channel family of a protocol.
    Inspect {
        #[arg(long)]
        protocol: String,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(clap::Args, Debug, Clone)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundArg {
    Hashing,
    Css,
}

impl From<BoundArg> for Bound {
    fn from(b: BoundArg) -> Self {
        match b {
            BoundArg::Hashing => Bound::Hashing,
            BoundArg::Css => Bound::Css,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoefficientArg {
    Registered,
    Computed,
}

impl From<CoefficientArg> for CoefficientSource {
    fn from(c: CoefficientArg) -> Self {
        match c {
            CoefficientArg::Registered => CoefficientSource::Registered,
            CoefficientArg::Computed => CoefficientSource::Computed,
        }
    }
}

/// Rounds to 15 significant digits so the shortest round-trip representation that
/// serde writes has at most 15.
pub fn sig15(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.14e}").parse().unwrap_or(x)
}

/// Human-readable form with 6 significant digits.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..6).contains(&mag) {
        format!("{:.*}", (5 - mag).max(0) as usize, x)
    } else {
        format!("{x:.5e}")
    }
}

fn machine(v: &[f64]) -> Vec<f64> {
    v.iter().copied().map(sig15).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ResultRecord {
    pub protocol: String,
    pub bound_used: String,
    pub epsilon_star: f64,
    pub p_star: f64,
    pub fidelity_star: f64,
    pub entanglement_fidelity_star: f64,
    pub css_coefficient: Option<f64>,
    pub group_order_g: usize,
    pub group_order_h: usize,
    pub aut_order: usize,
    pub t_size: usize,
    pub orbit_count: usize,
    pub key_orbit_count: usize,
    pub binding_orbit: usize,
    pub psi: Vec<f64>,
    pub bob_phases: Vec<f64>,
    pub tool_version: String,
    pub timestamp: String,
}

impl ResultRecord {
    pub fn new(a: &Analysis, t: &ThresholdResult) -> Self {
        let s = a.summary();
        ResultRecord {
            protocol: t.protocol.clone(),
            bound_used: t.bound.to_string(),
            epsilon_star: sig15(t.epsilon_star),
            p_star: sig15(t.p_star),
            fidelity_star: sig15(t.fidelity_star),
            entanglement_fidelity_star: sig15(keyrate::entanglement_fidelity(s.d, t.p_star)),
            css_coefficient: t.css_coefficient.map(sig15),
            group_order_g: s.group_order,
            group_order_h: s.group_order,
            aut_order: s.aut_order,
            t_size: s.t_size,
            orbit_count: s.orbit_count,
            key_orbit_count: s.key_orbit_count,
            binding_orbit: t.binding_orbit,
            psi: machine(&t.psi),
            bob_phases: machine(&t.bob_phases),
            tool_version: TOOL_VERSION.into(),
            timestamp: timestamp(),
        }
    }

    fn csv_row(&self) -> [String; 5] {
        [
            self.protocol.clone(),
            self.bound_used.clone(),
            self.epsilon_star.to_string(),
            self.p_star.to_string(),
            self.fidelity_star.to_string(),
        ]
    }

    fn text(&self) -> String {
        format!(
            "{:<8} {:<8} epsilon* = {}  p* = {}  F* = {}  (|G| = {}, |Aut(T)*| = {}, |T| = {}, orbits = {})",
            self.protocol,
            self.bound_used,
            sig6(self.epsilon_star),
            sig6(self.p_star),
            sig6(self.fidelity_star),
            self.group_order_g,
            self.aut_order,
            self.t_size,
            self.orbit_count
        )
    }
}

/// RFC 3339 UTC; `SOURCE_DATE_EPOCH` pins it for reproducible output.
fn timestamp() -> String {
    use chrono::{DateTime, SecondsFormat, Utc};
    let t = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.parse::<i64>().ok())
        .and_then(|s| DateTime::<Utc>::from_timestamp(s, 0))
        .unwrap_or_else(Utc::now);
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FailedRow {
    pub protocol: String,
    pub error: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TableRecord {
    pub rows: Vec<ResultRecord>,
    pub failures: Vec<FailedRow>,
    pub tool_version: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SimRecord {
    pub protocol: String,
    pub p: f64,
    pub rounds: u64,
    pub seed: u64,
    pub shuffle: bool,
    pub key_length: u64,
    pub mismatches: u64,
    pub epsilon: f64,
    pub epsilon_stderr: f64,
    pub success_probability: f64,
    pub success_stderr: f64,
    pub analytic_epsilon: f64,
    pub analytic_success_probability: f64,
    pub z_epsilon: f64,
    pub rng: String,
    pub tool_version: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct InspectRecord {
    pub protocol: String,
    pub n: usize,
    pub d: usize,
    pub r: usize,
    pub group_order_g: usize,
    pub group_order_h: usize,
    pub aut_order: usize,
    pub t_size: usize,
    pub orbit_count: usize,
    pub key_orbit_count: usize,
    pub fixed_space_dim: usize,
    pub family_vertex_ranks: Vec<usize>,
    pub transitive: bool,
    pub default_bound: String,
    pub tool_version: String,
}

pub fn threshold_record(name: &str, bound: Option<Bound>, coefficient: CoefficientSource) -> Result<ResultRecord> {
    let a = Analysis::new(name)?;
    let bound = bound.unwrap_or(a.spec.default_bound);
    let t = a.threshold(bound, coefficient)?;
    Ok(ResultRecord::new(&a, &t))
}

/// Rows are computed in parallel; a failing row is reported and the rest continue.
pub fn table_record(coefficient: CoefficientSource) -> TableRecord {
    let results: Vec<(String, Result<ResultRecord>)> = std::thread::scope(|sc| {
        let hs: Vec<_> = registry::TABLE_PROTOCOLS
            .iter()
            .map(|&name| (name, sc.spawn(move || threshold_record(name, None, coefficient))))
            .collect();
        hs.into_iter()
            .map(|(n, h)| (n.to_string(), h.join().unwrap_or_else(|_| Err(Error::Numerical("worker panicked".into())))))
            .collect()
    });
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (protocol, r) in results {
        match r {
            Ok(rec) => rows.push(rec),
            Err(e) => failures.push(FailedRow { protocol, error: e.to_string() }),
        }
    }
    TableRecord { rows, failures, tool_version: TOOL_VERSION.into() }
}

pub fn simulate_record(cfg: &SimConfig) -> Result<SimRecord> {
    let stats = mcsim::run_simulation(cfg)?;
    let exact = mcsim::analytic_stats(&cfg.protocol, cfg.p)?;
    let cmp = mcsim::compare(&stats, exact.epsilon);
    Ok(SimRecord {
        protocol: registry::normalize_name(&cfg.protocol),
        p: cfg.p,
        rounds: cfg.rounds,
        seed: cfg.seed,
        shuffle: cfg.shuffle,
        key_length: stats.key_length,
        mismatches: stats.mismatches,
        epsilon: sig15(stats.epsilon),
        epsilon_stderr: sig15(stats.epsilon_stderr),
        success_probability: sig15(stats.success_probability),
        success_stderr: sig15(stats.success_stderr),
        analytic_epsilon: sig15(exact.epsilon),
        analytic_success_probability: sig15(exact.success_probability),
        z_epsilon: sig15(cmp.z),
        rng: stats.rng,
        tool_version: TOOL_VERSION.into(),
    })
}

pub fn inspect_record(name: &str) -> Result<InspectRecord> {
    let a = Analysis::new(name)?;
    let s = a.summary();
    Ok(InspectRecord {
        protocol: s.protocol,
        n: s.n,
        d: s.d,
        r: s.r,
        group_order_g: s.group_order,
        group_order_h: s.group_order,
        aut_order: s.aut_order,
        t_size: s.t_size,
        orbit_count: s.orbit_count,
        key_orbit_count: s.key_orbit_count,
        fixed_space_dim: s.fixed_space_dim,
        family_vertex_ranks: a.family.simplex.as_ref().map(|x| x.ranks.clone()).unwrap_or_default(),
        transitive: s.transitive,
        default_bound: a.spec.default_bound.to_string(),
        tool_version: TOOL_VERSION.into(),
    })
}

fn csv_string(rows: &[ResultRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in rows {
        w.write_record(r.csv_row()).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("records serialize") + "\n"
}

fn no_csv(what: &str) -> Error {
    Error::Invalid(format!("{what} has no CSV form; use --format json or text"))
}

/// Output text of a command plus whether any part of it failed numerically.
fn render(cmd: &Command) -> Result<(String, bool)> {
    match cmd {
        Command::Threshold { protocol, bound, coefficient, output } => {
            let rec = threshold_record(protocol, bound.map(Into::into), (*coefficient).into())?;
            let text = match output.format {
                Format::Text => rec.text() + "\n",
                Format::Json => json(&rec),
                Format::Csv => csv_string(std::slice::from_ref(&rec))?,
            };
            Ok((text, false))
        }
        Command::Table { coefficient, output } => {
            let t = table_record((*coefficient).into());
            let failed = !t.failures.is_empty();
            let text = match output.format {
                Format::Text => {
                    let mut s: String = t.rows.iter().map(|r| r.text() + "\n").collect();
                    for f in &t.failures {
                        s += &format!("{:<8} failed: {}\n", f.protocol, f.error);
                    }
                    s
                }
                Format::Json => json(&t),
                Format::Csv => csv_string(&t.rows)?,
            };
            Ok((text, failed))
        }
        Command::Simulate { protocol, p, rounds, seed, shuffle, output } => {
            let cfg = SimConfig { protocol: protocol.clone(), p: *p, rounds: *rounds, seed: *seed, shuffle: *shuffle };
            let r = simulate_record(&cfg)?;
            let text = match output.format {
                Format::Text => format!(
                    "{} p = {} rounds = {} seed = {}\n  key letters {} mismatches {}\n  epsilon {} ± {} (analytic {}, z = {})\n  success {} ± {} (analytic {})\n",
                    r.protocol,
                    sig6(r.p),
                    r.rounds,
                    r.seed,
                    r.key_length,
                    r.mismatches,
                    sig6(r.epsilon),
                    sig6(r.epsilon_stderr),
                    sig6(r.analytic_epsilon),
                    sig6(r.z_epsilon),
                    sig6(r.success_probability),
                    sig6(r.success_stderr),
                    sig6(r.analytic_success_probability)
                ),
                Format::Json => json(&r),
                Format::Csv => return Err(no_csv("simulate")),
            };
            Ok((text, false))
        }
        Command::Inspect { protocol, output } => {
            let r = inspect_record(protocol)?;
            let text = match output.format {
                Format::Text => format!(
                    "{} (n = {}, d = {}, r = {})\n  |G| = {}  |H| = {}  |Aut(T)*| = {}\n  |T| = {}  orbits = {} ({} produce key)\n  fixed-space dimension = {}  family vertex ranks = {:?}\n  default bound = {}\n",
                    r.protocol,
                    r.n,
                    r.d,
                    r.r,
                    r.group_order_g,
                    r.group_order_h,
                    r.aut_order,
                    r.t_size,
                    r.orbit_count,
                    r.key_orbit_count,
                    r.fixed_space_dim,
                    r.family_vertex_ranks,
                    r.default_bound
                ),
                Format::Json => json(&r),
                Format::Csv => return Err(no_csv("inspect")),
            };
            Ok((text, false))
        }
    }
}

fn output_of(cmd: &Command) -> &OutputArgs {
    match cmd {
        Command::Threshold { output, .. }
        | Command::Table { output, .. }
        | Command::Simulate { output, .. }
        | Command::Inspect { output, .. } => output,
    }
}

/// Runs a parsed command, writing to `--out` or `stdout`. Returns the process exit code.
pub fn execute(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let result = render(&cli.command).and_then(|(text, failed)| {
        match &output_of(&cli.command).out {
            Some(path) => std::fs::write(path, &text)?,
            None => stdout.write_all(text.as_bytes())?,
        }
        Ok(failed)
    });
    match result {
        Ok(false) => 0,
        Ok(true) => 3,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(&cli, stdout, stderr),
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if e.use_stderr() { write!(stderr, "{e}") } else { write!(stdout, "{e}") };
            code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(sig6(0.115560123), "0.115560");
        assert_eq!(sig6(42.0), "42.0000");
        assert_eq!(sig15(0.1 + 0.2), 0.3);
    }

    #[test]
    fn header_is_fixed() {
        assert_eq!(CSV_HEADER.join(","), "protocol,bound,epsilon_star,p_star,fidelity_star");
    }
}
