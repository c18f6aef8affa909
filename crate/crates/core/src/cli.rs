//! The `crra-eq` command line.
//!
//! Exit codes: 0 success, 1 model-level failure (invalid economy, failed
//! suite, no convergence, degenerate portfolio), 2 input error, 3 I/O error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::calibrate::{solve_gamma, CalibrationTarget};
use crate::equilibrium::{self, EquilibriumSnapshot};
use crate::error::Error;
use crate::model::{self, DenominatorTable, EconomyParams, MarketState};
use crate::simulate::{self, PathGrid};
use crate::verify::{self, Check, Faults};

pub const EXIT_OK: i32 = 0;
pub const EXIT_MODEL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "crra-eq", version, about = "Heterogeneous-beliefs CRRA equilibrium: evaluate, simulate, verify, calibrate")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Clearing,
    Fd,
    Mc,
    Martingale,
    All,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check that every time-integral denominator is positive
    Validate { config: PathBuf },
    /// Print the full equilibrium snapshot at (t, x)
    Evaluate {
        config: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        t: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        x: f64,
    },
    /// Simulate driver paths and write the equilibrium series as long-format CSV
    Simulate {
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        paths: usize,
        /// End time of the grid
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        #[arg(long, default_value_t = 1024)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        t0: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        x0: f64,
        /// Worker threads (0 = all cores); output does not depend on it
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Run invariant and oracle suites against the closed forms
    Verify {
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random states for the clearing and fd suites
        #[arg(long, default_value_t = 20)]
        states: usize,
        /// Monte Carlo paths for the mc and martingale suites
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        threads: usize,
        #[arg(long, hide = true, default_value_t = 0.0, allow_negative_numbers = true)]
        fault_riskless_rate: f64,
    },
    /// Solve for agent weights matching initial wealth shares
    Calibrate {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        shares: Vec<f64>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
    },
}

/// JSON formatter writing every float with 17 significant digits.
struct SigDigits;

impl serde_json::ser::Formatter for SigDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Serializes `value` as one line of JSON with 17-significant-digit floats.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigDigits);
    value.serialize(&mut ser).expect("in-memory serialization");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

struct Failure {
    code: i32,
    message: String,
    report: Option<serde_json::Value>,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INPUT,
            message: message.into(),
            report: None,
        }
    }

    fn model(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_MODEL,
            message: message.into(),
            report: None,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidParams(_) | Error::InvalidTarget(_) | Error::InvalidGrid(_) | Error::AgentIndex { .. } => EXIT_INPUT,
            _ => EXIT_MODEL,
        };
        Failure {
            code,
            message: e.to_string(),
            report: None,
        }
    }
}

fn load_config(path: &Path) -> Result<EconomyParams, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
    EconomyParams::from_json(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn invalid_report(err: &Error, params: &EconomyParams) -> serde_json::Value {
    match err {
        Error::NonpositiveDenominator { offending } => json!({
            "valid": false,
            "offending": offending
                .iter()
                .map(|(beta, d)| json!({"beta": beta, "denominator": d}))
                .collect::<Vec<_>>(),
            "footnote_condition_holds": model::footnote_margin(params) >= 0.0,
        }),
        other => json!({"valid": false, "error": other.to_string()}),
    }
}

fn load_validated(path: &Path) -> Result<(EconomyParams, DenominatorTable), Failure> {
    let params = load_config(path)?;
    match model::validate(&params) {
        Ok(table) => Ok((params, table)),
        Err(e) => Err(Failure {
            report: Some(invalid_report(&e, &params)),
            ..Failure::from(e)
        }),
    }
}

fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, Failure> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure::input(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Runs the CLI with explicit argument list and output streams; returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            if let Some(report) = f.report {
                let _ = writeln!(out, "{}", to_json(&report));
            }
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    match command {
        Command::Validate { config } => cmd_validate(&config, out),
        Command::Evaluate { config, t, x } => cmd_evaluate(&config, t, x, out),
        Command::Simulate {
            config,
            paths,
            horizon,
            steps,
            seed,
            out: path,
            t0,
            x0,
            threads,
        } => {
            let (params, table) = load_validated(&config)?;
            let grid = PathGrid::new(t0, horizon, steps)?;
            if paths == 0 {
                return Err(Failure::input("--paths must be positive"));
            }
            let summary = with_threads(threads, || simulate_to_csv(&params, &table, grid, x0, paths, seed, &path))??;
            writeln!(out, "{}", to_json(&summary)).map_err(io_failure)
        }
        Command::Verify {
            config,
            suite,
            seed,
            states,
            paths,
            threads,
            fault_riskless_rate,
        } => {
            let (params, table) = load_validated(&config)?;
            let faults = Faults {
                riskless_rate_bias: fault_riskless_rate,
            };
            let checks = with_threads(threads, || run_suites(&params, &table, suite, seed, states, paths, faults))??;
            let passed = verify::all_passed(&checks);
            writeln!(out, "{}", to_json(&json!({"passed": passed, "checks": checks}))).map_err(io_failure)?;
            if passed {
                Ok(())
            } else {
                for c in checks.iter().filter(|c| !c.passed) {
                    let _ = writeln!(
                        err,
                        "FAIL {}/{}: observed {:e} > threshold {:e}",
                        c.suite, c.quantity, c.observed, c.threshold
                    );
                }
                Err(Failure::model("verification failed"))
            }
        }
        Command::Calibrate {
            config,
            shares,
            tol,
            max_iter,
        } => {
            let params = load_config(&config)?;
            if !(tol > 0.0) {
                return Err(Failure::input("--tol must be positive"));
            }
            let target = CalibrationTarget::new(shares)?;
            let result = solve_gamma(&params, &target, tol, max_iter)?;
            writeln!(out, "{}", to_json(&result)).map_err(io_failure)
        }
    }
}

fn io_failure(e: io::Error) -> Failure {
    Failure {
        code: EXIT_IO,
        message: e.to_string(),
        report: None,
    }
}

fn cmd_validate(config: &Path, out: &mut dyn Write) -> Result<(), Failure> {
    let (_, table) = load_validated(config)?;
    let report = json!({
        "valid": true,
        "min_denominator": table.min_denominator(),
        "footnote_condition_holds": table.footnote_condition_holds(),
        "footnote_margin": table.footnote_margin(),
        "n_compositions": table.len(),
    });
    writeln!(out, "{}", to_json(&report)).map_err(io_failure)
}

fn cmd_evaluate(config: &Path, t: f64, x: f64, out: &mut dyn Write) -> Result<(), Failure> {
    let (params, table) = load_validated(config)?;
    let state = MarketState::new(t, x)?;
    let snap = equilibrium::snapshot(state, &params, &table)?;
    writeln!(out, "{}", to_json(&snap)).map_err(io_failure)
}

fn run_suites(
    params: &EconomyParams,
    table: &DenominatorTable,
    suite: Suite,
    seed: u64,
    n_states: usize,
    n_paths: usize,
    faults: Faults,
) -> Result<Vec<Check>, Failure> {
    let states = verify::random_states(seed, n_states);
    let mut checks = Vec::new();
    if matches!(suite, Suite::Clearing | Suite::All) {
        checks.extend(verify::clearing_suite(params, table, &states)?);
    }
    if matches!(suite, Suite::Fd | Suite::All) {
        checks.extend(verify::fd_suite(params, table, &states, faults)?);
    }
    if matches!(suite, Suite::Mc | Suite::All) {
        checks.extend(verify::mc_suite(params, table, n_paths, seed)?.0);
    }
    if matches!(suite, Suite::Martingale | Suite::All) {
        checks.extend(verify::martingale_suite(params, table, n_paths, seed)?.0);
    }
    Ok(checks)
}

/// Column names of the long-format series CSV for `n_agents` agents.
pub fn csv_header(n_agents: usize) -> Vec<String> {
    let mut cols: Vec<String> = ["path_id", "t", "x", "delta", "zeta", "S", "pd", "r", "kappa", "sigma_S", "mu_S"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for j in 1..=n_agents {
        cols.push(format!("c_{j}"));
        cols.push(format!("w_{j}"));
        cols.push(format!("pi_{j}"));
    }
    cols
}

fn csv_row(s: &EquilibriumSnapshot) -> Vec<f64> {
    let mut row = vec![
        s.state.t,
        s.state.x,
        s.dividend,
        s.zeta,
        s.stock_price,
        s.pd_ratio,
        s.rates.riskless_rate,
        s.rates.kappa,
        s.stock.vol,
        s.stock.drift,
    ];
    for j in 0..s.wealths.len() {
        row.push(s.consumptions[j]);
        row.push(s.wealths[j]);
        row.push(s.portfolios[j]);
    }
    row
}

fn simulate_to_csv(
    params: &EconomyParams,
    table: &DenominatorTable,
    grid: PathGrid,
    x0: f64,
    n_paths: usize,
    seed: u64,
    out: &Path,
) -> Result<serde_json::Value, Failure> {
    use rayon::prelude::*;

    let series: Vec<Vec<EquilibriumSnapshot>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| simulate::evaluate_series(&simulate::simulate_path(grid, x0, seed, i), params, table))
        .collect::<Result<_, _>>()?;

    let file = File::create(out).map_err(|e| Failure {
        code: EXIT_IO,
        message: format!("cannot write {}: {e}", out.display()),
        report: None,
    })?;
    let mut writer = csv::Writer::from_writer(BufWriter::new(file));
    let header = csv_header(params.n_agents());
    let csv_err = |e: csv::Error| Failure {
        code: EXIT_IO,
        message: format!("writing {}: {e}", out.display()),
        report: None,
    };
    writer.write_record(&header).map_err(csv_err)?;
    let mut terminal_sums = vec![0.0; header.len() - 1];
    for (i, path) in series.iter().enumerate() {
        for (k, snap) in path.iter().enumerate() {
            let values = csv_row(snap);
            let mut record = Vec::with_capacity(header.len());
            record.push(i.to_string());
            record.extend(values.iter().map(|v| fmt_f64(*v)));
            writer.write_record(&record).map_err(csv_err)?;
            if k + 1 == path.len() {
                for (acc, v) in terminal_sums.iter_mut().zip(&values) {
                    *acc += v;
                }
            }
        }
    }
    writer.flush().map_err(io_failure)?;

    let means: serde_json::Map<String, serde_json::Value> = header[1..]
        .iter()
        .zip(&terminal_sums)
        .map(|(name, sum)| (name.clone(), json!(sum / n_paths as f64)))
        .collect();
    Ok(json!({
        "output": out.display().to_string(),
        "n_paths": n_paths,
        "n_rows": n_paths * (grid.n_steps() + 1),
        "terminal_means": means,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_keep_seventeen_digits() {
        let v = 0.1f64 + 0.2;
        let text = to_json(&json!({ "v": v }));
        assert_eq!(text, "{\"v\":3.0000000000000004e-1}");
        let back: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["v"].as_f64().unwrap(), v);
    }

    #[test]
    fn header_layout() {
        let h = csv_header(2);
        assert_eq!(
            h.join(","),
            "path_id,t,x,delta,zeta,S,pd,r,kappa,sigma_S,mu_S,c_1,w_1,pi_1,c_2,w_2,pi_2"
        );
    }
}
