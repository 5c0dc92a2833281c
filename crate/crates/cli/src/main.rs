use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{ArgGroup, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use dnr_core::DnrError;
use serde::Serialize;
use serde_json::Value;

mod commands;

/// Radial distribution network reconfiguration.
#[derive(Debug, Parser)]
#[command(name = "dnr")]
struct Cli {
    /// Print a machine-readable run report instead of text.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Branch-exchange local search from an initial radial configuration.
    Optimize(OptimizeArgs),
    /// Count or tabulate every radial configuration.
    Enumerate(EnumerateArgs),
    /// Backward/forward sweep power flow for one configuration.
    Powerflow(PowerflowArgs),
    /// Build or decide the 3-partition gadget network.
    Gadget(GadgetArgs),
    /// Rank all configurations under approximate and exact losses.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
struct OptimizeArgs {
    case: PathBuf,
    /// `case-default`, `random:SEED` or `open:ID,ID,...`
    #[arg(long, default_value = "case-default")]
    init: String,
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    #[arg(long, value_enum, default_value_t = Pivot::Best)]
    pivot: Pivot,
    /// Defaults to 10 * lines * buses.
    #[arg(long)]
    max_iters: Option<usize>,
    /// Write the step trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Pivot {
    Best,
    First,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("mode").required(true).args(["count_only", "table"])))]
struct EnumerateArgs {
    case: PathBuf,
    #[arg(long)]
    count_only: bool,
    /// Write one CSV row per tree.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Add power-flow losses and ranks to the table.
    #[arg(long, requires = "table")]
    with_exact: bool,
    #[arg(long, default_value_t = dnr_core::enumerate::DEFAULT_LIMIT)]
    limit: usize,
}

#[derive(Debug, Args)]
struct PowerflowArgs {
    case: PathBuf,
    /// Open lines, comma separated (may be empty for a radial case).
    #[arg(long, default_value = "")]
    open: String,
    #[arg(long)]
    bus_csv: Option<PathBuf>,
    #[arg(long)]
    line_csv: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 100)]
    max_sweeps: usize,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("mode").required(true).args(["decide", "emit"])))]
struct GadgetArgs {
    instance: PathBuf,
    #[arg(long)]
    decide: bool,
    /// Write the gadget as a case file.
    #[arg(long)]
    emit: Option<PathBuf>,
    #[arg(long, default_value_t = dnr_core::enumerate::DEFAULT_LIMIT)]
    limit: usize,
}

#[derive(Debug, Args)]
struct CompareArgs {
    case: PathBuf,
    /// Directory for scatter.csv and ranks.csv.
    out_dir: PathBuf,
    #[arg(long, default_value_t = 5000)]
    top_k: usize,
    #[arg(long, default_value_t = dnr_core::enumerate::DEFAULT_LIMIT)]
    limit: usize,
}

/// What a command produced: text for humans, a payload for the report.
pub struct Outcome {
    pub text: String,
    pub results: Value,
    pub input_sha256: String,
    pub code: u8,
}

#[derive(Serialize)]
struct RunReport<'a> {
    command: Vec<String>,
    input_sha256: Option<&'a str>,
    results: Value,
    error: Option<String>,
    exit_code: u8,
    wall_time_s: f64,
    version: &'a str,
}

fn version() -> &'static str {
    let s = format!("{} (dataset {})", env!("CARGO_PKG_VERSION"), dnr_core::cases::DATASET_VERSION);
    Box::leak(s.into_boxed_str())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<DnrError>() {
        Some(DnrError::LimitExceeded { .. }) => 4,
        Some(DnrError::Diverged { .. } | DnrError::VoltageCollapse { .. }) => 3,
        Some(_) => 2,
        None => 1,
    }
}

fn main() -> ExitCode {
    let matches = Cli::command().version(version()).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let start = Instant::now();
    let outcome = match &cli.command {
        Command::Optimize(a) => commands::optimize(a),
        Command::Enumerate(a) => commands::enumerate(a),
        Command::Powerflow(a) => commands::powerflow(a),
        Command::Gadget(a) => commands::gadget(a),
        Command::Compare(a) => commands::compare(a),
    };
    let wall = start.elapsed().as_secs_f64();

    let (code, err_msg) = match &outcome {
        Ok(o) => (o.code, None),
        Err(e) => (exit_code(e), Some(format!("{e:#}"))),
    };
    if cli.json {
        let report = RunReport {
            command: std::env::args().collect(),
            input_sha256: outcome.as_ref().ok().map(|o| o.input_sha256.as_str()),
            results: outcome.as_ref().map(|o| o.results.clone()).unwrap_or(Value::Null),
            error: err_msg,
            exit_code: code,
            wall_time_s: wall,
            version: version(),
        };
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        match &outcome {
            Ok(o) => print!("{}", o.text),
            Err(_) => eprintln!("error: {}", err_msg.unwrap_or_default()),
        }
    }
    ExitCode::from(code)
}
