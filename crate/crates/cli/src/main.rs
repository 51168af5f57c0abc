use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod bench;
mod check;
mod load;
mod run;

/// Stratified Datalog evaluated inside SQLite.
#[derive(Parser, Debug)]
#[command(name = "sqlog", version, about)]
struct Cli {
    /// More logging on stderr (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate a program and print relation sizes.
    Run(RunArgs),
    /// Run benchmark ladders and print a report.
    Bench(BenchArgs),
    /// Check safety and stratification without touching a database.
    Check(CheckArgs),
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// Program files; their rules and facts are combined.
    #[arg(required = true)]
    programs: Vec<PathBuf>,
    /// Auxiliary directives file.
    #[arg(short, long)]
    directives: Option<PathBuf>,
    /// Working database when no directives are given (SQLite file).
    #[arg(long, env = "SQLOG_WORKING_DB", default_value = "sqlog-work.db")]
    working_db: String,
    /// Extra facts from a headerless CSV file, as PRED=FILE.
    #[arg(long = "facts", value_parser = parse_facts)]
    facts: Vec<(String, PathBuf)>,
    /// Upper bound of the integer range (overrides #maxint).
    #[arg(long)]
    maxint: Option<u64>,
    /// Print the SQL script instead of running it.
    #[arg(long)]
    emit_sql: bool,
    /// Print components and table bindings instead of running.
    #[arg(long)]
    emit_plan: bool,
    /// Keep generated tables and views in the working database.
    #[arg(long)]
    keep_temp: bool,
    /// Compare every derived relation with the in-memory reference
    /// evaluator (program and CSV facts only).
    #[arg(long)]
    oracle_check: bool,
    /// Give up after this many seconds.
    #[arg(long)]
    timeout: Option<f64>,
    /// Number of answer rows to print.
    #[arg(long, default_value_t = 20)]
    show: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Table,
    Tsv,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// reachability, reachability-linear or samegen (comma separated).
    #[arg(long, value_delimiter = ',', default_value = "reachability")]
    problem: Vec<String>,
    /// tree, a-graph, c-graph or cylinder (comma separated).
    #[arg(long, value_delimiter = ',', default_value = "tree")]
    family: Vec<String>,
    /// Q0, Q1 or Q2 (comma separated).
    #[arg(long, value_delimiter = ',', default_value = "Q0")]
    regime: Vec<String>,
    /// Ladder: depths for trees, node counts for graphs, widths for
    /// cylinders.
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<u32>,
    /// Use the large ladders (tree d = 14..21, graphs up to 3050 nodes,
    /// cylinders up to w = 540).
    #[arg(long)]
    large: bool,
    /// Arc density of random graphs.
    #[arg(long, default_value_t = 0.20)]
    density: f64,
    /// Per-instance time limit in seconds; a timeout ends the ladder.
    #[arg(long, default_value_t = 300.0)]
    timeout: f64,
    #[arg(long, default_value_t = 1)]
    repetitions: u32,
    /// Seed for random graphs.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Check every answer count against an in-memory oracle.
    #[arg(long)]
    oracle_check: bool,
    /// Check the fixpoint invariants after every pass.
    #[arg(long)]
    verify: bool,
    /// Evaluate bound queries by filtering instead of seeding.
    #[arg(long)]
    no_seed_rewrite: bool,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Also write each instance's arcs as CSV into this directory.
    #[arg(long)]
    export: Option<PathBuf>,
    /// Directory for scratch databases.
    #[arg(long)]
    workdir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    #[arg(required = true)]
    programs: Vec<PathBuf>,
    /// Upper bound of the integer range (overrides #maxint).
    #[arg(long)]
    maxint: Option<u64>,
}

fn parse_facts(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((p, f)) if !p.is_empty() && !f.is_empty() => Ok((p.to_string(), PathBuf::from(f))),
        _ => Err(format!("expected PRED=FILE, got `{s}`")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let ok = match cli.command {
        Command::Run(args) => run::run(&args),
        Command::Bench(args) => bench::bench(&args),
        Command::Check(args) => check::check(&args),
    };
    match ok {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
