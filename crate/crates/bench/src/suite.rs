//! Runs ladders of growing instances and reports one row per instance.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use sqlog_core::backend::SqliteConnector;
use sqlog_core::engine::{Collect, Engine, EvaluationResult, RunOptions};
use sqlog_core::Error;

use crate::encode::{encode, Problem, Regime};
use crate::gen::{generate, Family, GraphInstance};
use crate::{oracle, BenchError};

/// Ladder used when none is given. `large` selects instances of up to
/// about a million arcs instead of desk-sized ones.
pub fn default_sizes(family: Family, large: bool) -> Vec<u32> {
    match (family, large) {
        (Family::Tree, false) => vec![7, 10, 14],
        (Family::Tree, true) => vec![14, 17, 21],
        (Family::AGraph | Family::CGraph, false) => vec![50, 200, 500],
        (Family::AGraph, true) => vec![1000, 2000, 3050],
        (Family::CGraph, true) => vec![1000, 1750],
        (Family::Cylinder, false) => vec![8, 16, 32],
        (Family::Cylinder, true) => vec![110, 270, 540],
    }
}

#[derive(Debug, Clone)]
pub struct SuiteSpec {
    pub problem: Problem,
    pub family: Family,
    pub regime: Regime,
    pub sizes: Vec<u32>,
    /// Arc density for random graphs.
    pub density: f64,
    pub timeout: Duration,
    pub repetitions: u32,
    pub seed: u64,
    pub oracle_check: bool,
    /// Check the fixpoint invariants after every pass (slow).
    pub verify: bool,
    /// Allow the bound-goal rewrite.
    pub seed_rewrite: bool,
    /// Where scratch databases go; the system temp directory by default.
    pub workdir: Option<PathBuf>,
}

impl SuiteSpec {
    pub fn new(problem: Problem, family: Family, regime: Regime) -> Self {
        SuiteSpec {
            problem,
            family,
            regime,
            sizes: default_sizes(family, false),
            density: 0.20,
            timeout: Duration::from_secs(300),
            repetitions: 1,
            seed: 1,
            oracle_check: false,
            verify: false,
            seed_rewrite: true,
            workdir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub problem: Problem,
    pub family: Family,
    pub size: u32,
    pub params: String,
    pub regime: Regime,
    pub edges: usize,
    /// Median wall time over the repetitions; `None` after a timeout.
    pub millis: Option<u128>,
    pub output_rows: Option<u64>,
    pub iterations: u64,
    pub intermediate_rows: u64,
    pub timed_out: bool,
    /// Whether the answer count matched the oracle, when checked.
    pub oracle: Option<bool>,
}

/// Evaluates one instance in a fresh scratch database.
pub fn run_instance(spec: &SuiteSpec, instance: &GraphInstance) -> Result<(EvaluationResult, Duration), BenchError> {
    let dir = match &spec.workdir {
        Some(d) => tempfile::tempdir_in(d)?,
        None => tempfile::tempdir()?,
    };
    let facts = dir.path().join("arcs.csv");
    instance.write_csv(&facts)?;
    let encoding = encode(spec.problem, spec.regime, instance, "bench");
    let options = RunOptions {
        timeout: Some(spec.timeout),
        collect: Collect::Nothing,
        facts: vec![(spec.problem.input_predicate().to_string(), facts)],
        seed: spec.seed_rewrite,
        verify: spec.verify,
        ..Default::default()
    };
    let connector = SqliteConnector::in_directory(dir.path());
    let start = Instant::now();
    let result = Engine::new(&connector).run(&encoding.program, &encoding.directives, &options)?;
    Ok((result, start.elapsed()))
}

/// Runs the ladder in order. A timeout ends the ladder: larger instances
/// are not attempted.
pub fn run_suite(spec: &SuiteSpec) -> Result<Vec<ReportRow>, BenchError> {
    let mut rows = Vec::new();
    for &size in &spec.sizes {
        let instance = generate(spec.family, size, spec.density, spec.seed)?;
        let mut row = ReportRow {
            problem: spec.problem,
            family: spec.family,
            size,
            params: instance.params.to_string(),
            regime: spec.regime,
            edges: instance.edges.len(),
            millis: None,
            output_rows: None,
            iterations: 0,
            intermediate_rows: 0,
            timed_out: false,
            oracle: None,
        };
        let mut times = Vec::new();
        for _ in 0..spec.repetitions.max(1) {
            match run_instance(spec, &instance) {
                Ok((result, elapsed)) => {
                    times.push(elapsed.as_millis());
                    row.output_rows = result.answer_count;
                    row.iterations = result.iterations();
                    row.intermediate_rows = result.intermediate_rows();
                }
                Err(BenchError::Engine(Error::Timeout)) => {
                    row.timed_out = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        log::info!("{} {} {} {}: {:?}", spec.problem, spec.family, row.params, spec.regime, times);
        if row.timed_out {
            rows.push(row);
            break;
        }
        times.sort_unstable();
        row.millis = Some(times[times.len() / 2]);
        if spec.oracle_check {
            row.oracle = Some(row.output_rows == Some(oracle::answer_count(spec.problem, spec.regime, &instance)));
        }
        rows.push(row);
    }
    Ok(rows)
}

const HEADER: [&str; 11] = [
    "problem",
    "family",
    "params",
    "regime",
    "edges",
    "millis",
    "output_rows",
    "iterations",
    "intermediate_rows",
    "status",
    "oracle",
];

fn fields(r: &ReportRow) -> [String; 11] {
    let opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
    [
        r.problem.to_string(),
        r.family.to_string(),
        r.params.clone(),
        r.regime.to_string(),
        r.edges.to_string(),
        opt(r.millis.map(|m| m.to_string())),
        opt(r.output_rows.map(|n| n.to_string())),
        r.iterations.to_string(),
        r.intermediate_rows.to_string(),
        if r.timed_out { "timeout" } else { "done" }.into(),
        opt(r.oracle.map(|ok| if ok { "ok" } else { "mismatch" }.into())),
    ]
}

/// Tab-separated report with a header line.
pub fn render_tsv(rows: &[ReportRow]) -> String {
    let mut out = HEADER.join("\t");
    out.push('\n');
    for r in rows {
        out.push_str(&fields(r).join("\t"));
        out.push('\n');
    }
    out
}

/// The same report as an aligned table.
pub fn render_table(rows: &[ReportRow]) -> String {
    let cells: Vec<[String; 11]> = rows.iter().map(fields).collect();
    let mut width: Vec<usize> = HEADER.iter().map(|h| h.chars().count()).collect();
    for c in &cells {
        for (w, f) in width.iter_mut().zip(c) {
            *w = (*w).max(f.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |items: Vec<&str>| {
        let padded: Vec<String> = items.iter().zip(&width).map(|(s, w)| format!("{s:<w$}")).collect();
        let _ = writeln!(out, "{}", padded.join("  ").trim_end());
    };
    line(HEADER.to_vec());
    for c in &cells {
        line(c.iter().map(String::as_str).collect());
    }
    out
}
