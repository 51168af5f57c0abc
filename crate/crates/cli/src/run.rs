use std::collections::BTreeMap;
use std::time::Duration;

use sqlog_core::ast::{Program, Value};
use sqlog_core::backend::SqliteConnector;
use sqlog_core::directives::{ConnectionSpec, DirectiveSet};
use sqlog_core::engine::{Collect, Engine, EvaluationResult, RunOptions};
use sqlog_core::parser::parse_directives;
use sqlog_core::sql::BindingSource;

use crate::{load, RunArgs};

fn directives(args: &RunArgs) -> Result<DirectiveSet, String> {
    match &args.directives {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            parse_directives(&text).map_err(|d| {
                d.iter()
                    .map(|d| format!("{}:{d}", path.display()))
                    .collect::<Vec<_>>()
                    .join("\n")
            })
        }
        None => Ok(DirectiveSet::working(ConnectionSpec::local(&args.working_db))),
    }
}

fn show_row(row: &[Value]) -> String {
    let cells: Vec<String> = row.iter().map(Value::to_string).collect();
    format!("({})", cells.join(", "))
}

pub fn run(args: &RunArgs) -> Result<bool, String> {
    let program = load::programs(&args.programs, args.maxint)?;
    let directives = directives(args)?;
    let options = RunOptions {
        keep_temp: args.keep_temp,
        verify: args.oracle_check,
        timeout: args.timeout.map(Duration::from_secs_f64),
        collect: if args.oracle_check { Collect::Derived } else { Collect::Goal },
        facts: args.facts.clone(),
        answer_limit: (!args.oracle_check).then_some(args.show),
        ..Default::default()
    };
    let connector = SqliteConnector::in_directory(".");
    let engine = Engine::new(&connector);

    if args.emit_sql || args.emit_plan {
        let prepared = engine.prepare(&program, &directives, &options).map_err(|e| e.to_string())?;
        if args.emit_plan {
            print!("{}", prepared.analyzed.plan);
            for b in prepared.bindings.iter() {
                let source = match &b.source {
                    BindingSource::Working => "use".to_string(),
                    BindingSource::External(db) => format!("use from {}", db.database),
                    BindingSource::Query { .. } => "use as query".to_string(),
                    BindingSource::Generated => "create".to_string(),
                };
                let keep = if b.keep { " keep" } else { "" };
                println!("{}/{} -> {} ({}) {source}{keep}", b.predicate, b.arity, b.table, b.columns.join(", "));
            }
            if let Some(seed) = &prepared.analyzed.seeded {
                println!("seeded through {seed}");
            }
        }
        if args.emit_sql {
            print!("{}", prepared.standard_script());
        }
        return Ok(true);
    }

    let result = engine.run(&program, &directives, &options).map_err(|e| e.to_string())?;
    print_result(&result, args.show);
    if let Some(kib) = peak_memory_kib() {
        println!("peak memory (KiB): {kib}");
    }
    if args.oracle_check {
        return oracle_check(&program, args, &result);
    }
    Ok(true)
}

fn print_result(result: &EvaluationResult, show: usize) {
    let width = result.sizes.keys().map(String::len).max().unwrap_or(0).max("predicate".len());
    println!("{:<width$}  rows", "predicate");
    for (p, n) in &result.sizes {
        println!("{p:<width$}  {n}");
    }
    let recursive = result.components.iter().filter(|c| c.recursive).count();
    println!(
        "components: {} ({recursive} recursive), iterations: {}",
        result.components.len(),
        result.iterations()
    );
    if let Some(seed) = &result.seeded {
        println!("seeded through {seed}");
    }
    if let Some(n) = result.answer_count {
        println!("answers: {n}");
        if let Some(rows) = &result.answers {
            for row in rows.iter().take(show) {
                println!("  {}", show_row(row));
            }
            let shown = rows.len().min(show) as u64;
            if n > shown {
                println!("  ... {} more", n - shown);
            }
        }
    }
    let p = &result.phases;
    let ms = |d: Duration| d.as_secs_f64() * 1000.0;
    println!(
        "time (ms): analyze {:.1}, load {:.1}, evaluate {:.1}, output {:.1}, cleanup {:.1}",
        ms(p.analyze),
        ms(p.load),
        ms(p.evaluate),
        ms(p.output),
        ms(p.cleanup)
    );
}

/// High-water mark of this process's resident set, where the platform
/// reports it.
fn peak_memory_kib() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}

/// Rows of a headerless CSV file, typed like the engine types them.
fn csv_relation(path: &std::path::Path) -> Result<sqlog_oracle::Relation, String> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    let mut out = sqlog_oracle::Relation::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| format!("{}: {e}", path.display()))?;
        out.insert(
            rec.iter()
                .map(|f| f.parse::<i64>().map_or_else(|_| Value::Str(f.to_string()), Value::Int))
                .collect(),
        );
    }
    Ok(out)
}

fn oracle_check(program: &Program, args: &RunArgs, result: &EvaluationResult) -> Result<bool, String> {
    let mut input = sqlog_oracle::Model::new();
    for (p, path) in &args.facts {
        input.entry(p.clone()).or_default().extend(csv_relation(path)?);
    }
    let model = sqlog_oracle::evaluate_with(program, &input).map_err(|e| format!("oracle: {e}"))?;
    let mut mismatches = BTreeMap::new();
    for (p, rows) in &result.relations {
        let expected: Vec<_> = model.get(p).map(|r| r.iter().cloned().collect()).unwrap_or_default();
        if rows != &expected {
            mismatches.insert(p.clone(), (rows.len(), expected.len()));
        }
    }
    if mismatches.is_empty() {
        println!("oracle: ok ({} relations)", result.relations.len());
        return Ok(true);
    }
    for (p, (got, want)) in &mismatches {
        println!("oracle: mismatch in `{p}`: {got} rows, expected {want}");
    }
    Ok(false)
}
