use std::time::Duration;

use sqlog_bench::gen::generate;
use sqlog_bench::suite::{default_sizes, render_table, render_tsv};
use sqlog_bench::{run_suite, Family, Problem, Regime, SuiteSpec};

use crate::{BenchArgs, Format};

fn parse_all<T>(values: &[String], what: &str, parse: impl Fn(&str) -> Option<T>) -> Result<Vec<T>, String> {
    values
        .iter()
        .map(|v| parse(v).ok_or_else(|| format!("unknown {what} `{v}`")))
        .collect()
}

pub fn bench(args: &BenchArgs) -> Result<bool, String> {
    let problems = parse_all(&args.problem, "problem", Problem::parse)?;
    let families = parse_all(&args.family, "family", Family::parse)?;
    let regimes = parse_all(&args.regime, "regime", Regime::parse)?;
    if !(args.timeout > 0.0) {
        return Err("timeout must be positive".into());
    }
    let mut rows = Vec::new();
    for &family in &families {
        let sizes = if args.sizes.is_empty() {
            default_sizes(family, args.large)
        } else {
            args.sizes.clone()
        };
        if let Some(dir) = &args.export {
            std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
            for &size in &sizes {
                let g = generate(family, size, args.density, args.seed).map_err(|e| e.to_string())?;
                let path = dir.join(format!("{family}-{size}.csv"));
                g.write_csv(&path).map_err(|e| e.to_string())?;
            }
        }
        for &problem in &problems {
            for &regime in &regimes {
                let spec = SuiteSpec {
                    sizes: sizes.clone(),
                    density: args.density,
                    timeout: Duration::from_secs_f64(args.timeout),
                    repetitions: args.repetitions,
                    seed: args.seed,
                    oracle_check: args.oracle_check,
                    verify: args.verify,
                    seed_rewrite: !args.no_seed_rewrite,
                    workdir: args.workdir.clone(),
                    ..SuiteSpec::new(problem, family, regime)
                };
                rows.extend(run_suite(&spec).map_err(|e| e.to_string())?);
            }
        }
    }
    match args.format {
        Format::Table => print!("{}", render_table(&rows)),
        Format::Tsv => print!("{}", render_tsv(&rows)),
    }
    Ok(rows.iter().all(|r| r.oracle != Some(false)))
}
