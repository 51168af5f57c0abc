use sqlog_core::analysis::{stratify, DependencyGraph};

use crate::{load, CheckArgs};

pub fn check(args: &CheckArgs) -> Result<bool, String> {
    let program = load::programs(&args.programs, args.maxint)?;
    let plan = stratify(&program, &DependencyGraph::build(&program)).map_err(|e| e.to_string())?;
    println!(
        "ok: {} rules, {} facts, {} components",
        program.rules.len(),
        program.facts.len(),
        plan.components.len()
    );
    print!("{plan}");
    Ok(true)
}
