//! Reading program files.

use std::path::{Path, PathBuf};

use sqlog_core::ast::Program;
use sqlog_core::check::check_program;
use sqlog_core::parser::parse_program_unchecked;
use sqlog_core::Diagnostic;

fn report(path: Option<&Path>, diags: &[Diagnostic]) -> String {
    let lines: Vec<String> = diags
        .iter()
        .map(|d| match path {
            Some(p) => format!("{}:{d}", p.display()),
            None => d.to_string(),
        })
        .collect();
    lines.join("\n")
}

/// Parses and combines the files, applies the `maxint` override and runs
/// the semantic checks. Errors come back rendered.
pub fn programs(paths: &[PathBuf], maxint: Option<u64>) -> Result<Program, String> {
    let mut program = Program {
        rules: Vec::new(),
        facts: Vec::new(),
        maxint: 0,
    };
    for path in paths {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let p = parse_program_unchecked(&text).map_err(|d| report(Some(path), &d))?;
        program.rules.extend(p.rules);
        program.facts.extend(p.facts);
        program.maxint = program.maxint.max(p.maxint);
    }
    if let Some(m) = maxint {
        program.maxint = m;
    }
    let single = (paths.len() == 1).then(|| paths[0].as_path());
    check_program(&program).map_err(|d| report(single, &d))?;
    Ok(program)
}
