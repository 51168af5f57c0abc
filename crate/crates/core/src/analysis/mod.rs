//! Everything between parsing and SQL generation: dependency graph,
//! stratification, aggregate standardization and goal-directed rewriting.

pub mod graph;
pub mod optimize;
pub mod standardize;
pub mod stratify;

pub use graph::{DependencyGraph, Edge, EdgeLabel};
pub use optimize::{optimize, Goal, Optimized};
pub use standardize::{standardize_aggregates, AUX_PREFIX};
pub use stratify::{stratify, Component, StratumPlan};

use crate::ast::Program;
use crate::error::Result;

/// The program as it will be translated, with its final plan.
#[derive(Debug, Clone)]
pub struct Analyzed {
    pub program: Program,
    pub graph: DependencyGraph,
    pub plan: StratumPlan,
    pub seeded: Option<String>,
}

/// Stratifies, standardizes aggregates, optimizes, and stratifies the result.
pub fn analyze(program: &Program, goal: Option<&Goal>, frozen: &std::collections::BTreeSet<String>) -> Result<Analyzed> {
    let graph = DependencyGraph::build(program);
    let plan = stratify(program, &graph)?;
    let standardized = standardize_aggregates(program, &plan);
    let Optimized { program, seeded } = optimize(&standardized, goal, frozen);
    let graph = DependencyGraph::build(&program);
    let plan = stratify(&program, &graph)?;
    Ok(Analyzed {
        program,
        graph,
        plan,
        seeded,
    })
}
