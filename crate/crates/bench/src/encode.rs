//! Benchmark problems as programs. Rule bodies never depend on the query
//! regime; only the goal changes.

use std::fmt;

use sqlog_core::ast::{Program, Term};
use sqlog_core::directives::{ConnectionSpec, DirectiveSet, QueryTarget};
use sqlog_core::parser::parse_program;

use crate::gen::GraphInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Problem {
    /// Transitive closure in the doubling style of the flights example.
    Reachability,
    /// Left-linear transitive closure, the shape the seed rewrite accepts.
    LinearReachability,
    SameGeneration,
}

impl Problem {
    pub fn name(self) -> &'static str {
        match self {
            Problem::Reachability => "reachability",
            Problem::LinearReachability => "reachability-linear",
            Problem::SameGeneration => "samegen",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "reachability" | "reach" => Problem::Reachability,
            "reachability-linear" | "linear" => Problem::LinearReachability,
            "samegen" | "same-generation" => Problem::SameGeneration,
            _ => return None,
        })
    }

    pub fn goal_predicate(self) -> &'static str {
        match self {
            Problem::Reachability | Problem::LinearReachability => "reachable",
            Problem::SameGeneration => "samegen",
        }
    }

    /// The predicate holding the instance's arcs.
    pub fn input_predicate(self) -> &'static str {
        match self {
            Problem::Reachability | Problem::LinearReachability => "edge",
            Problem::SameGeneration => "parent",
        }
    }

    pub fn rules(self) -> &'static str {
        match self {
            Problem::Reachability => {
                "reachable(X, Y) :- edge(X, Y).\nreachable(X, Y) :- reachable(X, Z), reachable(Z, Y).\n"
            }
            Problem::LinearReachability => {
                "reachable(X, Y) :- edge(X, Y).\nreachable(X, Y) :- reachable(X, Z), edge(Z, Y).\n"
            }
            Problem::SameGeneration => {
                "samegen(X, Y) :- parent(P, X), parent(P, Y), X != Y.\n\
                 samegen(X, Y) :- parent(P1, X), samegen(P1, P2), parent(P2, Y).\n"
            }
        }
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which goal arguments are bound: none, the first (to `b1`) or both (to
/// `b1` and `b2`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    Q0,
    Q1,
    Q2,
}

impl Regime {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s.to_ascii_uppercase().as_str() {
            "Q0" => Regime::Q0,
            "Q1" => Regime::Q1,
            "Q2" => Regime::Q2,
            _ => return None,
        })
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Q0 => "Q0",
            Regime::Q1 => "Q1",
            Regime::Q2 => "Q2",
        })
    }
}

#[derive(Debug, Clone)]
pub struct Encoding {
    pub program: Program,
    pub directives: DirectiveSet,
    pub goal: QueryTarget,
}

pub fn goal(problem: Problem, regime: Regime, instance: &GraphInstance) -> QueryTarget {
    let (x, y) = match regime {
        Regime::Q0 => (Term::var("X"), Term::var("Y")),
        Regime::Q1 => (Term::Int(instance.b1.into()), Term::var("Y")),
        Regime::Q2 => (Term::Int(instance.b1.into()), Term::Int(instance.b2.into())),
    };
    QueryTarget {
        name: problem.goal_predicate().to_string(),
        args: Some(vec![x, y]),
    }
}

/// The program (rules only; arcs are loaded separately) and directives
/// evaluating `problem` in the database `working`.
pub fn encode(problem: Problem, regime: Regime, instance: &GraphInstance, working: &str) -> Encoding {
    let program = parse_program(problem.rules()).expect("benchmark rules parse");
    let goal = goal(problem, regime, instance);
    let mut directives = DirectiveSet::working(ConnectionSpec::local(working));
    directives.query = Some(goal.clone());
    Encoding {
        program,
        directives,
        goal,
    }
}

/// The instance's arcs as program facts, followed by the rules.
pub fn program_text(problem: Problem, instance: &GraphInstance) -> String {
    let p = problem.input_predicate();
    let mut text: String = instance.edges.iter().map(|(a, b)| format!("{p}({a}, {b}).\n")).collect();
    text.push_str(problem.rules());
    text
}
