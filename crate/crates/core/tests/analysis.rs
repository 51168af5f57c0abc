//! Stratification, aggregate standardization and the bound-goal rewrite,
//! checked against the naive evaluator and against the level-mapping
//! conditions directly.

use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use sqlog_core::analysis::optimize::seed_rewrite;
use sqlog_core::analysis::{standardize_aggregates, stratify, DependencyGraph, EdgeLabel, Goal, StratumPlan};
use sqlog_core::ast::{LiteralKind, Program, Term, Value};
use sqlog_core::error::{Error, Result};
use sqlog_core::parser::parse_program;

const EX_STRATIFICATION: &str = "\
a(1, 1). a(2, 1). a(3, 1). a(1, 2). b(1). b(2). p(1). p(2).
q(X) :- p(X), #count{Y : a(Y, X), b(X)} <= 2.
p(X) :- q(X), b(X).
";

fn plan_of(text: &str) -> Result<StratumPlan> {
    let program = parse_program(text).unwrap_or_else(|d| panic!("{d:?}\n{text}"));
    stratify(&program, &DependencyGraph::build(&program))
}

/// Checks the witness printed in a stratification error: a closed walk
/// along edges of the dependency graph.
fn assert_cycle_witness(text: &str, err: &Error) {
    let Error::NotStratified(msg) = err else { panic!("{err}") };
    let cycle: Vec<&str> = msg.rsplit("cycle ").next().unwrap().split(" -> ").collect();
    assert!(cycle.len() >= 2 && cycle.first() == cycle.last(), "{msg}");
    let program = parse_program(text).unwrap();
    let graph = DependencyGraph::build(&program);
    for w in cycle.windows(2) {
        let (from, to) = (graph.node(w[0]).unwrap(), graph.node(w[1]).unwrap());
        assert!(
            graph.edges.iter().any(|e| e.from == from && e.to == to),
            "{} -> {} is not an edge ({msg})",
            w[0],
            w[1]
        );
    }
    assert!(
        graph.edges.iter().any(|e| {
            e.label != EdgeLabel::Positive
                && cycle.windows(2).any(|w| graph.nodes[e.from] == w[0] && graph.nodes[e.to] == w[1])
        }),
        "no negative or aggregate edge on the witness ({msg})"
    );
}

#[test]
fn example_program_is_stratified_with_bases_first() {
    let plan = plan_of(EX_STRATIFICATION).unwrap();
    let at = |p: &str| plan.component_of(p).unwrap();
    assert_eq!(at("p"), at("q"));
    assert!(at("a") < at("p") && at("b") < at("p"));
    assert!(plan.component_for("p").unwrap().recursive);
    assert_eq!(plan.components.len(), 3);
}

#[test]
fn example_program_with_derived_b_is_rejected() {
    let text = format!("{EX_STRATIFICATION}b(X) :- p(X).\n");
    let err = plan_of(&text).unwrap_err();
    assert!(err.to_string().contains("aggregate"), "{err}");
    assert_cycle_witness(&text, &err);
}

#[test]
fn negative_self_loop_is_rejected() {
    let text = "q(1).\np(X) :- q(X), not p(X).";
    let err = plan_of(text).unwrap_err();
    assert_cycle_witness(text, &err);
}

/// A ring of predicates with one negative or aggregate link, buried among
/// stratified noise rules.
fn injected_cycle(rng: &mut StdRng) -> String {
    let len = rng.gen_range(1..=5);
    let breaker = rng.gen_range(0..len);
    let mut text = String::from("base(1). base(2). pair(1, 2).\n");
    for i in 0..len {
        let prev = (i + len - 1) % len;
        let link = if i != breaker {
            format!("c{prev}(X)")
        } else if rng.gen_bool(0.5) {
            format!("not c{prev}(X)")
        } else {
            format!("#count{{Y : pair(X, Y), c{prev}(Y)}} > {}", rng.gen_range(0..3))
        };
        text.push_str(&format!("c{i}(X) :- base(X), {link}.\n"));
    }
    for j in 0..rng.gen_range(0..4) {
        let from = rng.gen_range(0..len);
        text.push_str(&format!("n{j}(X) :- base(X), not c{from}(X).\n"));
        text.push_str(&format!("m{j}(X) :- n{j}(X), #sum{{Y : pair(X, Y)}} >= 0.\n"));
    }
    text
}

#[test]
fn injected_cycles_are_rejected_with_a_witness() {
    let mut rng = StdRng::seed_from_u64(0x5eed);
    for _ in 0..20 {
        let text = injected_cycle(&mut rng);
        let err = plan_of(&text).expect_err(&text);
        assert_cycle_witness(&text, &err);
        assert!(sqlog_oracle::strata(&parse_program(&text).unwrap()).is_err());
    }
}

#[derive(Debug, Clone)]
enum Link {
    Pos(usize),
    Neg(usize),
    Agg(usize),
}

fn random_rules() -> impl Strategy<Value = String> {
    let link = prop_oneof![
        (0usize..4).prop_map(Link::Pos),
        (0usize..4).prop_map(Link::Neg),
        (0usize..4).prop_map(Link::Agg),
    ];
    proptest::collection::vec((0usize..4, proptest::collection::vec(link, 0..3)), 1..8).prop_map(|rules| {
        let mut text = String::from("e(1, 2). e(2, 3). e(3, 1).\n");
        for (head, links) in rules {
            let mut body = vec!["e(X, _)".to_string()];
            for (k, l) in links.into_iter().enumerate() {
                body.push(match l {
                    Link::Pos(p) => format!("p{p}(X)"),
                    Link::Neg(p) => format!("not p{p}(X)"),
                    Link::Agg(p) => format!("#count{{Y{k} : e(X, Y{k}), p{p}(Y{k})}} > 0"),
                });
            }
            text.push_str(&format!("p{head}(X) :- {}.\n", body.join(", ")));
        }
        text
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, ..ProptestConfig::default() })]

    /// Component positions form a level mapping: a head is at least as high
    /// as its positive body predicates and strictly above negated and
    /// aggregated ones. A program is rejected exactly when no such mapping
    /// exists.
    #[test]
    fn component_order_is_a_level_mapping(text in random_rules()) {
        let program = parse_program(&text).unwrap();
        let plan = stratify(&program, &DependencyGraph::build(&program));
        let exists = sqlog_oracle::strata(&program).is_ok();
        prop_assert_eq!(plan.is_ok(), exists, "{}", text);
        let Ok(plan) = plan else { return Ok(()) };
        let level = |p: &str| plan.component_of(p).unwrap();
        for rule in &program.rules {
            let h = level(&rule.head.predicate);
            for lit in &rule.body {
                match &lit.kind {
                    LiteralKind::Atom(a) if lit.negated => prop_assert!(level(&a.predicate) < h),
                    LiteralKind::Atom(a) => prop_assert!(level(&a.predicate) <= h),
                    LiteralKind::Aggregate(g) => {
                        for a in &g.set.conj {
                            prop_assert!(level(&a.predicate) < h);
                        }
                    }
                    LiteralKind::Builtin(_) => {}
                }
            }
        }
    }
}

fn model(program: &Program) -> BTreeMap<String, Vec<Vec<Value>>> {
    sqlog_oracle::evaluate(program)
        .unwrap()
        .into_iter()
        .map(|(p, rows)| (p, rows.into_iter().collect()))
        .collect()
}

fn aggregate_program() -> impl Strategy<Value = String> {
    let edges = proptest::collection::vec((0u8..6, 0u8..6), 0..20);
    let weights = proptest::collection::vec((0u8..6, 0i8..10), 0..10);
    let func = prop_oneof![Just("#count"), Just("#sum"), Just("#min"), Just("#max"), Just("#avg")];
    let cmp = prop_oneof![Just("<"), Just("<="), Just(">"), Just(">="), Just("=")];
    let shape = 0usize..4;
    let neg = any::<bool>();
    (edges, weights, proptest::collection::vec((func, cmp, 0i8..8, shape, neg), 1..4)).prop_map(
        |(edges, weights, aggs)| {
            let mut text = String::from("node(0). node(1). node(2). node(3). node(4). node(5).\n");
            for (a, b) in edges {
                text.push_str(&format!("e({a}, {b}).\n"));
            }
            for (n, w) in weights {
                text.push_str(&format!("w({n}, {w}).\n"));
            }
            for (i, (func, cmp, k, shape, neg)) in aggs.into_iter().enumerate() {
                let (vars, conj) = match shape {
                    0 => ("Y", "e(X, Y)"),
                    1 => ("W", "e(X, Y), w(Y, W)"),
                    2 => ("Y, W", "e(X, Y), w(Y, W)"),
                    _ => ("W", "w(Z, W), e(Z, X)"),
                };
                let not = if neg { "not " } else { "" };
                text.push_str(&format!("r{i}(X) :- node(X), {not}{func}{{{vars} : {conj}}} {cmp} {k}.\n"));
            }
            text
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, ..ProptestConfig::default() })]

    #[test]
    fn standardization_preserves_answers(text in aggregate_program()) {
        let program = parse_program(&text).unwrap();
        let plan = stratify(&program, &DependencyGraph::build(&program)).unwrap();
        let standardized = standardize_aggregates(&program, &plan);
        let before = model(&program);
        let after = model(&standardized);
        let none = Vec::new();
        for (p, rows) in &before {
            prop_assert_eq!(rows, after.get(p).unwrap_or(&none), "{}\n{}", p, standardized);
        }
    }

    #[test]
    fn seed_rewrite_preserves_goal_answers(
        edges in proptest::collection::vec((0i64..8, 0i64..8), 0..25),
        start in 0i64..8,
        end in proptest::option::of(0i64..8),
    ) {
        let mut text: String = edges.iter().map(|(a, b)| format!("e({a}, {b}).\n")).collect();
        text.push_str("t(X, Y) :- e(X, Y).\nt(X, Y) :- t(X, Z), e(Z, Y).\n");
        let program = parse_program(&text).unwrap();
        let goal = Goal {
            predicate: "t".into(),
            args: vec![Term::Int(start), end.map_or(Term::var("Y"), Term::Int)],
        };
        let (rewritten, seed) = seed_rewrite(&program, &goal).expect("linear closure is rewritten");
        prop_assert!(seed.contains("reached"));
        let bound = goal.bound();
        let keep = |row: &Vec<Value>| bound.iter().all(|(i, v)| &row[*i] == v);
        let expected: Vec<_> = model(&program).remove("t").unwrap_or_default().into_iter().filter(keep).collect();
        let got: Vec<_> = model(&rewritten).remove("t").unwrap_or_default().into_iter().filter(keep).collect();
        prop_assert_eq!(got, expected);
    }
}

#[test]
fn seed_rewrite_only_applies_to_invariant_bound_positions() {
    let linear_left = parse_program("e(1, 2).\nt(X, Y) :- e(X, Y).\nt(X, Y) :- t(X, Z), e(Z, Y).").unwrap();
    let linear_right = parse_program("e(1, 2).\nt(X, Y) :- e(X, Y).\nt(X, Y) :- e(X, Z), t(Z, Y).").unwrap();
    let nonlinear = parse_program("e(1, 2).\nt(X, Y) :- e(X, Y).\nt(X, Y) :- t(X, Z), t(Z, Y).").unwrap();
    let read_elsewhere =
        parse_program("e(1, 2).\nt(X, Y) :- e(X, Y).\nt(X, Y) :- t(X, Z), e(Z, Y).\nu(X) :- t(X, X).").unwrap();
    let goal = |first: Term, second: Term| Goal {
        predicate: "t".into(),
        args: vec![first, second],
    };
    let x_bound = goal(Term::Int(1), Term::var("Y"));
    let y_bound = goal(Term::var("X"), Term::Int(2));
    let free = goal(Term::var("X"), Term::var("Y"));
    assert!(seed_rewrite(&linear_left, &x_bound).is_some());
    assert!(seed_rewrite(&linear_left, &y_bound).is_none());
    assert!(seed_rewrite(&linear_right, &y_bound).is_some());
    assert!(seed_rewrite(&linear_right, &x_bound).is_none());
    assert!(seed_rewrite(&nonlinear, &x_bound).is_none());
    assert!(seed_rewrite(&read_elsewhere, &x_bound).is_none());
    assert!(seed_rewrite(&linear_left, &free).is_none());
}
