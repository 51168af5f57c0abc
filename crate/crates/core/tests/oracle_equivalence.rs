//! The SQL engine against the naive in-memory evaluator.

mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::{assert_matches_oracle, run};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use sqlog_core::ast::Value;
use sqlog_core::parser::parse_program;

#[test]
fn facts_only() {
    let r = assert_matches_oracle("e(1, 2). e(2, 3). e(1, 2). f(\"x\").");
    assert!(r.relations.is_empty());
    assert_eq!(r.sizes["e"], 2);
    assert_eq!(r.sizes["f"], 1);
}

#[test]
fn transitive_closure_on_a_cycle() {
    let r = assert_matches_oracle("e(1, 2). e(2, 1).\nt(X, Y) :- e(X, Y).\nt(X, Y) :- t(X, Z), t(Z, Y).");
    assert_eq!(r.relations["t"].len(), 4);
}

#[test]
fn chain_closure() {
    let r = assert_matches_oracle("e(1, 2). e(2, 3).\nt(X, Y) :- e(X, Y).\nt(X, Y) :- t(X, Z), t(Z, Y).");
    assert_eq!(common::int_rows(&r.relations["t"]), vec![vec![1, 2], vec![1, 3], vec![2, 3]]);
}

#[test]
fn repeated_variables_and_head_constants() {
    assert_matches_oracle(
        "e(1, 1). e(1, 2). e(3, 3).\n\
         loop(X) :- e(X, X).\n\
         tagged(X, 7, \"k\") :- e(X, Y), X < Y.",
    );
}

#[test]
fn negation_with_constants_and_anonymous_variables() {
    assert_matches_oracle(
        "d(1). d(2). d(3). q(1, c). q(2, z). r(3, 1).\n\
         p(X) :- d(X), not q(X, c).\n\
         nr(X) :- d(X), not r(_, X).\n\
         none(X) :- d(X), not empty(X).\n\
         empty(X) :- d(X), X > 10.",
    );
}

#[test]
fn negation_between_strata() {
    assert_matches_oracle(
        "e(1, 2). e(2, 3). e(3, 1). e(4, 5). n(1). n(2). n(3). n(4). n(5).\n\
         t(X, Y) :- e(X, Y).\n\
         t(X, Y) :- t(X, Z), e(Z, Y).\n\
         unreachable(X, Y) :- n(X), n(Y), not t(X, Y).\n\
         isolated(X) :- n(X), not t(X, _), not t(_, X).",
    );
}

#[test]
fn mutual_recursion() {
    assert_matches_oracle(
        "succ(0, 1). succ(1, 2). succ(2, 3). succ(3, 4). succ(4, 5).\n\
         even(0).\n\
         even(Y) :- odd(X), succ(X, Y).\n\
         odd(Y) :- even(X), succ(X, Y).",
    );
}

#[test]
fn zero_arity_predicates() {
    let r = assert_matches_oracle(
        "e(1, 2).\n\
         ok :- e(1, 2).\n\
         bad :- not ok.\n\
         missing :- e(2, 1).\n\
         good(X) :- e(X, _), ok, not missing.",
    );
    assert_eq!(r.relations["ok"], vec![Vec::<Value>::new()]);
    assert!(r.relations["bad"].is_empty());
}

#[test]
fn strings_with_quotes() {
    assert_matches_oracle(
        "name(1, \"it's\"). name(2, \"plain\"). name(3, \"it's\").\n\
         same(X, Y) :- name(X, N), name(Y, N), X < Y.\n\
         quoted(X) :- name(X, \"it's\").",
    );
}

#[test]
fn aggregates_of_every_kind() {
    assert_matches_oracle(
        "emp(1, 100, a). emp(2, 200, a). emp(3, 200, b). emp(4, 50, c). dep(a). dep(b). dep(c). dep(d).\n\
         big(D) :- dep(D), #sum{S, E : emp(E, S, D)} > 150.\n\
         crowded(D) :- dep(D), #count{E : emp(E, _, D)} >= 2.\n\
         lonely(D) :- dep(D), #count{E : emp(E, _, D)} < 1.\n\
         small(D) :- dep(D), #sum{S, E : emp(E, S, D)} <= 100.\n\
         cheap(D) :- dep(D), #max{S : emp(E, S, D)} < 150.\n\
         floor(D) :- dep(D), #min{S : emp(E, S, D)} = 100.\n\
         mean(D) :- dep(D), #avg{S, E : emp(E, S, D)} = 150.\n\
         notmean(D) :- dep(D), not #avg{S, E : emp(E, S, D)} = 150.\n\
         notmax(D) :- dep(D), not #max{S : emp(E, S, D)} > 150.\n\
         notcount(D) :- dep(D), not #count{E : emp(E, _, D)} > 1.",
    );
}

#[test]
fn aggregate_guards_bound_to_variables() {
    assert_matches_oracle(
        "emp(1, 100, a). emp(2, 200, a). emp(3, 200, b). limit(a, 250). limit(b, 250). limit(d, 0).\n\
         over(D) :- limit(D, L), #sum{S, E : emp(E, S, D)} > L.\n\
         within(D) :- limit(D, L), #sum{S, E : emp(E, S, D)} <= L.\n\
         atmost(D, L) :- limit(D, L), #count{E : emp(E, _, D)} <= L.",
    );
}

#[test]
fn aggregate_without_grouping_variables() {
    assert_matches_oracle(
        "n(1). n(2). n(3). m(5).\n\
         many :- #count{X : n(X)} > 2.\n\
         total(T) :- m(T), #sum{X : n(X)} < T.\n\
         nobody :- #count{X : absent(X)} = 0.\n\
         absent(X) :- n(X), X > 5.",
    );
}

#[test]
fn aggregate_over_a_conjunction() {
    assert_matches_oracle(
        "r(1). r(2). r(5). a(1, x). a(2, x). a(5, y). big(2). big(5). limit(3, x). limit(1, y). limit(9, z).\n\
         q(V, Y) :- limit(Y, V), #max{Z : r(Z), a(Z, V)} > Y.\n\
         c(V) :- limit(_, V), #count{Z : r(Z), a(Z, V), big(Z)} >= 1.",
    );
}

#[test]
fn recursion_over_an_aggregate_of_a_lower_stratum() {
    assert_matches_oracle(
        "e(1, 2). e(2, 3). e(3, 4). w(1, 5). w(1, 6). w(2, 1). w(3, 9).\n\
         heavy(X) :- w(X, _), #sum{V : w(X, V)} > 4.\n\
         path(X, Y) :- e(X, Y), heavy(X).\n\
         path(X, Y) :- path(X, Z), e(Z, Y), heavy(Z).",
    );
}

#[test]
fn arithmetic_and_range_bounded_variables() {
    assert_matches_oracle(
        "#maxint = 10.\n\
         d(1). d(4). d(9).\n\
         next(Y) :- d(X), Y = X + 1.\n\
         twice(Y) :- d(X), Y = X * 2.\n\
         small(X) :- X < 3.\n\
         gap(X) :- X <= 5, not d(X).\n\
         sum(X, Y, Z) :- d(X), d(Y), Z = X + Y.",
    );
}

#[test]
fn arithmetic_recursion_stays_within_maxint() {
    let r = assert_matches_oracle("#maxint = 20.\nnat(0).\nnat(Y) :- nat(X), Y = X + 1.");
    assert_eq!(r.relations["nat"].len(), 21);
}

/// Pairs of distinct non-root nodes at the same depth of the tree given by
/// parent links.
fn same_generation_by_depth(parents: &[(u32, u32)]) -> BTreeSet<(u32, u32)> {
    let mut depth: BTreeMap<u32, u32> = BTreeMap::new();
    let children: BTreeSet<u32> = parents.iter().map(|p| p.1).collect();
    let mut frontier: Vec<u32> = parents.iter().map(|p| p.0).filter(|n| !children.contains(n)).collect();
    for &r in &frontier {
        depth.insert(r, 0);
    }
    while let Some(n) = frontier.pop() {
        for &(p, c) in parents {
            if p == n {
                depth.insert(c, depth[&n] + 1);
                frontier.push(c);
            }
        }
    }
    let mut out = BTreeSet::new();
    for (&x, &dx) in &depth {
        for (&y, &dy) in &depth {
            if x != y && dx == dy && dx > 0 {
                out.insert((x, y));
            }
        }
    }
    out
}

#[test]
fn same_generation_on_a_full_binary_tree() {
    // a = 1, b = 2, ... g = 7
    let parents: Vec<(u32, u32)> = (1..=3).flat_map(|p| [(p, 2 * p), (p, 2 * p + 1)]).collect();
    let names = ['a', 'b', 'c', 'd', 'e', 'f', 'g'];
    let mut text = String::new();
    for (p, c) in &parents {
        text.push_str(&format!("par({}, {}).\n", names[*p as usize - 1], names[*c as usize - 1]));
    }
    text.push_str("sg(X, Y) :- par(P, X), par(P, Y), X != Y.\nsg(X, Y) :- par(P1, X), par(P2, Y), sg(P1, P2).");
    let r = assert_matches_oracle(&text);

    let expected: BTreeSet<Vec<Value>> = same_generation_by_depth(&parents)
        .into_iter()
        .map(|(x, y)| {
            vec![
                Value::Str(names[x as usize - 1].to_string()),
                Value::Str(names[y as usize - 1].to_string()),
            ]
        })
        .collect();
    assert_eq!(expected.len(), 14);
    let got: BTreeSet<Vec<Value>> = r.relations["sg"].iter().cloned().collect();
    assert_eq!(got, expected);
}

const VARS: [&str; 4] = ["X", "Y", "Z", "W"];

struct Gen {
    rng: StdRng,
    /// (name, arity), EDB first.
    preds: Vec<(String, usize)>,
    edb: usize,
}

impl Gen {
    fn term(&mut self, pool: &[&str]) -> String {
        match self.rng.gen_range(0..20) {
            0..=1 => self.rng.gen_range(0..5).to_string(),
            2 => "_".to_string(),
            _ => pool[self.rng.gen_range(0..pool.len())].to_string(),
        }
    }

    fn atom(&mut self, pred: usize, pool: &[&str]) -> String {
        let (name, arity) = self.preds[pred].clone();
        if arity == 0 {
            return name;
        }
        let args: Vec<String> = (0..arity).map(|_| self.term(pool)).collect();
        format!("{name}({})", args.join(", "))
    }

    fn rule(&mut self, head: usize) -> String {
        let mut body = Vec::new();
        let n = self.rng.gen_range(1..=3);
        for _ in 0..n {
            // positive atoms may use any predicate up to the head, and
            // occasionally the next one up
            let upper = (head + 2).min(self.preds.len());
            let p = self.rng.gen_range(0..upper);
            body.push(self.atom(p, &VARS));
        }
        let text = body.join(", ");
        let bound: Vec<&str> = VARS
            .iter()
            .copied()
            .filter(|v| {
                text.split(|c: char| !c.is_alphanumeric() && c != '_')
                    .any(|w| w == *v)
            })
            .collect();
        if !bound.is_empty() {
            if self.rng.gen_bool(0.3) {
                let p = self.rng.gen_range(0..head);
                body.push(format!("not {}", self.atom(p, &bound)));
            }
            if self.rng.gen_bool(0.3) {
                let a = bound[self.rng.gen_range(0..bound.len())];
                let op = ["<", "<=", ">", ">=", "=", "!="][self.rng.gen_range(0..6)];
                let b = if self.rng.gen_bool(0.5) {
                    bound[self.rng.gen_range(0..bound.len())].to_string()
                } else {
                    self.rng.gen_range(0..5).to_string()
                };
                body.push(format!("{a} {op} {b}"));
            }
            if self.rng.gen_bool(0.25) {
                body.push(self.aggregate(head, &bound));
            }
        }
        let mut head_pool = bound.clone();
        if !bound.is_empty() && self.rng.gen_bool(0.15) {
            let a = bound[self.rng.gen_range(0..bound.len())];
            body.push(format!("N = {a} + {}", self.rng.gen_range(1..3)));
            head_pool.push("N");
        }
        let (name, arity) = self.preds[head].clone();
        let head_text = if arity == 0 {
            name
        } else {
            let args: Vec<String> = (0..arity)
                .map(|_| {
                    if head_pool.is_empty() || self.rng.gen_bool(0.1) {
                        self.rng.gen_range(0..5).to_string()
                    } else {
                        head_pool[self.rng.gen_range(0..head_pool.len())].to_string()
                    }
                })
                .collect();
            format!("{name}({})", args.join(", "))
        };
        format!("{head_text} :- {}.", body.join(", "))
    }

    /// An aggregate over a strictly lower predicate of arity 2, grouped by
    /// a bound variable or over everything.
    fn aggregate(&mut self, head: usize, bound: &[&str]) -> String {
        let lower: Vec<usize> = (0..head).filter(|&p| self.preds[p].1 == 2).collect();
        let Some(&p) = lower.get(self.rng.gen_range(0..lower.len().max(1))) else {
            return "0 < 1".to_string();
        };
        let name = self.preds[p].0.clone();
        let key = if self.rng.gen_bool(0.6) {
            bound[self.rng.gen_range(0..bound.len())].to_string()
        } else {
            "K".to_string()
        };
        let func = ["#count", "#sum", "#min", "#max", "#avg"][self.rng.gen_range(0..5)];
        let op = ["<", "<=", ">", ">=", "="][self.rng.gen_range(0..5)];
        let guard = if self.rng.gen_bool(0.7) {
            self.rng.gen_range(0..6).to_string()
        } else {
            bound[self.rng.gen_range(0..bound.len())].to_string()
        };
        let neg = if self.rng.gen_bool(0.2) { "not " } else { "" };
        format!("{neg}{func}{{V : {name}(V, {key})}} {op} {guard}")
    }
}

/// A random program over small integer domains; may be unstratified, in
/// which case the caller skips it.
fn random_program(seed: u64) -> String {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut preds = vec![("e".to_string(), 2), ("f".to_string(), 1), ("g".to_string(), 2)];
    let idb = rng.gen_range(2..=4);
    for i in 0..idb {
        preds.push((format!("p{i}"), rng.gen_range(0..=2)));
    }
    let mut text = String::from("#maxint = 12.\n");
    for _ in 0..rng.gen_range(2..16) {
        text.push_str(&format!("e({}, {}).\n", rng.gen_range(0..6), rng.gen_range(0..6)));
    }
    for _ in 0..rng.gen_range(0..5) {
        text.push_str(&format!("f({}).\n", rng.gen_range(0..6)));
    }
    for _ in 0..rng.gen_range(0..8) {
        text.push_str(&format!("g({}, {}).\n", rng.gen_range(0..6), rng.gen_range(0..3)));
    }
    let mut g = Gen { rng, preds, edb: 3 };
    for h in g.edb..g.preds.len() {
        for _ in 0..g.rng.gen_range(1..=3) {
            let r = g.rule(h);
            text.push_str(&r);
            text.push('\n');
        }
    }
    text
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 300, ..ProptestConfig::default() })]

    #[test]
    fn random_programs_match_the_oracle(seed in any::<u64>()) {
        let text = random_program(seed);
        let Ok(program) = parse_program(&text) else { return Ok(()) };
        prop_assume!(sqlog_oracle::strata(&program).is_ok());
        let result = run(&text);
        let expected = common::oracle_for(&text, &result);
        for (p, rows) in &result.relations {
            prop_assert_eq!(rows, &expected[p], "predicate `{}`\n{}", p, text);
        }
    }
}

#[test]
fn random_programs_are_mostly_accepted() {
    let accepted = (0..200u64)
        .filter(|&s| {
            parse_program(&random_program(s))
                .map(|p| sqlog_oracle::strata(&p).is_ok())
                .unwrap_or(false)
        })
        .count();
    assert!(accepted >= 100, "only {accepted} of 200 generated programs are usable");
}

