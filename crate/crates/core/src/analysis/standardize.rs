use std::collections::{BTreeSet, HashMap};

use super::stratify::StratumPlan;
use crate::ast::*;

pub use crate::check::RESERVED_PREFIX as AUX_PREFIX;

/// Variables of `rule` occurring outside the body literal at `skip`: in the
/// head, in other literals (other aggregates' sets included) and in the
/// guard of the skipped aggregate itself.
fn outside_vars(rule: &Rule, skip: usize) -> BTreeSet<String> {
    let mut out: BTreeSet<String> = rule.head.vars().map(str::to_string).collect();
    for (i, lit) in rule.body.iter().enumerate() {
        match &lit.kind {
            LiteralKind::Aggregate(a) if i == skip => out.extend(a.guard.as_var().map(str::to_string)),
            LiteralKind::Aggregate(a) => {
                out.extend(a.set.conj.iter().flat_map(Atom::vars).map(str::to_string));
                out.extend(a.guard.as_var().map(str::to_string));
            }
            LiteralKind::Atom(a) => out.extend(a.vars().map(str::to_string)),
            LiteralKind::Builtin(b) => out.extend(b.vars().map(str::to_string)),
        }
    }
    out
}

/// Variables of an aggregate's conjunction shared with the rest of the rule,
/// in first-occurrence order.
pub fn shared_vars(rule: &Rule, index: usize) -> Vec<String> {
    let LiteralKind::Aggregate(agg) = &rule.body[index].kind else {
        return Vec::new();
    };
    let outside = outside_vars(rule, index);
    agg.set
        .conj_vars()
        .into_iter()
        .filter(|v| outside.contains(*v))
        .map(str::to_string)
        .collect()
}

/// Argument list of the auxiliary atom: the set's variables, then the shared
/// variables not already among them.
pub fn aux_args(agg: &AggregateAtom, shared: &[String]) -> Vec<String> {
    let mut args = agg.set.vars.clone();
    for v in shared {
        if !args.contains(v) {
            args.push(v.clone());
        }
    }
    args
}

/// Whether the aggregate's conjunction already is a single atom of distinct
/// variables that are exactly the ones the aggregate needs.
pub fn is_standard(agg: &AggregateAtom, shared: &[String]) -> bool {
    let [atom] = agg.set.conj.as_slice() else { return false };
    let mut seen = BTreeSet::new();
    for t in &atom.args {
        match t.as_var() {
            Some(v) if seen.insert(v) => {}
            _ => return false,
        }
    }
    let args = aux_args(agg, shared);
    let needed: BTreeSet<&str> = args.iter().map(String::as_str).collect();
    seen == needed
}

/// Rewrites every aggregate whose conjunction is not already a single
/// suitable atom into an auxiliary rule plus an aggregate over the auxiliary
/// atom. `plan` must be the stratification of `program`; it is used to keep
/// binding atoms out of the head's own component.
pub fn standardize_aggregates(program: &Program, plan: &StratumPlan) -> Program {
    let mut out = Program {
        rules: Vec::with_capacity(program.rules.len()),
        facts: program.facts.clone(),
        maxint: program.maxint,
    };
    let mut counters: HashMap<String, usize> = HashMap::new();
    for rule in &program.rules {
        let head_comp = plan.component_of(&rule.head.predicate);
        let mut rewritten = rule.clone();
        for i in 0..rule.body.len() {
            let LiteralKind::Aggregate(agg) = &rule.body[i].kind else { continue };
            let shared = shared_vars(rule, i);
            if is_standard(agg, &shared) {
                continue;
            }
            let n = counters.entry(rule.head.predicate.clone()).or_insert(0);
            *n += 1;
            let name = format!("{AUX_PREFIX}{}__{}", rule.head.predicate, n);
            let args = aux_args(agg, &shared);
            let mut aux_head = Atom::new(&name, args.iter().map(Term::var).collect());
            aux_head.span = agg.span;

            // binding atoms first, then the set's conjunction
            let mut body = Vec::new();
            for a in rule.positive_atoms() {
                let binds = a.vars().any(|v| shared.iter().any(|s| s == v));
                let lower = plan.component_of(&a.predicate) != head_comp;
                if binds && lower && !agg.set.conj.contains(a) {
                    // rename local variables so they cannot clash with the set's
                    body.push(Literal::pos(rename_locals(a, &shared, i)));
                }
            }
            body.extend(agg.set.conj.iter().cloned().map(Literal::pos));
            out.rules.push(Rule {
                head: aux_head.clone(),
                body,
                span: rule.span,
            });
            if let LiteralKind::Aggregate(target) = &mut rewritten.body[i].kind {
                target.set.conj = vec![aux_head];
            }
        }
        out.rules.push(rewritten);
    }
    out
}

/// Binding atoms keep the shared variables; any other variable is local to
/// the auxiliary rule and gets a name that cannot clash with the set's.
fn rename_locals(atom: &Atom, shared: &[String], tag: usize) -> Atom {
    let mut a = atom.clone();
    for t in &mut a.args {
        if let Term::Var(v) = t {
            if !shared.contains(v) {
                *v = format!("{v}__b{tag}");
            }
        }
    }
    a
}
