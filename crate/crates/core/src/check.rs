//! Arity and safety checks run right after parsing.

use std::collections::{BTreeMap, BTreeSet};

use crate::ast::{Atom, LiteralKind, Program, Rule};
use crate::error::Diagnostic;

/// Prefix of predicates generated by program rewriting.
pub const RESERVED_PREFIX: &str = "aux__";
/// Name of the generated integer range table used for `#maxint` bounds.
pub const RANGE_TABLE: &str = "maxint__range";

/// Every predicate must be used with a single arity throughout the program.
pub fn arity_check(program: &Program) -> Result<(), Vec<Diagnostic>> {
    let mut seen: BTreeMap<&str, &Atom> = BTreeMap::new();
    let mut diags = Vec::new();
    let mut reported = BTreeSet::new();
    for atom in program.all_atoms() {
        match seen.get(atom.predicate.as_str()) {
            Some(first) if first.arity() != atom.arity() => {
                if reported.insert(atom.predicate.as_str()) {
                    diags.push(Diagnostic::at(
                        atom.span,
                        format!(
                            "predicate `{}` used with arity {} and {} (first use at {})",
                            atom.predicate,
                            first.arity(),
                            atom.arity(),
                            first.span
                        ),
                    ));
                }
            }
            Some(_) => {}
            None => {
                seen.insert(&atom.predicate, atom);
            }
        }
    }
    if diags.is_empty() {
        Ok(())
    } else {
        Err(diags)
    }
}

/// Safety of a single rule.
///
/// (i) every global variable occurs in a positive standard body literal;
/// (ii) every variable of a symbolic set's `Vars` occurs in its conjunction;
/// (iii) every aggregate guard is a constant or a global variable.
///
/// With `maxint > 0`, a variable that fails (i) but occurs in a built-in is
/// accepted: it will be bounded to `[0, maxint]`. Anonymous variables inside
/// negative literals are existential and need no binding.
pub fn safety_check(rule: &Rule, maxint: u64) -> Result<(), Vec<Diagnostic>> {
    let mut diags = Vec::new();
    if rule.body.is_empty() {
        if !rule.head.is_ground() {
            diags.push(Diagnostic::at(
                rule.head.span,
                format!("fact `{}` is not ground", rule.head),
            ));
        }
        return if diags.is_empty() { Ok(()) } else { Err(diags) };
    }

    let bound = rule.positively_bound_vars();
    let in_builtin: BTreeSet<&str> = rule
        .body
        .iter()
        .filter_map(|l| match &l.kind {
            LiteralKind::Builtin(b) => Some(b.vars()),
            _ => None,
        })
        .flatten()
        .collect();
    let defined = definable_vars(rule, &bound);

    let check_var = |v: &str, span, what: &str, diags: &mut Vec<Diagnostic>| {
        if bound.contains(v) || defined.contains(v) {
            return;
        }
        if maxint > 0 && in_builtin.contains(v) {
            return;
        }
        let hint = if in_builtin.contains(v) {
            " (set #maxint to bound it)"
        } else {
            ""
        };
        diags.push(Diagnostic::at(
            span,
            format!("unsafe rule: variable `{v}` {what} does not occur in a positive standard body literal{hint}"),
        ));
    };

    let mut reported = BTreeSet::new();
    for v in rule.head.vars() {
        if reported.insert(v.to_string()) {
            check_var(v, rule.head.span, "in the head", &mut diags);
        }
    }
    for lit in &rule.body {
        match &lit.kind {
            LiteralKind::Atom(a) if lit.negated => {
                for v in a.vars().filter(|v| !v.starts_with('_')) {
                    if reported.insert(v.to_string()) {
                        check_var(v, a.span, "in a negative literal", &mut diags);
                    }
                }
            }
            LiteralKind::Atom(_) => {}
            LiteralKind::Builtin(b) => {
                for v in b.vars() {
                    if v.starts_with('_') {
                        diags.push(Diagnostic::at(
                            b.span,
                            "anonymous variable inside a built-in".to_string(),
                        ));
                    } else if reported.insert(v.to_string()) {
                        check_var(v, b.span, "in a built-in", &mut diags);
                    }
                }
            }
            LiteralKind::Aggregate(agg) => {
                let conj_vars: BTreeSet<&str> = agg.set.conj.iter().flat_map(Atom::vars).collect();
                for v in &agg.set.vars {
                    if !conj_vars.contains(v.as_str()) {
                        diags.push(Diagnostic::at(
                            agg.span,
                            format!("unsafe aggregate: variable `{v}` of the symbolic set does not occur in its conjunction"),
                        ));
                    }
                }
                if let Some(g) = agg.guard.as_var() {
                    if !bound.contains(g) {
                        diags.push(Diagnostic::at(
                            agg.span,
                            format!("unsafe aggregate: guard `{g}` is neither a constant nor a positively bound variable"),
                        ));
                    }
                }
                // variables shared with the rest of the rule are global and
                // must be bound outside the set
                let outside = outside_vars(rule, agg);
                for v in conj_vars.iter().filter(|v| outside.contains(**v)) {
                    if !bound.contains(v) && reported.insert(v.to_string()) {
                        check_var(v, agg.span, "shared with an aggregate", &mut diags);
                    }
                }
            }
        }
    }
    if diags.is_empty() {
        Ok(())
    } else {
        Err(diags)
    }
}

/// Variables occurring in the head or the body outside the given aggregate.
fn outside_vars<'a>(rule: &'a Rule, agg: &crate::ast::AggregateAtom) -> BTreeSet<&'a str> {
    let mut out: BTreeSet<&str> = rule.head.vars().collect();
    for lit in &rule.body {
        match &lit.kind {
            LiteralKind::Atom(a) => out.extend(a.vars()),
            LiteralKind::Builtin(b) => out.extend(b.vars()),
            LiteralKind::Aggregate(other) if std::ptr::eq(other, agg) => {}
            LiteralKind::Aggregate(other) => {
                out.extend(other.set.conj.iter().flat_map(Atom::vars));
                out.extend(other.guard.as_var());
            }
        }
    }
    out
}

/// Variables that get a value from bound ones through `X = t` equalities or
/// arithmetic outputs, without needing a range bound.
pub fn definable_vars<'a>(rule: &'a Rule, bound: &BTreeSet<&'a str>) -> BTreeSet<&'a str> {
    use crate::ast::BuiltinOp;
    let mut known: BTreeSet<&str> = bound.clone();
    loop {
        let mut changed = false;
        for lit in rule.body.iter().filter(|l| !l.negated) {
            let LiteralKind::Builtin(b) = &lit.kind else { continue };
            let is_known = |t: &crate::ast::Term, known: &BTreeSet<&str>| match t.as_var() {
                Some(v) => known.contains(v),
                None => true,
            };
            match b.op {
                BuiltinOp::Cmp(crate::ast::CmpOp::Eq) => {
                    let (l, r) = (&b.args[0], &b.args[1]);
                    if let (Some(v), true) = (l.as_var(), is_known(r, &known)) {
                        changed |= known.insert(v);
                    }
                    if let (Some(v), true) = (r.as_var(), is_known(l, &known)) {
                        changed |= known.insert(v);
                    }
                }
                BuiltinOp::Arith(_) => {
                    if is_known(&b.args[0], &known) && is_known(&b.args[1], &known) {
                        if let Some(v) = b.args[2].as_var() {
                            changed |= known.insert(v);
                        }
                    }
                }
                BuiltinOp::Cmp(_) => {}
            }
        }
        if !changed {
            break;
        }
    }
    known.retain(|v| !bound.contains(v));
    known
}

/// Arity check plus safety of every rule.
pub fn check_program(program: &Program) -> Result<(), Vec<Diagnostic>> {
    let mut diags = Vec::new();
    if let Err(d) = arity_check(program) {
        diags.extend(d);
    }
    for rule in &program.rules {
        if let Err(d) = safety_check(rule, program.maxint) {
            diags.extend(d);
        }
    }
    let mut reserved = BTreeSet::new();
    for atom in program.all_atoms() {
        let name = atom.predicate.as_str();
        if (name.starts_with(RESERVED_PREFIX) || name == RANGE_TABLE) && reserved.insert(name) {
            diags.push(Diagnostic::at(
                atom.span,
                format!("predicate name `{name}` is reserved for generated predicates"),
            ));
        }
    }
    for fact in &program.facts {
        if !fact.is_ground() {
            diags.push(Diagnostic::at(fact.span, format!("fact `{fact}` is not ground")));
        }
    }
    if diags.is_empty() {
        Ok(())
    } else {
        Err(diags)
    }
}
