use std::collections::{BTreeMap, BTreeSet};

use super::graph::DependencyGraph;
use super::standardize::AUX_PREFIX;
use super::stratify::stratify;
use crate::ast::*;

/// A goal atom: constants at bound positions, variables elsewhere.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Goal {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Goal {
    pub fn bound(&self) -> Vec<(usize, Value)> {
        self.args
            .iter()
            .enumerate()
            .filter_map(|(i, t)| t.as_value().map(|v| (i, v)))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Optimized {
    pub program: Program,
    /// Name of the seed predicate when the bound-goal rewrite applied.
    pub seeded: Option<String>,
}

/// Narrows auxiliary predicates and, for a bound goal, applies the seed
/// rewrite when it is sound. `frozen` lists predicates whose contents come
/// from outside the program (tables, CSV files); a goal among them is never
/// rewritten.
pub fn optimize(program: &Program, goal: Option<&Goal>, frozen: &BTreeSet<String>) -> Optimized {
    let mut program = narrow_aux(program);
    let mut seeded = None;
    if let Some(goal) = goal {
        if !frozen.contains(&goal.predicate) {
            if let Some((p, name)) = seed_rewrite(&program, goal) {
                program = p;
                seeded = Some(name);
            }
        }
    }
    Optimized { program, seeded }
}

fn var_occurrences(rule: &Rule) -> BTreeMap<&str, usize> {
    let mut n: BTreeMap<&str, usize> = BTreeMap::new();
    let mut vars: Vec<&str> = rule.head.vars().collect();
    for lit in &rule.body {
        match &lit.kind {
            LiteralKind::Atom(a) => vars.extend(a.vars()),
            LiteralKind::Builtin(b) => vars.extend(b.vars()),
            LiteralKind::Aggregate(a) => {
                vars.extend(a.set.vars.iter().map(String::as_str));
                vars.extend(a.set.conj.iter().flat_map(Atom::vars));
                vars.extend(a.guard.as_var());
            }
        }
    }
    for v in vars {
        *n.entry(v).or_insert(0) += 1;
    }
    n
}

/// Body occurrences of every predicate, as mutable references, in one rule.
fn body_atoms_mut(rule: &mut Rule) -> Vec<&mut Atom> {
    let mut out = Vec::new();
    for lit in &mut rule.body {
        match &mut lit.kind {
            LiteralKind::Atom(a) => out.push(a),
            LiteralKind::Aggregate(a) => out.extend(a.set.conj.iter_mut()),
            LiteralKind::Builtin(_) => {}
        }
    }
    out
}

fn body_atoms(rule: &Rule) -> Vec<&Atom> {
    let mut out = Vec::new();
    for lit in &rule.body {
        match &lit.kind {
            LiteralKind::Atom(a) => out.push(a),
            LiteralKind::Aggregate(a) => out.extend(a.set.conj.iter()),
            LiteralKind::Builtin(_) => {}
        }
    }
    out
}

/// Drops argument positions of auxiliary predicates that no rule reads: every
/// body occurrence has a variable there that occurs nowhere else in its rule.
pub fn narrow_aux(program: &Program) -> Program {
    let mut program = program.clone();
    let aux: BTreeSet<String> = program
        .idb_predicates()
        .into_iter()
        .filter(|p| p.starts_with(AUX_PREFIX))
        .map(str::to_string)
        .collect();
    for pred in aux {
        let arity = program.arity_of(&pred).unwrap_or(0);
        let mut droppable = vec![true; arity];
        let mut used = false;
        for rule in &program.rules {
            let occ = var_occurrences(rule);
            for a in body_atoms(rule).into_iter().filter(|a| a.predicate == pred) {
                used = true;
                for (k, t) in a.args.iter().enumerate() {
                    let single = t.as_var().is_some_and(|v| occ.get(v) == Some(&1));
                    droppable[k] &= single;
                }
            }
        }
        if !used || program.facts.iter().any(|f| f.predicate == pred) {
            continue;
        }
        if droppable.iter().all(|d| *d) && arity > 0 {
            droppable[0] = false;
        }
        if !droppable.iter().any(|d| *d) {
            continue;
        }
        let keep = |args: &mut Vec<Term>| {
            let mut k = 0;
            args.retain(|_| {
                k += 1;
                !droppable[k - 1]
            });
        };
        for rule in &mut program.rules {
            if rule.head.predicate == pred {
                keep(&mut rule.head.args);
            }
            for a in body_atoms_mut(rule) {
                if a.predicate == pred {
                    keep(&mut a.args);
                }
            }
        }
    }
    program
}

fn substitute_atom(atom: &mut Atom, var: &str, value: &Term) {
    for t in &mut atom.args {
        if t.as_var() == Some(var) {
            *t = value.clone();
        }
    }
}

fn substitute(rule: &mut Rule, var: &str, value: &Term) {
    substitute_atom(&mut rule.head, var, value);
    for lit in &mut rule.body {
        match &mut lit.kind {
            LiteralKind::Atom(a) => substitute_atom(a, var, value),
            LiteralKind::Builtin(b) => {
                for t in &mut b.args {
                    if t.as_var() == Some(var) {
                        *t = value.clone();
                    }
                }
            }
            LiteralKind::Aggregate(a) => {
                for c in &mut a.set.conj {
                    substitute_atom(c, var, value);
                }
                if a.guard.as_var() == Some(var) {
                    a.guard = value.clone();
                }
            }
        }
    }
}

fn in_symbolic_set_vars(rule: &Rule, var: &str) -> bool {
    rule.aggregates().any(|a| a.set.vars.iter().any(|v| v == var))
}

/// Positions of `goal` that every recursive rule passes through unchanged:
/// the head has a variable there and every recursive body occurrence has
/// the same variable at the same position.
fn invariant_positions(rules: &[&Rule], goal: &str, arity: usize) -> Vec<usize> {
    (0..arity)
        .filter(|&i| {
            rules.iter().all(|r| {
                let occurrences: Vec<&Atom> = body_atoms(r).into_iter().filter(|a| a.predicate == goal).collect();
                if occurrences.is_empty() {
                    return true;
                }
                let Some(v) = r.head.args[i].as_var() else { return false };
                !in_symbolic_set_vars(r, v) && occurrences.iter().all(|a| a.args[i].as_var() == Some(v))
            })
        })
        .collect()
}

/// Seed rewrite for a goal with bound arguments: the goal's rules are
/// specialised to the bound constants at invariant positions, those
/// positions are dropped into a fresh predicate, and the goal is rebuilt
/// from it with the constants put back.
pub fn seed_rewrite(program: &Program, goal: &Goal) -> Option<(Program, String)> {
    let bound = goal.bound();
    if bound.is_empty() {
        return None;
    }
    let g = goal.predicate.as_str();
    let defining: Vec<&Rule> = program.rules.iter().filter(|r| r.head.predicate == g).collect();
    if defining.is_empty() {
        return None;
    }
    let graph = DependencyGraph::build(program);
    let plan = stratify(program, &graph).ok()?;
    let comp = plan.component_for(g)?;
    if comp.predicates.len() != 1 {
        return None;
    }
    // nothing else may read the goal
    let gi = graph.node(g)?;
    if graph.edges.iter().any(|e| e.from == gi && e.to != gi) {
        return None;
    }
    let arity = goal.args.len();
    let invariant = invariant_positions(&defining, g, arity);
    let seeded: Vec<(usize, Value)> = bound.iter().filter(|(i, _)| invariant.contains(i)).cloned().collect();
    if seeded.is_empty() {
        return None;
    }
    let dropped: BTreeSet<usize> = seeded.iter().map(|(i, _)| *i).collect();
    let name = format!("{AUX_PREFIX}{g}__reached");
    let project = |args: &[Term]| -> Vec<Term> {
        args.iter()
            .enumerate()
            .filter(|(k, _)| !dropped.contains(k))
            .map(|(_, t)| t.clone())
            .collect()
    };

    let mut out = Program {
        rules: Vec::new(),
        facts: Vec::new(),
        maxint: program.maxint,
    };
    for f in &program.facts {
        if f.predicate != g {
            out.facts.push(f.clone());
        } else if seeded.iter().all(|(i, v)| f.args[*i].as_value().as_ref() == Some(v)) {
            let mut a = Atom::new(&name, project(&f.args));
            a.span = f.span;
            out.facts.push(a);
        }
    }
    for rule in &program.rules {
        if rule.head.predicate != g {
            out.rules.push(rule.clone());
            continue;
        }
        let mut r = rule.clone();
        let mut consistent = true;
        for (i, v) in &seeded {
            let value = Term::from(v.clone());
            match r.head.args[*i].clone() {
                Term::Var(var) => substitute(&mut r, &var, &value),
                c if c == value => {}
                _ => consistent = false,
            }
        }
        if !consistent {
            continue;
        }
        r.head = Atom {
            predicate: name.clone(),
            args: project(&r.head.args),
            span: r.head.span,
        };
        for a in body_atoms_mut(&mut r) {
            if a.predicate == g {
                a.predicate = name.clone();
                a.args = project(&a.args);
            }
        }
        out.rules.push(r);
    }
    // g(consts, free...) :- reached(...), with bound non-invariant constants
    // filtering the seed's columns
    let mut head_args = Vec::with_capacity(arity);
    let mut body_args = Vec::new();
    for (k, t) in goal.args.iter().enumerate() {
        if let Some((_, v)) = seeded.iter().find(|(i, _)| *i == k) {
            head_args.push(Term::from(v.clone()));
            continue;
        }
        let term = match t {
            Term::Var(_) => Term::var(format!("V{k}")),
            c => c.clone(),
        };
        head_args.push(term.clone());
        body_args.push(term);
    }
    out.rules.push(Rule::new(
        Atom::new(g, head_args),
        vec![Literal::pos(Atom::new(&name, body_args))],
    ));
    if let Some(last) = out.rules.last_mut() {
        last.span = defining.last().map(|r| r.span).unwrap_or_default();
    }
    Some((out, name))
}
