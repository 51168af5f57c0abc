//! A naive bottom-up evaluator working directly on the program text, used
//! as the reference the SQL engine is checked against.
//!
//! It shares only the syntax tree with the engine: stratification,
//! rule evaluation and aggregate semantics are computed independently.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

pub mod sqlnorm;

use sqlog_core::ast::{
    AggregateAtom, AggregateFunc, ArithOp, Atom, BuiltinAtom, BuiltinOp, CmpOp, LiteralKind, Program, Rule, Term, Value,
};

pub type Tuple = Vec<Value>;
pub type Relation = BTreeSet<Tuple>;
pub type Model = BTreeMap<String, Relation>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleError {
    NotStratified(String),
    Unbound(String),
    Type(String),
}

impl fmt::Display for OracleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleError::NotStratified(p) => write!(f, "not stratified at `{p}`"),
            OracleError::Unbound(m) => write!(f, "unbound variable: {m}"),
            OracleError::Type(m) => write!(f, "type error: {m}"),
        }
    }
}

impl std::error::Error for OracleError {}

type Result<T> = std::result::Result<T, OracleError>;

/// Stratum of every predicate, by relaxation: a head is at least as high
/// as its positive body predicates and strictly above negated or
/// aggregated ones.
pub fn strata(program: &Program) -> Result<BTreeMap<String, usize>> {
    let mut level: BTreeMap<String, usize> = BTreeMap::new();
    for a in program.all_atoms() {
        level.entry(a.predicate.clone()).or_insert(0);
    }
    let limit = level.len() + 1;
    loop {
        let mut changed = false;
        for r in &program.rules {
            let mut need = level[&r.head.predicate];
            for lit in &r.body {
                match &lit.kind {
                    LiteralKind::Atom(a) if lit.negated => need = need.max(level[&a.predicate] + 1),
                    LiteralKind::Atom(a) => need = need.max(level[&a.predicate]),
                    LiteralKind::Aggregate(g) => {
                        for a in &g.set.conj {
                            need = need.max(level[&a.predicate] + 1);
                        }
                    }
                    LiteralKind::Builtin(_) => {}
                }
            }
            if need > level[&r.head.predicate] {
                if need > limit {
                    return Err(OracleError::NotStratified(r.head.predicate.clone()));
                }
                level.insert(r.head.predicate.clone(), need);
                changed = true;
            }
        }
        if !changed {
            return Ok(level);
        }
    }
}

/// Evaluates the program from its own facts.
pub fn evaluate(program: &Program) -> Result<Model> {
    evaluate_with(program, &Model::new())
}

/// Evaluates the program with extra input relations.
pub fn evaluate_with(program: &Program, input: &Model) -> Result<Model> {
    let level = strata(program)?;
    let mut model: Model = level.keys().map(|p| (p.clone(), Relation::new())).collect();
    for (p, rel) in input {
        model.entry(p.clone()).or_default().extend(rel.iter().cloned());
    }
    for f in &program.facts {
        let t = f.args.iter().map(|a| a.as_value().expect("ground fact")).collect();
        model.entry(f.predicate.clone()).or_default().insert(t);
    }
    let top = level.values().copied().max().unwrap_or(0);
    for s in 0..=top {
        let rules: Vec<&Rule> = program
            .rules
            .iter()
            .filter(|r| level[&r.head.predicate] == s)
            .collect();
        loop {
            let mut new: Vec<(String, Tuple)> = Vec::new();
            let mut index = Index::default();
            for r in &rules {
                for t in fire(r, &model, &mut index, program.maxint)? {
                    if !model[&r.head.predicate].contains(&t) {
                        new.push((r.head.predicate.clone(), t));
                    }
                }
            }
            if new.is_empty() {
                break;
            }
            for (p, t) in new {
                model.get_mut(&p).unwrap().insert(t);
            }
        }
    }
    Ok(model)
}

/// Hash indexes over the model, built on demand for one round.
#[derive(Default)]
struct Index {
    by: HashMap<(String, Vec<usize>), HashMap<Vec<Value>, Vec<Tuple>>>,
}

impl Index {
    fn lookup<'m>(&'m mut self, model: &Model, pred: &str, positions: &[usize], key: &[Value]) -> &'m [Tuple] {
        let map = self.by.entry((pred.to_string(), positions.to_vec())).or_insert_with(|| {
            let mut m: HashMap<Vec<Value>, Vec<Tuple>> = HashMap::new();
            for t in model.get(pred).into_iter().flatten() {
                m.entry(positions.iter().map(|&i| t[i].clone()).collect()).or_default().push(t.clone());
            }
            m
        });
        map.get(key).map(Vec::as_slice).unwrap_or(&[])
    }
}

type Subst = BTreeMap<String, Value>;

fn value_of(t: &Term, s: &Subst) -> Option<Value> {
    match t {
        Term::Var(v) => s.get(v).cloned(),
        c => c.as_value(),
    }
}

/// Extends `s` so that `atom` matches `tuple`, if possible.
fn unify(atom: &Atom, tuple: &[Value], s: &Subst) -> Option<Subst> {
    let mut out = s.clone();
    for (t, v) in atom.args.iter().zip(tuple) {
        match t {
            Term::Var(x) => match out.get(x) {
                Some(bound) if bound != v => return None,
                Some(_) => {}
                None => {
                    out.insert(x.clone(), v.clone());
                }
            },
            c => {
                if c.as_value().as_ref() != Some(v) {
                    return None;
                }
            }
        }
    }
    Some(out)
}

fn matches(model: &Model, index: &mut Index, atom: &Atom, s: &Subst) -> Vec<Subst> {
    let mut positions = Vec::new();
    let mut key = Vec::new();
    for (i, t) in atom.args.iter().enumerate() {
        if let Some(v) = value_of(t, s) {
            positions.push(i);
            key.push(v);
        }
    }
    index
        .lookup(model, &atom.predicate, &positions, &key)
        .iter()
        .filter_map(|t| unify(atom, t, s))
        .collect()
}

fn int(v: &Value, ctx: &dyn fmt::Display) -> Result<i64> {
    match v {
        Value::Int(i) => Ok(*i),
        Value::Str(s) => Err(OracleError::Type(format!("`{s}` used as an integer in {ctx}"))),
    }
}

enum Step {
    Filter(bool),
    Assign(String, Value),
}

/// Evaluates a built-in under `s` when enough of it is known.
fn builtin_step(b: &BuiltinAtom, s: &Subst, maxint: u64) -> Result<Option<Step>> {
    let vals: Vec<Option<Value>> = b.args.iter().map(|t| value_of(t, s)).collect();
    match b.op {
        BuiltinOp::Cmp(op) => match (&vals[0], &vals[1]) {
            (Some(l), Some(r)) => Ok(Some(Step::Filter(compare(op, l, r)))),
            (None, Some(r)) if op == CmpOp::Eq => Ok(Some(Step::Assign(b.args[0].as_var().unwrap().into(), r.clone()))),
            (Some(l), None) if op == CmpOp::Eq => Ok(Some(Step::Assign(b.args[1].as_var().unwrap().into(), l.clone()))),
            _ => Ok(None),
        },
        BuiltinOp::Arith(op) => {
            let (Some(a), Some(c)) = (&vals[0], &vals[1]) else { return Ok(None) };
            let (a, c) = (int(a, b)?, int(c, b)?);
            let Some(r) = apply(op, a, c) else { return Ok(Some(Step::Filter(false))) };
            if maxint > 0 && r > maxint as i64 {
                return Ok(Some(Step::Filter(false)));
            }
            match &vals[2] {
                Some(v) => Ok(Some(Step::Filter(*v == Value::Int(r)))),
                None => Ok(Some(Step::Assign(b.args[2].as_var().unwrap().into(), Value::Int(r)))),
            }
        }
    }
}

fn apply(op: ArithOp, a: i64, b: i64) -> Option<i64> {
    match op {
        ArithOp::Add => a.checked_add(b),
        ArithOp::Mul => a.checked_mul(b),
    }
}

fn compare(op: CmpOp, l: &Value, r: &Value) -> bool {
    let ord = l.cmp(r);
    match op {
        CmpOp::Eq => ord.is_eq(),
        CmpOp::Ne => ord.is_ne(),
        CmpOp::Lt => ord.is_lt(),
        CmpOp::Le => ord.is_le(),
        CmpOp::Gt => ord.is_gt(),
        CmpOp::Ge => ord.is_ge(),
    }
}

/// Truth of an aggregate literal under `s`; every global variable of its
/// conjunction must be bound.
fn aggregate_holds(model: &Model, index: &mut Index, agg: &AggregateAtom, s: &Subst) -> Result<bool> {
    let mut partial = vec![s.clone()];
    for a in &agg.set.conj {
        let mut next = Vec::new();
        for p in &partial {
            next.extend(matches(model, index, a, p));
        }
        partial = next;
    }
    let set: BTreeSet<Vec<Value>> = partial
        .iter()
        .map(|m| agg.set.vars.iter().map(|v| m[v].clone()).collect())
        .collect();
    let guard = value_of(&agg.guard, s).ok_or_else(|| OracleError::Unbound(format!("guard of {agg}")))?;
    let firsts = || set.iter().map(|t| t[0].clone());
    Ok(match agg.func {
        AggregateFunc::Count => compare(agg.cmp, &Value::Int(set.len() as i64), &guard),
        AggregateFunc::Sum => {
            let mut total: i64 = 0;
            for v in firsts() {
                total += int(&v, agg)?;
            }
            compare(agg.cmp, &Value::Int(total), &guard)
        }
        AggregateFunc::Min => match firsts().min() {
            Some(m) => compare(agg.cmp, &m, &guard),
            None => false,
        },
        AggregateFunc::Max => match firsts().max() {
            Some(m) => compare(agg.cmp, &m, &guard),
            None => false,
        },
        AggregateFunc::Avg => {
            if set.is_empty() {
                false
            } else {
                // avg op g  <=>  sum op g * n, n > 0
                let mut total: i128 = 0;
                for v in firsts() {
                    total += int(&v, agg)? as i128;
                }
                let g = int(&guard, agg)? as i128;
                let n = set.len() as i128;
                let (l, r) = (total, g * n);
                match agg.cmp {
                    CmpOp::Eq => l == r,
                    CmpOp::Ne => l != r,
                    CmpOp::Lt => l < r,
                    CmpOp::Le => l <= r,
                    CmpOp::Gt => l > r,
                    CmpOp::Ge => l >= r,
                }
            }
        }
    })
}

fn vars_known(vars: &[&str], s: &Subst) -> bool {
    vars.iter().all(|v| s.contains_key(*v))
}

/// Every head tuple the rule derives from `model`.
fn fire(rule: &Rule, model: &Model, index: &mut Index, maxint: u64) -> Result<Vec<Tuple>> {
    // variables each aggregate needs bound: those it shares with the rest
    let global = rule.global_vars();
    let mut out = Vec::new();
    let mut stack: Vec<(Subst, Vec<bool>)> = vec![(Subst::new(), vec![false; rule.body.len()])];
    while let Some((s, done)) = stack.pop() {
        // pick the next literal: something that filters or assigns, else the
        // first positive atom, else a range over [0, maxint]
        let mut chosen = None;
        for (i, lit) in rule.body.iter().enumerate() {
            if done[i] {
                continue;
            }
            let ready = match &lit.kind {
                LiteralKind::Builtin(b) => builtin_step(b, &s, maxint)?.is_some(),
                LiteralKind::Atom(a) if lit.negated => {
                    let vs: Vec<&str> = a.vars().filter(|v| !v.starts_with('_')).collect();
                    vars_known(&vs, &s)
                }
                LiteralKind::Aggregate(g) => {
                    let mut vs: Vec<&str> = g.set.conj.iter().flat_map(Atom::vars).filter(|v| global.contains(v)).collect();
                    vs.extend(g.guard.as_var());
                    vars_known(&vs, &s)
                }
                LiteralKind::Atom(_) => false,
            };
            if ready {
                chosen = Some(i);
                break;
            }
        }
        if chosen.is_none() {
            chosen = rule
                .body
                .iter()
                .enumerate()
                .find(|(i, l)| !done[*i] && l.positive_atom().is_some())
                .map(|(i, _)| i);
        }
        let Some(i) = chosen else {
            if done.iter().all(|d| *d) {
                let head = rule
                    .head
                    .args
                    .iter()
                    .map(|t| value_of(t, &s).ok_or_else(|| OracleError::Unbound(format!("head of {rule}"))))
                    .collect::<Result<Tuple>>()?;
                out.push(head);
                continue;
            }
            // only built-ins with unbound variables remain
            let var = rule
                .body
                .iter()
                .enumerate()
                .filter(|(i, _)| !done[*i])
                .find_map(|(_, l)| match &l.kind {
                    LiteralKind::Builtin(b) => b.vars().find(|v| !s.contains_key(*v)).map(str::to_string),
                    _ => None,
                })
                .ok_or_else(|| OracleError::Unbound(format!("in {rule}")))?;
            if maxint == 0 {
                return Err(OracleError::Unbound(format!("`{var}` in {rule}")));
            }
            for n in 0..=maxint as i64 {
                let mut next = s.clone();
                next.insert(var.clone(), Value::Int(n));
                stack.push((next, done.clone()));
            }
            continue;
        };
        let mut done = done;
        done[i] = true;
        let lit = &rule.body[i];
        match &lit.kind {
            LiteralKind::Builtin(b) => match builtin_step(b, &s, maxint)?.unwrap() {
                Step::Filter(true) => stack.push((s, done)),
                Step::Filter(false) => {}
                Step::Assign(v, val) => {
                    let mut next = s;
                    next.insert(v, val);
                    stack.push((next, done));
                }
            },
            LiteralKind::Atom(a) if lit.negated => {
                if matches(model, index, a, &s).is_empty() {
                    stack.push((s, done));
                }
            }
            LiteralKind::Atom(a) => {
                for next in matches(model, index, a, &s) {
                    stack.push((next, done.clone()));
                }
            }
            LiteralKind::Aggregate(g) => {
                if aggregate_holds(model, index, g, &s)? != lit.negated {
                    stack.push((s, done));
                }
            }
        }
    }
    Ok(out)
}
