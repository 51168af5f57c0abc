use std::collections::{BTreeSet, HashMap};

use super::*;
use crate::analysis::standardize::shared_vars;
use crate::ast::{AggregateAtom, AggregateFunc, ArithOp, Atom, BuiltinAtom, BuiltinOp, LiteralKind, Program, Rule, Term, Value};
use crate::check::RANGE_TABLE;
use crate::error::{Error, Result};

/// The view computing one aggregate literal, grouped by the variables the
/// aggregate shares with the rest of its rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregateView {
    pub name: String,
    pub func: AggregateFunc,
    /// Shared variables, in the order of their columns.
    pub keys: Vec<String>,
    /// View columns: one per key, then the value column(s).
    pub columns: Vec<String>,
    pub value_type: SqlType,
    pub statement: Statement,
}

impl AggregateView {
    fn value_column(&self) -> &str {
        &self.columns[self.keys.len()]
    }

    /// Second value column of an average (the count).
    fn count_column(&self) -> &str {
        &self.columns[self.keys.len() + 1]
    }
}

/// Translates rules of one program under fixed bindings.
pub struct Translator<'a> {
    pub program: &'a Program,
    pub bindings: &'a Bindings,
    pub profile: BackendProfile,
    /// Views keyed by (rule index, body literal index).
    views: HashMap<(usize, usize), AggregateView>,
}

/// Which table each positive body occurrence reads.
pub(crate) type Chooser<'c> = &'c dyn Fn(usize, &Atom) -> String;

struct Ctx {
    used: BTreeSet<String>,
    from: Vec<FromItem>,
    conds: Vec<Condition>,
    vars: HashMap<String, (Expr, SqlType)>,
}

impl Ctx {
    fn new() -> Self {
        Ctx {
            used: BTreeSet::new(),
            from: Vec::new(),
            conds: Vec::new(),
            vars: HashMap::new(),
        }
    }

    /// Allocates a qualifier: the table name itself the first time, then
    /// `table_1`, `table_2`, ...
    fn qualifier_for(&mut self, table: &str) -> (String, Option<String>) {
        if self.used.insert(table.to_ascii_lowercase()) {
            return (table.to_string(), None);
        }
        let mut k = 1;
        loop {
            let alias = format!("{table}_{k}");
            if self.used.insert(alias.to_ascii_lowercase()) {
                return (alias.clone(), Some(alias));
            }
            k += 1;
        }
    }

    fn add_from(&mut self, table: &str) -> String {
        let (q, alias) = self.qualifier_for(table);
        self.from.push(FromItem {
            table: table.to_string(),
            alias,
        });
        q
    }

    fn sub_from(&mut self, table: &str) -> (FromItem, String) {
        let (q, alias) = self.qualifier_for(table);
        (
            FromItem {
                table: table.to_string(),
                alias,
            },
            q,
        )
    }

    /// Binds or constrains the columns of `qualifier` against `args`.
    fn join(&mut self, qualifier: &str, args: &[Term], columns: &[String], types: &[SqlType]) {
        for (i, arg) in args.iter().enumerate() {
            let col = Expr::col(qualifier, &columns[i]);
            match arg {
                Term::Var(v) => match self.vars.get(v) {
                    Some((e, _)) => self.conds.push(Condition::Cmp(e.clone(), CmpOp::Eq, col)),
                    None => {
                        self.vars.insert(v.clone(), (col, types[i]));
                    }
                },
                c => {
                    let value = c.as_value().expect("constant");
                    self.conds.push(Condition::Cmp(col, CmpOp::Eq, Expr::typed(&value, types[i])));
                }
            }
        }
    }

    fn known(&self, t: &Term) -> bool {
        match t.as_var() {
            Some(v) => self.vars.contains_key(v),
            None => true,
        }
    }

    /// Expression and type of a known term; constants take `hint` when given.
    fn term(&self, t: &Term, hint: Option<SqlType>) -> (Expr, SqlType) {
        match t {
            Term::Var(v) => self.vars[v].clone(),
            Term::Int(i) => match hint {
                Some(ty) => (Expr::typed(&Value::Int(*i), ty), ty),
                None => (Expr::Int(*i), SqlType::Integer),
            },
            Term::Str(s) => (Expr::Str(s.clone()), SqlType::DEFAULT_VARCHAR),
        }
    }

    fn type_of(&self, t: &Term) -> Option<SqlType> {
        t.as_var().and_then(|v| self.vars.get(v)).map(|(_, ty)| *ty)
    }

    /// A comparison between two known terms, typing constants by the other side.
    fn compare(&self, l: &Term, op: CmpOp, r: &Term) -> Condition {
        let (le, _) = self.term(l, self.type_of(r));
        let (re, _) = self.term(r, self.type_of(l));
        Condition::Cmp(le, op, re)
    }

    fn arith(&self, b: &BuiltinAtom, op: ArithOp) -> Result<Expr> {
        let mut operands = Vec::new();
        for t in &b.args[..2] {
            let (e, ty) = self.term(t, Some(SqlType::Integer));
            if !ty.is_integer() {
                return Err(Error::Translate(format!("arithmetic over a non-integer value in `{b}`")));
            }
            operands.push(Box::new(e));
        }
        let (a, c) = (operands.remove(0), operands.remove(0));
        Ok(match op {
            ArithOp::Add => Expr::Add(a, c),
            ArithOp::Mul => Expr::Mul(a, c),
        })
    }
}

impl<'a> Translator<'a> {
    pub fn new(program: &'a Program, bindings: &'a Bindings, profile: BackendProfile) -> Result<Self> {
        let mut t = Translator {
            program,
            bindings,
            profile,
            views: HashMap::new(),
        };
        t.plan_views()?;
        Ok(t)
    }

    pub fn binding(&self, predicate: &str) -> Result<&RelationBinding> {
        self.bindings
            .get(predicate)
            .ok_or_else(|| Error::Translate(format!("no table bound to predicate `{predicate}`")))
    }

    /// Aggregate views used by rule `rule`, in body order.
    pub fn views_of(&self, rule: usize) -> Vec<&AggregateView> {
        let mut keys: Vec<&(usize, usize)> = self.views.keys().filter(|(r, _)| *r == rule).collect();
        keys.sort();
        keys.into_iter().map(|k| &self.views[k]).collect()
    }

    fn plan_views(&mut self) -> Result<()> {
        let mut names: BTreeSet<String> = self.bindings.iter().map(|b| b.table.to_ascii_lowercase()).collect();
        for (ri, rule) in self.program.rules.iter().enumerate() {
            for (li, lit) in rule.body.iter().enumerate() {
                let LiteralKind::Aggregate(agg) = &lit.kind else { continue };
                let [atom] = agg.set.conj.as_slice() else {
                    return Err(Error::Translate(format!("aggregate `{agg}` is not over a single atom")));
                };
                let b = self.binding(&atom.predicate)?;
                let base = format!("{}_supp", b.table);
                let mut name = base.clone();
                let mut k = 1;
                while !names.insert(name.to_ascii_lowercase()) {
                    k += 1;
                    name = format!("{base}_{k}");
                }
                let view = self.aggregate_view(rule, li, agg, atom, b, name)?;
                self.views.insert((ri, li), view);
            }
        }
        Ok(())
    }

    fn aggregate_view(
        &self,
        rule: &Rule,
        index: usize,
        agg: &AggregateAtom,
        atom: &Atom,
        b: &RelationBinding,
        name: String,
    ) -> Result<AggregateView> {
        let position = |v: &str| atom.args.iter().position(|t| t.as_var() == Some(v));
        let mut keys: Vec<(String, usize)> = Vec::new();
        for v in shared_vars(rule, index) {
            let pos = position(&v).ok_or_else(|| Error::Translate(format!("aggregate `{agg}` is not standard")))?;
            keys.push((v, pos));
        }
        keys.sort_by_key(|(_, p)| *p);
        let q = b.table.clone();
        let mut items: Vec<SelectItem> = Vec::new();
        let mut group_by = Vec::new();
        for (_, pos) in &keys {
            let e = Expr::col(&q, &b.columns[*pos]);
            group_by.push(e.clone());
            items.push(SelectItem { expr: e, alias: None });
        }
        let first = agg.set.vars.first().and_then(|v| position(v));
        let value = |f: AggFn| -> Result<Expr> {
            let pos = first.ok_or_else(|| Error::Translate(format!("aggregate `{agg}` has no value variable")))?;
            Ok(Expr::Agg(f, Some(Box::new(Expr::col(&q, &b.columns[pos])))))
        };
        let value_type = match agg.func {
            AggregateFunc::Min | AggregateFunc::Max => first.map(|p| b.types[p]).unwrap_or(SqlType::Integer),
            _ => SqlType::Integer,
        };
        match agg.func {
            AggregateFunc::Count => items.push(SelectItem {
                expr: Expr::Agg(AggFn::Count, None),
                alias: None,
            }),
            AggregateFunc::Sum | AggregateFunc::Avg => {
                items.push(SelectItem {
                    expr: value(AggFn::Sum)?,
                    alias: None,
                });
                if agg.func == AggregateFunc::Avg {
                    items.push(SelectItem {
                        expr: Expr::Agg(AggFn::Count, None),
                        alias: None,
                    });
                }
            }
            AggregateFunc::Min => items.push(SelectItem {
                expr: value(AggFn::Min)?,
                alias: None,
            }),
            AggregateFunc::Max => items.push(SelectItem {
                expr: value(AggFn::Max)?,
                alias: None,
            }),
        }
        if matches!(agg.func, AggregateFunc::Sum | AggregateFunc::Avg) {
            if let Some(p) = first {
                if !b.types[p].is_integer() {
                    return Err(Error::Translate(format!("{} over a non-integer column in `{agg}`", agg.func.keyword())));
                }
            }
        }
        let columns = RelationBinding::default_columns(items.len());
        for (item, c) in items.iter_mut().zip(&columns) {
            item.alias = Some(c.clone());
        }
        let having = if keys.is_empty() {
            vec![Condition::Cmp(Expr::Agg(AggFn::Count, None), CmpOp::Gt, Expr::Int(0))]
        } else {
            Vec::new()
        };
        let select = Select {
            items,
            from: vec![FromItem {
                table: b.table.clone(),
                alias: None,
            }],
            group_by,
            having,
            ..Default::default()
        };
        Ok(AggregateView {
            statement: Statement::CreateView {
                name: name.clone(),
                columns: columns.clone(),
                query: Query::Select(select),
            },
            name,
            func: agg.func,
            keys: keys.into_iter().map(|(v, _)| v).collect(),
            columns,
            value_type,
        })
    }

    /// Whether an aggregate literal is evaluated by joining its view (as
    /// opposed to a scalar subquery defaulting to zero).
    fn joins_view(agg: &AggregateAtom, negated: bool) -> bool {
        if negated {
            return false;
        }
        match agg.func {
            AggregateFunc::Count | AggregateFunc::Sum => match &agg.guard {
                Term::Int(c) => !agg.cmp.holds(&0, c),
                Term::Str(_) => true,
                Term::Var(_) => false,
            },
            _ => true,
        }
    }

    /// The SELECT computing the head tuples of `rule`; `choose` names the
    /// table read by each positive body occurrence (numbered from 0).
    pub fn select(&self, rule_index: usize, choose: Chooser<'_>) -> Result<Select> {
        let rule = &self.program.rules[rule_index];
        let mut ctx = Ctx::new();
        let mut joined: Vec<(usize, String)> = Vec::new();

        let mut occurrence = 0;
        for (li, lit) in rule.body.iter().enumerate() {
            match &lit.kind {
                LiteralKind::Atom(a) if !lit.negated => {
                    let b = self.binding(&a.predicate)?;
                    let table = choose(occurrence, a);
                    occurrence += 1;
                    let q = ctx.add_from(&table);
                    if !b.is_placeholder() {
                        ctx.join(&q, &a.args, &b.columns, &b.types);
                    }
                }
                LiteralKind::Aggregate(agg) if Self::joins_view(agg, lit.negated) => {
                    let view = &self.views[&(rule_index, li)];
                    let q = ctx.add_from(&view.name);
                    let args: Vec<Term> = view.keys.iter().map(Term::var).collect();
                    let types: Vec<SqlType> = view.keys.iter().map(|k| key_type(self, agg, k)).collect();
                    ctx.join(&q, &args, &view.columns, &types);
                    joined.push((li, q));
                }
                _ => {}
            }
        }

        // built-ins: definitions first, then range bindings for what is left
        let builtins: Vec<&BuiltinAtom> = rule
            .body
            .iter()
            .filter_map(|l| match &l.kind {
                LiteralKind::Builtin(b) => Some(b),
                _ => None,
            })
            .collect();
        let mut consumed = vec![false; builtins.len()];
        loop {
            loop {
                let mut changed = false;
                for (i, b) in builtins.iter().enumerate() {
                    if consumed[i] {
                        continue;
                    }
                    match b.op {
                        BuiltinOp::Cmp(CmpOp::Eq) => {
                            let (l, r) = (&b.args[0], &b.args[1]);
                            let target = match (ctx.known(l), ctx.known(r)) {
                                (false, true) => Some((l, r)),
                                (true, false) => Some((r, l)),
                                _ => None,
                            };
                            if let Some((var, src)) = target {
                                let def = ctx.term(src, None);
                                ctx.vars.insert(var.as_var().unwrap().to_string(), def);
                                consumed[i] = true;
                                changed = true;
                            }
                        }
                        BuiltinOp::Arith(op) => {
                            if ctx.known(&b.args[0]) && ctx.known(&b.args[1]) && !ctx.known(&b.args[2]) {
                                let e = ctx.arith(b, op)?;
                                ctx.vars
                                    .insert(b.args[2].as_var().unwrap().to_string(), (e, SqlType::Integer));
                                consumed[i] = true;
                                changed = true;
                            }
                        }
                        BuiltinOp::Cmp(_) => {}
                    }
                }
                if !changed {
                    break;
                }
            }
            let unknown = builtins
                .iter()
                .flat_map(|b| b.args.iter())
                .find(|t| !ctx.known(t))
                .and_then(Term::as_var)
                .map(str::to_string);
            let Some(v) = unknown else { break };
            if self.program.maxint == 0 {
                return Err(Error::Translate(format!(
                    "variable `{v}` of rule `{rule}` is not bound (set #maxint to bound it)"
                )));
            }
            let q = ctx.add_from(RANGE_TABLE);
            ctx.vars.insert(v, (Expr::col(q, "att_1"), SqlType::Integer));
        }

        for (i, b) in builtins.iter().enumerate() {
            match b.op {
                BuiltinOp::Cmp(op) => {
                    if consumed[i] || (op == CmpOp::Eq && b.args[0] == b.args[1] && b.args[0].as_var().is_some()) {
                        continue;
                    }
                    let c = ctx.compare(&b.args[0], op, &b.args[1]);
                    ctx.conds.push(c);
                }
                BuiltinOp::Arith(op) => {
                    let e = ctx.arith(b, op)?;
                    if !consumed[i] {
                        let (r, ty) = ctx.term(&b.args[2], Some(SqlType::Integer));
                        if !ty.is_integer() {
                            return Err(Error::Translate(format!("arithmetic over a non-integer value in `{b}`")));
                        }
                        ctx.conds.push(Condition::Cmp(e.clone(), CmpOp::Eq, r));
                    }
                    if self.program.maxint > 0 {
                        ctx.conds
                            .push(Condition::Cmp(e, CmpOp::Le, Expr::Int(self.program.maxint as i64)));
                    }
                }
            }
        }

        for (li, lit) in rule.body.iter().enumerate() {
            match &lit.kind {
                LiteralKind::Atom(a) if lit.negated => {
                    let c = self.negated_atom(&mut ctx, a)?;
                    ctx.conds.push(c);
                }
                LiteralKind::Aggregate(agg) => {
                    let view = &self.views[&(rule_index, li)];
                    if let Some((_, q)) = joined.iter().find(|(l, _)| *l == li) {
                        let c = guard_condition(&ctx, view, q, agg, agg.cmp);
                        ctx.conds.push(c);
                    } else {
                        let c = self.aggregate_subquery(&mut ctx, view, agg, lit.negated);
                        ctx.conds.push(c);
                    }
                }
                _ => {}
            }
        }

        let head = self.binding(&rule.head.predicate)?;
        let mut items = Vec::new();
        if head.is_placeholder() {
            items.push(SelectItem {
                expr: Expr::Int(1),
                alias: Some(head.columns[0].clone()),
            });
        }
        for (i, arg) in rule.head.args.iter().enumerate() {
            let expr = match arg {
                Term::Var(v) => ctx
                    .vars
                    .get(v)
                    .map(|(e, _)| e.clone())
                    .ok_or_else(|| Error::Translate(format!("head variable `{v}` of `{rule}` is not bound")))?,
                c => Expr::typed(&c.as_value().unwrap(), head.types[i]),
            };
            items.push(SelectItem {
                expr,
                alias: Some(head.columns[i].clone()),
            });
        }
        Ok(Select {
            distinct: false,
            items,
            from: ctx.from,
            conditions: ctx.conds,
            group_by: Vec::new(),
            having: Vec::new(),
        })
    }

    fn negated_atom(&self, ctx: &mut Ctx, a: &Atom) -> Result<Condition> {
        let b = self.binding(&a.predicate)?;
        let (item, q) = ctx.sub_from(&b.table);
        let mut lhs = Vec::new();
        let mut cols = Vec::new();
        let mut conds = Vec::new();
        if !b.is_placeholder() {
            for (i, arg) in a.args.iter().enumerate() {
                let col = Expr::col(&q, &b.columns[i]);
                match arg {
                    Term::Var(v) => match ctx.vars.get(v) {
                        Some((e, _)) => {
                            lhs.push(e.clone());
                            cols.push(col);
                        }
                        None if arg.is_anonymous() => {}
                        None => return Err(Error::Translate(format!("variable `{v}` of `not {a}` is not bound"))),
                    },
                    c => conds.push(Condition::Cmp(
                        col,
                        CmpOp::Eq,
                        Expr::typed(&c.as_value().unwrap(), b.types[i]),
                    )),
                }
            }
        }
        let mut sub = Select {
            from: vec![item],
            conditions: conds,
            ..Default::default()
        };
        if lhs.is_empty() {
            sub.items = vec![SelectItem {
                expr: Expr::Int(1),
                alias: None,
            }];
            return Ok(Condition::NotExists(Box::new(sub)));
        }
        sub.items = cols.into_iter().map(|expr| SelectItem { expr, alias: None }).collect();
        Ok(Condition::NotIn(lhs, Box::new(sub)))
    }

    fn aggregate_subquery(&self, ctx: &mut Ctx, view: &AggregateView, agg: &AggregateAtom, negated: bool) -> Condition {
        let (item, q) = ctx.sub_from(&view.name);
        let mut conds: Vec<Condition> = view
            .keys
            .iter()
            .enumerate()
            .map(|(i, k)| Condition::Cmp(Expr::col(&q, &view.columns[i]), CmpOp::Eq, ctx.vars[k].0.clone()))
            .collect();
        match agg.func {
            AggregateFunc::Count | AggregateFunc::Sum => {
                let op = if negated { agg.cmp.negate() } else { agg.cmp };
                let sub = Select {
                    items: vec![SelectItem {
                        expr: Expr::col(&q, view.value_column()),
                        alias: None,
                    }],
                    from: vec![item],
                    conditions: conds,
                    ..Default::default()
                };
                let value = Expr::Coalesce(Box::new(Expr::Scalar(Box::new(sub))), Box::new(Expr::Int(0)));
                let (g, _) = ctx.term(&agg.guard, Some(SqlType::Integer));
                Condition::Cmp(value, op, g)
            }
            _ => {
                conds.push(guard_condition(ctx, view, &q, agg, agg.cmp));
                Condition::NotExists(Box::new(Select {
                    items: vec![SelectItem {
                        expr: Expr::Int(1),
                        alias: None,
                    }],
                    from: vec![item],
                    conditions: conds,
                    ..Default::default()
                }))
            }
        }
    }
}

fn key_type(t: &Translator<'_>, agg: &AggregateAtom, key: &str) -> SqlType {
    let atom = &agg.set.conj[0];
    let pos = atom.args.iter().position(|a| a.as_var() == Some(key)).unwrap_or(0);
    t.bindings
        .get(&atom.predicate)
        .and_then(|b| b.types.get(pos).copied())
        .unwrap_or(SqlType::DEFAULT_VARCHAR)
}

/// `value ≺ guard` over a view row qualified by `q`; averages compare
/// `sum ≺ guard * count`, which is exact since the count is positive.
fn guard_condition(ctx: &Ctx, view: &AggregateView, q: &str, agg: &AggregateAtom, op: CmpOp) -> Condition {
    let (g, _) = ctx.term(&agg.guard, Some(view.value_type));
    let value = Expr::col(q, view.value_column());
    if agg.func == AggregateFunc::Avg {
        let scaled = Expr::Mul(Box::new(g), Box::new(Expr::col(q, view.count_column())));
        Condition::Cmp(value, op, scaled)
    } else {
        Condition::Cmp(value, op, g)
    }
}
