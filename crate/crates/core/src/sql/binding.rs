use std::collections::BTreeMap;

use crate::directives::{ConnectionSpec, SqlType};

/// Where a predicate's rows come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BindingSource {
    /// An existing table of the working database (`USE`, explicit or implied).
    Working,
    /// A table of another database, copied into the working one before
    /// evaluation (`USE ... FROM`).
    External(ConnectionSpec),
    /// The result of an `AS (SQL)` query, materialized before evaluation.
    Query {
        sql: String,
        from: Option<ConnectionSpec>,
    },
    /// A table created for the run (`CREATE`, explicit or implied).
    Generated,
}

/// Positional mapping from a predicate to a table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationBinding {
    pub predicate: String,
    pub arity: usize,
    pub table: String,
    /// Column names; a zero-arity predicate gets one placeholder column.
    pub columns: Vec<String>,
    pub types: Vec<SqlType>,
    pub source: BindingSource,
    pub keep: bool,
}

impl RelationBinding {
    /// Default column names `att_1 ... att_n`.
    pub fn default_columns(arity: usize) -> Vec<String> {
        (1..=arity.max(1)).map(|i| format!("att_{i}")).collect()
    }

    /// A generated binding with default column names.
    pub fn generated(predicate: &str, table: &str, types: Vec<SqlType>) -> Self {
        let arity = types.len();
        let mut types = types;
        if arity == 0 {
            types.push(SqlType::Integer);
        }
        RelationBinding {
            predicate: predicate.to_string(),
            arity,
            table: table.to_string(),
            columns: Self::default_columns(arity),
            types,
            source: BindingSource::Generated,
            keep: false,
        }
    }

    pub fn is_placeholder(&self) -> bool {
        self.arity == 0
    }

    pub fn delta_table(&self) -> String {
        format!("d_{}", self.table)
    }

    pub fn previous_delta_table(&self) -> String {
        format!("d1_{}", self.table)
    }

    pub fn column_types(&self) -> Vec<(String, SqlType)> {
        self.columns.iter().cloned().zip(self.types.iter().copied()).collect()
    }
}

/// Bindings for every predicate of a program, keyed by predicate.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Bindings {
    map: BTreeMap<String, RelationBinding>,
}

impl Bindings {
    pub fn insert(&mut self, b: RelationBinding) {
        self.map.insert(b.predicate.clone(), b);
    }

    pub fn get(&self, predicate: &str) -> Option<&RelationBinding> {
        self.map.get(predicate)
    }

    pub fn iter(&self) -> impl Iterator<Item = &RelationBinding> {
        self.map.values()
    }

    pub fn by_table(&self, table: &str) -> Option<&RelationBinding> {
        self.map.values().find(|b| b.table.eq_ignore_ascii_case(table))
    }

    /// Generated bindings with default names and types for every predicate
    /// of the program, using integer columns where every constant is an
    /// integer. Used when no database is involved (SQL emission, tests).
    pub fn defaults_for(program: &crate::ast::Program) -> Self {
        let types = crate::sql::binding::infer_types(program, &Bindings::default());
        let mut out = Bindings::default();
        for p in program.predicates() {
            let ts = types.get(&p).cloned().unwrap_or_default();
            out.insert(RelationBinding::generated(&p, &p, ts));
        }
        out
    }
}

/// Infers a column type for every argument position of every predicate.
///
/// Positions are grouped into classes that must share a type: positions
/// holding the same variable within a rule, and positions compared by a
/// built-in. A class meeting a string constant is `varchar(255)`; one used in
/// arithmetic or meeting integer constants is `integer`; otherwise it takes the declared type of any bound position in it
/// (`fixed`), defaulting to `varchar(255)`.
pub fn infer_types(program: &crate::ast::Program, fixed: &Bindings) -> BTreeMap<String, Vec<SqlType>> {
    use crate::ast::{BuiltinOp, LiteralKind, Term};

    #[derive(Default, Clone, Copy)]
    struct Facts {
        int_const: bool,
        str_const: bool,
        arith: bool,
        declared: Option<SqlType>,
    }

    let preds = program.predicates();
    let mut slot_of: BTreeMap<(String, usize), usize> = BTreeMap::new();
    for p in &preds {
        for i in 0..program.arity_of(p).unwrap_or(0) {
            let n = slot_of.len();
            slot_of.insert((p.clone(), i), n);
        }
    }
    let n = slot_of.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while parent[r] != r {
            r = parent[r];
        }
        let mut c = x;
        while parent[c] != r {
            let next = parent[c];
            parent[c] = r;
            c = next;
        }
        r
    }
    let mut facts = vec![Facts::default(); n];
    // per-rule variable classes are represented by extra nodes appended on demand
    let mut extra: Vec<Facts> = Vec::new();
    let union = |parent: &mut Vec<usize>, a: usize, b: usize| {
        let (ra, rb) = (find(parent, a), find(parent, b));
        if ra != rb {
            parent[ra] = rb;
        }
    };

    let note_term = |t: &Term, f: &mut Facts| match t {
        Term::Int(_) => f.int_const = true,
        Term::Str(_) => f.str_const = true,
        Term::Var(_) => {}
    };

    for fact in &program.facts {
        for (i, t) in fact.args.iter().enumerate() {
            let s = slot_of[&(fact.predicate.clone(), i)];
            note_term(t, &mut facts[s]);
        }
    }

    for rule in &program.rules {
        let mut var_node: BTreeMap<String, usize> = BTreeMap::new();
        let mut node_for = |v: &str, parent: &mut Vec<usize>, extra: &mut Vec<Facts>| -> usize {
            *var_node.entry(v.to_string()).or_insert_with(|| {
                let id = n + extra.len();
                extra.push(Facts::default());
                parent.push(id);
                id
            })
        };
        let mut atoms: Vec<&crate::ast::Atom> = vec![&rule.head];
        for lit in &rule.body {
            match &lit.kind {
                LiteralKind::Atom(a) => atoms.push(a),
                LiteralKind::Aggregate(a) => atoms.extend(a.set.conj.iter()),
                LiteralKind::Builtin(_) => {}
            }
        }
        for a in atoms {
            for (i, t) in a.args.iter().enumerate() {
                let s = slot_of[&(a.predicate.clone(), i)];
                match t.as_var() {
                    Some(v) => {
                        let node = node_for(v, &mut parent, &mut extra);
                        union(&mut parent, s, node);
                    }
                    None => note_term(t, &mut facts[s]),
                }
            }
        }
        for lit in &rule.body {
            match &lit.kind {
                LiteralKind::Builtin(b) => {
                    let nodes: Vec<Option<usize>> = b
                        .args
                        .iter()
                        .map(|t| t.as_var().map(|v| node_for(v, &mut parent, &mut extra)))
                        .collect();
                    let is_arith = matches!(b.op, BuiltinOp::Arith(_));
                    // operands of one built-in share a class
                    let vars: Vec<usize> = nodes.iter().flatten().copied().collect();
                    for w in vars.windows(2) {
                        union(&mut parent, w[0], w[1]);
                    }
                    if let Some(&first) = vars.first() {
                        let root = find(&mut parent, first);
                        let f = if root < n { &mut facts[root] } else { &mut extra[root - n] };
                        f.arith |= is_arith;
                        for t in &b.args {
                            note_term(t, f);
                        }
                    }
                }
                LiteralKind::Aggregate(a) => {
                    // the guard is compared with the count, or with values of
                    // the first set variable
                    let value = match a.func {
                        crate::ast::AggregateFunc::Count => None,
                        _ => a.set.vars.first().map(|v| node_for(v, &mut parent, &mut extra)),
                    };
                    let guard = a.guard.as_var().map(|v| node_for(v, &mut parent, &mut extra));
                    if let (Some(x), Some(y)) = (value, guard) {
                        union(&mut parent, x, y);
                    }
                    if let Some(x) = value.or(guard) {
                        let root = find(&mut parent, x);
                        let f = if root < n { &mut facts[root] } else { &mut extra[root - n] };
                        note_term(&a.guard, f);
                        f.arith |= value.is_none();
                    }
                }
                LiteralKind::Atom(_) => {}
            }
        }
        // sums and averages are computed over integers
        for a in rule.aggregates() {
            if matches!(a.func, crate::ast::AggregateFunc::Sum | crate::ast::AggregateFunc::Avg) {
                if let Some(v) = a.set.vars.first() {
                    let node = node_for(v, &mut parent, &mut extra);
                    let root = find(&mut parent, node);
                    let f = if root < n { &mut facts[root] } else { &mut extra[root - n] };
                    f.arith = true;
                }
            }
        }
    }

    // fold every node's facts into its root
    let total = parent.len();
    let mut merged = vec![Facts::default(); total];
    for x in 0..total {
        let r = find(&mut parent, x);
        let f = if x < n { facts[x] } else { extra[x - n] };
        let m = &mut merged[r];
        m.int_const |= f.int_const;
        m.str_const |= f.str_const;
        m.arith |= f.arith;
    }
    for ((p, i), &s) in &slot_of {
        if let Some(b) = fixed.get(p) {
            if let Some(&t) = b.types.get(*i) {
                let r = find(&mut parent, s);
                merged[r].declared.get_or_insert(t);
            }
        }
    }

    let mut out: BTreeMap<String, Vec<SqlType>> = BTreeMap::new();
    for p in &preds {
        let arity = program.arity_of(p).unwrap_or(0);
        let mut ts = Vec::with_capacity(arity);
        for i in 0..arity {
            let s = slot_of[&(p.clone(), i)];
            let r = find(&mut parent, s);
            let m = merged[r];
            let t = if let Some(b) = fixed.get(p) {
                b.types.get(i).copied().unwrap_or(SqlType::DEFAULT_VARCHAR)
            } else if m.str_const {
                SqlType::DEFAULT_VARCHAR
            } else if m.arith || m.int_const {
                SqlType::Integer
            } else {
                m.declared.unwrap_or(SqlType::DEFAULT_VARCHAR)
            };
            ts.push(t);
        }
        out.insert(p.clone(), ts);
    }
    out
}
