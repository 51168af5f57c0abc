//! Abstract syntax of disjunction-free Datalog programs with negation,
//! built-in predicates and aggregate atoms.
//!
//! Every node carries a [`SourceSpan`]; spans never take part in equality or
//! hashing, so two programs are structurally equal exactly when their printed
//! forms re-parse to the same tree.

use std::collections::BTreeSet;
use std::fmt;

/// Position of a node in its source text. Lines and columns start at 1.
///
/// Spans compare equal to each other unconditionally.
#[derive(Debug, Clone, Copy, Default)]
pub struct SourceSpan {
    pub line: u32,
    pub column: u32,
}

impl SourceSpan {
    pub fn new(line: u32, column: u32) -> Self {
        Self { line, column }
    }
}

impl PartialEq for SourceSpan {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Eq for SourceSpan {}

impl std::hash::Hash for SourceSpan {
    fn hash<H: std::hash::Hasher>(&self, _: &mut H) {}
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

/// A ground value: the only constant kinds are integers and strings.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Int(i64),
    Str(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Str(s) => write_symbol(f, s),
        }
    }
}

fn is_symbol(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && s != "not"
        && s != "v"
}

fn write_symbol(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    if is_symbol(s) {
        f.write_str(s)
    } else {
        f.write_str("\"")?;
        for c in s.chars() {
            if c == '"' || c == '\\' {
                write!(f, "\\{c}")?;
            } else {
                write!(f, "{c}")?;
            }
        }
        f.write_str("\"")
    }
}

/// A term: a variable or a constant.
///
/// Anonymous variables are desugared by the parser into fresh variables whose
/// names start with `_`; they print back as `_`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(String),
    Int(i64),
    Str(String),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn sym(name: impl Into<String>) -> Self {
        Term::Str(name.into())
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_anonymous(&self) -> bool {
        matches!(self, Term::Var(v) if v.starts_with('_'))
    }

    pub fn as_value(&self) -> Option<Value> {
        match self {
            Term::Var(_) => None,
            Term::Int(i) => Some(Value::Int(*i)),
            Term::Str(s) => Some(Value::Str(s.clone())),
        }
    }
}

impl From<Value> for Term {
    fn from(v: Value) -> Self {
        match v {
            Value::Int(i) => Term::Int(i),
            Value::Str(s) => Term::Str(s),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) if v.starts_with('_') => f.write_str("_"),
            Term::Var(v) => f.write_str(v),
            Term::Int(i) => write!(f, "{i}"),
            Term::Str(s) => write_symbol(f, s),
        }
    }
}

/// A standard atom `p(t1, ..., tn)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
    pub span: SourceSpan,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Self {
            predicate: predicate.into(),
            args,
            span: SourceSpan::default(),
        }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| t.as_var().is_none())
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(Term::as_var)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, t) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{t}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// Comparison operators shared by built-ins and aggregate guards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    /// The operator that holds exactly when `self` does not.
    pub fn negate(self) -> Self {
        match self {
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Ge => CmpOp::Lt,
        }
    }

    /// The operator obtained by swapping the operands.
    pub fn flip(self) -> Self {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
            other => other,
        }
    }

    pub fn holds<T: Ord>(self, lhs: &T, rhs: &T) -> bool {
        match self {
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ne => lhs != rhs,
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Mul,
}

impl ArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Mul => "*",
        }
    }

    pub fn apply(self, a: i64, b: i64) -> Option<i64> {
        match self {
            ArithOp::Add => a.checked_add(b),
            ArithOp::Mul => a.checked_mul(b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuiltinOp {
    Cmp(CmpOp),
    /// Relational arithmetic: `+(A, B, C)` holds when `A + B = C`.
    Arith(ArithOp),
}

/// A built-in atom. Comparisons take two arguments, arithmetic three.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BuiltinAtom {
    pub op: BuiltinOp,
    pub args: Vec<Term>,
    pub span: SourceSpan,
}

impl BuiltinAtom {
    pub fn cmp(op: CmpOp, lhs: Term, rhs: Term) -> Self {
        Self {
            op: BuiltinOp::Cmp(op),
            args: vec![lhs, rhs],
            span: SourceSpan::default(),
        }
    }

    pub fn arith(op: ArithOp, a: Term, b: Term, result: Term) -> Self {
        Self {
            op: BuiltinOp::Arith(op),
            args: vec![a, b, result],
            span: SourceSpan::default(),
        }
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(Term::as_var)
    }
}

impl fmt::Display for BuiltinAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.op {
            BuiltinOp::Cmp(op) => write!(f, "{} {} {}", self.args[0], op, self.args[1]),
            BuiltinOp::Arith(op) => write!(
                f,
                "{}({}, {}, {})",
                op.symbol(),
                self.args[0],
                self.args[1],
                self.args[2]
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AggregateFunc {
    Count,
    Sum,
    Min,
    Max,
    Avg,
}

impl AggregateFunc {
    pub fn keyword(self) -> &'static str {
        match self {
            AggregateFunc::Count => "#count",
            AggregateFunc::Sum => "#sum",
            AggregateFunc::Min => "#min",
            AggregateFunc::Max => "#max",
            AggregateFunc::Avg => "#avg",
        }
    }

    /// Whether the function has a value (zero) on the empty set.
    pub fn defined_on_empty(self) -> bool {
        matches!(self, AggregateFunc::Count | AggregateFunc::Sum)
    }
}

/// A symbolic set `{Vars : Conj}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SymbolicSet {
    pub vars: Vec<String>,
    pub conj: Vec<Atom>,
}

impl SymbolicSet {
    /// Variables occurring anywhere in the conjunction, in first-occurrence order.
    pub fn conj_vars(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for v in self.conj.iter().flat_map(Atom::vars) {
            if seen.insert(v) {
                out.push(v);
            }
        }
        out
    }
}

/// `f({Vars : Conj}) cmp guard`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AggregateAtom {
    pub func: AggregateFunc,
    pub set: SymbolicSet,
    pub cmp: CmpOp,
    pub guard: Term,
    pub span: SourceSpan,
}

impl fmt::Display for AggregateAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{{", self.func.keyword())?;
        write!(f, "{}", self.set.vars.join(", "))?;
        f.write_str(" : ")?;
        for (i, a) in self.set.conj.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, "}} {} {}", self.cmp, self.guard)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LiteralKind {
    Atom(Atom),
    Builtin(BuiltinAtom),
    Aggregate(AggregateAtom),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Literal {
    pub negated: bool,
    pub kind: LiteralKind,
}

impl Literal {
    pub fn pos(atom: Atom) -> Self {
        Self {
            negated: false,
            kind: LiteralKind::Atom(atom),
        }
    }

    pub fn neg(atom: Atom) -> Self {
        Self {
            negated: true,
            kind: LiteralKind::Atom(atom),
        }
    }

    pub fn builtin(b: BuiltinAtom) -> Self {
        Self {
            negated: false,
            kind: LiteralKind::Builtin(b),
        }
    }

    pub fn aggregate(a: AggregateAtom) -> Self {
        Self {
            negated: false,
            kind: LiteralKind::Aggregate(a),
        }
    }

    /// The standard atom, if this literal is a positive standard literal.
    pub fn positive_atom(&self) -> Option<&Atom> {
        match &self.kind {
            LiteralKind::Atom(a) if !self.negated => Some(a),
            _ => None,
        }
    }

    pub fn span(&self) -> SourceSpan {
        match &self.kind {
            LiteralKind::Atom(a) => a.span,
            LiteralKind::Builtin(b) => b.span,
            LiteralKind::Aggregate(a) => a.span,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            f.write_str("not ")?;
        }
        match &self.kind {
            LiteralKind::Atom(a) => write!(f, "{a}"),
            LiteralKind::Builtin(b) => write!(f, "{b}"),
            LiteralKind::Aggregate(a) => write!(f, "{a}"),
        }
    }
}

/// A disjunction-free rule with a single head atom.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Rule {
    pub head: Atom,
    pub body: Vec<Literal>,
    pub span: SourceSpan,
}

impl Rule {
    pub fn new(head: Atom, body: Vec<Literal>) -> Self {
        Self {
            head,
            body,
            span: SourceSpan::default(),
        }
    }

    pub fn positive_atoms(&self) -> impl Iterator<Item = &Atom> {
        self.body.iter().filter_map(Literal::positive_atom)
    }

    pub fn aggregates(&self) -> impl Iterator<Item = &AggregateAtom> {
        self.body.iter().filter_map(|l| match &l.kind {
            LiteralKind::Aggregate(a) => Some(a),
            _ => None,
        })
    }

    /// Variables occurring in the head or in body literals outside symbolic
    /// sets (aggregate guards included).
    pub fn global_vars(&self) -> BTreeSet<&str> {
        let mut out: BTreeSet<&str> = self.head.vars().collect();
        for lit in &self.body {
            match &lit.kind {
                LiteralKind::Atom(a) => out.extend(a.vars()),
                LiteralKind::Builtin(b) => out.extend(b.vars()),
                LiteralKind::Aggregate(a) => out.extend(a.guard.as_var()),
            }
        }
        out
    }

    /// Variables bound by positive standard body literals.
    pub fn positively_bound_vars(&self) -> BTreeSet<&str> {
        self.positive_atoms().flat_map(Atom::vars).collect()
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        if !self.body.is_empty() {
            f.write_str(" :- ")?;
            for (i, l) in self.body.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{l}")?;
            }
        }
        f.write_str(".")
    }
}

/// A program: rules and ground facts in source order, plus the integer bound
/// used for built-ins over otherwise unbound variables.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Program {
    pub rules: Vec<Rule>,
    pub facts: Vec<Atom>,
    pub maxint: u64,
}

impl Program {
    /// Every predicate mentioned in the program, in order of first appearance
    /// in the source text. Facts and rules are interleaved by span.
    pub fn predicates(&self) -> Vec<String> {
        let mut items: Vec<(SourceSpan, usize, Vec<&str>)> = Vec::new();
        for (i, f) in self.facts.iter().enumerate() {
            items.push((f.span, i, vec![f.predicate.as_str()]));
        }
        for (i, r) in self.rules.iter().enumerate() {
            let mut preds = vec![r.head.predicate.as_str()];
            for lit in &r.body {
                match &lit.kind {
                    LiteralKind::Atom(a) => preds.push(&a.predicate),
                    LiteralKind::Aggregate(a) => {
                        preds.extend(a.set.conj.iter().map(|c| c.predicate.as_str()))
                    }
                    LiteralKind::Builtin(_) => {}
                }
            }
            items.push((r.span, self.facts.len() + i, preds));
        }
        items.sort_by_key(|(span, idx, _)| (span.line, span.column, *idx));
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for (_, _, preds) in items {
            for p in preds {
                if seen.insert(p) {
                    out.push(p.to_string());
                }
            }
        }
        out
    }

    /// Arity of each predicate, as first seen. Assumes the arity check passed.
    pub fn arity_of(&self, predicate: &str) -> Option<usize> {
        self.all_atoms()
            .find(|a| a.predicate == predicate)
            .map(Atom::arity)
    }

    /// Every standard atom in the program: facts, heads, body atoms and the
    /// atoms inside symbolic sets.
    pub fn all_atoms(&self) -> impl Iterator<Item = &Atom> {
        self.facts.iter().chain(self.rules.iter().flat_map(|r| {
            std::iter::once(&r.head).chain(r.body.iter().flat_map(|l| -> Box<dyn Iterator<Item = &Atom>> {
                match &l.kind {
                    LiteralKind::Atom(a) => Box::new(std::iter::once(a)),
                    LiteralKind::Aggregate(a) => Box::new(a.set.conj.iter()),
                    LiteralKind::Builtin(_) => Box::new(std::iter::empty()),
                }
            }))
        }))
    }

    /// Predicates defined by at least one rule.
    pub fn idb_predicates(&self) -> BTreeSet<&str> {
        self.rules.iter().map(|r| r.head.predicate.as_str()).collect()
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.maxint > 0 {
            writeln!(f, "#maxint = {}.", self.maxint)?;
        }
        for fact in &self.facts {
            writeln!(f, "{fact}.")?;
        }
        for rule in &self.rules {
            writeln!(f, "{rule}")?;
        }
        Ok(())
    }
}
