//! SQL generation: a small statement AST, its renderings, and the
//! translation of rules into statements.

mod binding;
mod plan;
mod render;
mod translate;

pub use binding::{infer_types, BindingSource, Bindings, RelationBinding};
pub use plan::{translate_program, ComponentPlan, RulePlan};
pub use render::{quote_ident, render};
pub use translate::Translator;

use crate::ast::CmpOp;
use crate::directives::{SqlType, SystemLike};

/// How compound queries are nested. `Parenthesized` is the standard form
/// (`INSERT INTO t (SELECT ... EXCEPT (SELECT * FROM t))`); `Flat` is what
/// engines without parenthesized compound operands accept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Nesting {
    Parenthesized,
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dialect {
    Generic,
    /// No `EXCEPT`: set difference becomes `NOT EXISTS`.
    NoExcept,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BackendProfile {
    pub nesting: Nesting,
    pub dialect: Dialect,
    pub max_identifier: Option<usize>,
    /// Maximum number of terms in one compound SELECT.
    pub max_compound: Option<usize>,
}

impl BackendProfile {
    pub const STANDARD: BackendProfile = BackendProfile {
        nesting: Nesting::Parenthesized,
        dialect: Dialect::Generic,
        max_identifier: None,
        max_compound: None,
    };

    pub const SQLITE: BackendProfile = BackendProfile {
        nesting: Nesting::Flat,
        dialect: Dialect::Generic,
        max_identifier: None,
        max_compound: Some(500),
    };

    /// Applies a `LIKE` hint on top of this profile: dialect and identifier
    /// length follow the named system, nesting stays.
    pub fn with_like(self, like: Option<SystemLike>) -> Self {
        let Some(like) = like else { return self };
        let (dialect, max_identifier) = match like {
            SystemLike::Postgres => (Dialect::Generic, 63),
            SystemLike::Db2 => (Dialect::Generic, 128),
            SystemLike::SqlServer => (Dialect::Generic, 128),
            SystemLike::Oracle => (Dialect::NoExcept, 30),
            SystemLike::MySql => (Dialect::NoExcept, 64),
        };
        BackendProfile {
            dialect,
            max_identifier: Some(max_identifier),
            ..self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggFn {
    Count,
    Sum,
    Min,
    Max,
}

impl AggFn {
    pub fn keyword(self) -> &'static str {
        match self {
            AggFn::Count => "COUNT",
            AggFn::Sum => "SUM",
            AggFn::Min => "MIN",
            AggFn::Max => "MAX",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Column { qualifier: String, column: String },
    Int(i64),
    Str(String),
    Add(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    /// `None` argument means `COUNT(*)`.
    Agg(AggFn, Option<Box<Expr>>),
    Coalesce(Box<Expr>, Box<Expr>),
    Scalar(Box<Select>),
}

impl Expr {
    pub fn col(qualifier: impl Into<String>, column: impl Into<String>) -> Self {
        Expr::Column {
            qualifier: qualifier.into(),
            column: column.into(),
        }
    }

    /// A literal of the given column type. Integers headed for a character
    /// column are quoted so comparisons stay textual.
    pub fn typed(value: &crate::ast::Value, ty: SqlType) -> Self {
        match (value, ty) {
            (crate::ast::Value::Int(i), SqlType::Integer) => Expr::Int(*i),
            (crate::ast::Value::Int(i), SqlType::Varchar(_)) => Expr::Str(i.to_string()),
            (crate::ast::Value::Str(s), _) => Expr::Str(s.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Condition {
    Cmp(Expr, CmpOp, Expr),
    NotIn(Vec<Expr>, Box<Select>),
    NotExists(Box<Select>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectItem {
    pub expr: Expr,
    pub alias: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FromItem {
    pub table: String,
    pub alias: Option<String>,
}

impl FromItem {
    /// The name columns of this item are qualified with.
    pub fn qualifier(&self) -> &str {
        self.alias.as_deref().unwrap_or(&self.table)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Select {
    pub distinct: bool,
    /// Empty means `*`.
    pub items: Vec<SelectItem>,
    pub from: Vec<FromItem>,
    pub conditions: Vec<Condition>,
    pub group_by: Vec<Expr>,
    pub having: Vec<Condition>,
}

impl Select {
    pub fn star(table: impl Into<String>) -> Self {
        Select {
            from: vec![FromItem {
                table: table.into(),
                alias: None,
            }],
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Query {
    Select(Select),
    /// `SELECT * FROM table`, with the table's columns for dialects that
    /// need to name them.
    Table { name: String, columns: Vec<String> },
    Except(Box<Query>, Box<Query>),
    Union(Vec<Query>),
}

impl Query {
    pub fn table(name: impl Into<String>, columns: &[String]) -> Self {
        Query::Table {
            name: name.into(),
            columns: columns.to_vec(),
        }
    }

    pub fn except(self, other: Query) -> Self {
        Query::Except(Box::new(self), Box::new(other))
    }

    /// Number of SELECT terms at the top level of the compound, as counted
    /// by engines that limit compound size.
    pub fn compound_terms(&self) -> usize {
        match self {
            Query::Select(_) | Query::Table { .. } => 1,
            Query::Except(l, _) => l.compound_terms() + 1,
            Query::Union(qs) => qs.first().map_or(0, Query::compound_terms) + qs.len().saturating_sub(1),
        }
    }

    /// For `(b1 UNION ... UNION bn) EXCEPT t1 ... EXCEPT tk`, the queries
    /// `bi EXCEPT t1 ... EXCEPT tk`, whose union is the same set. `None`
    /// when there is no UNION.
    pub fn union_branches(&self) -> Option<Vec<Query>> {
        match self {
            Query::Union(qs) => Some(qs.clone()),
            Query::Except(l, r) => l
                .union_branches()
                .map(|bs| bs.into_iter().map(|b| b.except((**r).clone())).collect()),
            _ => None,
        }
    }

    /// SELECT branches of the outermost UNION (1 when there is none).
    pub fn branch_count(&self) -> usize {
        match self {
            Query::Except(l, _) => l.branch_count(),
            Query::Union(qs) => qs.len(),
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Statement {
    Insert { table: String, query: Query },
    CreateView { name: String, columns: Vec<String>, query: Query },
    CreateTable { name: String, columns: Vec<(String, SqlType)> },
    DeleteAll { table: String },
    DropTable { name: String },
    DropView { name: String },
    /// A bare query, used for checks.
    Select(Query),
}

/// Why a statement exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    AggregateView,
    ExitRule,
    DeltaRule,
    /// Everything a rule derives from the final relations; must already be
    /// contained in its head's table.
    FixpointCheck,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SqlStatement {
    pub role: Role,
    /// Predicate of the rule's head (or of the view's auxiliary atom).
    pub predicate: String,
    /// Table or view written by the statement.
    pub target: String,
    /// Index of the originating rule in the translated program.
    pub rule: Option<usize>,
    pub statement: Statement,
}

impl SqlStatement {
    pub fn render(&self, profile: &BackendProfile) -> String {
        render(&self.statement, profile)
    }
}
