//! Auxiliary directives: which database the evaluation runs in, how
//! predicates map onto tables, and where results are copied afterwards.

use std::fmt;

use crate::ast::{SourceSpan, Term};

/// `name:user:password`. User and password may be empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConnectionSpec {
    pub database: String,
    pub user: String,
    pub password: String,
}

impl ConnectionSpec {
    pub fn new(database: impl Into<String>, user: impl Into<String>, password: impl Into<String>) -> Self {
        Self {
            database: database.into(),
            user: user.into(),
            password: password.into(),
        }
    }

    /// A spec with empty credentials, as used by embedded backends.
    pub fn local(database: impl Into<String>) -> Self {
        Self::new(database, "", "")
    }

    pub fn has_credentials(&self) -> bool {
        !self.user.is_empty() || !self.password.is_empty()
    }
}

impl fmt::Display for ConnectionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.database, self.user, self.password)
    }
}

/// The `LIKE` hint of the init section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SystemLike {
    Postgres,
    Oracle,
    Db2,
    SqlServer,
    MySql,
}

impl SystemLike {
    pub fn keyword(self) -> &'static str {
        match self {
            SystemLike::Postgres => "POSTGRES",
            SystemLike::Oracle => "ORACLE",
            SystemLike::Db2 => "DB2",
            SystemLike::SqlServer => "SQLSERVER",
            SystemLike::MySql => "MYSQL",
        }
    }

    pub fn from_keyword(word: &str) -> Option<Self> {
        Some(match word.to_ascii_uppercase().as_str() {
            "POSTGRES" => SystemLike::Postgres,
            "ORACLE" => SystemLike::Oracle,
            "DB2" => SystemLike::Db2,
            "SQLSERVER" => SystemLike::SqlServer,
            "MYSQL" => SystemLike::MySql,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SqlType {
    Integer,
    Varchar(u32),
}

impl SqlType {
    pub const DEFAULT_VARCHAR: SqlType = SqlType::Varchar(255);

    pub fn is_integer(self) -> bool {
        matches!(self, SqlType::Integer)
    }
}

impl fmt::Display for SqlType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SqlType::Integer => f.write_str("integer"),
            SqlType::Varchar(n) => write!(f, "varchar({n})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TableMode {
    Use,
    Create,
}

/// `MAPTO pred (types)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MapTo {
    pub predicate: String,
    pub types: Option<Vec<SqlType>>,
}

/// One `USE` or `CREATE` table definition.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TableDef {
    pub mode: TableMode,
    pub table: String,
    pub attrs: Option<Vec<String>>,
    /// Raw SQL text of an `AS ( ... )` clause, without the outer parentheses.
    pub as_query: Option<String>,
    pub from_db: Option<ConnectionSpec>,
    pub mapto: Option<MapTo>,
    pub keep_after_execution: bool,
    pub span: SourceSpan,
}

impl TableDef {
    /// The predicate this table is mapped to: the `MAPTO` target, or the
    /// table's own name.
    pub fn predicate(&self) -> &str {
        self.mapto
            .as_ref()
            .map(|m| m.predicate.as_str())
            .unwrap_or(&self.table)
    }
}

/// `QUERY name.` or, as an extension, `QUERY pred(args).` with constants in
/// the bound positions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QueryTarget {
    pub name: String,
    pub args: Option<Vec<Term>>,
}

impl QueryTarget {
    pub fn bound_positions(&self) -> Vec<usize> {
        self.args
            .iter()
            .flatten()
            .enumerate()
            .filter(|(_, t)| t.as_var().is_none())
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum WriteMode {
    Append,
    #[default]
    Overwrite,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum OutputDirective {
    /// Copy every predicate table into the given database.
    DbOutput(ConnectionSpec),
    Output {
        /// `None` when neither APPEND nor OVERWRITE was written.
        mode: Option<WriteMode>,
        predicate: String,
        alias: Option<String>,
        target: Option<ConnectionSpec>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectiveSet {
    pub working_db: ConnectionSpec,
    pub system_like: Option<SystemLike>,
    pub tables: Vec<TableDef>,
    pub query: Option<QueryTarget>,
    pub outputs: Vec<OutputDirective>,
}

impl DirectiveSet {
    /// A directive set with only an init section.
    pub fn working(db: ConnectionSpec) -> Self {
        Self {
            working_db: db,
            system_like: None,
            tables: Vec::new(),
            query: None,
            outputs: Vec::new(),
        }
    }

    pub fn table_for_predicate(&self, predicate: &str) -> Option<&TableDef> {
        self.tables.iter().find(|t| t.predicate() == predicate)
    }
}

fn write_list<T: fmt::Display>(f: &mut fmt::Formatter<'_>, items: &[T]) -> fmt::Result {
    f.write_str(" (")?;
    for (i, it) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{it}")?;
    }
    f.write_str(")")
}

impl fmt::Display for TableDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.mode {
            TableMode::Use => write!(f, "USE {}", self.table)?,
            TableMode::Create => write!(f, "CREATE {}", self.table)?,
        }
        if let Some(attrs) = &self.attrs {
            write_list(f, attrs)?;
        }
        if let Some(q) = &self.as_query {
            write!(f, " AS ({q})")?;
        }
        if let Some(db) = &self.from_db {
            write!(f, " FROM {db}")?;
        }
        if let Some(m) = &self.mapto {
            write!(f, " MAPTO {}", m.predicate)?;
            if let Some(types) = &m.types {
                write_list(f, types)?;
            }
        }
        if self.keep_after_execution {
            f.write_str(" KEEP_AFTER_EXECUTION")?;
        }
        // a connection spec right before the terminator needs a separating space
        if self.from_db.is_some() && self.mapto.is_none() && !self.keep_after_execution {
            f.write_str(" .")
        } else {
            f.write_str(".")
        }
    }
}

impl fmt::Display for DirectiveSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "USEDB {}", self.working_db)?;
        match self.system_like {
            Some(like) => writeln!(f, " LIKE {}.", like.keyword())?,
            None => writeln!(f, " .")?,
        }
        for t in &self.tables {
            writeln!(f, "{t}")?;
        }
        if let Some(q) = &self.query {
            write!(f, "QUERY {}", q.name)?;
            if let Some(args) = &q.args {
                write_list(f, args)?;
            }
            writeln!(f, ".")?;
        }
        for o in &self.outputs {
            match o {
                OutputDirective::DbOutput(db) => writeln!(f, "DBOUTPUT {db} .")?,
                OutputDirective::Output {
                    mode,
                    predicate,
                    alias,
                    target,
                } => {
                    f.write_str("OUTPUT")?;
                    match mode {
                        Some(WriteMode::Append) => f.write_str(" APPEND")?,
                        Some(WriteMode::Overwrite) => f.write_str(" OVERWRITE")?,
                        None => {}
                    }
                    write!(f, " {predicate}")?;
                    if let Some(a) = alias {
                        write!(f, " AS {a}")?;
                    }
                    match target {
                        Some(db) => writeln!(f, " IN {db} .")?,
                        None => writeln!(f, ".")?,
                    }
                }
            }
        }
        Ok(())
    }
}
