//! Relational backends the generated SQL runs on.

mod sqlite;

pub use sqlite::{SqliteBackend, SqliteConnector};

use std::rc::Rc;
use std::time::Instant;

use crate::ast::Value;
use crate::directives::{ConnectionSpec, SqlType};
use crate::error::Result;
use crate::sql::BackendProfile;

/// A connection to one database.
///
/// Methods take `&self`; backends are shared by every binding that names
/// the same database.
pub trait Backend {
    /// The database name the backend was opened with.
    fn name(&self) -> &str;

    /// Native SQL shape of the backend, before any `LIKE` hint.
    fn profile(&self) -> BackendProfile;

    /// Runs one statement and returns the number of rows it changed.
    fn execute(&self, sql: &str) -> Result<u64>;

    /// Runs a query returning a single integer.
    fn query_count(&self, sql: &str) -> Result<u64>;

    /// Streams the rows of a query.
    fn query_rows(&self, sql: &str, each: &mut dyn FnMut(Vec<Value>) -> Result<()>) -> Result<()>;

    /// Column names of a query's result, without running it to completion.
    fn query_columns(&self, sql: &str) -> Result<Vec<String>>;

    /// Columns of a table or view, or `None` when there is no such relation.
    /// Names match case-insensitively.
    fn relation_columns(&self, name: &str) -> Result<Option<Vec<(String, SqlType)>>>;

    /// Inserts rows, returning how many were written.
    fn insert_rows(&self, table: &str, columns: &[String], rows: &mut dyn Iterator<Item = Result<Vec<Value>>>)
        -> Result<u64>;

    fn begin(&self) -> Result<()>;
    fn commit(&self) -> Result<()>;
    fn rollback(&self) -> Result<()>;

    /// Statements running past the deadline fail with [`crate::Error::Timeout`].
    fn set_deadline(&self, deadline: Option<Instant>);

    fn count(&self, table: &str) -> Result<u64> {
        self.query_count(&format!("SELECT COUNT(*) FROM {}", crate::sql::quote_ident(table)))
    }

    fn exists(&self, name: &str) -> Result<bool> {
        Ok(self.relation_columns(name)?.is_some())
    }
}

/// Opens databases named by connection specs.
pub trait Connector {
    /// Opens (or returns the already open) database named by `spec`.
    fn connect(&self, spec: &ConnectionSpec) -> Result<Rc<dyn Backend>>;
}
