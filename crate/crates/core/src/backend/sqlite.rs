use std::cell::RefCell;
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::rc::Rc;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rusqlite::types::ValueRef;
use rusqlite::{Connection, ErrorCode};

use super::{Backend, Connector};
use crate::ast::Value;
use crate::directives::{ConnectionSpec, SqlType};
use crate::error::{Error, Result};
use crate::sql::BackendProfile;

/// An SQLite database.
pub struct SqliteBackend {
    name: String,
    conn: Connection,
    deadline: Arc<Mutex<Option<Instant>>>,
}

fn sql_type(declared: &str) -> SqlType {
    let upper = declared.to_ascii_uppercase();
    if upper.contains("INT") {
        return SqlType::Integer;
    }
    let len = upper
        .find('(')
        .and_then(|i| upper[i + 1..].split(')').next())
        .and_then(|n| n.trim().parse().ok());
    match len {
        Some(n) if upper.contains("CHAR") => SqlType::Varchar(n),
        _ => SqlType::DEFAULT_VARCHAR,
    }
}

fn value(v: ValueRef<'_>) -> Result<Value, String> {
    match v {
        ValueRef::Integer(i) => Ok(Value::Int(i)),
        ValueRef::Text(t) => Ok(Value::Str(String::from_utf8_lossy(t).into_owned())),
        ValueRef::Real(r) if r.fract() == 0.0 && r.abs() < 9.0e15 => Ok(Value::Int(r as i64)),
        ValueRef::Real(r) => Ok(Value::Str(r.to_string())),
        ValueRef::Blob(b) => Ok(Value::Str(String::from_utf8_lossy(b).into_owned())),
        ValueRef::Null => Err("NULL values are not supported".into()),
    }
}

fn to_sql(v: &Value) -> rusqlite::types::Value {
    match v {
        Value::Int(i) => rusqlite::types::Value::Integer(*i),
        Value::Str(s) => rusqlite::types::Value::Text(s.clone()),
    }
}

/// Page cache of the main database of a connection, in KiB.
const MAIN_CACHE_KIB: u32 = 500;

impl SqliteBackend {
    /// Opens a database file, creating it if needed.
    pub fn open(name: &str, path: &Path) -> Result<Self> {
        let conn = Connection::open(path).map_err(|e| Error::Backend {
            statement: format!("open {}", path.display()),
            message: e.to_string(),
        })?;
        Self::with_connection(name, conn)
    }

    pub fn open_in_memory(name: &str) -> Result<Self> {
        let conn = Connection::open_in_memory().map_err(|e| Error::Backend {
            statement: "open in-memory database".into(),
            message: e.to_string(),
        })?;
        Self::with_connection(name, conn)
    }

    fn with_connection(name: &str, conn: Connection) -> Result<Self> {
        let deadline: Arc<Mutex<Option<Instant>>> = Arc::default();
        let watch = Arc::clone(&deadline);
        conn.progress_handler(
            10_000,
            Some(move || matches!(*watch.lock().unwrap(), Some(d) if Instant::now() >= d)),
        )
        .map_err(|e| Error::Backend {
            statement: "progress handler".into(),
            message: e.to_string(),
        })?;
        let b = SqliteBackend {
            name: name.to_string(),
            conn,
            deadline,
        };
        // large intermediate results spill to disk instead of memory; the
        // build keeps the default cache of temporary b-trees small, so the
        // main database sets its own
        b.execute_batch(&format!("PRAGMA temp_store = FILE; PRAGMA cache_size = -{MAIN_CACHE_KIB}"))?;
        Ok(b)
    }

    fn execute_batch(&self, sql: &str) -> Result<()> {
        self.conn.execute_batch(sql).map_err(|e| self.error(sql, e))
    }

    fn error(&self, sql: &str, e: rusqlite::Error) -> Error {
        if e.sqlite_error_code() == Some(ErrorCode::OperationInterrupted) {
            return Error::Timeout;
        }
        Error::Backend {
            statement: sql.to_string(),
            message: e.to_string(),
        }
    }
}

impl Backend for SqliteBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn profile(&self) -> BackendProfile {
        BackendProfile::SQLITE
    }

    fn execute(&self, sql: &str) -> Result<u64> {
        log::trace!("{sql}");
        self.conn.execute(sql, []).map(|n| n as u64).map_err(|e| self.error(sql, e))
    }

    fn query_count(&self, sql: &str) -> Result<u64> {
        self.conn
            .query_row(sql, [], |r| r.get::<_, i64>(0))
            .map(|n| n as u64)
            .map_err(|e| self.error(sql, e))
    }

    fn query_rows(&self, sql: &str, each: &mut dyn FnMut(Vec<Value>) -> Result<()>) -> Result<()> {
        let mut stmt = self.conn.prepare(sql).map_err(|e| self.error(sql, e))?;
        let n = stmt.column_count();
        let mut rows = stmt.query([]).map_err(|e| self.error(sql, e))?;
        while let Some(row) = rows.next().map_err(|e| self.error(sql, e))? {
            let mut out = Vec::with_capacity(n);
            for i in 0..n {
                let v = row.get_ref(i).map_err(|e| self.error(sql, e))?;
                out.push(value(v).map_err(|message| Error::Backend {
                    statement: sql.to_string(),
                    message,
                })?);
            }
            each(out)?;
        }
        Ok(())
    }

    fn query_columns(&self, sql: &str) -> Result<Vec<String>> {
        let stmt = self.conn.prepare(sql).map_err(|e| self.error(sql, e))?;
        Ok(stmt.column_names().into_iter().map(str::to_string).collect())
    }

    fn relation_columns(&self, name: &str) -> Result<Option<Vec<(String, SqlType)>>> {
        let sql = "SELECT name FROM sqlite_master WHERE type IN ('table', 'view') AND lower(name) = lower(?1)";
        let found: Option<String> = self
            .conn
            .query_row(sql, [name], |r| r.get(0))
            .map(Some)
            .or_else(|e| match e {
                rusqlite::Error::QueryReturnedNoRows => Ok(None),
                e => Err(self.error(sql, e)),
            })?;
        let Some(actual) = found else { return Ok(None) };
        let pragma = format!("PRAGMA table_info({})", crate::sql::quote_ident(&actual));
        let mut stmt = self.conn.prepare(&pragma).map_err(|e| self.error(&pragma, e))?;
        let cols = stmt
            .query_map([], |r| Ok((r.get::<_, String>(1)?, r.get::<_, String>(2)?)))
            .map_err(|e| self.error(&pragma, e))?
            .collect::<rusqlite::Result<Vec<_>>>()
            .map_err(|e| self.error(&pragma, e))?;
        Ok(Some(cols.into_iter().map(|(n, t)| (n, sql_type(&t))).collect()))
    }

    fn insert_rows(
        &self,
        table: &str,
        columns: &[String],
        rows: &mut dyn Iterator<Item = Result<Vec<Value>>>,
    ) -> Result<u64> {
        use crate::sql::quote_ident;
        let cols: Vec<String> = columns.iter().map(|c| quote_ident(c)).collect();
        let marks: Vec<String> = (1..=columns.len()).map(|i| format!("?{i}")).collect();
        let sql = format!(
            "INSERT INTO {} ({}) VALUES ({})",
            quote_ident(table),
            cols.join(", "),
            marks.join(", ")
        );
        let own_tx = self.conn.is_autocommit();
        if own_tx {
            self.begin()?;
        }
        let result = (|| {
            let mut stmt = self.conn.prepare(&sql).map_err(|e| self.error(&sql, e))?;
            let mut n = 0;
            for row in rows {
                let row = row?;
                if row.len() != columns.len() {
                    return Err(Error::Input(format!(
                        "row of {} values for the {} columns of `{table}`",
                        row.len(),
                        columns.len()
                    )));
                }
                stmt.execute(rusqlite::params_from_iter(row.iter().map(to_sql)))
                    .map_err(|e| self.error(&sql, e))?;
                n += 1;
            }
            Ok(n)
        })();
        if own_tx {
            match &result {
                Ok(_) => self.commit()?,
                Err(_) => self.rollback()?,
            }
        }
        result
    }

    fn begin(&self) -> Result<()> {
        self.execute_batch("BEGIN")
    }

    fn commit(&self) -> Result<()> {
        self.execute_batch("COMMIT")
    }

    fn rollback(&self) -> Result<()> {
        if self.conn.is_autocommit() {
            return Ok(());
        }
        self.execute_batch("ROLLBACK")
    }

    fn set_deadline(&self, deadline: Option<Instant>) {
        *self.deadline.lock().unwrap() = deadline;
    }
}

enum Location {
    Directory(PathBuf),
    Memory,
}

/// Opens SQLite databases: files under a base directory, or named
/// in-memory databases that live as long as the connector.
///
/// A name containing a path separator or ending in `.db`, `.sqlite` or
/// `.sqlite3` is used as a file path; any other name `n` maps to
/// `<base>/n.db`. User and password are ignored.
pub struct SqliteConnector {
    location: Location,
    open: RefCell<HashMap<String, Rc<SqliteBackend>>>,
}

impl SqliteConnector {
    pub fn in_directory(base: impl Into<PathBuf>) -> Self {
        SqliteConnector {
            location: Location::Directory(base.into()),
            open: RefCell::default(),
        }
    }

    pub fn in_memory() -> Self {
        SqliteConnector {
            location: Location::Memory,
            open: RefCell::default(),
        }
    }

    pub fn path_for(&self, database: &str) -> Option<PathBuf> {
        let Location::Directory(base) = &self.location else { return None };
        let lower = database.to_ascii_lowercase();
        let path_like = database.contains('/')
            || database.contains(std::path::MAIN_SEPARATOR)
            || [".db", ".sqlite", ".sqlite3"].iter().any(|s| lower.ends_with(s));
        Some(if path_like {
            PathBuf::from(database)
        } else {
            base.join(format!("{database}.db"))
        })
    }

    /// Typed access to an open database.
    pub fn sqlite(&self, spec: &ConnectionSpec) -> Result<Rc<SqliteBackend>> {
        if let Some(b) = self.open.borrow().get(&spec.database) {
            return Ok(Rc::clone(b));
        }
        if spec.has_credentials() {
            log::debug!("ignoring credentials for SQLite database `{}`", spec.database);
        }
        let backend = match self.path_for(&spec.database) {
            Some(path) => {
                if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir)?;
                }
                SqliteBackend::open(&spec.database, &path)?
            }
            None => SqliteBackend::open_in_memory(&spec.database)?,
        };
        let b = Rc::new(backend);
        self.open.borrow_mut().insert(spec.database.clone(), Rc::clone(&b));
        Ok(b)
    }
}

impl Connector for SqliteConnector {
    fn connect(&self, spec: &ConnectionSpec) -> Result<Rc<dyn Backend>> {
        Ok(self.sqlite(spec)?)
    }
}
