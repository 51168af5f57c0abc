//! Mapping predicates to tables and getting the tables ready.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::analysis::AUX_PREFIX;
use crate::ast::{Atom, Program, Value};
use crate::backend::{Backend, Connector};
use crate::directives::{DirectiveSet, SqlType, TableDef, TableMode};
use crate::error::{Error, Result};
use crate::sql::infer_types;
use crate::sql::{quote_ident, BindingSource, Bindings, RelationBinding};

fn columns_of(def: &TableDef, available: &[(String, SqlType)]) -> Result<Vec<(String, SqlType)>> {
    let Some(attrs) = &def.attrs else { return Ok(available.to_vec()) };
    attrs
        .iter()
        .map(|a| {
            available
                .iter()
                .find(|(c, _)| c.eq_ignore_ascii_case(a))
                .cloned()
                .ok_or_else(|| Error::Binding(format!("table `{}` has no column `{a}`", def.table)))
        })
        .collect()
}

/// Predicates that will be read from an existing table rather than created.
pub(crate) fn used_predicates(program: &Program, directives: &DirectiveSet, working: &dyn Backend) -> Result<BTreeSet<String>> {
    let mut out = BTreeSet::new();
    for p in program.predicates() {
        match directives.table_for_predicate(&p) {
            Some(def) if def.mode == TableMode::Use => {
                out.insert(p);
            }
            Some(_) => {}
            None => {
                if working.exists(&p)? {
                    out.insert(p);
                }
            }
        }
    }
    Ok(out)
}

/// Resolves the binding of every predicate of `program` without changing
/// any database. `hints` gives column types for created tables whose types
/// the program leaves open (from the files their facts come from).
pub(crate) fn resolve(
    program: &Program,
    directives: &DirectiveSet,
    working: &dyn Backend,
    connector: &dyn Connector,
    hints: &BTreeMap<String, Vec<SqlType>>,
) -> Result<Bindings> {
    let predicates = program.predicates();
    let arity = |p: &str| program.arity_of(p).unwrap_or(0);
    let mut fixed = Bindings::default();
    let mut pending: Vec<(String, String, Vec<String>, Option<Vec<SqlType>>, BindingSource, bool)> = Vec::new();

    for def in &directives.tables {
        let pred = def.predicate().to_string();
        if !predicates.contains(&pred) {
            log::warn!("table `{}` is mapped to `{pred}`, which the program does not use", def.table);
            continue;
        }
        let n = arity(&pred).max(1);
        let declared = def.mapto.as_ref().and_then(|m| m.types.clone());
        if let Some(ts) = &declared {
            if ts.len() != n {
                return Err(Error::Binding(format!(
                    "MAPTO {pred} lists {} types but `{pred}` has arity {}",
                    ts.len(),
                    arity(&pred)
                )));
            }
        }
        let check_width = |cols: usize| {
            if cols == n {
                Ok(())
            } else {
                Err(Error::Binding(format!(
                    "table `{}` provides {cols} columns but `{pred}` has arity {}",
                    def.table,
                    arity(&pred)
                )))
            }
        };
        match (def.mode, &def.as_query, &def.from_db) {
            (TableMode::Create, _, _) => {
                let cols = def
                    .attrs
                    .clone()
                    .unwrap_or_else(|| RelationBinding::default_columns(arity(&pred)));
                check_width(cols.len())?;
                pending.push((pred, def.table.clone(), cols, declared, BindingSource::Generated, def.keep_after_execution));
            }
            (TableMode::Use, Some(sql), from) => {
                let source = match from {
                    Some(db) => connector.connect(db)?,
                    None => connector.connect(&directives.working_db)?,
                };
                let cols = match &def.attrs {
                    Some(a) => a.clone(),
                    None => source.query_columns(sql)?,
                };
                check_width(cols.len())?;
                pending.push((
                    pred,
                    def.table.clone(),
                    cols,
                    declared,
                    BindingSource::Query {
                        sql: sql.clone(),
                        from: from.clone(),
                    },
                    def.keep_after_execution,
                ));
            }
            (TableMode::Use, None, from) => {
                let external = from.as_ref().filter(|db| db.database != directives.working_db.database);
                let source = match external {
                    Some(db) => connector.connect(db)?,
                    None => connector.connect(&directives.working_db)?,
                };
                let available = source.relation_columns(&def.table)?.ok_or_else(|| {
                    Error::Binding(format!("table `{}` does not exist in database `{}`", def.table, source.name()))
                })?;
                let cols = columns_of(def, &available)?;
                check_width(cols.len())?;
                let (names, mut types): (Vec<String>, Vec<SqlType>) = cols.into_iter().unzip();
                if let Some(ts) = &declared {
                    types = ts.clone();
                }
                let (src, keep) = match external {
                    Some(db) => (BindingSource::External(db.clone()), def.keep_after_execution),
                    None => (BindingSource::Working, true),
                };
                fixed.insert(RelationBinding {
                    predicate: pred.clone(),
                    arity: arity(&pred),
                    table: def.table.clone(),
                    columns: names,
                    types,
                    source: src,
                    keep,
                });
            }
        }
    }

    for p in &predicates {
        if fixed.get(p).is_some() || pending.iter().any(|x| &x.0 == p) {
            continue;
        }
        if !p.starts_with(AUX_PREFIX) {
            if let Some(cols) = working.relation_columns(p)? {
                if cols.len() != arity(p).max(1) {
                    return Err(Error::Binding(format!(
                        "table `{p}` exists with {} columns but predicate `{p}` has arity {}",
                        cols.len(),
                        arity(p)
                    )));
                }
                let (names, types) = cols.into_iter().unzip();
                fixed.insert(RelationBinding {
                    predicate: p.clone(),
                    arity: arity(p),
                    table: p.clone(),
                    columns: names,
                    types,
                    source: BindingSource::Working,
                    keep: true,
                });
                continue;
            }
        }
        pending.push((
            p.clone(),
            p.clone(),
            RelationBinding::default_columns(arity(p)),
            None,
            BindingSource::Generated,
            false,
        ));
    }

    // declared types take part in inference like existing columns do
    let mut known = fixed.clone();
    for (pred, table, _, declared, _, _) in &pending {
        match (declared, hints.get(pred)) {
            (Some(ts), _) => known.insert(RelationBinding::generated(pred, table, ts.clone())),
            (None, Some(ts)) if ts.len() == arity(pred) => known.insert(RelationBinding::generated(pred, table, ts.clone())),
            _ => {}
        }
    }
    let inferred = infer_types(program, &known);
    let mut bindings = fixed;
    for (pred, table, columns, declared, source, keep) in pending {
        let mut types = declared.unwrap_or_else(|| inferred.get(&pred).cloned().unwrap_or_default());
        types.truncate(arity(&pred));
        if types.is_empty() {
            types.push(SqlType::Integer);
        }
        bindings.insert(RelationBinding {
            arity: arity(&pred),
            predicate: pred,
            table,
            columns,
            types,
            source,
            keep,
        });
    }
    check_collisions(&bindings)?;
    Ok(bindings)
}

fn check_collisions(bindings: &Bindings) -> Result<()> {
    let mut tables: BTreeMap<String, &str> = BTreeMap::new();
    for b in bindings.iter() {
        if let Some(other) = tables.insert(b.table.to_ascii_lowercase(), &b.predicate) {
            return Err(Error::Binding(format!(
                "predicates `{other}` and `{}` are both bound to table `{}`",
                b.predicate, b.table
            )));
        }
    }
    for b in bindings.iter() {
        for generated in [b.delta_table(), b.previous_delta_table()] {
            if let Some(other) = tables.get(&generated.to_ascii_lowercase()) {
                return Err(Error::Binding(format!(
                    "table `{generated}` of predicate `{other}` collides with a working table of `{}`",
                    b.predicate
                )));
            }
        }
    }
    Ok(())
}

pub(crate) fn create_table(db: &dyn Backend, name: &str, columns: &[(String, SqlType)]) -> Result<()> {
    let cols: Vec<String> = columns.iter().map(|(c, t)| format!("{} {t}", quote_ident(c))).collect();
    db.execute(&format!("CREATE TABLE {} ({})", quote_ident(name), cols.join(", ")))?;
    Ok(())
}

/// Converts a value for a column, failing when it does not fit.
pub(crate) fn coerce(v: Value, ty: SqlType, table: &str) -> Result<Value> {
    match (v, ty) {
        (Value::Int(i), SqlType::Varchar(_)) => Ok(Value::Str(i.to_string())),
        (Value::Str(s), SqlType::Integer) => match s.trim().parse::<i64>() {
            Ok(i) => Ok(Value::Int(i)),
            Err(_) => Err(Error::Input(format!("value `{s}` does not fit an integer column of `{table}`"))),
        },
        (v, _) => Ok(v),
    }
}

/// Creates or copies every table that is not already in the working
/// database. Returns the tables created, in creation order.
pub(crate) fn materialize(bindings: &Bindings, working: &dyn Backend, connector: &dyn Connector) -> Result<Vec<String>> {
    let mut created = Vec::new();
    for b in bindings.iter() {
        if b.source == BindingSource::Working {
            continue;
        }
        if working.exists(&b.table)? {
            if b.predicate.starts_with(AUX_PREFIX) {
                working.execute(&format!("DROP TABLE {}", quote_ident(&b.table)))?;
            } else {
                return Err(Error::Binding(format!(
                    "table `{}` for predicate `{}` already exists in the working database",
                    b.table, b.predicate
                )));
            }
        }
        create_table(working, &b.table, &b.column_types())?;
        created.push(b.table.clone());
        let (source, sql) = match &b.source {
            BindingSource::External(db) => {
                let cols: Vec<String> = b.columns.iter().map(|c| quote_ident(c)).collect();
                (
                    connector.connect(db)?,
                    format!("SELECT DISTINCT {} FROM {}", cols.join(", "), quote_ident(&b.table)),
                )
            }
            BindingSource::Query { sql, from } => {
                let db = match from {
                    Some(db) => connector.connect(db)?,
                    None => connector.connect(&crate::directives::ConnectionSpec::local(working.name()))?,
                };
                (db, format!("SELECT DISTINCT * FROM ({sql}) AS src"))
            }
            _ => continue,
        };
        if source.name() == working.name() {
            let cols: Vec<String> = b.columns.iter().map(|c| quote_ident(c)).collect();
            working.execute(&format!("INSERT INTO {} ({}) {sql}", quote_ident(&b.table), cols.join(", ")))?;
        } else {
            transfer(source.as_ref(), &sql, working, &b.table, &b.columns, &b.types)?;
        }
    }
    Ok(created)
}

const STAGE: &str = "aux__stage";

/// Rows moved between connections per batch.
const CHUNK: usize = 10_000;

/// Streams the rows of `sql` on `src` into `table` of another connection,
/// one batch at a time.
pub(crate) fn transfer(
    src: &dyn Backend,
    sql: &str,
    dst: &dyn Backend,
    table: &str,
    columns: &[String],
    types: &[SqlType],
) -> Result<u64> {
    let flush = |chunk: &mut Vec<Vec<Value>>| -> Result<u64> {
        let mut rows = chunk.drain(..).map(|r| {
            r.into_iter()
                .zip(types)
                .map(|(v, t)| coerce(v, *t, table))
                .collect::<Result<Vec<_>>>()
        });
        dst.insert_rows(table, columns, &mut rows)
    };
    let mut total = 0;
    let mut chunk = Vec::with_capacity(CHUNK);
    src.query_rows(sql, &mut |r| {
        chunk.push(r);
        if chunk.len() >= CHUNK {
            total += flush(&mut chunk)?;
        }
        Ok(())
    })?;
    total += flush(&mut chunk)?;
    Ok(total)
}

/// Adds rows to a predicate's table with set semantics: rows already in the
/// table and duplicates among the new rows are skipped. Returns the number
/// of rows added.
pub(crate) fn add_rows(
    working: &dyn Backend,
    b: &RelationBinding,
    rows: &mut dyn Iterator<Item = Result<Vec<Value>>>,
) -> Result<u64> {
    working.execute(&format!("DROP TABLE IF EXISTS {STAGE}"))?;
    create_table(working, STAGE, &b.column_types())?;
    if working.insert_rows(STAGE, &b.columns, rows)? == 0 {
        working.execute(&format!("DROP TABLE {STAGE}"))?;
        return Ok(0);
    }
    let cols: Vec<String> = b.columns.iter().map(|c| quote_ident(c)).collect();
    let cols = cols.join(", ");
    let t = quote_ident(&b.table);
    let n = working.execute(&format!(
        "INSERT INTO {t} ({cols}) SELECT DISTINCT {cols} FROM {STAGE} EXCEPT SELECT {cols} FROM {t}"
    ))?;
    working.execute(&format!("DROP TABLE {STAGE}"))?;
    Ok(n)
}

/// The rows of ground atoms, typed for the predicate's table.
pub(crate) fn fact_rows(b: &RelationBinding, facts: &[&Atom]) -> Result<Vec<Vec<Value>>> {
    facts
        .iter()
        .map(|f| {
            if b.is_placeholder() {
                return Ok(vec![Value::Int(1)]);
            }
            f.args
                .iter()
                .zip(&b.types)
                .map(|(t, ty)| {
                    let v = t.as_value().ok_or_else(|| Error::Input(format!("fact `{f}` is not ground")))?;
                    coerce(v, *ty, &b.table)
                })
                .collect()
        })
        .collect()
}

/// Reads a headerless CSV file of facts for one predicate, lazily.
pub(crate) fn csv_rows<'a>(
    b: &'a RelationBinding,
    path: &'a Path,
) -> Result<impl Iterator<Item = Result<Vec<Value>>> + 'a> {
    let reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    let width = b.arity.max(1);
    Ok(reader.into_records().map(move |rec| {
        let rec = rec.map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
        let line = rec.position().map_or(0, |p| p.line());
        let at = |msg: String| Error::Input(format!("{}:{line}: {msg}", path.display()));
        if rec.len() != width {
            return Err(at(format!("{} fields, but `{}` has arity {}", rec.len(), b.predicate, b.arity)));
        }
        rec.iter()
            .zip(&b.types)
            .map(|(field, ty)| {
                if field.is_empty() {
                    return Err(at("empty field (NULL values are not supported)".into()));
                }
                let v = match field.parse::<i64>() {
                    Ok(i) => Value::Int(i),
                    Err(_) => Value::Str(field.to_string()),
                };
                coerce(v, *ty, &b.table).map_err(|e| at(e.to_string()))
            })
            .collect()
    }))
}

/// Type of each column of a CSV file: integer when every field parses as one.
pub fn sniff_csv_types(path: &Path) -> Result<Vec<SqlType>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    let mut ints: Vec<bool> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
        if ints.is_empty() {
            ints = vec![true; rec.len()];
        }
        for (i, f) in rec.iter().enumerate() {
            if i < ints.len() && f.parse::<i64>().is_err() {
                ints[i] = false;
            }
        }
    }
    Ok(ints
        .into_iter()
        .map(|i| if i { SqlType::Integer } else { SqlType::DEFAULT_VARCHAR })
        .collect())
}
