//! The evaluation pipeline: analysis, binding, translation, fixpoint
//! execution, outputs and cleanup.

pub(crate) mod bind;
mod exec;

pub use bind::sniff_csv_types;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use crate::analysis::{analyze, Analyzed, Goal, AUX_PREFIX};
use crate::ast::{Program, Term, Value};
use crate::backend::{Backend, Connector};
use crate::check::RANGE_TABLE;
use crate::directives::{DirectiveSet, OutputDirective, QueryTarget, SqlType, WriteMode};
use crate::error::{Error, Result};
use crate::sql::{quote_ident, translate_program, BackendProfile, BindingSource, Bindings, RelationBinding, RulePlan, Statement};

/// Which relations to read back before temporary tables are dropped.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum Collect {
    Nothing,
    /// The rows answering the query, if there is one.
    #[default]
    Goal,
    /// Every predicate defined by a rule, generated ones excluded.
    Derived,
    Only(Vec<String>),
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Keep generated tables and views after the run.
    pub keep_temp: bool,
    /// Check the fixpoint invariants after every pass and closure at the end.
    pub verify: bool,
    pub timeout: Option<Duration>,
    /// Maximum number of passes per recursive component.
    pub max_iterations: u64,
    pub collect: Collect,
    /// Extra facts: predicate and headerless CSV file.
    pub facts: Vec<(String, PathBuf)>,
    /// Overrides the `QUERY` directive.
    pub goal: Option<QueryTarget>,
    /// Allow the rewrite that pushes query constants into recursion.
    pub seed: bool,
    /// Read back at most this many answer rows (the smallest ones); the
    /// count still covers all of them.
    pub answer_limit: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            keep_temp: false,
            verify: false,
            timeout: None,
            max_iterations: 1_000_000,
            collect: Collect::Goal,
            facts: Vec::new(),
            goal: None,
            seed: true,
            answer_limit: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentStats {
    pub predicates: Vec<String>,
    pub recursive: bool,
    /// Passes of the differential loop, the last (empty) one included.
    pub iterations: u64,
    /// New tuples found by each pass.
    pub delta_sizes: Vec<u64>,
    pub millis: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Phases {
    pub analyze: Duration,
    pub load: Duration,
    pub evaluate: Duration,
    pub output: Duration,
    pub cleanup: Duration,
}

#[derive(Debug, Clone, Default)]
pub struct EvaluationResult {
    /// Seed predicate, when the query's constants were pushed into recursion.
    pub seeded: Option<String>,
    pub components: Vec<ComponentStats>,
    /// Tuples per predicate at the fixpoint, before any goal filtering.
    pub sizes: BTreeMap<String, u64>,
    /// Rows written by rule statements, per head predicate.
    pub inserted: BTreeMap<String, u64>,
    /// The query's answer rows, when collected.
    pub answers: Option<Vec<Vec<Value>>>,
    pub answer_count: Option<u64>,
    pub relations: BTreeMap<String, Vec<Vec<Value>>>,
    pub phases: Phases,
}

impl EvaluationResult {
    /// Total rows written by rule statements, over all predicates.
    pub fn intermediate_rows(&self) -> u64 {
        self.inserted.values().sum()
    }

    /// Passes of the differential loop over all recursive components.
    pub fn iterations(&self) -> u64 {
        self.components.iter().map(|c| c.iterations).sum()
    }
}

/// A program translated against a database, ready to run.
pub struct Prepared {
    pub analyzed: Analyzed,
    pub bindings: Bindings,
    pub plan: RulePlan,
    pub profile: BackendProfile,
    pub goal: Option<Goal>,
}

impl Prepared {
    /// The statements as they will run on the backend.
    pub fn script(&self) -> String {
        self.plan.script(&self.profile)
    }

    /// The statements in the parenthesized standard form, keeping the
    /// backend's dialect.
    pub fn standard_script(&self) -> String {
        let profile = BackendProfile {
            nesting: crate::sql::Nesting::Parenthesized,
            ..self.profile
        };
        self.plan.script(&profile)
    }
}

pub struct Engine<'c> {
    connector: &'c dyn Connector,
}

fn goal_of(program: &Program, target: &QueryTarget) -> Result<Goal> {
    let arity = program
        .arity_of(&target.name)
        .ok_or_else(|| Error::Binding(format!("QUERY names `{}`, which the program does not use", target.name)))?;
    let args = match &target.args {
        Some(args) if args.len() != arity => {
            return Err(Error::Binding(format!(
                "QUERY {} has {} arguments but the predicate has arity {arity}",
                target.name,
                args.len()
            )))
        }
        Some(args) => args.clone(),
        None => (1..=arity).map(|i| Term::var(format!("V{i}"))).collect(),
    };
    Ok(Goal {
        predicate: target.name.clone(),
        args,
    })
}

/// `WHERE` conditions selecting the rows matching the goal's constants.
fn goal_filter(b: &RelationBinding, goal: &Goal) -> String {
    let conds: Vec<String> = goal
        .bound()
        .into_iter()
        .map(|(i, v)| {
            let lit = match bind::coerce(v.clone(), b.types[i], &b.table).unwrap_or(v) {
                Value::Int(n) => n.to_string(),
                Value::Str(s) => format!("'{}'", s.replace('\'', "''")),
            };
            format!("{} = {lit}", quote_ident(&b.columns[i]))
        })
        .collect();
    conds.join(" AND ")
}

fn select_all(b: &RelationBinding, filter: Option<&str>) -> String {
    let cols: Vec<String> = b.columns.iter().map(|c| quote_ident(c)).collect();
    let mut sql = format!("SELECT {} FROM {}", cols.join(", "), quote_ident(&b.table));
    if let Some(f) = filter.filter(|f| !f.is_empty()) {
        sql.push_str(" WHERE ");
        sql.push_str(f);
    }
    sql
}

fn read_rows(db: &dyn Backend, b: &RelationBinding, filter: Option<&str>, limit: Option<usize>) -> Result<Vec<Vec<Value>>> {
    let mut rows = Vec::new();
    let mut sql = select_all(b, filter);
    if let Some(n) = limit {
        let order: Vec<String> = (1..=b.columns.len().max(1)).map(|i| i.to_string()).collect();
        sql = format!("SELECT * FROM ({sql}) AS limited ORDER BY {} LIMIT {n}", order.join(", "));
    }
    db.query_rows(&sql, &mut |mut r| {
        if b.is_placeholder() {
            r.clear();
        }
        rows.push(r);
        Ok(())
    })?;
    rows.sort();
    Ok(rows)
}

impl<'c> Engine<'c> {
    pub fn new(connector: &'c dyn Connector) -> Self {
        Engine { connector }
    }

    /// Analyzes, binds and translates without changing any database.
    pub fn prepare(&self, program: &Program, directives: &DirectiveSet, options: &RunOptions) -> Result<Prepared> {
        let working = self.connector.connect(&directives.working_db)?;
        let target = options.goal.as_ref().or(directives.query.as_ref());
        let goal = target.map(|t| goal_of(program, t)).transpose()?;
        let mut frozen = bind::used_predicates(program, directives, working.as_ref())?;
        frozen.extend(options.facts.iter().map(|(p, _)| p.clone()));
        let seed_goal = goal.as_ref().filter(|g| options.seed && !g.bound().is_empty());
        let analyzed = analyze(program, seed_goal, &frozen)?;

        let mut hints: BTreeMap<String, Vec<SqlType>> = BTreeMap::new();
        for (p, path) in &options.facts {
            if analyzed.program.arity_of(p).is_none() {
                return Err(Error::Input(format!("facts given for `{p}`, which the program does not use")));
            }
            let mut types = sniff_csv_types(path)?;
            for fact in analyzed.program.facts.iter().filter(|f| &f.predicate == p) {
                for (i, t) in fact.args.iter().enumerate() {
                    if matches!(t, Term::Str(_)) && i < types.len() {
                        types[i] = SqlType::DEFAULT_VARCHAR;
                    }
                }
            }
            hints.insert(p.clone(), types);
        }
        let bindings = bind::resolve(&analyzed.program, directives, working.as_ref(), self.connector, &hints)?;
        let profile = working.profile().with_like(directives.system_like);
        let plan = translate_program(&analyzed.program, &analyzed.plan, &bindings, &profile)?;
        Ok(Prepared {
            analyzed,
            bindings,
            plan,
            profile,
            goal,
        })
    }

    /// Evaluates `program` under `directives` and performs the outputs.
    pub fn run(&self, program: &Program, directives: &DirectiveSet, options: &RunOptions) -> Result<EvaluationResult> {
        let started = Instant::now();
        let deadline = options.timeout.map(|t| started + t);
        let prepared = self.prepare(program, directives, options)?;
        let working = self.connector.connect(&directives.working_db)?;
        let mut result = EvaluationResult {
            seeded: prepared.analyzed.seeded.clone(),
            ..Default::default()
        };
        result.phases.analyze = started.elapsed();

        working.set_deadline(deadline);
        let mut created: Vec<String> = Vec::new();
        let mut scratch: Vec<Statement> = Vec::new();
        let outcome = self.evaluate(&prepared, options, working.as_ref(), deadline, &mut result, &mut created, &mut scratch);
        working.set_deadline(None);
        let outcome = outcome.and_then(|()| {
            let t = Instant::now();
            let r = self.outputs(&prepared, directives, working.as_ref());
            result.phases.output = t.elapsed();
            r
        });

        let t = Instant::now();
        let kept = match &outcome {
            Ok(kept) => kept.clone(),
            Err(_) => BTreeSet::new(),
        };
        if !options.keep_temp {
            let cleanup = self.cleanup(&prepared.bindings, working.as_ref(), &created, &scratch, &kept);
            if let Err(e) = &cleanup {
                log::warn!("cleanup failed: {e}");
            }
            if outcome.is_ok() {
                cleanup?;
            }
        }
        result.phases.cleanup = t.elapsed();
        outcome.map(|_| result)
    }

    fn evaluate(
        &self,
        prepared: &Prepared,
        options: &RunOptions,
        working: &dyn Backend,
        deadline: Option<Instant>,
        result: &mut EvaluationResult,
        created: &mut Vec<String>,
        scratch: &mut Vec<Statement>,
    ) -> Result<()> {
        working.begin()?;
        let r = (|| {
            let t = Instant::now();
            created.extend(bind::materialize(&prepared.bindings, working, self.connector)?);
            self.load_facts(prepared, options, working)?;
            if prepared.plan.uses_range {
                working.execute(&format!("DROP TABLE IF EXISTS {RANGE_TABLE}"))?;
                bind::create_table(working, RANGE_TABLE, &[("att_1".to_string(), SqlType::Integer)])?;
                scratch.push(Statement::DropTable {
                    name: RANGE_TABLE.to_string(),
                });
                let maxint = prepared.analyzed.program.maxint as i64;
                let mut rows = (0..=maxint).map(|i| Ok(vec![Value::Int(i)]));
                working.insert_rows(RANGE_TABLE, &["att_1".to_string()], &mut rows)?;
            }
            result.phases.load = t.elapsed();

            let t = Instant::now();
            let mut exec = exec::Executor {
                db: working,
                profile: prepared.profile,
                bindings: &prepared.bindings,
                options,
                deadline,
                inserted: BTreeMap::new(),
                scratch: Vec::new(),
            };
            let mut failure = None;
            for c in &prepared.plan.components {
                match exec.component(c) {
                    Ok(stats) => result.components.push(stats),
                    Err(e) => {
                        failure = Some(e);
                        break;
                    }
                }
            }
            scratch.append(&mut exec.scratch);
            result.inserted = exec.inserted;
            if let Some(e) = failure {
                return Err(e);
            }
            for b in prepared.bindings.iter() {
                result.sizes.insert(b.predicate.clone(), working.count(&b.table)?);
            }
            self.finish_goal(prepared, working, result)?;
            result.phases.evaluate = t.elapsed();

            self.collect(prepared, options, working, result)?;
            Ok(())
        })();
        match r {
            Ok(()) => working.commit(),
            Err(e) => {
                if let Err(rb) = working.rollback() {
                    log::warn!("rollback failed: {rb}");
                }
                Err(e)
            }
        }
    }

    fn load_facts(&self, prepared: &Prepared, options: &RunOptions, working: &dyn Backend) -> Result<()> {
        let program = &prepared.analyzed.program;
        let mut by_pred: BTreeMap<&str, Vec<&crate::ast::Atom>> = BTreeMap::new();
        for f in &program.facts {
            by_pred.entry(&f.predicate).or_default().push(f);
        }
        for (p, facts) in by_pred {
            let b = prepared.bindings.get(p).expect("bound predicate");
            let rows = bind::fact_rows(b, &facts)?;
            bind::add_rows(working, b, &mut rows.into_iter().map(Ok))?;
        }
        for (p, path) in &options.facts {
            let b = prepared.bindings.get(p).expect("bound predicate");
            let n = bind::add_rows(working, b, &mut bind::csv_rows(b, path)?)?;
            log::info!("loaded {n} facts for `{p}` from {}", path.display());
        }
        Ok(())
    }

    /// Restricts the query predicate to its bound constants when the
    /// rewrite did not already do so.
    fn finish_goal(&self, prepared: &Prepared, working: &dyn Backend, result: &mut EvaluationResult) -> Result<()> {
        let Some(goal) = &prepared.goal else { return Ok(()) };
        let b = prepared.bindings.get(&goal.predicate).expect("bound goal");
        let filter = goal_filter(b, goal);
        if prepared.analyzed.seeded.is_none() && !filter.is_empty() && b.source == BindingSource::Generated {
            working.execute(&format!("DELETE FROM {} WHERE NOT ({filter})", quote_ident(&b.table)))?;
        }
        let count_sql = format!("SELECT COUNT(*) FROM ({}) AS answers", select_all(b, Some(&filter)));
        result.answer_count = Some(working.query_count(&count_sql)?);
        Ok(())
    }

    fn collect(&self, prepared: &Prepared, options: &RunOptions, working: &dyn Backend, result: &mut EvaluationResult) -> Result<()> {
        let program = &prepared.analyzed.program;
        let names: Vec<String> = match &options.collect {
            Collect::Nothing => Vec::new(),
            Collect::Goal => Vec::new(),
            Collect::Derived => program
                .idb_predicates()
                .into_iter()
                .filter(|p| !p.starts_with(AUX_PREFIX))
                .map(str::to_string)
                .collect(),
            Collect::Only(ps) => ps.clone(),
        };
        for p in names {
            let b = prepared
                .bindings
                .get(&p)
                .ok_or_else(|| Error::Input(format!("no predicate `{p}` to read back")))?;
            result.relations.insert(p.clone(), read_rows(working, b, None, None)?);
        }
        if options.collect != Collect::Nothing {
            if let Some(goal) = &prepared.goal {
                let b = prepared.bindings.get(&goal.predicate).expect("bound goal");
                result.answers = Some(read_rows(working, b, Some(&goal_filter(b, goal)), options.answer_limit)?);
            }
        }
        Ok(())
    }

    /// Performs OUTPUT and DBOUTPUT. Returns tables of the working database
    /// that became outputs and must survive cleanup.
    fn outputs(&self, prepared: &Prepared, directives: &DirectiveSet, working: &dyn Backend) -> Result<BTreeSet<String>> {
        let mut kept = BTreeSet::new();
        let filter_for = |b: &RelationBinding| -> Option<String> {
            let goal = prepared.goal.as_ref()?;
            (goal.predicate == b.predicate).then(|| goal_filter(b, goal))
        };
        for o in &directives.outputs {
            match o {
                OutputDirective::Output {
                    mode,
                    predicate,
                    alias,
                    target,
                } => {
                    let b = prepared.bindings.get(predicate).ok_or_else(|| {
                        Error::Binding(format!("OUTPUT names `{predicate}`, which the program does not use"))
                    })?;
                    let db_spec = target.clone().unwrap_or_else(|| directives.working_db.clone());
                    let dest = alias.clone().unwrap_or_else(|| predicate.clone());
                    let same_db = db_spec.database == directives.working_db.database;
                    if same_db && dest.eq_ignore_ascii_case(&b.table) {
                        kept.insert(b.table.to_ascii_lowercase());
                        continue;
                    }
                    let db = self.connector.connect(&db_spec)?;
                    copy_relation(working, b, filter_for(b).as_deref(), db.as_ref(), &dest, mode.unwrap_or_default())?;
                    if same_db {
                        kept.insert(dest.to_ascii_lowercase());
                    }
                }
                OutputDirective::DbOutput(spec) => {
                    if spec.database == directives.working_db.database {
                        for b in prepared.bindings.iter().filter(|b| !b.predicate.starts_with(AUX_PREFIX)) {
                            kept.insert(b.table.to_ascii_lowercase());
                        }
                        continue;
                    }
                    let db = self.connector.connect(spec)?;
                    for b in prepared.bindings.iter().filter(|b| !b.predicate.starts_with(AUX_PREFIX)) {
                        copy_relation(working, b, filter_for(b).as_deref(), db.as_ref(), &b.table, WriteMode::Overwrite)?;
                    }
                }
            }
        }
        Ok(kept)
    }

    fn cleanup(
        &self,
        bindings: &Bindings,
        working: &dyn Backend,
        created: &[String],
        scratch: &[Statement],
        kept: &BTreeSet<String>,
    ) -> Result<()> {
        let profile = working.profile();
        let mut first_error = None;
        let mut run = |sql: String| {
            if let Err(e) = working.execute(&sql) {
                log::warn!("cleanup: {e}");
                first_error.get_or_insert(e);
            }
        };
        for s in scratch.iter().filter(|s| matches!(s, Statement::DropView { .. })) {
            run(crate::sql::render(s, &profile));
        }
        for s in scratch.iter().filter(|s| !matches!(s, Statement::DropView { .. })) {
            run(crate::sql::render(s, &profile));
        }
        for table in created.iter().rev() {
            let keep = bindings.by_table(table).is_some_and(|b| b.keep) || kept.contains(&table.to_ascii_lowercase());
            if !keep {
                run(crate::sql::render(&Statement::DropTable { name: table.clone() }, &profile));
            }
        }
        match first_error {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

/// Copies a relation into `dest` of another (or the same) database. Appending
/// keeps whatever `dest` already holds, duplicates included.
fn copy_relation(
    src: &dyn Backend,
    b: &RelationBinding,
    filter: Option<&str>,
    db: &dyn Backend,
    dest: &str,
    mode: WriteMode,
) -> Result<u64> {
    let exists = db.exists(dest)?;
    if exists && mode == WriteMode::Overwrite {
        db.execute(&format!("DROP TABLE {}", quote_ident(dest)))?;
    }
    let (columns, types) = if exists && mode == WriteMode::Append {
        let cols = db.relation_columns(dest)?.unwrap_or_default();
        if cols.len() != b.columns.len() {
            return Err(Error::Binding(format!(
                "cannot append to `{dest}`: it has {} columns, `{}` has {}",
                cols.len(),
                b.predicate,
                b.columns.len()
            )));
        }
        cols.into_iter().unzip()
    } else {
        bind::create_table(db, dest, &b.column_types())?;
        (b.columns.clone(), b.types.clone())
    };
    let select = select_all(b, filter);
    if src.name() == db.name() {
        let cols: Vec<String> = columns.iter().map(|c| quote_ident(c)).collect();
        return db.execute(&format!("INSERT INTO {} ({}) {select}", quote_ident(dest), cols.join(", ")));
    }
    bind::transfer(src, &select, db, dest, &columns, &types)
}
