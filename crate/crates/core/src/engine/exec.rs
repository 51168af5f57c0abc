//! Differential semi-naive evaluation of a rule plan.

use std::collections::BTreeMap;
use std::time::Instant;

use super::bind::create_table;
use super::{ComponentStats, RunOptions};
use crate::backend::Backend;
use crate::error::{Error, Result};
use crate::sql::{quote_ident, render, BackendProfile, Bindings, ComponentPlan, Role, SqlStatement, Statement};

pub(crate) struct Executor<'a> {
    pub db: &'a dyn Backend,
    pub profile: BackendProfile,
    pub bindings: &'a Bindings,
    pub options: &'a RunOptions,
    pub deadline: Option<Instant>,
    /// Rows written by rule statements, per head predicate.
    pub inserted: BTreeMap<String, u64>,
    /// Generated tables and views to drop afterwards.
    pub scratch: Vec<Statement>,
}

impl Executor<'_> {
    fn run(&mut self, s: &SqlStatement) -> Result<u64> {
        let n = match &s.statement {
            // One statement per branch: each compound operand costs the
            // backend a temporary b-tree, and a pass never reads the rows it
            // writes, so the branches may run one after the other.
            Statement::Insert { table, query } if s.role == Role::DeltaRule => match query.union_branches() {
                Some(branches) => {
                    let mut n = 0;
                    for query in branches {
                        let branch = Statement::Insert {
                            table: table.clone(),
                            query,
                        };
                        n += self.db.execute(&render(&branch, &self.profile))?;
                    }
                    n
                }
                None => self.db.execute(&s.render(&self.profile))?,
            },
            _ => self.db.execute(&s.render(&self.profile))?,
        };
        *self.inserted.entry(s.predicate.clone()).or_default() += n;
        Ok(n)
    }

    fn exec(&self, statement: Statement) -> Result<u64> {
        self.db.execute(&render(&statement, &self.profile))
    }

    fn check_deadline(&self) -> Result<()> {
        match self.deadline {
            Some(d) if Instant::now() >= d => Err(Error::Timeout),
            _ => Ok(()),
        }
    }

    /// Tables of the component's predicates that have rules.
    fn tables(&self, c: &ComponentPlan) -> Result<Vec<(String, String, String, Vec<String>)>> {
        let mut out = Vec::new();
        for p in &c.predicates {
            let Some(b) = self.bindings.get(p) else { continue };
            if c.delta.iter().any(|s| &s.predicate == p) || c.exit.iter().any(|s| &s.predicate == p) {
                out.push((b.table.clone(), b.delta_table(), b.previous_delta_table(), b.columns.clone()));
            }
        }
        Ok(out)
    }

    pub fn component(&mut self, c: &ComponentPlan) -> Result<ComponentStats> {
        let started = Instant::now();
        for v in &c.views {
            self.exec(Statement::DropView { name: v.target.clone() })?;
            self.scratch.push(Statement::DropView { name: v.target.clone() });
            self.run(v)?;
        }
        let mut stats = ComponentStats {
            predicates: c.predicates.clone(),
            recursive: c.recursive,
            iterations: 0,
            delta_sizes: Vec::new(),
            millis: 0,
        };
        for s in &c.exit {
            self.check_deadline()?;
            self.run(s)?;
        }
        if !c.delta.is_empty() {
            self.fixpoint(c, &mut stats)?;
        }
        if self.options.verify {
            self.verify_closed(c)?;
        }
        stats.millis = started.elapsed().as_millis() as u64;
        Ok(stats)
    }

    fn fixpoint(&mut self, c: &ComponentPlan, stats: &mut ComponentStats) -> Result<()> {
        let tables = self.tables(c)?;
        for (table, d, d1, _) in &tables {
            let b = self.bindings.by_table(table).expect("bound table");
            for t in [d, d1] {
                self.exec(Statement::DropTable { name: t.clone() })?;
                create_table(self.db, t, &b.column_types())?;
                self.scratch.push(Statement::DropTable { name: t.clone() });
            }
            self.db
                .execute(&format!("INSERT INTO {} SELECT * FROM {}", quote_ident(d1), quote_ident(table)))?;
        }
        let mut sizes: Vec<u64> = tables.iter().map(|(t, ..)| self.db.count(t)).collect::<Result<_>>()?;
        loop {
            self.check_deadline()?;
            if stats.iterations >= self.options.max_iterations {
                return Err(Error::IterationBudget(self.options.max_iterations));
            }
            for (_, d, _, _) in &tables {
                self.exec(Statement::DeleteAll { table: d.clone() })?;
            }
            let mut new = 0;
            for s in &c.delta {
                new += self.run(s)?;
            }
            stats.iterations += 1;
            stats.delta_sizes.push(new);
            if self.options.verify {
                self.verify_pass(&tables, &mut sizes)?;
            }
            // the first pass starts with the previous delta equal to the
            // relation itself, so there is nothing to fold in
            if stats.iterations > 1 {
                for (t, _, d1, _) in &tables {
                    self.db
                        .execute(&format!("INSERT INTO {} SELECT * FROM {}", quote_ident(t), quote_ident(d1)))?;
                }
            }
            for (_, d, d1, _) in &tables {
                self.exec(Statement::DeleteAll { table: d1.clone() })?;
                self.db
                    .execute(&format!("INSERT INTO {} SELECT * FROM {}", quote_ident(d1), quote_ident(d)))?;
            }
            log::debug!("component {{{}}} pass {}: {new} new tuples", c.predicates.join(", "), stats.iterations);
            if new == 0 {
                break;
            }
        }
        if !self.options.keep_temp {
            for (_, d, d1, _) in &tables {
                self.exec(Statement::DropTable { name: d.clone() })?;
                self.exec(Statement::DropTable { name: d1.clone() })?;
            }
        }
        Ok(())
    }

    /// New tuples are disjoint from the relation and the previous delta,
    /// and relations never shrink.
    fn verify_pass(&self, tables: &[(String, String, String, Vec<String>)], sizes: &mut [u64]) -> Result<()> {
        for (i, (t, d, d1, _)) in tables.iter().enumerate() {
            for other in [t, d1] {
                let n = self.db.query_count(&format!(
                    "SELECT COUNT(*) FROM (SELECT * FROM {} INTERSECT SELECT * FROM {}) AS common",
                    quote_ident(d),
                    quote_ident(other)
                ))?;
                if n > 0 {
                    return Err(Error::Invariant(format!("{n} tuples of `{d}` are already in `{other}`")));
                }
            }
            let now = self.db.count(t)?;
            if now < sizes[i] {
                return Err(Error::Invariant(format!("`{t}` shrank from {} to {now} tuples", sizes[i])));
            }
            sizes[i] = now;
        }
        Ok(())
    }

    /// Every rule of the component derives nothing outside the final relations.
    fn verify_closed(&self, c: &ComponentPlan) -> Result<()> {
        for s in &c.checks {
            let Statement::Select(q) = &s.statement else { continue };
            let sql = format!(
                "SELECT COUNT(*) FROM ({}) AS missing",
                render(&Statement::Select(q.clone()), &self.profile)
            );
            let n = self.db.query_count(&sql)?;
            if n > 0 {
                return Err(Error::Invariant(format!(
                    "rule {} derives {n} tuples missing from `{}` after convergence",
                    s.rule.map_or(0, |r| r + 1),
                    s.target
                )));
            }
        }
        Ok(())
    }
}
