use std::fmt::Write as _;

use super::*;
use crate::analysis::StratumPlan;
use crate::ast::{Atom, Program};
use crate::check::RANGE_TABLE;
use crate::error::{Error, Result};

/// Statements of one component, in execution order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentPlan {
    /// Position in the stratum plan.
    pub index: usize,
    pub recursive: bool,
    pub predicates: Vec<String>,
    /// Aggregate views read by the component's rules.
    pub views: Vec<SqlStatement>,
    /// Exit rules, run once into the predicates' tables.
    pub exit: Vec<SqlStatement>,
    /// Differential rules of a recursive component, one per rule, writing
    /// the `d_` tables.
    pub delta: Vec<SqlStatement>,
    /// One check per rule over the complete relations.
    pub checks: Vec<SqlStatement>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RulePlan {
    pub components: Vec<ComponentPlan>,
    /// Whether any statement reads the `#maxint` range table.
    pub uses_range: bool,
}

impl RulePlan {
    /// Every statement, components in order, each followed by a `;`, with
    /// a comment line per component.
    pub fn script(&self, profile: &BackendProfile) -> String {
        let mut out = String::new();
        for c in &self.components {
            let kind = if c.recursive { "recursive" } else { "non-recursive" };
            let _ = writeln!(out, "-- component {}: {{{}}} {kind}", c.index + 1, c.predicates.join(", "));
            for s in c.views.iter().chain(&c.exit) {
                let _ = writeln!(out, "{};", s.render(profile));
            }
            if !c.delta.is_empty() {
                let _ = writeln!(out, "-- differential rules, evaluated until no new tuples");
            }
            for s in &c.delta {
                let _ = writeln!(out, "{};", s.render(profile));
            }
        }
        out
    }

    pub fn statements(&self) -> impl Iterator<Item = &SqlStatement> {
        self.components
            .iter()
            .flat_map(|c| c.views.iter().chain(&c.exit).chain(&c.delta))
    }
}

fn reads_range(q: &Query) -> bool {
    match q {
        Query::Select(s) => s.from.iter().any(|f| f.table == RANGE_TABLE),
        Query::Table { .. } => false,
        Query::Except(l, r) => reads_range(l) || reads_range(r),
        Query::Union(qs) => qs.iter().any(reads_range),
    }
}

fn check_identifier(name: &str, profile: &BackendProfile) -> Result<()> {
    match profile.max_identifier {
        Some(max) if name.len() > max => Err(Error::Translate(format!(
            "identifier `{name}` is longer than the {max} characters the backend accepts"
        ))),
        _ => Ok(()),
    }
}

/// Translates every rule of `program` following `plan`.
pub fn translate_program(
    program: &Program,
    plan: &StratumPlan,
    bindings: &Bindings,
    profile: &BackendProfile,
) -> Result<RulePlan> {
    let t = Translator::new(program, bindings, *profile)?;
    let full = |_: usize, a: &Atom| bindings.get(&a.predicate).map(|b| b.table.clone()).unwrap_or_default();
    let mut components = Vec::new();
    let mut uses_range = false;

    for (ci, comp) in plan.components.iter().enumerate() {
        if !comp.has_rules() {
            continue;
        }
        let mut cp = ComponentPlan {
            index: ci,
            recursive: comp.recursive,
            predicates: comp.predicates.clone(),
            views: Vec::new(),
            exit: Vec::new(),
            delta: Vec::new(),
            checks: Vec::new(),
        };
        let mut rules: Vec<usize> = comp.exit_rules.iter().chain(&comp.recursive_rules).copied().collect();
        rules.sort_unstable();
        for &ri in &rules {
            for v in t.views_of(ri) {
                check_identifier(&v.name, profile)?;
                cp.views.push(SqlStatement {
                    role: Role::AggregateView,
                    predicate: program.rules[ri].head.predicate.clone(),
                    target: v.name.clone(),
                    rule: Some(ri),
                    statement: v.statement.clone(),
                });
            }
        }

        for &ri in &rules {
            let rule = &program.rules[ri];
            let head = t.binding(&rule.head.predicate)?;
            let query = Query::Select(t.select(ri, &full)?).except(Query::table(&head.table, &head.columns));
            cp.checks.push(SqlStatement {
                role: Role::FixpointCheck,
                predicate: rule.head.predicate.clone(),
                target: head.table.clone(),
                rule: Some(ri),
                statement: Statement::Select(query),
            });
        }

        for &ri in &comp.exit_rules {
            let rule = &program.rules[ri];
            let head = t.binding(&rule.head.predicate)?;
            check_identifier(&head.table, profile)?;
            let query = Query::Select(t.select(ri, &full)?).except(Query::table(&head.table, &head.columns));
            uses_range |= reads_range(&query);
            cp.exit.push(SqlStatement {
                role: Role::ExitRule,
                predicate: rule.head.predicate.clone(),
                target: head.table.clone(),
                rule: Some(ri),
                statement: Statement::Insert {
                    table: head.table.clone(),
                    query,
                },
            });
        }

        for &ri in &comp.recursive_rules {
            let rule = &program.rules[ri];
            let head = t.binding(&rule.head.predicate)?;
            let delta = head.delta_table();
            let previous = head.previous_delta_table();
            check_identifier(&previous, profile)?;
            let r = rule.positive_atoms().filter(|a| comp.contains(&a.predicate)).count();
            if r == 0 {
                return Err(Error::Translate(format!("rule `{rule}` has no recursive body atom")));
            }
            if r >= usize::BITS as usize - 1 {
                return Err(Error::Translate(format!("rule `{rule}` has too many recursive body atoms")));
            }
            // occurrence index -> rank among the recursive occurrences
            let ranks: Vec<Option<usize>> = {
                let mut k = 0;
                rule.positive_atoms()
                    .map(|a| {
                        comp.contains(&a.predicate).then(|| {
                            k += 1;
                            k - 1
                        })
                    })
                    .collect()
            };
            let mut branches = Vec::new();
            for mask in 1usize..(1 << r) {
                let choose = |occ: usize, a: &Atom| {
                    let b = bindings.get(&a.predicate).expect("bound predicate");
                    match ranks[occ] {
                        Some(k) if mask >> k & 1 == 1 => b.previous_delta_table(),
                        _ => b.table.clone(),
                    }
                };
                let select = t.select(ri, &choose)?;
                branches.push(Query::Select(select).except(Query::table(&delta, &head.columns)));
            }
            let union = if branches.len() == 1 {
                branches.pop().unwrap()
            } else {
                Query::Union(branches)
            };
            let query = union
                .except(Query::table(&previous, &head.columns))
                .except(Query::table(&head.table, &head.columns));
            if let Some(max) = profile.max_compound {
                if query.compound_terms() > max {
                    return Err(Error::Translate(format!(
                        "rule `{rule}` needs {} compound terms; the backend accepts {max}",
                        query.compound_terms()
                    )));
                }
            }
            uses_range |= reads_range(&query);
            cp.delta.push(SqlStatement {
                role: Role::DeltaRule,
                predicate: rule.head.predicate.clone(),
                target: delta.clone(),
                rule: Some(ri),
                statement: Statement::Insert { table: delta, query },
            });
        }
        components.push(cp);
    }
    Ok(RulePlan {
        components,
        uses_range,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{analyze, Goal};
    use crate::parser::parse_program;

    fn plan(text: &str) -> RulePlan {
        let p = parse_program(text).unwrap();
        let a = analyze(&p, None::<&Goal>, &Default::default()).unwrap();
        let b = Bindings::defaults_for(&a.program);
        translate_program(&a.program, &a.plan, &b, &BackendProfile::STANDARD).unwrap()
    }

    #[test]
    fn non_linear_reachability() {
        let p = plan("reachable(X,Y) :- edge(X,Y).\nreachable(X,Y) :- reachable(X,Z), reachable(Z,Y).");
        assert_eq!(p.components.len(), 1);
        let c = &p.components[0];
        assert_eq!(
            c.exit[0].render(&BackendProfile::STANDARD),
            "INSERT INTO reachable (SELECT edge.att_1 AS att_1, edge.att_2 AS att_2 FROM edge \
             EXCEPT (SELECT * FROM reachable))"
        );
        let d = &c.delta[0];
        assert_eq!(d.target, "d_reachable");
        let Statement::Insert { query, .. } = &d.statement else { panic!() };
        assert_eq!(query.branch_count(), 3);
        let s = d.render(&BackendProfile::STANDARD);
        assert!(s.starts_with(
            "INSERT INTO d_reachable ((SELECT d1_reachable.att_1 AS att_1, reachable.att_2 AS att_2 \
             FROM d1_reachable, reachable WHERE d1_reachable.att_2 = reachable.att_1 EXCEPT (SELECT * FROM d_reachable)) UNION"
        ), "{s}");
        assert!(s.ends_with("EXCEPT (SELECT * FROM d1_reachable) EXCEPT (SELECT * FROM reachable))"));
    }

    #[test]
    fn branches_grow_exponentially_and_are_limited() {
        let body: Vec<String> = (0..9).map(|i| format!("t(X{i}, X{})", i + 1)).collect();
        let text = format!("t(X,Y) :- e(X,Y).\nt(X0,X9) :- {}.", body.join(", "));
        let p = parse_program(&text).unwrap();
        let a = analyze(&p, None::<&Goal>, &Default::default()).unwrap();
        let b = Bindings::defaults_for(&a.program);
        let ok = translate_program(&a.program, &a.plan, &b, &BackendProfile::STANDARD).unwrap();
        let Statement::Insert { query, .. } = &ok.components[0].delta[0].statement else { panic!() };
        assert_eq!(query.branch_count(), 511);
        let err = translate_program(&a.program, &a.plan, &b, &BackendProfile::SQLITE).unwrap_err();
        assert!(err.to_string().contains("compound"), "{err}");
    }

    #[test]
    fn identifier_limits() {
        let name = "a".repeat(29);
        let text = format!("{name}(X) :- e(X).\n{name}(X) :- {name}(Y), e2(Y, X).");
        let p = parse_program(&text).unwrap();
        let a = analyze(&p, None::<&Goal>, &Default::default()).unwrap();
        let b = Bindings::defaults_for(&a.program);
        let oracle_like = BackendProfile::STANDARD.with_like(Some(crate::directives::SystemLike::Oracle));
        assert!(translate_program(&a.program, &a.plan, &b, &oracle_like).is_err());
        assert!(translate_program(&a.program, &a.plan, &b, &BackendProfile::STANDARD).is_ok());
    }

    #[test]
    fn script_lists_components() {
        let p = plan("#maxint = 4.\nq(X) :- p(X), X < 3.\nn(X) :- X < 2.");
        assert!(p.uses_range);
        let s = p.script(&BackendProfile::STANDARD);
        assert!(s.contains("-- component"), "{s}");
        assert_eq!(s.matches("INSERT").count(), 2);
    }
}
