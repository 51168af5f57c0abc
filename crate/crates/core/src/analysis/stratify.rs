use std::collections::{BTreeSet, HashMap};
use std::fmt;

use super::graph::{DependencyGraph, EdgeLabel};
use crate::ast::{LiteralKind, Program};
use crate::error::{Error, Result};

/// One strongly connected component of the dependency graph together with
/// the rules defining its predicates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    /// Predicates in order of first appearance.
    pub predicates: Vec<String>,
    /// True when the component contains a cycle (including a self-loop).
    pub recursive: bool,
    /// Indices into `Program::rules` of non-recursive rules, source order.
    pub exit_rules: Vec<usize>,
    /// Indices of rules whose body mentions a predicate of this component.
    pub recursive_rules: Vec<usize>,
}

impl Component {
    pub fn contains(&self, predicate: &str) -> bool {
        self.predicates.iter().any(|p| p == predicate)
    }

    pub fn has_rules(&self) -> bool {
        !self.exit_rules.is_empty() || !self.recursive_rules.is_empty()
    }
}

/// Components in evaluation order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StratumPlan {
    pub components: Vec<Component>,
    component_of: HashMap<String, usize>,
}

impl StratumPlan {
    pub fn component_of(&self, predicate: &str) -> Option<usize> {
        self.component_of.get(predicate).copied()
    }

    pub fn component_for(&self, predicate: &str) -> Option<&Component> {
        self.component_of(predicate).map(|i| &self.components[i])
    }
}

impl fmt::Display for StratumPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.components.iter().enumerate() {
            write!(f, "{}: {{{}}}", i + 1, c.predicates.join(", "))?;
            if !c.has_rules() {
                f.write_str(" base")?;
            } else if c.recursive {
                write!(
                    f,
                    " recursive exit={} recursive={}",
                    c.exit_rules.len(),
                    c.recursive_rules.len()
                )?;
            } else {
                write!(f, " rules={}", c.exit_rules.len())?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Computes components and their order, rejecting programs with a negative
/// or aggregate dependency inside a component.
pub fn stratify(program: &Program, graph: &DependencyGraph) -> Result<StratumPlan> {
    let sccs = graph.sccs();
    let mut comp_of_node = vec![0; graph.nodes.len()];
    for (ci, comp) in sccs.iter().enumerate() {
        for &n in comp {
            comp_of_node[n] = ci;
        }
    }

    for e in &graph.edges {
        if e.label != EdgeLabel::Positive && comp_of_node[e.from] == comp_of_node[e.to] {
            let within: BTreeSet<usize> = sccs[comp_of_node[e.from]].iter().copied().collect();
            let back = graph
                .path_within(e.to, e.from, &within)
                .unwrap_or_else(|| vec![e.to, e.from]);
            let mut cycle = vec![graph.nodes[e.from].clone()];
            cycle.extend(back.iter().map(|&n| graph.nodes[n].clone()));
            return Err(Error::NotStratified(format!(
                "{} dependency of `{}` on `{}` lies on the cycle {}",
                e.label,
                graph.nodes[e.to],
                graph.nodes[e.from],
                cycle.join(" -> ")
            )));
        }
    }

    // Kahn over the component DAG; ties go to the component whose earliest
    // predicate appears first in the source
    let k = sccs.len();
    let mut indegree = vec![0usize; k];
    let mut succ: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); k];
    for e in &graph.edges {
        let (a, b) = (comp_of_node[e.from], comp_of_node[e.to]);
        if a != b && succ[a].insert(b) {
            indegree[b] += 1;
        }
    }
    let key = |c: usize| sccs[c][0];
    let mut ready: BTreeSet<(usize, usize)> = (0..k).filter(|&c| indegree[c] == 0).map(|c| (key(c), c)).collect();
    let mut order = Vec::with_capacity(k);
    while let Some(&first) = ready.iter().next() {
        ready.remove(&first);
        let c = first.1;
        order.push(c);
        for &s in &succ[c] {
            indegree[s] -= 1;
            if indegree[s] == 0 {
                ready.insert((key(s), s));
            }
        }
    }
    debug_assert_eq!(order.len(), k);

    let self_loop: BTreeSet<usize> = graph.edges.iter().filter(|e| e.from == e.to).map(|e| e.from).collect();
    let mut components: Vec<Component> = order
        .iter()
        .map(|&c| Component {
            predicates: sccs[c].iter().map(|&n| graph.nodes[n].clone()).collect(),
            recursive: sccs[c].len() > 1 || self_loop.contains(&sccs[c][0]),
            exit_rules: Vec::new(),
            recursive_rules: Vec::new(),
        })
        .collect();
    let mut component_of = HashMap::new();
    for (i, c) in components.iter().enumerate() {
        for p in &c.predicates {
            component_of.insert(p.clone(), i);
        }
    }
    for (ri, rule) in program.rules.iter().enumerate() {
        let ci = component_of[&rule.head.predicate];
        let recursive = rule.body.iter().any(|l| match &l.kind {
            LiteralKind::Atom(a) => component_of.get(&a.predicate) == Some(&ci),
            LiteralKind::Aggregate(a) => a.set.conj.iter().any(|x| component_of.get(&x.predicate) == Some(&ci)),
            LiteralKind::Builtin(_) => false,
        });
        if recursive {
            components[ci].recursive_rules.push(ri);
        } else {
            components[ci].exit_rules.push(ri);
        }
    }
    Ok(StratumPlan {
        components,
        component_of,
    })
}
