use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::ast::{LiteralKind, Program};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeLabel {
    Positive,
    Negative,
    Aggregate,
}

impl fmt::Display for EdgeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeLabel::Positive => "positive",
            EdgeLabel::Negative => "negative",
            EdgeLabel::Aggregate => "aggregate",
        })
    }
}

/// An edge from a body predicate to the head predicate of a rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub label: EdgeLabel,
}

/// Predicate dependency graph. Nodes are numbered in order of first
/// appearance in the program text.
#[derive(Debug, Clone, Default)]
pub struct DependencyGraph {
    pub nodes: Vec<String>,
    index: HashMap<String, usize>,
    pub edges: Vec<Edge>,
}

impl DependencyGraph {
    pub fn build(program: &Program) -> Self {
        let mut g = DependencyGraph::default();
        for p in program.predicates() {
            g.add_node(&p);
        }
        let mut seen = BTreeSet::new();
        for rule in &program.rules {
            let to = g.add_node(&rule.head.predicate);
            for lit in &rule.body {
                let sources: Vec<(&str, EdgeLabel)> = match &lit.kind {
                    LiteralKind::Atom(a) if lit.negated => vec![(&a.predicate, EdgeLabel::Negative)],
                    LiteralKind::Atom(a) => vec![(&a.predicate, EdgeLabel::Positive)],
                    LiteralKind::Aggregate(agg) => agg
                        .set
                        .conj
                        .iter()
                        .map(|a| (a.predicate.as_str(), EdgeLabel::Aggregate))
                        .collect(),
                    LiteralKind::Builtin(_) => vec![],
                };
                for (pred, label) in sources {
                    let from = g.add_node(pred);
                    let e = Edge { from, to, label };
                    if seen.insert(e) {
                        g.edges.push(e);
                    }
                }
            }
        }
        g
    }

    fn add_node(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.nodes.len();
        self.nodes.push(name.to_string());
        self.index.insert(name.to_string(), i);
        i
    }

    pub fn node(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// Whether an edge `from -> to` with the given label exists.
    pub fn has_edge(&self, from: &str, to: &str, label: EdgeLabel) -> bool {
        match (self.node(from), self.node(to)) {
            (Some(from), Some(to)) => self.edges.contains(&Edge { from, to, label }),
            _ => false,
        }
    }

    pub fn successors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            if !adj[e.from].contains(&e.to) {
                adj[e.from].push(e.to);
            }
        }
        adj
    }

    /// Strongly connected components (Tarjan, iterative). Each component's
    /// nodes are sorted; the list itself is in reverse topological order.
    pub fn sccs(&self) -> Vec<Vec<usize>> {
        let adj = self.successors();
        let n = self.nodes.len();
        let mut index = vec![usize::MAX; n];
        let mut low = vec![0; n];
        let mut on_stack = vec![false; n];
        let mut stack = Vec::new();
        let mut out = Vec::new();
        let mut counter = 0;

        for root in 0..n {
            if index[root] != usize::MAX {
                continue;
            }
            // frames of (node, next successor position)
            let mut frames = vec![(root, 0usize)];
            index[root] = counter;
            low[root] = counter;
            counter += 1;
            stack.push(root);
            on_stack[root] = true;
            while let Some(&mut (v, ref mut pos)) = frames.last_mut() {
                if *pos < adj[v].len() {
                    let w = adj[v][*pos];
                    *pos += 1;
                    if index[w] == usize::MAX {
                        index[w] = counter;
                        low[w] = counter;
                        counter += 1;
                        stack.push(w);
                        on_stack[w] = true;
                        frames.push((w, 0));
                    } else if on_stack[w] {
                        low[v] = low[v].min(index[w]);
                    }
                    continue;
                }
                frames.pop();
                if let Some(&(parent, _)) = frames.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack underflow");
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    out.push(comp);
                }
            }
        }
        out
    }

    /// Shortest path `from ->* to` using only nodes in `within`.
    pub fn path_within(&self, from: usize, to: usize, within: &BTreeSet<usize>) -> Option<Vec<usize>> {
        let adj = self.successors();
        let mut prev = vec![usize::MAX; self.nodes.len()];
        let mut queue = std::collections::VecDeque::from([from]);
        prev[from] = from;
        while let Some(v) = queue.pop_front() {
            if v == to {
                let mut path = vec![to];
                let mut cur = to;
                while cur != from {
                    cur = prev[cur];
                    path.push(cur);
                }
                path.reverse();
                return Some(path);
            }
            for &w in &adj[v] {
                if within.contains(&w) && prev[w] == usize::MAX {
                    prev[w] = v;
                    queue.push_back(w);
                }
            }
        }
        None
    }
}
