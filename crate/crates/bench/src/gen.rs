//! Instance generators: full binary trees, random directed graphs and
//! cylinders. Nodes are numbered from 1.

use std::collections::VecDeque;
use std::fmt;
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Tree,
    /// Acyclic random graph.
    AGraph,
    /// Cyclic random graph.
    CGraph,
    Cylinder,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Tree => "tree",
            Family::AGraph => "a-graph",
            Family::CGraph => "c-graph",
            Family::Cylinder => "cylinder",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "tree" => Family::Tree,
            "a-graph" | "agraph" => Family::AGraph,
            "c-graph" | "cgraph" => Family::CGraph,
            "cylinder" => Family::Cylinder,
            _ => return None,
        })
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Params {
    Tree { depth: u32 },
    Graph { nodes: u32, density: f64 },
    Cylinder { width: u32, height: u32 },
}

impl fmt::Display for Params {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Params::Tree { depth } => write!(f, "d={depth}"),
            Params::Graph { nodes, density } => write!(f, "n={nodes},δ={density}"),
            Params::Cylinder { width, height } => write!(f, "w={width},h={height}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphInstance {
    pub family: Family,
    pub params: Params,
    pub nodes: u32,
    pub edges: Vec<(u32, u32)>,
    /// Source node for bound queries.
    pub b1: u32,
    /// The node farthest from `b1` by BFS, smallest id on ties.
    pub b2: u32,
}

impl GraphInstance {
    fn new(family: Family, params: Params, nodes: u32, edges: Vec<(u32, u32)>, b1: u32) -> Self {
        let mut g = GraphInstance {
            family,
            params,
            nodes,
            edges,
            b1,
            b2: b1,
        };
        g.b2 = g.farthest_from(b1);
        g
    }

    pub fn successors(&self) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); self.nodes as usize + 1];
        for &(a, b) in &self.edges {
            out[a as usize].push(b);
        }
        out
    }

    /// BFS distance from `from` to every node, `None` when unreachable.
    pub fn distances(&self, from: u32) -> Vec<Option<u32>> {
        let succ = self.successors();
        let mut dist = vec![None; self.nodes as usize + 1];
        dist[from as usize] = Some(0);
        let mut queue = VecDeque::from([from]);
        while let Some(n) = queue.pop_front() {
            let d = dist[n as usize].unwrap();
            for &m in &succ[n as usize] {
                if dist[m as usize].is_none() {
                    dist[m as usize] = Some(d + 1);
                    queue.push_back(m);
                }
            }
        }
        dist
    }

    fn farthest_from(&self, from: u32) -> u32 {
        let dist = self.distances(from);
        let mut best = (0, from);
        for (n, d) in dist.iter().enumerate() {
            if let Some(d) = *d {
                if d > best.0 {
                    best = (d, n as u32);
                }
            }
        }
        best.1
    }

    /// True when a topological order of all nodes exists.
    pub fn is_acyclic(&self) -> bool {
        let succ = self.successors();
        let mut indegree = vec![0u32; self.nodes as usize + 1];
        for &(_, b) in &self.edges {
            indegree[b as usize] += 1;
        }
        let mut ready: Vec<u32> = (1..=self.nodes).filter(|&n| indegree[n as usize] == 0).collect();
        let mut seen = 0;
        while let Some(n) = ready.pop() {
            seen += 1;
            for &m in &succ[n as usize] {
                indegree[m as usize] -= 1;
                if indegree[m as usize] == 0 {
                    ready.push(m);
                }
            }
        }
        seen == self.nodes
    }

    /// Writes the edges as a headerless two-column CSV file.
    pub fn write_csv(&self, path: &Path) -> Result<(), BenchError> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
        for &(a, b) in &self.edges {
            w.write_record([a.to_string(), b.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Full binary tree of the given depth; node `i` has children `2i` and
/// `2i + 1`.
pub fn gen_tree(depth: u32) -> GraphInstance {
    let nodes = (1u32 << (depth + 1)) - 1;
    let edges = (1..=nodes / 2).flat_map(|p| [(p, 2 * p), (p, 2 * p + 1)]).collect();
    GraphInstance::new(Family::Tree, Params::Tree { depth }, nodes, edges, 1)
}

/// Number of arcs a graph of the family may have: ordered pairs of distinct
/// nodes, or only the increasing ones when acyclic.
pub fn possible_arcs(nodes: u32, cyclic: bool) -> u64 {
    let n = nodes as u64;
    if cyclic {
        n * (n - 1)
    } else {
        n * (n - 1) / 2
    }
}

/// ⌊δ · possible arcs⌋ distinct arcs chosen uniformly. Acyclic graphs only
/// have arcs from lower to higher ids; cyclic ones are redrawn until they
/// contain a cycle.
pub fn gen_graph(nodes: u32, density: f64, cyclic: bool, seed: u64) -> Result<GraphInstance, BenchError> {
    if nodes < 2 || !(density > 0.0 && density <= 1.0) {
        return Err(BenchError::Infeasible(format!("n={nodes}, δ={density}")));
    }
    let total = possible_arcs(nodes, cyclic);
    let count = (density * total as f64).floor() as u64;
    if count == 0 || (cyclic && count < 2) {
        return Err(BenchError::Infeasible(format!(
            "n={nodes}, δ={density} gives {count} arcs, too few for the family"
        )));
    }
    let family = if cyclic { Family::CGraph } else { Family::AGraph };
    let params = Params::Graph { nodes, density };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut edges: Vec<(u32, u32)> = sample(&mut rng, total as usize, count as usize)
            .into_iter()
            .map(|k| arc_at(nodes, cyclic, k as u64))
            .collect();
        edges.sort_unstable();
        let g = GraphInstance::new(family, params, nodes, edges, 1);
        if !cyclic || !g.is_acyclic() {
            return Ok(g);
        }
    }
}

/// The `k`-th arc in lexicographic order among the family's possible arcs.
fn arc_at(nodes: u32, cyclic: bool, k: u64) -> (u32, u32) {
    let n = nodes as u64;
    if cyclic {
        let a = k / (n - 1);
        let b = k % (n - 1);
        let b = if b >= a { b + 1 } else { b };
        ((a + 1) as u32, (b + 1) as u32)
    } else {
        // row a of the upper triangle holds n - 1 - a arcs and starts at start(a)
        let start = |a: u64| a * (n - 1) - a * a.saturating_sub(1) / 2;
        let (mut lo, mut hi) = (0u64, n - 1);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if start(mid) <= k {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        ((lo + 1) as u32, (lo + 2 + k - start(lo)) as u32)
    }
}

/// `height` layers of `width` nodes; node `j` of layer `i` has arcs to nodes
/// `j` and `(j + 1) mod width` of layer `i + 1`.
pub fn gen_cylinder(width: u32, height: u32) -> Result<GraphInstance, BenchError> {
    if width < 2 || height < 2 {
        return Err(BenchError::Infeasible(format!("cylinder w={width}, h={height}")));
    }
    let id = |i: u32, j: u32| i * width + j + 1;
    let edges = (0..height - 1)
        .flat_map(|i| (0..width).flat_map(move |j| [(id(i, j), id(i + 1, j)), (id(i, j), id(i + 1, (j + 1) % width))]))
        .collect();
    Ok(GraphInstance::new(
        Family::Cylinder,
        Params::Cylinder { width, height },
        width * height,
        edges,
        1,
    ))
}

/// Generates an instance of `family` at ladder position `size`: the depth
/// for trees, the node count for graphs and the width (= height) for
/// cylinders.
pub fn generate(family: Family, size: u32, density: f64, seed: u64) -> Result<GraphInstance, BenchError> {
    match family {
        Family::Tree => Ok(gen_tree(size)),
        Family::AGraph => gen_graph(size, density, false, seed),
        Family::CGraph => gen_graph(size, density, true, seed),
        Family::Cylinder => gen_cylinder(size, size),
    }
}
