//! Answer counts computed directly on the arc list, without Datalog.

use std::collections::HashSet;

use crate::encode::{Problem, Regime};
use crate::gen::GraphInstance;

/// Nodes reachable from `from` by a non-empty path.
pub fn reachable_from(g: &GraphInstance, succ: &[Vec<u32>], from: u32) -> Vec<bool> {
    let mut seen = vec![false; g.nodes as usize + 1];
    let mut stack: Vec<u32> = succ[from as usize].clone();
    while let Some(n) = stack.pop() {
        if !seen[n as usize] {
            seen[n as usize] = true;
            stack.extend(&succ[n as usize]);
        }
    }
    seen
}

pub fn reachability_count(g: &GraphInstance, regime: Regime) -> u64 {
    let succ = g.successors();
    let count = |from| reachable_from(g, &succ, from).iter().filter(|&&r| r).count() as u64;
    match regime {
        Regime::Q0 => (1..=g.nodes).map(count).sum(),
        Regime::Q1 => count(g.b1),
        Regime::Q2 => reachable_from(g, &succ, g.b1)[g.b2 as usize] as u64,
    }
}

/// Every same-generation pair: distinct children of one parent, and
/// children of a same-generation pair of parents.
pub fn samegen_pairs(g: &GraphInstance) -> HashSet<(u32, u32)> {
    let children = g.successors();
    let mut pairs = HashSet::new();
    let mut work = Vec::new();
    for kids in &children {
        for &x in kids {
            for &y in kids {
                if x != y && pairs.insert((x, y)) {
                    work.push((x, y));
                }
            }
        }
    }
    while let Some((p1, p2)) = work.pop() {
        for &x in &children[p1 as usize] {
            for &y in &children[p2 as usize] {
                if pairs.insert((x, y)) {
                    work.push((x, y));
                }
            }
        }
    }
    pairs
}

pub fn samegen_count(g: &GraphInstance, regime: Regime) -> u64 {
    let pairs = samegen_pairs(g);
    match regime {
        Regime::Q0 => pairs.len() as u64,
        Regime::Q1 => pairs.iter().filter(|p| p.0 == g.b1).count() as u64,
        Regime::Q2 => pairs.contains(&(g.b1, g.b2)) as u64,
    }
}

pub fn answer_count(problem: Problem, regime: Regime, g: &GraphInstance) -> u64 {
    match problem {
        Problem::Reachability | Problem::LinearReachability => reachability_count(g, regime),
        Problem::SameGeneration => samegen_count(g, regime),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{gen_cylinder, gen_tree, Family, Params};

    #[test]
    fn tree_counts_by_hand() {
        // depth 2: root reaches 6 nodes, each inner node 2
        let t = gen_tree(2);
        assert_eq!(reachability_count(&t, Regime::Q0), 10);
        assert_eq!(reachability_count(&t, Regime::Q1), 6);
        assert_eq!(reachability_count(&t, Regime::Q2), 1);
        // level 1: (2,3) both ways; level 2: 4 sibling pairs and 8 cousin pairs
        assert_eq!(samegen_count(&t, Regime::Q0), 2 + 12);
        assert_eq!(samegen_count(&t, Regime::Q1), 0);
    }

    #[test]
    fn two_node_cycle() {
        let g = GraphInstance {
            family: Family::CGraph,
            params: Params::Graph { nodes: 3, density: 1.0 / 3.0 },
            nodes: 3,
            edges: vec![(1, 2), (2, 1)],
            b1: 1,
            b2: 3,
        };
        assert_eq!(reachability_count(&g, Regime::Q0), 4);
        assert_eq!(reachability_count(&g, Regime::Q2), 0);
    }

    #[test]
    fn cylinder_reach_from_the_first_node() {
        // from (0,0) every node of layer i at offset 0..=i is reachable
        let c = gen_cylinder(4, 3).unwrap();
        assert_eq!(reachability_count(&c, Regime::Q1), 2 + 3);
    }
}
