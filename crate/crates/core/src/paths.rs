//! Loop-free k-shortest path enumeration (Yen) over an undirected weighted
//! graph given as an adjacency closure.
//!
//! Paths are totally ordered by `(length, node sequence)`. The spur search
//! returns the lexicographically smallest among equally short paths, which
//! makes the whole enumeration follow that order exactly.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use crate::ids::{LinkKey, NodeId};

/// A loop-free path and its total fiber length in kilometers.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub nodes: Vec<NodeId>,
    pub length: f64,
}

impl Path {
    pub fn links(&self) -> impl Iterator<Item = LinkKey> + '_ {
        self.nodes.windows(2).map(|w| LinkKey::new(w[0], w[1]))
    }
}

/// `(length, nodes)` ordering used for ranking.
pub(crate) fn rank(a: &Path, b: &Path) -> Ordering {
    a.length
        .total_cmp(&b.length)
        .then_with(|| a.nodes.cmp(&b.nodes))
}

#[derive(PartialEq)]
struct Ranked(Path);

impl Eq for Ranked {}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        rank(&self.0, &other.0)
    }
}

/// Neighbors of a node as `(neighbor, edge length)`.
pub(crate) type Adjacency<'a> = dyn Fn(NodeId) -> Vec<(NodeId, f64)> + 'a;

/// Shortest path from `src` to `dst` avoiding the banned nodes and links,
/// choosing the lexicographically smallest node sequence among ties.
fn lexmin_shortest(
    adj: &Adjacency<'_>,
    src: NodeId,
    dst: NodeId,
    banned_nodes: &BTreeSet<NodeId>,
    banned_links: &BTreeSet<LinkKey>,
) -> Option<Path> {
    let mut best: BTreeMap<NodeId, Path> = BTreeMap::new();
    let mut settled: BTreeSet<NodeId> = BTreeSet::new();
    let mut heap = BinaryHeap::new();
    let start = Path {
        nodes: vec![src],
        length: 0.0,
    };
    best.insert(src, start.clone());
    heap.push(Reverse(Ranked(start)));

    while let Some(Reverse(Ranked(label))) = heap.pop() {
        let here = *label.nodes.last().expect("labels are never empty");
        if !settled.insert(here) {
            continue;
        }
        if here == dst {
            return Some(label);
        }
        for (next, w) in adj(here) {
            if settled.contains(&next)
                || banned_nodes.contains(&next)
                || banned_links.contains(&LinkKey::new(here, next))
            {
                continue;
            }
            let mut nodes = label.nodes.clone();
            nodes.push(next);
            let cand = Path {
                nodes,
                length: label.length + w,
            };
            let better = match best.get(&next) {
                Some(cur) => rank(&cand, cur) == Ordering::Less,
                None => true,
            };
            if better {
                best.insert(next, cand.clone());
                heap.push(Reverse(Ranked(cand)));
            }
        }
    }
    None
}

fn total_length(adj: &Adjacency<'_>, nodes: &[NodeId]) -> f64 {
    nodes
        .windows(2)
        .map(|w| {
            adj(w[0])
                .into_iter()
                .find(|(n, _)| *n == w[1])
                .map(|(_, l)| l)
                .expect("consecutive path nodes are adjacent")
        })
        .sum()
}

/// Up to `k` loop-free paths from `src` to `dst` in ascending
/// `(length, node sequence)` order.
pub(crate) fn yen(adj: &Adjacency<'_>, src: NodeId, dst: NodeId, k: usize) -> Vec<Path> {
    if k == 0 || src == dst {
        return Vec::new();
    }
    let Some(first) = lexmin_shortest(adj, src, dst, &BTreeSet::new(), &BTreeSet::new()) else {
        return Vec::new();
    };
    let mut found: Vec<Path> = vec![first];
    let mut candidates: BTreeSet<Ranked> = BTreeSet::new();

    while found.len() < k {
        let prev = found.last().expect("at least one path").nodes.clone();
        for i in 0..prev.len() - 1 {
            let spur = prev[i];
            let root = &prev[..=i];
            let banned_links: BTreeSet<LinkKey> = found
                .iter()
                .filter(|p| p.nodes.len() > i + 1 && &p.nodes[..=i] == root)
                .map(|p| LinkKey::new(p.nodes[i], p.nodes[i + 1]))
                .collect();
            let banned_nodes: BTreeSet<NodeId> = root[..i].iter().copied().collect();
            if let Some(spur_path) = lexmin_shortest(adj, spur, dst, &banned_nodes, &banned_links)
            {
                let mut nodes = root[..i].to_vec();
                nodes.extend(spur_path.nodes);
                let length = total_length(adj, &nodes);
                let cand = Path { nodes, length };
                if !found.iter().any(|p| p.nodes == cand.nodes) {
                    candidates.insert(Ranked(cand));
                }
            }
        }
        match candidates.pop_first() {
            Some(Ranked(next)) => found.push(next),
            None => break,
        }
    }
    found
}
