//! Loopless k-shortest paths by physical distance (Yen's algorithm).
//!
//! Ties in distance are broken by the lexicographic order of the node
//! sequence, so the result is a deterministic prefix of all simple paths
//! sorted by `(distance, nodes)`.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashSet};

use super::{HopProfile, NodeId, Topology};
use crate::error::{Error, Result};

const DISTANCE_EPS: f64 = 1e-9;

/// A simple path through the topology.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    nodes: Vec<NodeId>,
    hops: Vec<HopProfile>,
    total_distance: f64,
}

impl Path {
    pub fn from_nodes(topo: &Topology, nodes: Vec<NodeId>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::Parameter("path needs at least two nodes".into()));
        }
        let mut seen = HashSet::new();
        for &n in &nodes {
            topo.check_node(n)?;
            if !seen.insert(n) {
                return Err(Error::Parameter(format!("node {n} repeated in path")));
            }
        }
        let hops = nodes
            .windows(2)
            .map(|w| {
                topo.hop(w[0], w[1])
                    .copied()
                    .ok_or_else(|| Error::Parameter(format!("no hop between {} and {}", w[0], w[1])))
            })
            .collect::<Result<Vec<_>>>()?;
        let total_distance = hops.iter().map(|h| h.distance_km).sum();
        Ok(Path {
            nodes,
            hops,
            total_distance,
        })
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn hops(&self) -> &[HopProfile] {
        &self.hops
    }

    pub fn hop_count(&self) -> usize {
        self.hops.len()
    }

    pub fn total_distance(&self) -> f64 {
        self.total_distance
    }

    pub fn mean_hop_distance(&self) -> f64 {
        self.total_distance / self.hops.len() as f64
    }

    pub fn source(&self) -> NodeId {
        self.nodes[0]
    }

    pub fn destination(&self) -> NodeId {
        *self.nodes.last().expect("non-empty")
    }

    /// Directed hop endpoints in path order.
    pub fn oriented_hops(&self) -> impl Iterator<Item = (NodeId, NodeId, &HopProfile)> {
        self.nodes
            .windows(2)
            .zip(&self.hops)
            .map(|(w, h)| (w[0], w[1], h))
    }

    /// Hyphen-joined node indices, e.g. `0-4-7`.
    pub fn label(&self) -> String {
        self.nodes
            .iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join("-")
    }

    fn ordering_key(&self) -> (f64, &[NodeId]) {
        (self.total_distance, &self.nodes)
    }
}

/// Total order used for candidate ranking.
fn compare_paths(a: &Path, b: &Path) -> Ordering {
    let (da, na) = a.ordering_key();
    let (db, nb) = b.ordering_key();
    da.total_cmp(&db).then_with(|| na.cmp(nb))
}

#[derive(Debug, Clone)]
struct Candidate(Path);

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        compare_paths(&self.0, &other.0) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        compare_paths(&self.0, &other.0)
    }
}

#[derive(Debug, PartialEq)]
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    // Reversed for a min-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

type EdgeKey = (NodeId, NodeId);

fn edge_key(u: NodeId, v: NodeId) -> EdgeKey {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

/// Shortest path from `from` to `to` avoiding `blocked_nodes` and
/// `blocked_edges`, choosing the lexicographically smallest node sequence
/// among equal-distance paths.
fn lexicographic_shortest_path(
    topo: &Topology,
    from: NodeId,
    to: NodeId,
    blocked_nodes: &HashSet<NodeId>,
    blocked_edges: &HashSet<EdgeKey>,
) -> Option<Vec<NodeId>> {
    let n = topo.n_nodes();
    let usable = |u: NodeId, v: NodeId| !blocked_nodes.contains(&v) && !blocked_edges.contains(&edge_key(u, v));

    // Distances to the destination; the graph is undirected.
    let mut dist = vec![f64::INFINITY; n];
    let mut heap = BinaryHeap::new();
    dist[to.index()] = 0.0;
    heap.push(HeapEntry { dist: 0.0, node: to.index() });
    while let Some(HeapEntry { dist: d, node }) = heap.pop() {
        if d > dist[node] {
            continue;
        }
        let u = NodeId(node);
        for (v, hop) in topo.neighbours(u) {
            if !usable(u, v) {
                continue;
            }
            let nd = d + hop.distance_km;
            if nd < dist[v.index()] {
                dist[v.index()] = nd;
                heap.push(HeapEntry { dist: nd, node: v.index() });
            }
        }
    }
    if !dist[from.index()].is_finite() {
        return None;
    }

    // Greedy walk: the smallest neighbour that stays on some shortest path.
    let mut path = vec![from];
    let mut current = from;
    while current != to {
        let remaining = dist[current.index()];
        let next = topo
            .neighbours(current)
            .filter(|&(v, _)| usable(current, v))
            .find(|&(v, hop)| {
                let rest = dist[v.index()];
                rest < remaining && (hop.distance_km + rest - remaining).abs() <= DISTANCE_EPS * remaining.max(1.0)
            })
            .map(|(v, _)| v)?;
        path.push(next);
        current = next;
    }
    Some(path)
}

/// Up to `k` loopless paths from `src` to `dst`, shortest first.
pub fn k_shortest_paths(topo: &Topology, src: NodeId, dst: NodeId, k: usize) -> Result<Vec<Path>> {
    topo.check_node(src)?;
    topo.check_node(dst)?;
    if src == dst {
        return Err(Error::Parameter(format!("source and destination are both {src}")));
    }
    if k == 0 {
        return Err(Error::Parameter("k must be at least 1".into()));
    }
    let none = HashSet::new();
    let first = lexicographic_shortest_path(topo, src, dst, &none, &HashSet::new())
        .ok_or(Error::NoPath { src: src.index(), dst: dst.index() })?;
    let mut accepted = vec![Path::from_nodes(topo, first)?];
    let mut candidates: BTreeSet<Candidate> = BTreeSet::new();

    while accepted.len() < k {
        let last = accepted.last().expect("non-empty").nodes().to_vec();
        for spur_idx in 0..last.len() - 1 {
            let spur = last[spur_idx];
            let root = &last[..=spur_idx];
            let mut blocked_edges = HashSet::new();
            for p in &accepted {
                if p.nodes().len() > spur_idx + 1 && &p.nodes()[..=spur_idx] == root {
                    blocked_edges.insert(edge_key(p.nodes()[spur_idx], p.nodes()[spur_idx + 1]));
                }
            }
            let blocked_nodes: HashSet<NodeId> = root[..spur_idx].iter().copied().collect();
            if let Some(spur_path) = lexicographic_shortest_path(topo, spur, dst, &blocked_nodes, &blocked_edges) {
                let mut nodes = root[..spur_idx].to_vec();
                nodes.extend(spur_path);
                candidates.insert(Candidate(Path::from_nodes(topo, nodes)?));
            }
        }
        // Skip candidates already accepted through another deviation.
        let next = loop {
            match candidates.pop_first() {
                Some(Candidate(p)) if accepted.iter().any(|a| a.nodes() == p.nodes()) => continue,
                other => break other,
            }
        };
        match next {
            Some(Candidate(p)) => accepted.push(p),
            None => break,
        }
    }
    Ok(accepted)
}
