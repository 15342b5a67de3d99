//! Repeater network graphs: Watts–Strogatz generation, per-hop physics and
//! the plain-text edge-list format.

mod paths;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum_math::Fidelity;
use crate::rng::{self, Stream};

pub use paths::{k_shortest_paths, Path};

pub const DEFAULT_HOP_WEIGHTS: [f64; 5] = [0.05, 0.1, 0.15, 0.2, 0.25];
pub const DEFAULT_FIDELITY_STDDEV: f64 = 0.01;
const MAX_CONNECT_ATTEMPTS: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// An undirected link between two neighbouring nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopProfile {
    /// Lower-indexed endpoint.
    pub a: NodeId,
    /// Higher-indexed endpoint.
    pub b: NodeId,
    pub weight: f64,
    pub distance_km: f64,
    pub fidelity_stddev: f64,
}

impl HopProfile {
    pub fn new(u: NodeId, v: NodeId, weight: f64, distance_km: f64) -> Result<Self> {
        if u == v {
            return Err(Error::Parameter(format!("self-loop at node {u}")));
        }
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::Parameter(format!("hop weight {weight} outside [0, 1]")));
        }
        if !(distance_km > 0.0 && distance_km.is_finite()) {
            return Err(Error::Parameter(format!("hop distance {distance_km} must be positive")));
        }
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        Ok(HopProfile {
            a,
            b,
            weight,
            distance_km,
            fidelity_stddev: DEFAULT_FIDELITY_STDDEV,
        })
    }

    #[inline]
    pub fn mean_initial_fidelity(&self) -> f64 {
        1.0 - self.weight
    }

    pub fn key(&self) -> (NodeId, NodeId) {
        (self.a, self.b)
    }

    pub fn other(&self, node: NodeId) -> Option<NodeId> {
        if node == self.a {
            Some(self.b)
        } else if node == self.b {
            Some(self.a)
        } else {
            None
        }
    }
}

/// Draws the shared initial fidelity of one purification batch on `hop`.
pub fn sample_initial_fidelity<R: Rng + ?Sized>(hop: &HopProfile, rng: &mut R) -> Fidelity {
    let mean = hop.mean_initial_fidelity();
    if hop.fidelity_stddev == 0.0 {
        return Fidelity::saturating(mean);
    }
    let normal = Normal::new(mean, hop.fidelity_stddev).expect("stddev is finite and positive");
    Fidelity::saturating(normal.sample(rng))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    n_nodes: usize,
    hops: Vec<HopProfile>,
    /// Per node: (neighbour, hop index), sorted by neighbour.
    adjacency: Vec<Vec<(NodeId, usize)>>,
    lookup: BTreeMap<(NodeId, NodeId), usize>,
}

impl Topology {
    pub fn new(n_nodes: usize, mut hops: Vec<HopProfile>) -> Result<Self> {
        if n_nodes < 2 {
            return Err(Error::Parameter(format!("topology needs at least 2 nodes, got {n_nodes}")));
        }
        hops.sort_by_key(|h| h.key());
        let mut adjacency = vec![Vec::new(); n_nodes];
        let mut lookup = BTreeMap::new();
        for (idx, hop) in hops.iter().enumerate() {
            if hop.b.index() >= n_nodes {
                return Err(Error::Index(format!("hop endpoint {} >= {n_nodes}", hop.b)));
            }
            if hop.a == hop.b {
                return Err(Error::Parameter(format!("self-loop at node {}", hop.a)));
            }
            if lookup.insert(hop.key(), idx).is_some() {
                return Err(Error::Parameter(format!("duplicate hop {}-{}", hop.a, hop.b)));
            }
            adjacency[hop.a.index()].push((hop.b, idx));
            adjacency[hop.b.index()].push((hop.a, idx));
        }
        for list in &mut adjacency {
            list.sort_by_key(|&(n, _)| n);
        }
        Ok(Topology {
            n_nodes,
            hops,
            adjacency,
            lookup,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.n_nodes).map(NodeId)
    }

    /// Hops sorted by endpoint pair.
    pub fn hops(&self) -> &[HopProfile] {
        &self.hops
    }

    pub fn hop(&self, u: NodeId, v: NodeId) -> Option<&HopProfile> {
        let key = if u < v { (u, v) } else { (v, u) };
        self.lookup.get(&key).map(|&i| &self.hops[i])
    }

    pub fn neighbours(&self, node: NodeId) -> impl Iterator<Item = (NodeId, &HopProfile)> {
        self.adjacency[node.index()]
            .iter()
            .map(move |&(n, i)| (n, &self.hops[i]))
    }

    pub fn degree(&self, node: NodeId) -> usize {
        self.adjacency[node.index()].len()
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n_nodes];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &(v, _) in &self.adjacency[u] {
                if !seen[v.index()] {
                    seen[v.index()] = true;
                    count += 1;
                    queue.push_back(v.index());
                }
            }
        }
        count == self.n_nodes
    }

    /// Replaces the Gaussian spread of every hop's initial fidelity.
    pub fn with_fidelity_stddev(mut self, stddev: f64) -> Self {
        for hop in &mut self.hops {
            hop.fidelity_stddev = stddev;
        }
        self
    }

    pub fn check_node(&self, node: NodeId) -> Result<()> {
        if node.index() < self.n_nodes {
            Ok(())
        } else {
            Err(Error::Index(format!("node {node} >= {}", self.n_nodes)))
        }
    }

    /// Serializes as `nodes <n>` followed by one `src dst weight distance` line per hop.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("nodes {}\n", self.n_nodes);
        for hop in &self.hops {
            writeln!(out, "{} {} {} {}", hop.a, hop.b, hop.weight, hop.distance_km).unwrap();
        }
        out
    }

    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .enumerate()
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::Format("empty edge list".into()))?;
        let n_nodes = header
            .strip_prefix("nodes")
            .and_then(|rest| rest.trim().parse::<usize>().ok())
            .ok_or_else(|| Error::Format(format!("bad header line {header:?}")))?;
        let mut hops = Vec::new();
        for (lineno, line) in lines {
            let bad = || Error::Format(format!("line {}: expected `src dst weight distance`", lineno + 1));
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(bad());
            }
            let src = fields[0].parse::<usize>().map_err(|_| bad())?;
            let dst = fields[1].parse::<usize>().map_err(|_| bad())?;
            let weight = fields[2].parse::<f64>().map_err(|_| bad())?;
            let distance = fields[3].parse::<f64>().map_err(|_| bad())?;
            hops.push(HopProfile::new(NodeId(src), NodeId(dst), weight, distance)?);
        }
        Topology::new(n_nodes, hops)
    }
}

impl FromStr for Topology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Topology::parse_edge_list(s)
    }
}

/// Parameters of the generated repeater graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologyParams {
    pub nodes: usize,
    /// Ring-lattice degree before rewiring; even.
    pub degree: usize,
    pub rewire_probability: f64,
    pub hop_weights: Vec<f64>,
    pub hop_distance_km: f64,
    pub fidelity_stddev: f64,
}

impl Default for TopologyParams {
    fn default() -> Self {
        TopologyParams {
            nodes: 10,
            degree: 4,
            rewire_probability: 0.3,
            hop_weights: DEFAULT_HOP_WEIGHTS.to_vec(),
            hop_distance_km: 1.0,
            fidelity_stddev: DEFAULT_FIDELITY_STDDEV,
        }
    }
}

impl TopologyParams {
    pub fn validate(&self) -> Result<()> {
        let (n, k, beta) = (self.nodes, self.degree, self.rewire_probability);
        if n < 3 {
            return Err(Error::Parameter(format!("need at least 3 nodes, got {n}")));
        }
        if k == 0 || k % 2 != 0 || k >= n {
            return Err(Error::Parameter(format!("degree {k} must be even, positive and below {n}")));
        }
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::Parameter(format!("rewire probability {beta} outside [0, 1]")));
        }
        if self.hop_weights.is_empty() || self.hop_weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::Parameter("hop weights must be a non-empty list in [0, 1]".into()));
        }
        if !(self.fidelity_stddev >= 0.0 && self.fidelity_stddev.is_finite()) {
            return Err(Error::Parameter("fidelity stddev must be non-negative".into()));
        }
        Ok(())
    }

    /// Generates a connected Watts–Strogatz graph, resampling with a salted
    /// seed until the rewired graph is connected.
    pub fn generate(&self, seed: u64) -> Result<Topology> {
        self.validate()?;
        for attempt in 0..MAX_CONNECT_ATTEMPTS {
            let edges = watts_strogatz_edges(self.nodes, self.degree, self.rewire_probability, seed, attempt);
            let mut weight_rng = rng::substream(seed, Stream::HopWeights, &[attempt]);
            let hops = edges
                .into_iter()
                .map(|(u, v)| {
                    let weight = *self.hop_weights.choose(&mut weight_rng).expect("non-empty");
                    let mut hop = HopProfile::new(NodeId(u), NodeId(v), weight, self.hop_distance_km)?;
                    hop.fidelity_stddev = self.fidelity_stddev;
                    Ok(hop)
                })
                .collect::<Result<Vec<_>>>()?;
            let topo = Topology::new(self.nodes, hops)?;
            if topo.is_connected() {
                return Ok(topo);
            }
        }
        Err(Error::Parameter(format!(
            "no connected graph after {MAX_CONNECT_ATTEMPTS} attempts"
        )))
    }
}

/// Convenience wrapper over [`TopologyParams::generate`] with default hop physics.
pub fn generate_watts_strogatz(n: usize, k: usize, beta: f64, seed: u64) -> Result<Topology> {
    TopologyParams {
        nodes: n,
        degree: k,
        rewire_probability: beta,
        ..TopologyParams::default()
    }
    .generate(seed)
}

/// Ring lattice of degree `k` with each lattice edge `(u, u + j)` rewired to a
/// uniformly chosen non-neighbour of `u` with probability `beta`.
fn watts_strogatz_edges(n: usize, k: usize, beta: f64, seed: u64, attempt: u64) -> BTreeSet<(usize, usize)> {
    let mut rng = rng::substream(seed, Stream::Topology, &[attempt]);
    let norm = |u: usize, v: usize| if u < v { (u, v) } else { (v, u) };
    let mut adjacency = vec![BTreeSet::new(); n];
    for u in 0..n {
        for j in 1..=k / 2 {
            let v = (u + j) % n;
            adjacency[u].insert(v);
            adjacency[v].insert(u);
        }
    }
    for j in 1..=k / 2 {
        for u in 0..n {
            let v = (u + j) % n;
            if !rng.random_bool(beta) {
                continue;
            }
            let candidates: Vec<usize> = (0..n).filter(|&w| w != u && !adjacency[u].contains(&w)).collect();
            let Some(&w) = candidates.choose(&mut rng) else {
                continue;
            };
            // The lattice edge may already have been rewired away from v's side.
            if !adjacency[u].remove(&v) {
                continue;
            }
            adjacency[v].remove(&u);
            adjacency[u].insert(w);
            adjacency[w].insert(u);
        }
    }
    let mut edges = BTreeSet::new();
    for (u, list) in adjacency.iter().enumerate() {
        for &v in list {
            edges.insert(norm(u, v));
        }
    }
    edges
}
