//! Path selection, per-hop purification planning and queue ordering.
//!
//! Five policies are supported. The two adaptive ones pick among up to
//! three shortest candidate paths using the classifier's per-hop round
//! predictions and a min-max normalized cost over path length and total
//! rounds, then serve the queue cheapest first. The fixed ones route along
//! the single shortest path with one or two rounds on every hop and serve
//! shortest paths first. FIFO routes like fixed-one and serves in arrival
//! order.

use std::borrow::Borrow;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classifier::{predict_rounds, ClassifierModel};
use crate::error::{Error, Result};
use crate::quantum_math::{
    purify_rounds, solve_target_hop_fidelity_min, solve_target_hop_fidelity_uniform, Fidelity, GateParameters,
};
use crate::simulator::EntanglementRequest;
use crate::topology::{k_shortest_paths, NodeId, Path, Topology};

pub const MAX_ROUNDS: u32 = 3;

/// A path with the number of purification rounds to run on each of its hops.
#[derive(Debug, Clone, PartialEq)]
pub struct PurificationPlan {
    path: Path,
    rounds_per_hop: Vec<u32>,
    /// Set when no candidate could meet the threshold and every hop got the maximum.
    fallback: bool,
}

impl PurificationPlan {
    pub fn new(path: Path, rounds_per_hop: Vec<u32>) -> Result<Self> {
        if rounds_per_hop.len() != path.hop_count() {
            return Err(Error::Parameter(format!(
                "{} round entries for {} hops",
                rounds_per_hop.len(),
                path.hop_count()
            )));
        }
        if let Some(r) = rounds_per_hop.iter().find(|r| !(1..=MAX_ROUNDS).contains(r)) {
            return Err(Error::Parameter(format!("rounds {r} outside 1..={MAX_ROUNDS}")));
        }
        Ok(PurificationPlan {
            path,
            rounds_per_hop,
            fallback: false,
        })
    }

    pub fn uniform(path: Path, rounds: u32) -> Result<Self> {
        let n = path.hop_count();
        PurificationPlan::new(path, vec![rounds; n])
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn rounds_per_hop(&self) -> &[u32] {
        &self.rounds_per_hop
    }

    pub fn total_rounds(&self) -> u32 {
        self.rounds_per_hop.iter().sum()
    }

    pub fn max_rounds(&self) -> u32 {
        self.rounds_per_hop.iter().copied().max().unwrap_or(0)
    }

    pub fn total_distance(&self) -> f64 {
        self.path.total_distance()
    }

    pub fn is_fallback(&self) -> bool {
        self.fallback
    }

    /// Hyphen-joined rounds, e.g. `1-2-1`.
    pub fn rounds_label(&self) -> String {
        self.rounds_per_hop
            .iter()
            .map(|r| r.to_string())
            .collect::<Vec<_>>()
            .join("-")
    }
}

/// A selected plan and its cost within the candidate set it was chosen from.
#[derive(Debug, Clone, PartialEq)]
pub struct CostedPlan {
    pub plan: PurificationPlan,
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "semi_medium")]
    SemiSupervisedMedium,
    #[serde(rename = "semi_high")]
    SemiSupervisedHigh,
    #[serde(rename = "fixed1")]
    ShortestPathFixedOne,
    #[serde(rename = "fixed2")]
    ShortestPathFixedTwo,
    #[serde(rename = "fifo")]
    Fifo,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::SemiSupervisedHigh,
        PolicyKind::SemiSupervisedMedium,
        PolicyKind::ShortestPathFixedTwo,
        PolicyKind::ShortestPathFixedOne,
        PolicyKind::Fifo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::SemiSupervisedMedium => "semi_medium",
            PolicyKind::SemiSupervisedHigh => "semi_high",
            PolicyKind::ShortestPathFixedOne => "fixed1",
            PolicyKind::ShortestPathFixedTwo => "fixed2",
            PolicyKind::Fifo => "fifo",
        }
    }

    pub fn is_adaptive(self) -> bool {
        self.target_estimate().is_some()
    }

    pub fn target_estimate(self) -> Option<TargetEstimate> {
        match self {
            PolicyKind::SemiSupervisedMedium => Some(TargetEstimate::Minimum),
            PolicyKind::SemiSupervisedHigh => Some(TargetEstimate::Uniform),
            _ => None,
        }
    }

    /// Rounds per hop for the non-adaptive policies.
    pub fn fixed_rounds(self) -> Option<u32> {
        match self {
            PolicyKind::ShortestPathFixedOne | PolicyKind::Fifo => Some(1),
            PolicyKind::ShortestPathFixedTwo => Some(2),
            _ => None,
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown policy {s:?}")))
    }
}

/// How an adaptive policy turns the end-to-end threshold into a hop target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetEstimate {
    /// One hop at the minimum, the rest at the best fidelity the path can reach.
    Minimum,
    /// Every hop at the same fidelity.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveParams {
    pub threshold: Fidelity,
    pub gamma: f64,
    /// Added to the solved hop target before querying the model.
    pub margin: f64,
    pub gate: GateParameters,
    pub candidates: usize,
}

impl Default for AdaptiveParams {
    fn default() -> Self {
        AdaptiveParams {
            threshold: Fidelity::new(0.83).unwrap(),
            gamma: 0.3,
            margin: 0.01,
            gate: GateParameters::default(),
            candidates: 3,
        }
    }
}

fn min_max_normalize(values: &[f64]) -> Vec<f64> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max > min {
        values.iter().map(|v| (v - min) / (max - min)).collect()
    } else {
        vec![0.0; values.len()]
    }
}

/// `gamma * D' + (1 - gamma) * R'` per plan, with total distance and total
/// rounds min-max normalized over `plans`. A term whose spread is zero is 0.
pub fn compute_cost<P: Borrow<PurificationPlan>>(plans: &[P], gamma: f64) -> Vec<f64> {
    let distances: Vec<f64> = plans.iter().map(|p| p.borrow().total_distance()).collect();
    let rounds: Vec<f64> = plans.iter().map(|p| p.borrow().total_rounds() as f64).collect();
    min_max_normalize(&distances)
        .into_iter()
        .zip(min_max_normalize(&rounds))
        .map(|(d, r)| gamma * d + (1.0 - gamma) * r)
        .collect()
}

/// Best fidelity a hop reaches from its mean initial fidelity within the round budget.
fn best_reachable(path: &Path) -> Fidelity {
    path.hops()
        .iter()
        .map(|h| purify_rounds(Fidelity::saturating(h.mean_initial_fidelity()), MAX_ROUNDS))
        .fold(Fidelity::MIXED, |acc, f| if f > acc { f } else { acc })
}

/// Hop fidelity target for `path`, including the margin and capped at 1.
pub fn target_hop_fidelity(path: &Path, estimate: TargetEstimate, params: &AdaptiveParams) -> Result<Fidelity> {
    let n = path.hop_count();
    let solved = match estimate {
        TargetEstimate::Minimum => {
            solve_target_hop_fidelity_min(params.threshold, n, best_reachable(path), params.gate)?
        }
        TargetEstimate::Uniform => solve_target_hop_fidelity_uniform(params.threshold, n, params.gate)?,
    };
    Ok(Fidelity::saturating(solved.value() + params.margin))
}

/// Model-predicted rounds for every hop of `path` at `target`.
pub fn predicted_plan(model: &ClassifierModel, path: Path, target: Fidelity) -> Result<PurificationPlan> {
    let rounds = path
        .oriented_hops()
        .map(|(u, v, _)| predict_rounds(model, u, v, target))
        .collect();
    PurificationPlan::new(path, rounds)
}

/// Chooses the cheapest of up to `params.candidates` shortest paths, each
/// planned with model-predicted rounds. Candidates whose hop target is
/// unreachable are dropped; if none remain, the shortest candidate gets the
/// maximum rounds on every hop and the plan is flagged as a fallback.
pub fn plan_adaptive(
    topo: &Topology,
    model: &ClassifierModel,
    src: NodeId,
    dst: NodeId,
    estimate: TargetEstimate,
    params: &AdaptiveParams,
) -> Result<CostedPlan> {
    model.check_nodes(topo.n_nodes())?;
    let candidates = k_shortest_paths(topo, src, dst, params.candidates)?;
    let shortest = candidates[0].clone();
    let mut plans = Vec::with_capacity(candidates.len());
    for path in candidates {
        match target_hop_fidelity(&path, estimate, params) {
            Ok(target) => plans.push(predicted_plan(model, path, target)?),
            Err(Error::InfeasibleTarget { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    if plans.is_empty() {
        let mut plan = PurificationPlan::uniform(shortest, MAX_ROUNDS)?;
        plan.fallback = true;
        return Ok(CostedPlan { plan, cost: 0.0 });
    }
    let costs = compute_cost(&plans, params.gamma);
    // Candidates arrive sorted by (distance, nodes), so the first minimum wins ties.
    let mut best = 0;
    for (i, &c) in costs.iter().enumerate() {
        if c < costs[best] {
            best = i;
        }
    }
    Ok(CostedPlan {
        cost: costs[best],
        plan: plans.swap_remove(best),
    })
}

/// Shortest path with the same number of rounds on every hop.
pub fn plan_fixed(topo: &Topology, src: NodeId, dst: NodeId, rounds: u32) -> Result<PurificationPlan> {
    let path = k_shortest_paths(topo, src, dst, 1)?.swap_remove(0);
    PurificationPlan::uniform(path, rounds)
}

fn planned(req: &EntanglementRequest) -> Result<&PurificationPlan> {
    req.plan
        .as_ref()
        .ok_or_else(|| Error::Parameter(format!("request {} has no plan", req.id)))
}

/// Service order for `queue` as a permutation of its indices. Sorting is
/// stable, so equal keys keep their current queue order.
pub fn order_queue(policy: PolicyKind, queue: &[EntanglementRequest], gamma: f64) -> Result<Vec<usize>> {
    let mut order: Vec<usize> = (0..queue.len()).collect();
    match policy {
        PolicyKind::Fifo => {
            order.sort_by(|&a, &b| {
                queue[a]
                    .t_g
                    .total_cmp(&queue[b].t_g)
                    .then(queue[a].id.cmp(&queue[b].id))
            });
        }
        PolicyKind::ShortestPathFixedOne | PolicyKind::ShortestPathFixedTwo => {
            let distances = queue
                .iter()
                .map(|r| planned(r).map(PurificationPlan::total_distance))
                .collect::<Result<Vec<_>>>()?;
            order.sort_by(|&a, &b| distances[a].total_cmp(&distances[b]));
        }
        PolicyKind::SemiSupervisedMedium | PolicyKind::SemiSupervisedHigh => {
            let plans = queue.iter().map(planned).collect::<Result<Vec<_>>>()?;
            let costs = compute_cost(&plans, gamma);
            order.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]));
        }
    }
    Ok(order)
}
