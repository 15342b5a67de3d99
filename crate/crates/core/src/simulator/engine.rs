use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use super::cascade::purification_cascade;
use super::metrics::{RunMetrics, SlotMetrics};
use super::{EntanglementRequest, Outcome, SimConfig};
use crate::classifier::ClassifierModel;
use crate::error::{Error, Result};
use crate::quantum_math::{chain_fidelity, ChainSpec};
use crate::rng::{substream, Stream};
use crate::scheduling::{order_queue, plan_adaptive, plan_fixed, PolicyKind, PurificationPlan};
use crate::topology::{sample_initial_fidelity, NodeId, Topology};

/// Poisson-distributed arrival count for one slot.
pub fn sample_arrivals<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Result<u64> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::Parameter(format!("arrival rate {lambda} must be non-negative")));
    }
    if lambda == 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(lambda).map_err(|e| Error::Parameter(e.to_string()))?;
    Ok(dist.sample(rng) as u64)
}

/// Uniform ordered pair of distinct nodes.
pub fn sample_pair<R: Rng + ?Sized>(n_nodes: usize, rng: &mut R) -> (NodeId, NodeId) {
    assert!(n_nodes >= 2, "need two nodes to draw a pair");
    let src = rng.random_range(0..n_nodes);
    let mut dst = rng.random_range(0..n_nodes - 1);
    if dst >= src {
        dst += 1;
    }
    (NodeId(src), NodeId(dst))
}

/// Purification on all hops runs in parallel, followed by entanglement
/// generation along the path.
pub fn service_time(plan: &PurificationPlan, config: &SimConfig) -> f64 {
    let path = plan.path();
    let purification = config.purification_time_us * plan.max_rounds() as f64;
    let generation = path.hop_count() as f64 * path.mean_hop_distance() * config.entanglement_time_per_km_us;
    purification + generation
}

/// Executes the request's plan starting at absolute time `clock` and
/// returns the service time. Each hop draws its initial fidelity and its
/// cascade coins from substreams keyed by request and hop, so the result
/// does not depend on when or in what order requests are served.
pub fn serve_request(req: &mut EntanglementRequest, clock: f64, config: &SimConfig) -> Result<f64> {
    let plan = req
        .plan
        .as_ref()
        .ok_or_else(|| Error::Parameter(format!("request {} has no plan", req.id)))?;
    let threshold = config.threshold()?;
    let mut survivors = Vec::with_capacity(plan.path().hop_count());
    let mut depleted = false;
    let mut pairs = 0;
    for ((_, _, hop), &rounds) in plan.path().oriented_hops().zip(plan.rounds_per_hop()) {
        let key = [req.id, hop.a.index() as u64, hop.b.index() as u64];
        let f0 = sample_initial_fidelity(hop, &mut substream(config.seed, Stream::InitialFidelity, &key));
        let out = purification_cascade(
            f0,
            rounds,
            config.pairs_for_rounds(rounds),
            &mut substream(config.seed, Stream::Cascade, &key),
        );
        pairs += out.pairs_consumed;
        match out.fidelity {
            Some(f) => survivors.push(f),
            None => depleted = true,
        }
    }
    let elapsed = service_time(plan, config);
    if depleted {
        req.outcome = Outcome::CascadeDepleted;
        req.final_fidelity = None;
    } else {
        let f = chain_fidelity(&ChainSpec::new(survivors, config.gate)?);
        req.outcome = if f >= threshold { Outcome::Success } else { Outcome::BelowThreshold };
        req.final_fidelity = Some(f);
    }
    req.pairs_consumed = pairs;
    req.t_f = Some(clock + elapsed);
    Ok(elapsed)
}

/// Time from generation to fulfilment of a successful request.
pub fn compute_latency(req: &EntanglementRequest) -> Result<f64> {
    match (req.outcome, req.t_f) {
        (Outcome::Success, Some(t_f)) => Ok(t_f - req.t_g),
        _ => Err(Error::UndefinedLatency(req.id)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    pub metrics: RunMetrics,
    /// Every generated request in id order; unserved ones stay `Pending`.
    pub requests: Vec<EntanglementRequest>,
}

struct Planner<'a> {
    topo: &'a Topology,
    model: Option<&'a ClassifierModel>,
    policy: PolicyKind,
    config: &'a SimConfig,
    cache: BTreeMap<(NodeId, NodeId), PurificationPlan>,
}

impl Planner<'_> {
    fn plan(&mut self, src: NodeId, dst: NodeId) -> Result<PurificationPlan> {
        if let Some(p) = self.cache.get(&(src, dst)) {
            return Ok(p.clone());
        }
        let plan = match (self.policy.target_estimate(), self.policy.fixed_rounds()) {
            (Some(estimate), _) => {
                let model = self.model.expect("model presence checked before the run");
                plan_adaptive(self.topo, model, src, dst, estimate, &self.config.adaptive_params()?)?.plan
            }
            (None, Some(rounds)) => plan_fixed(self.topo, src, dst, rounds)?,
            (None, None) => unreachable!("every policy is adaptive or fixed"),
        };
        let t = service_time(&plan, self.config);
        if t > self.config.slot_interval_us {
            return Err(Error::Infeasible(format!(
                "plan {} needs {t} us, longer than the {} us slot",
                plan.path().label(),
                self.config.slot_interval_us
            )));
        }
        self.cache.insert((src, dst), plan.clone());
        Ok(plan)
    }
}

/// Runs `config.n_timeslots` slots of the given policy on `topo`.
pub fn run_simulation(
    config: &SimConfig,
    topo: &Topology,
    policy: PolicyKind,
    model: Option<&ClassifierModel>,
) -> Result<SimulationOutput> {
    config.validate()?;
    if topo.n_nodes() < 2 {
        return Err(Error::Config("topology needs at least two nodes".into()));
    }
    if policy.is_adaptive() {
        match model {
            Some(m) => m.check_nodes(topo.n_nodes())?,
            None => return Err(Error::Config(format!("policy {policy} needs a trained model"))),
        }
    }
    let mut planner = Planner {
        topo,
        model,
        policy,
        config,
        cache: BTreeMap::new(),
    };
    let interval = config.slot_interval_us;
    let mut metrics = RunMetrics::default();
    let mut queue: Vec<EntanglementRequest> = Vec::new();
    let mut done: Vec<EntanglementRequest> = Vec::new();
    let mut next_id = 0u64;

    for slot in 0..config.n_timeslots {
        let start = slot as f64 * interval;
        let mut rng = substream(config.seed, Stream::Arrivals, &[slot as u64]);
        for _ in 0..sample_arrivals(config.lambda, &mut rng)? {
            let (src, dst) = sample_pair(topo.n_nodes(), &mut rng);
            queue.push(EntanglementRequest::new(next_id, src, dst, start, slot));
            next_id += 1;
        }
        metrics.generated = next_id;
        for req in queue.iter_mut().filter(|r| r.plan.is_none()) {
            req.plan = Some(planner.plan(req.src, req.dst)?);
        }

        let mut pending = reorder(std::mem::take(&mut queue), policy, config.gamma)?;
        let mut slot_metrics = SlotMetrics::new(slot);
        let mut clock = 0.0;
        while !pending.is_empty() {
            let elapsed = service_time(pending[0].plan.as_ref().expect("planned above"), config);
            if clock + elapsed > interval {
                break;
            }
            let mut req = pending.remove(0);
            serve_request(&mut req, start + clock, config)?;
            clock += elapsed;
            req.slot_served = Some(slot);
            metrics.served += 1;
            metrics.total_bell_pairs += req.pairs_consumed;
            if let Some(f) = req.final_fidelity {
                slot_metrics.fidelities.push(f.value());
            }
            if let Ok(latency) = compute_latency(&req) {
                slot_metrics.n_success += 1;
                slot_metrics.latencies.push(latency);
            }
            done.push(req);
            if config.resort_after_service {
                pending = reorder(pending, policy, config.gamma)?;
            }
        }
        slot_metrics.throughput = slot_metrics.n_success as f64 / interval;
        metrics.total_success += slot_metrics.n_success;
        metrics.per_slot.push(slot_metrics);
        queue = pending;
    }

    metrics.unserved = queue.len() as u64;
    done.append(&mut queue);
    done.sort_by_key(|r| r.id);
    Ok(SimulationOutput { metrics, requests: done })
}

fn reorder(queue: Vec<EntanglementRequest>, policy: PolicyKind, gamma: f64) -> Result<Vec<EntanglementRequest>> {
    let order = order_queue(policy, &queue, gamma)?;
    let mut slots: Vec<Option<EntanglementRequest>> = queue.into_iter().map(Some).collect();
    Ok(order.into_iter().map(|i| slots[i].take().expect("order is a permutation")).collect())
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;
    use crate::quantum_math::Fidelity;
    use crate::topology::{HopProfile, Path, TopologyParams};

    fn exact_line(n: usize, weight: f64) -> Topology {
        let hops = (0..n - 1)
            .map(|i| HopProfile::new(NodeId(i), NodeId(i + 1), weight, 1.0).unwrap())
            .collect();
        Topology::new(n, hops).unwrap().with_fidelity_stddev(0.0)
    }

    #[test]
    fn arrival_moments() {
        let mut rng = substream(1, Stream::Arrivals, &[]);
        assert_eq!(sample_arrivals(0.0, &mut rng).unwrap(), 0);
        assert!(sample_arrivals(-1.0, &mut rng).is_err());
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| sample_arrivals(2.0, &mut rng).unwrap() as f64).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - 2.0).abs() < 0.02, "mean {mean}");
        assert!((var - 2.0).abs() < 0.05, "var {var}");

        let zeros = (0..n).filter(|_| sample_arrivals(8.0, &mut rng).unwrap() == 0).count() as f64;
        let p = (-8.0f64).exp();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((zeros / n as f64 - p).abs() <= 3.0 * se, "{zeros}");
    }

    #[test]
    fn pairs_are_distinct_and_uniform() {
        let mut rng = substream(2, Stream::Arrivals, &[]);
        let mut counts = [[0u32; 4]; 4];
        for _ in 0..12_000 {
            let (s, d) = sample_pair(4, &mut rng);
            assert_ne!(s, d);
            counts[s.index()][d.index()] += 1;
        }
        for (s, row) in counts.iter().enumerate() {
            for (d, &c) in row.iter().enumerate() {
                if s != d {
                    assert!((800..1200).contains(&c), "{s}->{d}: {c}");
                }
            }
        }
    }

    #[test]
    fn timing_examples() {
        let cfg = SimConfig::default();
        let topo = exact_line(4, 0.05);
        let one = PurificationPlan::uniform(Path::from_nodes(&topo, vec![NodeId(0), NodeId(1)]).unwrap(), 1).unwrap();
        assert_abs_diff_eq!(service_time(&one, &cfg), 20.0, epsilon = 1e-12);
        let path = Path::from_nodes(&topo, (0..4).map(NodeId).collect()).unwrap();
        let three = PurificationPlan::new(path, vec![1, 2, 1]).unwrap();
        assert_abs_diff_eq!(service_time(&three, &cfg), 50.0, epsilon = 1e-12);
    }

    #[test]
    fn boundary_fidelity_counts_as_success() {
        // Threshold set to exactly what one round on an f0 = 0.95 hop delivers.
        let topo = exact_line(2, 0.05);
        let hop = crate::quantum_math::purify_once(Fidelity::new(0.95).unwrap());
        let f = chain_fidelity(&ChainSpec::new(vec![hop], Default::default()).unwrap()).value();
        assert_abs_diff_eq!(f, hop.value(), epsilon = 1e-12);
        let cfg = SimConfig { fidelity_threshold: f, ..SimConfig::default() };
        let mut req = EntanglementRequest::new(0, NodeId(0), NodeId(1), 0.0, 0);
        req.plan = Some(plan_fixed(&topo, NodeId(0), NodeId(1), 1).unwrap());
        let elapsed = serve_request(&mut req, 0.0, &cfg).unwrap();
        assert_eq!(elapsed, 20.0);
        assert_eq!(req.outcome, Outcome::Success);
        assert_eq!(req.final_fidelity.unwrap().value(), f);
        assert_eq!(req.pairs_consumed, 10);
        assert_eq!(compute_latency(&req).unwrap(), 20.0);
    }

    #[test]
    fn latency_requires_success() {
        let mut req = EntanglementRequest::new(7, NodeId(0), NodeId(1), 0.0, 0);
        assert!(matches!(compute_latency(&req), Err(Error::UndefinedLatency(7))));
        req.outcome = Outcome::BelowThreshold;
        req.t_f = Some(20.0);
        assert!(compute_latency(&req).is_err());
    }

    #[test]
    fn zero_load_run() {
        let topo = TopologyParams::default().generate(1).unwrap();
        let cfg = SimConfig { lambda: 0.0, n_timeslots: 50, ..SimConfig::default() };
        let out = run_simulation(&cfg, &topo, PolicyKind::Fifo, None).unwrap();
        assert_eq!(out.metrics.per_slot.len(), 50);
        assert!(out.metrics.per_slot.iter().all(|s| s.n_success == 0 && s.throughput == 0.0));
        assert_eq!(out.metrics.utilization(), None);
        assert!(out.requests.is_empty());
    }

    #[test]
    fn adaptive_policy_needs_model() {
        let topo = TopologyParams::default().generate(1).unwrap();
        let r = run_simulation(&SimConfig::default(), &topo, PolicyKind::SemiSupervisedHigh, None);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn oversized_plan_is_infeasible() {
        let topo = exact_line(10, 0.05);
        let cfg = SimConfig { slot_interval_us: 50.0, lambda: 5.0, ..SimConfig::default() };
        let r = run_simulation(&cfg, &topo, PolicyKind::Fifo, None);
        assert!(matches!(r, Err(Error::Infeasible(_))));
    }

    #[test]
    fn blocked_queue_carries_over() {
        // Slot holds exactly one 1-hop service of 20 us.
        let topo = exact_line(2, 0.05);
        let cfg = SimConfig { slot_interval_us: 20.0, lambda: 3.0, n_timeslots: 30, ..SimConfig::default() };
        let out = run_simulation(&cfg, &topo, PolicyKind::Fifo, None).unwrap();
        let m = &out.metrics;
        assert!(m.per_slot.iter().all(|s| s.n_success <= 1));
        assert_eq!(m.generated, m.served + m.unserved);
        assert!(m.unserved > 0);
        let late = out
            .requests
            .iter()
            .find(|r| r.slot_served.is_some_and(|s| s >= r.slot_generated + 2))
            .expect("some request waits two slots");
        let waited = (late.slot_served.unwrap() - late.slot_generated) as f64 * cfg.slot_interval_us;
        if late.outcome == Outcome::Success {
            assert_eq!(compute_latency(late).unwrap(), waited + 20.0);
        }
        // FIFO: service order follows ids.
        let mut served: Vec<_> = out.requests.iter().filter(|r| r.is_served()).collect();
        served.sort_by(|a, b| a.t_f.unwrap().total_cmp(&b.t_f.unwrap()));
        assert!(served.windows(2).all(|w| w[0].id < w[1].id));
    }

    #[test]
    fn single_request_trace() {
        let topo = exact_line(2, 0.05);
        let cfg = SimConfig { lambda: 0.3, n_timeslots: 40, ..SimConfig::default() };
        let out = run_simulation(&cfg, &topo, PolicyKind::ShortestPathFixedOne, None).unwrap();
        for slot in &out.metrics.per_slot {
            assert_eq!(slot.throughput * cfg.slot_interval_us, slot.n_success as f64);
        }
        let alone = out
            .requests
            .iter()
            .find(|r| {
                r.outcome == Outcome::Success
                    && out.requests.iter().filter(|o| o.slot_generated == r.slot_generated).count() == 1
            })
            .unwrap();
        let slot = &out.metrics.per_slot[alone.slot_generated];
        assert_eq!(compute_latency(alone).unwrap(), 20.0);
        assert_eq!(slot.n_success, 1);
        assert_eq!(slot.throughput, 1.0 / 500.0);
    }
}
