//! Time-slotted request service.
//!
//! Each slot draws Poisson arrivals, plans and orders the queue with the
//! chosen policy, then serves requests one at a time while they fit in the
//! remaining slot budget. Whatever does not fit carries over, ahead of the
//! next slot's arrivals.

mod cascade;
mod engine;
mod metrics;
mod records;

use serde::{Deserialize, Serialize};

pub use cascade::{purification_cascade, run_purification_cascade, CascadeOutcome};
pub use engine::{
    compute_latency, run_simulation, sample_arrivals, sample_pair, serve_request, service_time, SimulationOutput,
};
pub use metrics::{RunMetrics, SlotMetrics};
pub use records::{
    read_rows, slot_rows, summary_row, trace_rows, write_rows, CsvRecord, SlotRow, SummaryRow, TraceRow,
};

use crate::error::{Error, Result};
use crate::quantum_math::{Fidelity, GateParameters};
use crate::scheduling::{AdaptiveParams, PurificationPlan, MAX_ROUNDS};
use crate::topology::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pending,
    Success,
    BelowThreshold,
    CascadeDepleted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntanglementRequest {
    pub id: u64,
    pub src: NodeId,
    pub dst: NodeId,
    /// Generation time in microseconds.
    pub t_g: f64,
    /// Fulfilment time in microseconds.
    pub t_f: Option<f64>,
    pub plan: Option<PurificationPlan>,
    pub final_fidelity: Option<Fidelity>,
    pub outcome: Outcome,
    pub pairs_consumed: u64,
    pub slot_generated: usize,
    pub slot_served: Option<usize>,
}

impl EntanglementRequest {
    pub fn new(id: u64, src: NodeId, dst: NodeId, t_g: f64, slot_generated: usize) -> Self {
        EntanglementRequest {
            id,
            src,
            dst,
            t_g,
            t_f: None,
            plan: None,
            final_fidelity: None,
            outcome: Outcome::Pending,
            pairs_consumed: 0,
            slot_generated,
            slot_served: None,
        }
    }

    pub fn is_served(&self) -> bool {
        self.outcome != Outcome::Pending
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n_timeslots: usize,
    pub slot_interval_us: f64,
    /// Mean arrivals per slot. Set per run, not read from config files.
    #[serde(skip)]
    pub lambda: f64,
    pub fidelity_threshold: f64,
    /// Time for one purification round.
    pub purification_time_us: f64,
    /// Entanglement generation time per km of path.
    pub entanglement_time_per_km_us: f64,
    /// Weight of distance against rounds in the path cost.
    pub gamma: f64,
    /// Added to the estimated hop target before querying the classifier.
    pub target_margin: f64,
    pub candidate_paths: usize,
    /// Bell pairs prepared on a hop for 1, 2 and 3 rounds.
    pub bell_pairs_per_rounds: [u64; 3],
    /// Re-order the queue after every service instead of once per slot.
    pub resort_after_service: bool,
    pub gate: GateParameters,
    #[serde(skip)]
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_timeslots: 1000,
            slot_interval_us: 500.0,
            lambda: 2.0,
            fidelity_threshold: 0.83,
            purification_time_us: 10.0,
            entanglement_time_per_km_us: 10.0,
            gamma: 0.3,
            target_margin: 0.01,
            candidate_paths: 3,
            bell_pairs_per_rounds: [10, 30, 60],
            resort_after_service: false,
            gate: GateParameters::default(),
            seed: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("slot_interval_us", self.slot_interval_us),
            ("purification_time_us", self.purification_time_us),
            ("entanglement_time_per_km_us", self.entanglement_time_per_km_us),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.n_timeslots == 0 || self.candidate_paths == 0 {
            return Err(Error::Config("n_timeslots and candidate_paths must be positive".into()));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::Config(format!("lambda must be non-negative, got {}", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma {} outside [0, 1]", self.gamma)));
        }
        if !(self.target_margin.is_finite() && self.target_margin >= 0.0) {
            return Err(Error::Config(format!("target_margin {} must be non-negative", self.target_margin)));
        }
        if self.bell_pairs_per_rounds.contains(&0) {
            return Err(Error::Config("bell_pairs_per_rounds entries must be positive".into()));
        }
        self.threshold()?;
        self.gate.validate().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn threshold(&self) -> Result<Fidelity> {
        Fidelity::new(self.fidelity_threshold).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn pairs_for_rounds(&self, rounds: u32) -> u64 {
        assert!((1..=MAX_ROUNDS).contains(&rounds), "rounds {rounds} outside 1..={MAX_ROUNDS}");
        self.bell_pairs_per_rounds[rounds as usize - 1]
    }

    pub fn adaptive_params(&self) -> Result<AdaptiveParams> {
        Ok(AdaptiveParams {
            threshold: self.threshold()?,
            gamma: self.gamma,
            margin: self.target_margin,
            gate: self.gate,
            candidates: self.candidate_paths,
        })
    }
}
