//! CSV rows for per-request traces, per-slot series and run summaries.

use std::io::{Read, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::engine::SimulationOutput;
use super::{EntanglementRequest, Outcome, RunMetrics};
use crate::error::{Error, Result};
use crate::scheduling::PolicyKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub id: u64,
    pub src: usize,
    pub dst: usize,
    pub t_g: f64,
    pub t_f: Option<f64>,
    pub outcome: Outcome,
    pub final_fidelity: Option<f64>,
    pub latency: Option<f64>,
    /// Hyphen-joined node sequence.
    pub path: String,
    /// Hyphen-joined rounds per hop.
    pub rounds: String,
    pub pairs_consumed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRow {
    pub slot: usize,
    pub n_success: u64,
    pub throughput: f64,
    pub mean_latency: Option<f64>,
    pub mean_fidelity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub policy: PolicyKind,
    pub lambda: f64,
    pub seed: u64,
    pub generated: u64,
    pub served: u64,
    pub unserved: u64,
    pub successes: u64,
    pub bell_pairs: u64,
    pub utilization: Option<f64>,
    pub mean_latency: Option<f64>,
    pub mean_throughput: f64,
    pub mean_fidelity: Option<f64>,
}

fn trace_row(req: &EntanglementRequest) -> TraceRow {
    let (path, rounds) = match &req.plan {
        Some(plan) => (plan.path().label(), plan.rounds_label()),
        None => (String::new(), String::new()),
    };
    TraceRow {
        id: req.id,
        src: req.src.index(),
        dst: req.dst.index(),
        t_g: req.t_g,
        t_f: req.t_f,
        outcome: req.outcome,
        final_fidelity: req.final_fidelity.map(|f| f.value()),
        latency: super::compute_latency(req).ok(),
        path,
        rounds,
        pairs_consumed: req.pairs_consumed,
    }
}

pub fn trace_rows(requests: &[EntanglementRequest]) -> Vec<TraceRow> {
    requests.iter().map(trace_row).collect()
}

pub fn slot_rows(metrics: &RunMetrics) -> Vec<SlotRow> {
    metrics
        .per_slot
        .iter()
        .map(|s| SlotRow {
            slot: s.slot_index,
            n_success: s.n_success,
            throughput: s.throughput,
            mean_latency: s.mean_latency(),
            mean_fidelity: s.mean_fidelity(),
        })
        .collect()
}

pub fn summary_row(policy: PolicyKind, lambda: f64, seed: u64, output: &SimulationOutput) -> SummaryRow {
    let m = &output.metrics;
    SummaryRow {
        policy,
        lambda,
        seed,
        generated: m.generated,
        served: m.served,
        unserved: m.unserved,
        successes: m.total_success,
        bell_pairs: m.total_bell_pairs,
        utilization: m.utilization(),
        mean_latency: m.mean_latency(),
        mean_throughput: m.mean_throughput(),
        mean_fidelity: m.mean_fidelity(),
    }
}

/// Row types with a fixed column list, so empty tables still get a header.
pub trait CsvRecord: Serialize + DeserializeOwned {
    const HEADER: &'static [&'static str];
}

impl CsvRecord for TraceRow {
    const HEADER: &'static [&'static str] = &[
        "id",
        "src",
        "dst",
        "t_g",
        "t_f",
        "outcome",
        "final_fidelity",
        "latency",
        "path",
        "rounds",
        "pairs_consumed",
    ];
}

impl CsvRecord for SlotRow {
    const HEADER: &'static [&'static str] = &["slot", "n_success", "throughput", "mean_latency", "mean_fidelity"];
}

impl CsvRecord for SummaryRow {
    const HEADER: &'static [&'static str] = &[
        "policy",
        "lambda",
        "seed",
        "generated",
        "served",
        "unserved",
        "successes",
        "bell_pairs",
        "utilization",
        "mean_latency",
        "mean_throughput",
        "mean_fidelity",
    ];
}

pub fn write_rows<T: CsvRecord, W: Write>(rows: &[T], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(T::HEADER)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<T: CsvRecord, R: Read>(reader: R) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(reader);
    if r.headers()?.iter().ne(T::HEADER.iter().copied()) {
        return Err(Error::Format(format!("expected columns {}", T::HEADER.join(","))));
    }
    let rows = r.deserialize().collect::<std::result::Result<Vec<T>, _>>()?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{run_simulation, SimConfig};
    use crate::topology::TopologyParams;

    fn round_trip<T: CsvRecord + PartialEq + std::fmt::Debug>(rows: &[T]) {
        let mut buf = Vec::new();
        write_rows(rows, &mut buf).unwrap();
        assert!(buf.starts_with(T::HEADER.join(",").as_bytes()));
        let back: Vec<T> = read_rows(buf.as_slice()).unwrap();
        assert_eq!(back, rows);
        let mut again = Vec::new();
        write_rows(&back, &mut again).unwrap();
        assert_eq!(again, buf);
    }

    #[test]
    fn tables_round_trip() {
        let topo = TopologyParams::default().generate(2).unwrap();
        let cfg = SimConfig { n_timeslots: 30, lambda: 6.0, ..SimConfig::default() };
        let out = run_simulation(&cfg, &topo, PolicyKind::ShortestPathFixedTwo, None).unwrap();
        let trace = trace_rows(&out.requests);
        assert!(trace.iter().any(|r| r.latency.is_some()));
        round_trip(&trace);
        round_trip(&slot_rows(&out.metrics));
        round_trip(&[summary_row(PolicyKind::ShortestPathFixedTwo, 6.0, 1, &out)]);
        round_trip::<TraceRow>(&[]);
    }

    #[test]
    fn header_is_checked() {
        let r: Result<Vec<SlotRow>> = read_rows("a,b\n1,2\n".as_bytes());
        assert!(matches!(r, Err(Error::Format(_))));
    }
}
