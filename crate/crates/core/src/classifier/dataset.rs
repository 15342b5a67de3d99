use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::encoding::{encode_hop, HopEncoding};
use super::network::Features;
use crate::error::{Error, Result};
use crate::quantum_math::purify_rounds;
use crate::topology::{sample_initial_fidelity, NodeId, Topology};

pub const DEFAULT_SAMPLES_PER_HOP: usize = 10_000;

/// A directed hop, the fidelity reached after `rounds` rounds, and `rounds`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingSample {
    pub src: NodeId,
    pub dst: NodeId,
    pub fidelity: f64,
    pub rounds: u32,
}

impl TrainingSample {
    pub fn features(&self) -> Features {
        Features {
            src: self.src,
            dst: self.dst,
            fidelity: self.fidelity,
        }
    }

    /// Zero-based class index.
    pub fn class(&self) -> usize {
        self.rounds as usize - 1
    }

    pub fn encoding(&self, n_nodes: usize) -> Result<HopEncoding> {
        encode_hop(self.src, self.dst, n_nodes)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub n_nodes: usize,
    pub samples: Vec<TrainingSample>,
}

#[derive(Serialize, Deserialize)]
struct Row {
    src: usize,
    dst: usize,
    fidelity: f64,
    rounds: u32,
}

impl Dataset {
    pub fn new(n_nodes: usize, samples: Vec<TrainingSample>) -> Result<Self> {
        for s in &samples {
            encode_hop(s.src, s.dst, n_nodes)?;
            if !(1..=3).contains(&s.rounds) {
                return Err(Error::Format(format!("rounds {} outside 1..=3", s.rounds)));
            }
            if !(0.0..=1.0).contains(&s.fidelity) {
                return Err(Error::Format(format!("fidelity {} outside [0, 1]", s.fidelity)));
            }
        }
        Ok(Dataset { n_nodes, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// CSV with header `src,dst,fidelity,rounds`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for s in &self.samples {
            w.serialize(Row {
                src: s.src.index(),
                dst: s.dst.index(),
                fidelity: s.fidelity,
                rounds: s.rounds,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, n_nodes: usize) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["src", "dst", "fidelity", "rounds"] {
            return Err(Error::Format(format!("unexpected dataset header {headers:?}")));
        }
        let samples = r
            .deserialize::<Row>()
            .map(|row| {
                let row = row?;
                Ok(TrainingSample {
                    src: NodeId(row.src),
                    dst: NodeId(row.dst),
                    fidelity: row.fidelity,
                    rounds: row.rounds,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(n_nodes, samples)
    }
}

/// For every hop in both orientations, `samples_per_hop` draws of an initial
/// fidelity and a uniform round count in `{1, 2, 3}`, labelled with the
/// purified fidelity those rounds produce.
pub fn generate_dataset<R: Rng + ?Sized>(topo: &Topology, samples_per_hop: usize, rng: &mut R) -> Dataset {
    let mut samples = Vec::with_capacity(2 * topo.hops().len() * samples_per_hop);
    for hop in topo.hops() {
        for (src, dst) in [(hop.a, hop.b), (hop.b, hop.a)] {
            for _ in 0..samples_per_hop {
                let f0 = sample_initial_fidelity(hop, rng);
                let rounds = rng.random_range(1..=3u32);
                samples.push(TrainingSample {
                    src,
                    dst,
                    fidelity: purify_rounds(f0, rounds).value(),
                    rounds,
                });
            }
        }
    }
    Dataset {
        n_nodes: topo.n_nodes(),
        samples,
    }
}
