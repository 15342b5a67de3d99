#[derive(Debug, Clone, PartialEq)]
pub struct SlotMetrics {
    pub slot_index: usize,
    pub n_success: u64,
    /// Successful requests per microsecond of slot time.
    pub throughput: f64,
    /// Latencies of successful requests.
    pub latencies: Vec<f64>,
    /// Final fidelities of every served request that kept a surviving pair.
    pub fidelities: Vec<f64>,
}

impl SlotMetrics {
    pub(crate) fn new(slot_index: usize) -> Self {
        SlotMetrics {
            slot_index,
            n_success: 0,
            throughput: 0.0,
            latencies: Vec::new(),
            fidelities: Vec::new(),
        }
    }

    pub fn mean_latency(&self) -> Option<f64> {
        mean(&self.latencies)
    }

    pub fn mean_fidelity(&self) -> Option<f64> {
        mean(&self.fidelities)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunMetrics {
    pub per_slot: Vec<SlotMetrics>,
    pub total_bell_pairs: u64,
    pub total_success: u64,
    pub generated: u64,
    pub served: u64,
    pub unserved: u64,
}

impl RunMetrics {
    /// Bell pairs spent per successful request; undefined without successes.
    pub fn utilization(&self) -> Option<f64> {
        (self.total_success > 0).then(|| self.total_bell_pairs as f64 / self.total_success as f64)
    }

    pub fn latencies(&self) -> Vec<f64> {
        self.per_slot.iter().flat_map(|s| s.latencies.iter().copied()).collect()
    }

    pub fn fidelities(&self) -> Vec<f64> {
        self.per_slot.iter().flat_map(|s| s.fidelities.iter().copied()).collect()
    }

    pub fn throughputs(&self) -> Vec<f64> {
        self.per_slot.iter().map(|s| s.throughput).collect()
    }

    pub fn mean_latency(&self) -> Option<f64> {
        mean(&self.latencies())
    }

    pub fn mean_fidelity(&self) -> Option<f64> {
        mean(&self.fidelities())
    }

    pub fn mean_throughput(&self) -> f64 {
        mean(&self.throughputs()).unwrap_or(0.0)
    }
}

pub(crate) fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}
