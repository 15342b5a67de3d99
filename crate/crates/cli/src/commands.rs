use std::fs;
use std::path::{Path, PathBuf};

use entsched::classifier::{generate_dataset, train, ClassifierModel, Dataset, TrainingReport};
use entsched::rng::{substream, Stream};
use entsched::scheduling::PolicyKind;
use entsched::simulator::{run_simulation, slot_rows, summary_row, trace_rows, write_rows, SummaryRow};
use entsched::topology::Topology;

use crate::config::ExperimentConfig;
use crate::report::{self, ReportOptions};
use crate::{CliError, CliResult};

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub(crate) fn read_file(path: &Path) -> CliResult<Vec<u8>> {
    if !path.exists() {
        return Err(CliError::MissingInput(path.to_path_buf()));
    }
    fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn load_topology(cfg: &ExperimentConfig) -> CliResult<Topology> {
    let bytes = read_file(&cfg.topology_path())?;
    let text = String::from_utf8(bytes)
        .map_err(|e| CliError::Core(entsched::Error::Format(format!("topology file: {e}"))))?;
    Ok(Topology::parse_edge_list(&text)?)
}

pub fn load_model(cfg: &ExperimentConfig, topo: &Topology) -> CliResult<ClassifierModel> {
    let model = ClassifierModel::from_bytes(&read_file(&cfg.model_path())?)?;
    model.check_nodes(topo.n_nodes())?;
    Ok(model)
}

/// File stem shared by a run's trace and slot tables.
pub fn run_stem(policy: PolicyKind, lambda: f64, seed: u64) -> String {
    format!("{policy}_lambda{lambda}_seed{seed}")
}

pub fn trace_path(runs: &Path, policy: PolicyKind, lambda: f64, seed: u64) -> PathBuf {
    runs.join(format!("{}_trace.csv", run_stem(policy, lambda, seed)))
}

pub fn slots_path(runs: &Path, policy: PolicyKind, lambda: f64, seed: u64) -> PathBuf {
    runs.join(format!("{}_slots.csv", run_stem(policy, lambda, seed)))
}

pub fn summary_path(runs: &Path) -> PathBuf {
    runs.join("summary.csv")
}

pub fn cmd_topology(cfg: &ExperimentConfig) -> CliResult<PathBuf> {
    let topo = cfg.topology.generate(cfg.seed)?;
    let path = cfg.topology_path();
    write_file(&path, topo.to_edge_list().as_bytes())?;
    Ok(path)
}

fn sample_dataset(cfg: &ExperimentConfig, topo: &Topology) -> Dataset {
    let mut rng = substream(cfg.seed, Stream::Dataset, &[]);
    generate_dataset(topo, cfg.training.samples_per_hop, &mut rng)
}

pub fn cmd_dataset(cfg: &ExperimentConfig) -> CliResult<PathBuf> {
    let topo = load_topology(cfg)?;
    let ds = sample_dataset(cfg, &topo);
    let mut buf = Vec::new();
    ds.write_csv(&mut buf)?;
    let path = cfg.dataset_path();
    write_file(&path, &buf)?;
    Ok(path)
}

/// Trains on the dataset file when present, otherwise on a freshly sampled
/// dataset with the same seed. Writes the model and the per-epoch report.
pub fn cmd_train(cfg: &ExperimentConfig) -> CliResult<TrainingReport> {
    let topo = load_topology(cfg)?;
    let ds_path = cfg.dataset_path();
    let ds = if ds_path.exists() {
        Dataset::read_csv(read_file(&ds_path)?.as_slice(), topo.n_nodes())?
    } else {
        sample_dataset(cfg, &topo)
    };
    let (model, report) = train(&ds, &cfg.training_config())?;
    write_file(&cfg.model_path(), &model.to_bytes())?;
    let mut buf = Vec::new();
    report.write_csv(&mut buf)?;
    write_file(&cfg.training_report_path(), &buf)?;
    Ok(report)
}

/// One run per (policy, lambda, seed), each writing a trace and a slot table,
/// plus a shared summary. Returns every file written.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> CliResult<Vec<PathBuf>> {
    let topo = load_topology(cfg)?;
    let model = if cfg.needs_model() {
        Some(load_model(cfg, &topo)?)
    } else {
        None
    };
    let runs = cfg.runs_dir();
    let mut written = Vec::new();
    let mut summary: Vec<SummaryRow> = Vec::new();
    for &policy in &cfg.policies {
        for &lambda in &cfg.lambdas {
            for &seed in &cfg.seeds {
                let out = run_simulation(&cfg.sim_config(lambda, seed), &topo, policy, model.as_ref())?;
                let mut buf = Vec::new();
                write_rows(&trace_rows(&out.requests), &mut buf)?;
                let path = trace_path(&runs, policy, lambda, seed);
                write_file(&path, &buf)?;
                written.push(path);

                buf.clear();
                write_rows(&slot_rows(&out.metrics), &mut buf)?;
                let path = slots_path(&runs, policy, lambda, seed);
                write_file(&path, &buf)?;
                written.push(path);

                summary.push(summary_row(policy, lambda, seed, &out));
            }
        }
    }
    let mut buf = Vec::new();
    write_rows(&summary, &mut buf)?;
    let path = summary_path(&runs);
    write_file(&path, &buf)?;
    written.push(path);
    Ok(written)
}

pub fn cmd_report(cfg: &ExperimentConfig, options: &ReportOptions) -> CliResult<Vec<PathBuf>> {
    report::write_report(&cfg.runs_dir(), &cfg.report_dir(), options)
}

/// Topology, dataset, training (when an adaptive policy is listed),
/// simulation and report in sequence.
pub fn cmd_all(cfg: &ExperimentConfig, options: &ReportOptions) -> CliResult<()> {
    cmd_topology(cfg)?;
    if cfg.needs_model() {
        cmd_dataset(cfg)?;
        cmd_train(cfg)?;
    }
    cmd_simulate(cfg)?;
    cmd_report(cfg, options)?;
    Ok(())
}
