//! Trains a classifier on a reduced dataset (or loads one) and prints mean
//! metrics per policy and load over a batch of simulation seeds.
//!
//! Usage: policy_sweep [MODEL_PATH] [SEEDS]

use std::fs::File;
use std::path::Path;

use entsched::classifier::{generate_dataset, train, ClassifierModel, TrainingConfig};
use entsched::rng::{substream, Stream};
use entsched::scheduling::PolicyKind;
use entsched::simulator::{run_simulation, SimConfig};
use entsched::topology::TopologyParams;

fn main() -> entsched::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let model_path = args.get(1).map(String::as_str).unwrap_or("model.bin");
    let seeds: u64 = args.get(2).map(|s| s.parse().expect("seed count")).unwrap_or(10);

    let topo = TopologyParams::default().generate(1)?;
    let model = if Path::new(model_path).exists() {
        ClassifierModel::load(File::open(model_path)?)?
    } else {
        let cfg = TrainingConfig { samples_per_hop: 1000, ..TrainingConfig::default() };
        let ds = generate_dataset(&topo, cfg.samples_per_hop, &mut substream(cfg.seed, Stream::Dataset, &[]));
        let (model, report) = train(&ds, &cfg)?;
        println!("validation accuracy {:.4}", report.final_accuracy().unwrap_or(0.0));
        model.save(File::create(model_path)?)?;
        model
    };

    println!("{:>6} {:>12} {:>10} {:>12} {:>10} {:>8}", "lambda", "policy", "latency", "throughput", "util", "fid");
    for lambda in [2.0, 6.0, 8.0] {
        for policy in PolicyKind::ALL {
            let (mut lat, mut thr, mut util, mut fid) = (0.0, 0.0, 0.0, 0.0);
            for seed in 1..=seeds {
                let cfg = SimConfig { lambda, seed, ..SimConfig::default() };
                let m = run_simulation(&cfg, &topo, policy, Some(&model))?.metrics;
                lat += m.mean_latency().unwrap_or(f64::NAN);
                thr += m.mean_throughput();
                util += m.utilization().unwrap_or(f64::NAN);
                fid += m.mean_fidelity().unwrap_or(f64::NAN);
            }
            let n = seeds as f64;
            println!(
                "{lambda:>6} {:>12} {:>10.3} {:>12.6} {:>10.3} {:>8.4}",
                policy.name(),
                lat / n,
                thr / n,
                util / n,
                fid / n
            );
        }
    }
    Ok(())
}
