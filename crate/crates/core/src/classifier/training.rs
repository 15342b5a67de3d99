use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, DEFAULT_SAMPLES_PER_HOP};
use super::network::{argmax, ClassifierModel, Features, Gradients, Scratch};
use crate::error::{Error, Result};
use crate::rng::{substream, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_initial: f64,
    pub lr_final: f64,
    /// Fraction of every hop's samples held out for validation.
    pub validation_fraction: f64,
    pub hidden_layers: Vec<usize>,
    pub samples_per_hop: usize,
    /// Set by the caller; not read from config files.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            epochs: 500,
            batch_size: 8,
            lr_initial: 1e-3,
            lr_final: 1e-5,
            validation_fraction: 0.2,
            hidden_layers: vec![32, 32],
            samples_per_hop: DEFAULT_SAMPLES_PER_HOP,
            seed: 1,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.samples_per_hop == 0 {
            return Err(Error::Config("epochs, batch size and samples per hop must be positive".into()));
        }
        if !(self.lr_initial > 0.0 && self.lr_final > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Config(format!(
                "validation fraction {} outside (0, 1)",
                self.validation_fraction
            )));
        }
        if self.hidden_layers.contains(&0) {
            return Err(Error::Config("hidden layer widths must be positive".into()));
        }
        Ok(())
    }

    /// Cosine-annealed rate for a zero-based epoch.
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        let progress = epoch as f64 / self.epochs as f64;
        self.lr_final + (self.lr_initial - self.lr_final) * (1.0 + (PI * progress).cos()) / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochReport {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingReport {
    pub epochs: Vec<EpochReport>,
}

#[derive(Serialize, Deserialize)]
struct ReportRow {
    epoch: usize,
    train_loss: f64,
    val_accuracy: f64,
}

impl TrainingReport {
    pub fn final_accuracy(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.val_accuracy)
    }

    /// CSV with header `epoch,train_loss,val_accuracy`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for e in &self.epochs {
            w.serialize(ReportRow {
                epoch: e.epoch,
                train_loss: e.train_loss,
                val_accuracy: e.val_accuracy,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let epochs = r
            .deserialize::<ReportRow>()
            .map(|row| {
                let row = row?;
                Ok(EpochReport {
                    epoch: row.epoch,
                    train_loss: row.train_loss,
                    val_accuracy: row.val_accuracy,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TrainingReport { epochs })
    }
}

/// Seeded split that holds out the same fraction of every directed hop.
fn stratified_split(dataset: &Dataset, fraction: f64, rng: &mut impl rand::Rng) -> (Vec<usize>, Vec<usize>) {
    let mut groups: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (i, s) in dataset.samples.iter().enumerate() {
        groups.entry((s.src.index(), s.dst.index())).or_default().push(i);
    }
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for mut members in groups.into_values() {
        members.shuffle(rng);
        let held_out = ((members.len() as f64) * fraction).round() as usize;
        let held_out = held_out.min(members.len().saturating_sub(1));
        val.extend_from_slice(&members[..held_out]);
        train.extend_from_slice(&members[held_out..]);
    }
    (train, val)
}

pub fn accuracy(model: &ClassifierModel, samples: &[(Features, usize)]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let mut scratch = Scratch::new(model);
    let hits = samples
        .iter()
        .filter(|(features, class)| {
            model.forward(&model.sparse_input(features), &mut scratch);
            argmax(scratch.logits()) == *class
        })
        .count();
    hits as f64 / samples.len() as f64
}

/// Mini-batch gradient descent on the mean cross-entropy with a cosine-annealed
/// learning rate. Returns the trained model and one report row per epoch.
pub fn train(dataset: &Dataset, config: &TrainingConfig) -> Result<(ClassifierModel, TrainingReport)> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Config("empty dataset".into()));
    }
    let mut classes: Vec<u32> = dataset.samples.iter().map(|s| s.rounds).collect();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::Config("dataset needs at least two classes".into()));
    }

    let mut rng = substream(config.seed, Stream::Training, &[]);
    let (train_idx, val_idx) = stratified_split(dataset, config.validation_fraction, &mut rng);
    let to_pairs = |idx: &[usize]| -> Vec<(Features, usize)> {
        idx.iter()
            .map(|&i| (dataset.samples[i].features(), dataset.samples[i].class()))
            .collect()
    };
    let train_set = to_pairs(&train_idx);
    let val_set = to_pairs(&val_idx);

    let mut model = ClassifierModel::initialize(dataset.n_nodes, &config.hidden_layers, &mut rng);
    let n = train_set.len() as f64;
    let mean = train_set.iter().map(|(f, _)| f.fidelity).sum::<f64>() / n;
    let var = train_set.iter().map(|(f, _)| (f.fidelity - mean).powi(2)).sum::<f64>() / n;
    model.set_fidelity_normalization(mean, if var > 0.0 { var.sqrt() } else { 1.0 });

    let mut scratch = Scratch::new(&model);
    let mut grads = Gradients::zeros_like(&model);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut report = TrainingReport::default();
    for epoch in 0..config.epochs {
        let lr = config.learning_rate(epoch);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            for &i in batch {
                let (features, class) = &train_set[i];
                let input = model.sparse_input(features);
                model.forward(&input, &mut scratch);
                loss_sum += model.backward(&input, *class, &mut scratch, &mut grads);
            }
            if !model.apply_and_clear(&mut grads, lr / batch.len() as f64) {
                return Err(Error::Diverged(format!("non-finite parameter in epoch {epoch}")));
            }
        }
        let train_loss = loss_sum / n;
        if !train_loss.is_finite() {
            return Err(Error::Diverged(format!("non-finite loss in epoch {epoch}")));
        }
        report.epochs.push(EpochReport {
            epoch,
            train_loss,
            val_accuracy: accuracy(&model, &val_set),
        });
    }
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;
    use crate::classifier::dataset::TrainingSample;
    use crate::topology::NodeId;

    #[test]
    fn cosine_schedule() {
        let cfg = TrainingConfig::default();
        assert_abs_diff_eq!(cfg.learning_rate(0), 1e-3, epsilon = 1e-12);
        assert_abs_diff_eq!(cfg.learning_rate(250), (1e-3 + 1e-5) / 2.0, epsilon = 1e-12);
        for e in 0..cfg.epochs {
            let expected = 1e-5 + (1e-3 - 1e-5) * (1.0 + (PI * e as f64 / 500.0).cos()) / 2.0;
            assert_abs_diff_eq!(cfg.learning_rate(e), expected, epsilon = 1e-12);
            if e > 0 {
                assert!(cfg.learning_rate(e) < cfg.learning_rate(e - 1));
            }
        }
    }

    fn toy_dataset() -> Dataset {
        let mut samples = Vec::new();
        for i in 0..200 {
            let jitter = (i % 10) as f64 * 0.001;
            samples.push(TrainingSample { src: NodeId(0), dst: NodeId(1), fidelity: 0.80 + jitter, rounds: 1 });
            samples.push(TrainingSample { src: NodeId(0), dst: NodeId(1), fidelity: 0.95 + jitter, rounds: 3 });
        }
        Dataset::new(3, samples).unwrap()
    }

    #[test]
    fn separable_toy_problem() {
        let cfg = TrainingConfig {
            epochs: 50,
            hidden_layers: vec![16, 16],
            lr_initial: 1e-2,
            lr_final: 1e-3,
            ..TrainingConfig::default()
        };
        let (_, report) = train(&toy_dataset(), &cfg).unwrap();
        assert_eq!(report.epochs.len(), 50);
        assert_eq!(report.final_accuracy(), Some(1.0));
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = TrainingConfig { epochs: 3, hidden_layers: vec![8], ..TrainingConfig::default() };
        let (a, ra) = train(&toy_dataset(), &cfg).unwrap();
        let (b, rb) = train(&toy_dataset(), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
    }

    #[test]
    fn split_is_stratified() {
        let ds = toy_dataset();
        let mut rng = substream(1, Stream::Training, &[]);
        let (train, val) = stratified_split(&ds, 0.2, &mut rng);
        assert_eq!(train.len() + val.len(), ds.len());
        assert_eq!(val.len(), 80);
    }

    #[test]
    fn rejects_bad_inputs() {
        let cfg = TrainingConfig::default();
        assert!(matches!(train(&Dataset::new(3, vec![]).unwrap(), &cfg), Err(Error::Config(_))));
        let one_class = Dataset::new(
            3,
            vec![TrainingSample { src: NodeId(0), dst: NodeId(1), fidelity: 0.9, rounds: 2 }; 10],
        )
        .unwrap();
        assert!(matches!(train(&one_class, &cfg), Err(Error::Config(_))));
        let bad = TrainingConfig { validation_fraction: 1.0, ..TrainingConfig::default() };
        assert!(matches!(train(&toy_dataset(), &bad), Err(Error::Config(_))));
    }

    #[test]
    fn report_csv_round_trip() {
        let report = TrainingReport {
            epochs: vec![
                EpochReport { epoch: 0, train_loss: 1.0986, val_accuracy: 0.5 },
                EpochReport { epoch: 1, train_loss: 0.7, val_accuracy: 0.8125 },
            ],
        };
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"epoch,train_loss,val_accuracy\n"));
        let back = TrainingReport::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, report);
    }
}
