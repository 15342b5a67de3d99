use rand::Rng;

use super::encoding::{encode_hop, HopEncoding};
use crate::error::{Error, Result};
use crate::quantum_math::Fidelity;
use crate::topology::NodeId;

pub const NUM_CLASSES: usize = 3;

/// One fully connected layer; `weights` is row-major `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub(crate) inputs: usize,
    pub(crate) outputs: usize,
    pub(crate) weights: Vec<f64>,
    pub(crate) biases: Vec<f64>,
}

impl DenseLayer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        DenseLayer {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    fn glorot<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let a = (6.0 / (inputs + outputs) as f64).sqrt();
        let mut layer = DenseLayer::zeros(inputs, outputs);
        for w in &mut layer.weights {
            *w = rng.random_range(-a..=a);
        }
        layer
    }

    #[inline]
    fn row(&self, o: usize) -> &[f64] {
        &self.weights[o * self.inputs..(o + 1) * self.inputs]
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }
}

/// Network input: a directed hop and a fidelity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Features {
    pub src: NodeId,
    pub dst: NodeId,
    pub fidelity: f64,
}

/// Feed-forward round predictor: rectified hidden layers, three logits out.
///
/// The input row is the hop encoding followed by one fidelity column, which
/// is standardized with `fidelity_shift` and `fidelity_scale` before entering
/// the first layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    pub(crate) n_nodes: usize,
    pub(crate) layers: Vec<DenseLayer>,
    pub(crate) fidelity_shift: f64,
    pub(crate) fidelity_scale: f64,
}

impl ClassifierModel {
    fn dims(n_nodes: usize, hidden: &[usize]) -> Vec<usize> {
        let mut dims = vec![2 * n_nodes + 1];
        dims.extend_from_slice(hidden);
        dims.push(NUM_CLASSES);
        dims
    }

    /// Scaled-uniform initialization with zero biases.
    pub fn initialize<R: Rng + ?Sized>(n_nodes: usize, hidden: &[usize], rng: &mut R) -> Self {
        let dims = Self::dims(n_nodes, hidden);
        ClassifierModel {
            n_nodes,
            layers: dims.windows(2).map(|w| DenseLayer::glorot(w[0], w[1], rng)).collect(),
            fidelity_shift: 0.0,
            fidelity_scale: 1.0,
        }
    }

    pub fn zeros(n_nodes: usize, hidden: &[usize]) -> Self {
        let dims = Self::dims(n_nodes, hidden);
        ClassifierModel {
            n_nodes,
            layers: dims.windows(2).map(|w| DenseLayer::zeros(w[0], w[1])).collect(),
            fidelity_shift: 0.0,
            fidelity_scale: 1.0,
        }
    }

    pub(crate) fn from_parts(
        n_nodes: usize,
        layers: Vec<DenseLayer>,
        fidelity_shift: f64,
        fidelity_scale: f64,
    ) -> Result<Self> {
        let model = ClassifierModel {
            n_nodes,
            layers,
            fidelity_shift,
            fidelity_scale,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        let dims = self.layer_dims();
        if dims.len() < 2 || dims[0] != 2 * self.n_nodes + 1 || *dims.last().unwrap() != NUM_CLASSES {
            return Err(Error::Format(format!("layer dims {dims:?} do not fit {} nodes", self.n_nodes)));
        }
        for (l, pair) in self.layers.windows(2).enumerate() {
            if pair[0].outputs != pair[1].inputs {
                return Err(Error::Format(format!("layer {l} output width mismatch")));
            }
        }
        for layer in &self.layers {
            if layer.weights.len() != layer.inputs * layer.outputs || layer.biases.len() != layer.outputs {
                return Err(Error::Format("layer parameter length mismatch".into()));
            }
        }
        if !self.all_finite() || self.fidelity_scale <= 0.0 {
            return Err(Error::Format("non-finite or invalid model parameters".into()));
        }
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    /// Widths from input to output, e.g. `[21, 64, 64, 3]`.
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].inputs];
        dims.extend(self.layers.iter().map(|l| l.outputs));
        dims
    }

    pub fn fidelity_normalization(&self) -> (f64, f64) {
        (self.fidelity_shift, self.fidelity_scale)
    }

    pub fn set_fidelity_normalization(&mut self, shift: f64, scale: f64) {
        assert!(scale > 0.0 && scale.is_finite() && shift.is_finite());
        self.fidelity_shift = shift;
        self.fidelity_scale = scale;
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()))
    }

    /// Errors unless the model was built for a topology with `n_nodes` nodes.
    pub fn check_nodes(&self, n_nodes: usize) -> Result<()> {
        if self.n_nodes == n_nodes {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "model expects {} nodes, topology has {n_nodes}",
                self.n_nodes
            )))
        }
    }

    pub fn encode(&self, src: NodeId, dst: NodeId) -> Result<HopEncoding> {
        encode_hop(src, dst, self.n_nodes)
    }

    /// Non-zero input columns: source bit, destination bit, scaled fidelity.
    #[inline]
    pub(crate) fn sparse_input(&self, features: &Features) -> [(usize, f64); 3] {
        let n = self.n_nodes;
        [
            (features.src.index(), 1.0),
            (n + features.dst.index(), 1.0),
            (2 * n, (features.fidelity - self.fidelity_shift) / self.fidelity_scale),
        ]
    }

    pub fn logits(&self, features: &Features) -> Vec<f64> {
        let mut scratch = Scratch::new(self);
        self.forward(&self.sparse_input(features), &mut scratch);
        scratch.activations.last().unwrap().clone()
    }

    /// Argmax class index; ties go to the lowest index.
    pub fn predict_class(&self, features: &Features) -> usize {
        argmax(&self.logits(features))
    }

    pub(crate) fn forward(&self, input: &[(usize, f64)], scratch: &mut Scratch) {
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let (done, rest) = scratch.activations.split_at_mut(l);
            let out = &mut rest[0];
            if l == 0 {
                for (o, slot) in out.iter_mut().enumerate() {
                    let row = layer.row(o);
                    *slot = layer.biases[o] + input.iter().map(|&(i, v)| row[i] * v).sum::<f64>();
                }
            } else {
                let prev = &done[l - 1];
                for (o, slot) in out.iter_mut().enumerate() {
                    *slot = layer.biases[o] + dot(layer.row(o), prev);
                }
            }
            if l != last {
                for v in out.iter_mut() {
                    *v = v.max(0.0);
                }
            }
        }
    }

    /// Cross-entropy of one sample; accumulates its gradient into `grads`.
    /// Assumes `forward` has just filled `scratch` for this input.
    pub(crate) fn backward(
        &self,
        input: &[(usize, f64)],
        class: usize,
        scratch: &mut Scratch,
        grads: &mut Gradients,
    ) -> f64 {
        let last = self.layers.len() - 1;
        let loss = {
            let logits = &scratch.activations[last];
            let delta = &mut scratch.deltas[last];
            let lse = log_sum_exp(logits);
            for (d, &z) in delta.iter_mut().zip(logits) {
                *d = (z - lse).exp();
            }
            delta[class] -= 1.0;
            lse - logits[class]
        };
        for l in (0..=last).rev() {
            let layer = &self.layers[l];
            let (lower, upper) = scratch.deltas.split_at_mut(l);
            let delta = &upper[0];
            let grad = &mut grads.layers[l];
            for (gb, &d) in grad.biases.iter_mut().zip(delta) {
                *gb += d;
            }
            if l == 0 {
                for (o, &d) in delta.iter().enumerate() {
                    let grow = &mut grad.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for &(i, v) in input {
                        grow[i] += d * v;
                    }
                }
                break;
            }
            let prev_act = &scratch.activations[l - 1];
            let prev_delta = &mut lower[l - 1];
            prev_delta.iter_mut().for_each(|v| *v = 0.0);
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                axpy(d, prev_act, &mut grad.weights[o * layer.inputs..(o + 1) * layer.inputs]);
                axpy(d, layer.row(o), prev_delta);
            }
            for (pd, &a) in prev_delta.iter_mut().zip(prev_act) {
                if a <= 0.0 {
                    *pd = 0.0;
                }
            }
        }
        loss
    }

    /// Mean cross-entropy over `batch` and its gradient.
    pub fn loss_and_gradient(&self, batch: &[(Features, usize)]) -> (f64, Gradients) {
        let mut scratch = Scratch::new(self);
        let mut grads = Gradients::zeros_like(self);
        let mut total = 0.0;
        for (features, class) in batch {
            let input = self.sparse_input(features);
            self.forward(&input, &mut scratch);
            total += self.backward(&input, *class, &mut scratch, &mut grads);
        }
        grads.scale(1.0 / batch.len() as f64);
        (total / batch.len() as f64, grads)
    }

    /// Mean cross-entropy over `batch`.
    pub fn loss(&self, batch: &[(Features, usize)]) -> f64 {
        let mut scratch = Scratch::new(self);
        let total: f64 = batch
            .iter()
            .map(|(features, class)| {
                self.forward(&self.sparse_input(features), &mut scratch);
                let logits = scratch.activations.last().unwrap();
                log_sum_exp(logits) - logits[*class]
            })
            .sum();
        total / batch.len() as f64
    }

    /// Gradient step `p -= lr * g` that also zeroes `grads` for the next
    /// batch; returns whether every parameter stayed finite.
    pub(crate) fn apply_and_clear(&mut self, grads: &mut Gradients, lr: f64) -> bool {
        let mut finite = true;
        for (layer, grad) in self.layers.iter_mut().zip(&mut grads.layers) {
            for (p, g) in layer.weights.iter_mut().zip(&mut grad.weights) {
                *p -= lr * *g;
                *g = 0.0;
                finite &= p.is_finite();
            }
            for (p, g) in layer.biases.iter_mut().zip(&mut grad.biases) {
                *p -= lr * *g;
                *g = 0.0;
                finite &= p.is_finite();
            }
        }
        finite
    }

    /// Flat view of all parameters, layer by layer, weights before biases.
    pub fn parameters_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }
}

/// Per-layer activation and delta buffers reused across samples.
pub(crate) struct Scratch {
    activations: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl Scratch {
    pub(crate) fn new(model: &ClassifierModel) -> Self {
        Scratch {
            activations: model.layers.iter().map(|l| vec![0.0; l.outputs]).collect(),
            deltas: model.layers.iter().map(|l| vec![0.0; l.outputs]).collect(),
        }
    }

    pub(crate) fn logits(&self) -> &[f64] {
        self.activations.last().unwrap()
    }
}

/// Parameter-shaped gradient buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    layers: Vec<DenseLayer>,
}

impl Gradients {
    pub fn zeros_like(model: &ClassifierModel) -> Self {
        Gradients {
            layers: model.layers.iter().map(|l| DenseLayer::zeros(l.inputs, l.outputs)).collect(),
        }
    }

    pub(crate) fn scale(&mut self, factor: f64) {
        for layer in &mut self.layers {
            layer.weights.iter_mut().for_each(|v| *v *= factor);
            layer.biases.iter_mut().for_each(|v| *v *= factor);
        }
    }

    /// Same ordering as [`ClassifierModel::parameters_mut`].
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
    }
}

/// Rounds in `{1, 2, 3}` the model assigns to a hop for a target fidelity.
pub fn predict_rounds(model: &ClassifierModel, src: NodeId, dst: NodeId, target: Fidelity) -> u32 {
    model.predict_class(&Features {
        src,
        dst,
        fidelity: target.value(),
    }) as u32
        + 1
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // Independent lanes so the reduction is not one serial add chain.
    const LANES: usize = 16;
    let mut acc = [0.0f64; LANES];
    let chunks = a.len() / LANES * LANES;
    for (ca, cb) in a[..chunks].chunks_exact(LANES).zip(b[..chunks].chunks_exact(LANES)) {
        for k in 0..LANES {
            acc[k] += ca[k] * cb[k];
        }
    }
    let tail: f64 = a[chunks..].iter().zip(&b[chunks..]).map(|(x, y)| x * y).sum();
    acc.iter().sum::<f64>() + tail
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    use super::*;
    use crate::rng::{substream, Stream};

    fn random_batch(n_nodes: usize, size: usize, rng: &mut impl Rng) -> Vec<(Features, usize)> {
        (0..size)
            .map(|_| {
                let src = rng.random_range(0..n_nodes);
                let mut dst = rng.random_range(0..n_nodes - 1);
                if dst >= src {
                    dst += 1;
                }
                let f = Features {
                    src: NodeId(src),
                    dst: NodeId(dst),
                    fidelity: rng.random_range(0.7..1.0),
                };
                (f, rng.random_range(0..NUM_CLASSES))
            })
            .collect()
    }

    #[test]
    fn uniform_logits_give_ln3() {
        let model = ClassifierModel::zeros(10, &[8, 8]);
        let mut rng = substream(1, Stream::Training, &[]);
        let batch = random_batch(10, 16, &mut rng);
        assert_abs_diff_eq!(model.loss(&batch), 3f64.ln(), epsilon = 1e-15);
        let (loss, _) = model.loss_and_gradient(&batch);
        assert_abs_diff_eq!(loss, 3f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn zero_model_predicts_one_round() {
        let model = ClassifierModel::zeros(10, &[64, 64]);
        assert_eq!(predict_rounds(&model, NodeId(0), NodeId(3), Fidelity::new(0.9).unwrap()), 1);
        assert_eq!(model.layer_dims(), vec![21, 64, 64, 3]);
    }

    #[test]
    fn argmax_ties_pick_lowest() {
        assert_eq!(argmax(&[1.0, 1.0, 0.5]), 0);
        assert_eq!(argmax(&[0.0, 2.0, 2.0]), 1);
        assert_eq!(argmax(&[0.0, 1.0, 2.0]), 2);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = substream(5, Stream::Training, &[]);
        let mut model = ClassifierModel::initialize(6, &[7, 5], &mut rng);
        for b in model.layers.iter_mut().flat_map(|l| l.biases.iter_mut()) {
            *b = rng.random_range(-0.2..0.2);
        }
        model.set_fidelity_normalization(0.85, 0.05);
        let batch = random_batch(6, 10, &mut rng);
        let (_, grads) = model.loss_and_gradient(&batch);
        let analytic: Vec<f64> = grads.values().collect();
        let h = 1e-6;
        for (i, &a) in analytic.iter().enumerate() {
            let mut plus = model.clone();
            *plus.parameters_mut().nth(i).unwrap() += h;
            let mut minus = model.clone();
            *minus.parameters_mut().nth(i).unwrap() -= h;
            let numeric = (plus.loss(&batch) - minus.loss(&batch)) / (2.0 * h);
            let scale = a.abs().max(numeric.abs());
            if scale > 1e-7 {
                assert!((a - numeric).abs() / scale < 1e-4, "param {i}: {a} vs {numeric}");
            } else {
                assert!((a - numeric).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn predict_is_deterministic() {
        let mut rng = substream(9, Stream::Training, &[]);
        let model = ClassifierModel::initialize(10, &[16, 16], &mut rng);
        let t = Fidelity::new(0.91).unwrap();
        let a = predict_rounds(&model, NodeId(2), NodeId(4), t);
        for _ in 0..5 {
            assert_eq!(predict_rounds(&model, NodeId(2), NodeId(4), t), a);
        }
        assert!((1..=3).contains(&a));
    }
}
