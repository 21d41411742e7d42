//! Mini-batch Adam training on softmax cross-entropy.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataprep::Dataset;
use crate::error::{Error, Result};
use crate::fcp::explain;
use crate::linalg::Vector;
use crate::network::{ActivationKind, ActivationTrace, Network};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    /// Weight of the protected-composition term in [`bias_penalized_loss`].
    pub lambda1: f64,
    /// Weight of the squared-weight term in [`bias_penalized_loss`].
    pub lambda2: f64,
    /// Sum absolute compositions in the protected term instead of signed ones.
    pub absolute_bias_term: bool,
    /// L2 penalty on bias parameters during training. Off by default.
    pub bias_l2: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            epochs: 100,
            batch_size: 32,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            lambda1: 0.0,
            lambda2: 0.0,
            absolute_bias_term: false,
            bias_l2: 0.0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        // A zero rate is allowed; it leaves the weights untouched.
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad(format!("learning rate must be non-negative, got {}", self.learning_rate));
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        for (name, b) in [("beta1", self.adam_beta1), ("beta2", self.adam_beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return bad(format!("Adam {name} must lie in (0, 1), got {b}"));
            }
        }
        if !(self.adam_eps > 0.0 && self.adam_eps.is_finite()) {
            return bad(format!("Adam eps must be positive, got {}", self.adam_eps));
        }
        for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2), ("bias_l2", self.bias_l2)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub seed: u64,
    pub epoch_losses: Vec<f64>,
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
}

impl TrainReport {
    /// CSV with header `epoch,mean_loss`; epochs count from 1.
    pub fn write_loss_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epoch", "mean_loss"])?;
        for (e, loss) in self.epoch_losses.iter().enumerate() {
            w.write_record([(e + 1).to_string(), loss.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Network with hidden widths `2N` and `N` and a softmax output layer.
pub fn case_study_network(
    n_features: usize,
    n_classes: usize,
    hidden: ActivationKind,
    seed: u64,
) -> Result<Network> {
    Network::glorot(
        &[n_features, 2 * n_features, n_features, n_classes],
        hidden,
        ActivationKind::Softmax,
        seed,
    )
}

/// Splits each class separately so class proportions carry over to both
/// parts. Returns `(train, test)`.
pub fn stratified_split(data: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut by_class = vec![Vec::new(); data.n_classes()];
    for (i, &l) in data.labels().iter().enumerate() {
        by_class[l].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (c, mut members) in by_class.into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < 2 {
            return Err(Error::Data(format!(
                "class '{}' has fewer than 2 instances",
                data.class_names()[c]
            )));
        }
        members.shuffle(&mut rng);
        let n_train = ((members.len() as f64 * train_fraction).round() as usize).clamp(1, members.len() - 1);
        train.extend_from_slice(&members[..n_train]);
        test.extend_from_slice(&members[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((data.subset(&train)?, data.subset(&test)?))
}

/// `-ln softmax(logits)[label]`, evaluated with log-sum-exp.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    lse - logits[label]
}

/// Parameter gradients laid out like the network's weights (row-major,
/// fan-in by fan-out) and biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            weights: net.layers().iter().map(|l| vec![0.0; l.weights().as_slice().len()]).collect(),
            biases: net.layers().iter().map(|l| vec![0.0; l.fan_out()]).collect(),
        }
    }

    fn add_scaled(&mut self, other: &Gradients, scale: f64) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += scale * y);
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += scale * y);
        }
    }
}

// Forward pass with ordinary summation. `Network::forward` rounds every
// sum exactly so explanations are order-independent; training does not need
// that and runs several times faster without it.
fn plain_forward(net: &Network, x: &Vector) -> Result<ActivationTrace> {
    if x.len() != net.input_width() {
        return Err(Error::shape(
            "loss_gradients",
            format!("network input width {}", net.input_width()),
            format!("instance of length {}", x.len()),
        ));
    }
    let mut activations = vec![x.clone()];
    let mut pre_activations = Vec::with_capacity(net.layers().len());
    for (l, layer) in net.layers().iter().enumerate() {
        let mut z = layer.weights().transpose_mul_vec(activations[l].as_slice())?;
        for (zi, b) in z.iter_mut().zip(layer.biases().iter()) {
            *zi += b;
        }
        let a = layer.activation().apply(&z);
        if z.iter().chain(&a).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("forward pass at layer {}", l + 1)));
        }
        pre_activations.push(Vector::from_raw(z));
        activations.push(Vector::from_raw(a));
    }
    Ok(ActivationTrace {
        activations,
        pre_activations,
    })
}

/// Cross-entropy of the output-layer pre-activations against `label` and
/// its gradient with respect to every weight and bias.
pub fn loss_gradients(net: &Network, x: &Vector, label: usize) -> Result<(f64, Gradients)> {
    if label >= net.output_width() {
        return Err(Error::InvalidArgument(format!(
            "label {label} out of range for {} outputs",
            net.output_width()
        )));
    }
    let trace = plain_forward(net, x)?;
    let logits = trace.logits().as_slice();
    let loss = softmax_cross_entropy(logits, label);

    let mut grads = Gradients::zeros_like(net);
    // dL/dz at the output: softmax(z) - onehot(label).
    let mut delta = ActivationKind::Softmax.apply(logits);
    delta[label] -= 1.0;
    for (l, layer) in net.layers().iter().enumerate().rev() {
        let a_in = trace.activations[l].as_slice();
        let fan_out = layer.fan_out();
        let gw = &mut grads.weights[l];
        for (j, &aj) in a_in.iter().enumerate() {
            for (k, &dk) in delta.iter().enumerate() {
                gw[j * fan_out + k] = aj * dk;
            }
        }
        grads.biases[l].copy_from_slice(&delta);
        if l == 0 {
            break;
        }
        let below = &net.layers()[l - 1];
        let z = trace.pre_activations[l - 1].as_slice();
        let w = layer.weights();
        delta = (0..layer.fan_in())
            .map(|j| {
                let back: f64 = w.row(j).iter().zip(&delta).map(|(wjk, dk)| wjk * dk).sum();
                back * below.activation().derivative(z[j], a_in[j])
            })
            .collect();
    }
    Ok((loss, grads))
}

/// Adam optimizer state.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    pub fn new(net: &Network, hp: &Hyperparams) -> Self {
        Self {
            lr: hp.learning_rate,
            beta1: hp.adam_beta1,
            beta2: hp.adam_beta2,
            eps: hp.adam_eps,
            t: 0,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
        }
    }

    pub fn step(&mut self, net: &mut Network, grads: &Gradients) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let (lr, b1, b2, eps) = (self.lr, self.beta1, self.beta2, self.eps);
        let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        };
        for (l, layer) in net.layers_mut().iter_mut().enumerate() {
            let (w, b) = layer.params_mut();
            update(w, &grads.weights[l], &mut self.m.weights[l], &mut self.v.weights[l]);
            update(b, &grads.biases[l], &mut self.m.biases[l], &mut self.v.biases[l]);
        }
    }
}

/// Trains `net` in place. Batches are reshuffled every epoch from a stream
/// seeded by `hp.seed`.
pub fn train(net: &mut Network, data: &Dataset, hp: &Hyperparams) -> Result<TrainReport> {
    hp.validate()?;
    if net.output_width() != data.n_classes() {
        return Err(Error::shape(
            "train",
            format!("network output width {}", net.output_width()),
            format!("{} classes", data.n_classes()),
        ));
    }
    if net.input_width() != data.n_features() {
        return Err(Error::shape(
            "train",
            format!("network input width {}", net.input_width()),
            format!("{} features", data.n_features()),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    rng.set_stream(1);
    let mut adam = Adam::new(net, hp);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_losses = Vec::with_capacity(hp.epochs);
    for epoch in 0..hp.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(hp.batch_size) {
            let mut grads = Gradients::zeros_like(net);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let (loss, g) = loss_gradients(net, &data.instance(i), data.labels()[i])?;
                total += loss;
                grads.add_scaled(&g, scale);
            }
            if hp.bias_l2 > 0.0 {
                for (gb, layer) in grads.biases.iter_mut().zip(net.layers()) {
                    for (g, b) in gb.iter_mut().zip(layer.biases().iter()) {
                        *g += 2.0 * hp.bias_l2 * b;
                    }
                }
            }
            adam.step(net, &grads);
        }
        let mean = total / data.len() as f64;
        if !mean.is_finite() {
            return Err(Error::NonFinite(format!("training loss at epoch {}", epoch + 1)));
        }
        epoch_losses.push(mean);
    }
    Ok(TrainReport {
        seed: hp.seed,
        epoch_losses,
        train_accuracy: accuracy(net, data)?,
        test_accuracy: None,
    })
}

pub fn predict_all(net: &Network, data: &Dataset) -> Result<Vec<usize>> {
    (0..data.len()).map(|i| net.predict(&data.instance(i))).collect()
}

pub fn accuracy(net: &Network, data: &Dataset) -> Result<f64> {
    let predictions = predict_all(net, data)?;
    let hits = predictions
        .iter()
        .zip(data.labels())
        .filter(|(p, l)| p == l)
        .count();
    Ok(hits as f64 / data.len() as f64)
}

/// Terms of the bias-penalized loss for one instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BiasPenalizedLoss {
    pub total: f64,
    pub error: f64,
    pub bias: f64,
    pub reg: f64,
    /// Composition rows that were degenerate and contributed nothing.
    pub degenerate_rows: usize,
}

/// `Σ (Ω(x) - y)² + λ₁ Σ_l Σ_j ϑ_jk + λ₂ ‖W‖²`, where the middle sum runs
/// over the compositions of protected feature `k` in every non-input layer
/// and `‖W‖²` sums squared weights (biases excluded). Values only; nothing
/// here is differentiated.
pub fn bias_penalized_loss(
    net: &Network,
    x: &Vector,
    target: &[f64],
    protected: usize,
    hp: &Hyperparams,
) -> Result<BiasPenalizedLoss> {
    if protected >= net.input_width() {
        return Err(Error::InvalidArgument(format!(
            "protected feature {protected} out of range for {} features",
            net.input_width()
        )));
    }
    if target.len() != net.output_width() {
        return Err(Error::shape(
            "bias_penalized_loss",
            format!("{} outputs", net.output_width()),
            format!("target of length {}", target.len()),
        ));
    }
    let trace = explain(net, x)?;
    let error: f64 = trace
        .activations()
        .output()
        .iter()
        .zip(target)
        .map(|(o, y)| (o - y).powi(2))
        .sum();
    let bias: f64 = trace.layers()[1..]
        .iter()
        .flat_map(|m| m.column(protected))
        .map(|v| if hp.absolute_bias_term { v.abs() } else { v })
        .sum();
    let reg: f64 = net
        .layers()
        .iter()
        .flat_map(|l| l.weights().as_slice())
        .map(|w| w * w)
        .sum();
    Ok(BiasPenalizedLoss {
        total: error + hp.lambda1 * bias + hp.lambda2 * reg,
        error,
        bias,
        reg,
        degenerate_rows: trace.degenerate_rows().len(),
    })
}
