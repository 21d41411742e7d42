//! Helpers shared by the integration tests.
#![allow(dead_code)]

use fcp_core::{ActivationKind, Layer, Matrix, Network, Vector};
use rand::Rng;

pub const HIDDEN_KINDS: [ActivationKind; 6] = [
    ActivationKind::Identity,
    ActivationKind::Sigmoid,
    ActivationKind::Tanh,
    ActivationKind::ReLU,
    ActivationKind::LeakyReLU { slope: 0.01 },
    ActivationKind::Elu { alpha: 1.0 },
];

pub fn worked_example() -> Network {
    Network::from_json(include_str!("../../../../data/worked_example.model.json")).unwrap()
}

pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.gen_range(-scale..scale)).collect();
    Matrix::new(rows, cols, data).unwrap()
}

pub fn random_vector<R: Rng>(rng: &mut R, len: usize, scale: f64) -> Vector {
    Vector::new((0..len).map(|_| rng.gen_range(-scale..scale)).collect()).unwrap()
}

/// Random network with the given widths. Hidden layers draw their
/// activation from `HIDDEN_KINDS`; the output is softmax or a hidden kind.
pub fn random_network<R: Rng>(rng: &mut R, widths: &[usize], zero_bias: bool) -> Network {
    let last = widths.len() - 2;
    let layers = widths
        .windows(2)
        .enumerate()
        .map(|(l, w)| {
            let kind = if l == last && rng.gen_bool(0.5) {
                ActivationKind::Softmax
            } else {
                HIDDEN_KINDS[rng.gen_range(0..HIDDEN_KINDS.len())]
            };
            let biases = if zero_bias {
                Vector::new(vec![0.0; w[1]]).unwrap()
            } else {
                random_vector(rng, w[1], 0.5)
            };
            Layer::new(random_matrix(rng, w[0], w[1], 1.0), biases, kind).unwrap()
        })
        .collect();
    Network::new(widths[0], layers).unwrap()
}

/// Random widths: input width and `hidden` hidden layers, each in 1..=8.
pub fn random_widths<R: Rng>(rng: &mut R, weight_layers: usize) -> Vec<usize> {
    (0..=weight_layers).map(|_| rng.gen_range(1..=8)).collect()
}

/// Forward pass written out with explicit loops.
pub fn naive_activations(net: &Network, x: &[f64]) -> Vec<Vec<f64>> {
    let mut acts = vec![x.to_vec()];
    for layer in net.layers() {
        let prev = acts.last().unwrap();
        let w = layer.weights();
        let z: Vec<f64> = (0..layer.fan_out())
            .map(|i| {
                let mut s = layer.biases()[i];
                for (j, a) in prev.iter().enumerate() {
                    s += w.get(j, i) * a;
                }
                s
            })
            .collect();
        acts.push(layer.activation().apply(&z));
    }
    acts
}

/// Compositions of every layer computed term by term:
/// `raw[i][k] = Σ_j w[j][i]·θ[j][k]·|a[j]|`, then each row over its L1 norm.
pub fn naive_compositions(net: &Network, x: &[f64]) -> Vec<Vec<Vec<f64>>> {
    let n = x.len();
    let acts = naive_activations(net, x);
    let mut theta: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|k| if i == k { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut out = vec![theta.clone()];
    for (l, layer) in net.layers().iter().enumerate() {
        let w = layer.weights();
        let mut next = Vec::with_capacity(layer.fan_out());
        for i in 0..layer.fan_out() {
            let mut raw = vec![0.0; n];
            for (k, r) in raw.iter_mut().enumerate() {
                for j in 0..layer.fan_in() {
                    *r += w.get(j, i) * theta[j][k] * acts[l][j].abs();
                }
            }
            let norm: f64 = raw.iter().map(|v| v.abs()).sum();
            if norm < 1e-12 {
                next.push(vec![0.0; n]);
            } else {
                next.push(raw.iter().map(|v| v / norm).collect());
            }
        }
        theta = next;
        out.push(theta.clone());
    }
    out
}
