mod common;

use common::random_vector;
use fcp_core::trainer::loss_gradients;
use fcp_core::{ActivationKind, Layer, Matrix, Network, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;
const REL_TOL: f64 = 1e-5;

fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn rebuild(net: &Network, layer: usize, weight: Option<usize>, bias: Option<usize>, delta: f64) -> Network {
    let mut layers = net.layers().to_vec();
    let old = &layers[layer];
    let mut w = old.weights().as_slice().to_vec();
    let mut b = old.biases().as_slice().to_vec();
    if let Some(i) = weight {
        w[i] += delta;
    }
    if let Some(i) = bias {
        b[i] += delta;
    }
    layers[layer] = Layer::new(
        Matrix::new(old.fan_in(), old.fan_out(), w).unwrap(),
        Vector::new(b).unwrap(),
        old.activation(),
    )
    .unwrap();
    Network::new(net.input_width(), layers).unwrap()
}

fn loss(net: &Network, x: &Vector, label: usize) -> f64 {
    loss_gradients(net, x, label).unwrap().0
}

// Hidden pre-activations must stay clear of kinks for piecewise units.
fn away_from_kinks(net: &Network, x: &Vector) -> bool {
    let trace = net.forward(x).unwrap();
    trace.pre_activations[..trace.pre_activations.len() - 1]
        .iter()
        .all(|z| z.iter().all(|v| v.abs() > 1e-3))
}

/// Largest relative error between analytic and central-difference
/// gradients over all parameters of random networks using `hidden`.
fn worst_error(hidden: ActivationKind, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let widths = [rng.gen_range(2..=5), rng.gen_range(2..=6), rng.gen_range(2..=5), rng.gen_range(2..=4)];
        let mut net = Network::glorot(&widths, hidden, ActivationKind::Softmax, rng.gen()).unwrap();
        for l in 0..net.layers().len() {
            let b = random_vector(&mut rng, net.layers()[l].fan_out(), 0.3);
            net = net.with_biases(l, b).unwrap();
        }
        let x = loop {
            let x = random_vector(&mut rng, widths[0], 1.0);
            if away_from_kinks(&net, &x) {
                break x;
            }
        };
        let label = rng.gen_range(0..widths[3]);
        let (_, grads) = loss_gradients(&net, &x, label).unwrap();
        for l in 0..net.layers().len() {
            for i in 0..grads.weights[l].len() {
                let up = loss(&rebuild(&net, l, Some(i), None, STEP), &x, label);
                let down = loss(&rebuild(&net, l, Some(i), None, -STEP), &x, label);
                worst = worst.max(relative_error(grads.weights[l][i], (up - down) / (2.0 * STEP)));
            }
            for i in 0..grads.biases[l].len() {
                let up = loss(&rebuild(&net, l, None, Some(i), STEP), &x, label);
                let down = loss(&rebuild(&net, l, None, Some(i), -STEP), &x, label);
                worst = worst.max(relative_error(grads.biases[l][i], (up - down) / (2.0 * STEP)));
            }
        }
    }
    worst
}

#[test]
fn sigmoid_gradients() {
    let e = worst_error(ActivationKind::Sigmoid, 1);
    assert!(e <= REL_TOL, "relative error {e}");
}

#[test]
fn tanh_gradients() {
    let e = worst_error(ActivationKind::Tanh, 2);
    assert!(e <= REL_TOL, "relative error {e}");
}

#[test]
fn relu_gradients() {
    let e = worst_error(ActivationKind::ReLU, 3);
    assert!(e <= REL_TOL, "relative error {e}");
}

#[test]
fn leaky_relu_gradients() {
    let e = worst_error(ActivationKind::leaky_relu(), 4);
    assert!(e <= REL_TOL, "relative error {e}");
}

#[test]
fn elu_gradients() {
    let e = worst_error(ActivationKind::elu(), 5);
    assert!(e <= REL_TOL, "relative error {e}");
}

#[test]
fn identity_gradients() {
    let e = worst_error(ActivationKind::Identity, 6);
    assert!(e <= REL_TOL, "relative error {e}");
}
