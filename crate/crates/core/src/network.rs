//! Fully-connected feed-forward classifiers.
//!
//! A layer maps `a ↦ f(Wᵀa + b)` where `W` is stored `fan_in × fan_out`
//! (row `j` holds the weights leaving source neuron `j`). The forward pass
//! records every post-activation vector so that composition propagation and
//! LRP can reuse them.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{exact_sum, Matrix, Vector};

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;
pub const DEFAULT_ELU_ALPHA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActivationKind {
    Identity,
    Sigmoid,
    Tanh,
    ReLU,
    LeakyReLU { slope: f64 },
    Elu { alpha: f64 },
    /// Output layer only.
    Softmax,
}

impl ActivationKind {
    pub const fn leaky_relu() -> Self {
        ActivationKind::LeakyReLU {
            slope: DEFAULT_LEAKY_SLOPE,
        }
    }

    pub const fn elu() -> Self {
        ActivationKind::Elu {
            alpha: DEFAULT_ELU_ALPHA,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ActivationKind::Identity => "identity",
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Tanh => "tanh",
            ActivationKind::ReLU => "relu",
            ActivationKind::LeakyReLU { .. } => "leaky_relu",
            ActivationKind::Elu { .. } => "elu",
            ActivationKind::Softmax => "softmax",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ActivationKind::LeakyReLU { slope } if !(slope > 0.0 && slope < 1.0) => Err(
                Error::InvalidArgument(format!("leaky_relu slope must be in (0,1), got {slope}")),
            ),
            ActivationKind::Elu { alpha } if !(alpha > 0.0 && alpha.is_finite()) => Err(
                Error::InvalidArgument(format!("elu alpha must be positive, got {alpha}")),
            ),
            _ => Ok(()),
        }
    }

    /// Applies the transfer function to a pre-activation vector.
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        match *self {
            ActivationKind::Softmax => softmax(z),
            kind => z.iter().map(|&v| kind.scalar(v)).collect(),
        }
    }

    fn scalar(&self, z: f64) -> f64 {
        match *self {
            ActivationKind::Identity => z,
            ActivationKind::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            ActivationKind::Tanh => z.tanh(),
            ActivationKind::ReLU => z.max(0.0),
            ActivationKind::LeakyReLU { slope } => {
                if z > 0.0 {
                    z
                } else {
                    slope * z
                }
            }
            ActivationKind::Elu { alpha } => {
                if z > 0.0 {
                    z
                } else {
                    alpha * z.exp_m1()
                }
            }
            ActivationKind::Softmax => unreachable!("softmax is vector-wise"),
        }
    }

    /// Element-wise derivative `f'(z)`, given the pre-activation `z` and the
    /// corresponding output `a = f(z)`. Not defined for softmax.
    pub fn derivative(&self, z: f64, a: f64) -> f64 {
        match *self {
            ActivationKind::Identity => 1.0,
            ActivationKind::Sigmoid => a * (1.0 - a),
            ActivationKind::Tanh => 1.0 - a * a,
            ActivationKind::ReLU => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::LeakyReLU { slope } => {
                if z > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            ActivationKind::Elu { alpha } => {
                if z > 0.0 {
                    1.0
                } else {
                    alpha * z.exp()
                }
            }
            ActivationKind::Softmax => panic!("softmax derivative is not element-wise"),
        }
    }

    fn params(&self) -> Option<ActivationParams> {
        match *self {
            ActivationKind::LeakyReLU { slope } => Some(ActivationParams {
                slope: Some(slope),
                alpha: None,
            }),
            ActivationKind::Elu { alpha } => Some(ActivationParams {
                slope: None,
                alpha: Some(alpha),
            }),
            _ => None,
        }
    }

    fn from_parts(name: &str, params: Option<&ActivationParams>) -> Result<Self> {
        let kind = match name {
            "identity" => ActivationKind::Identity,
            "sigmoid" => ActivationKind::Sigmoid,
            "tanh" => ActivationKind::Tanh,
            "relu" => ActivationKind::ReLU,
            "leaky_relu" => ActivationKind::LeakyReLU {
                slope: params
                    .and_then(|p| p.slope)
                    .unwrap_or(DEFAULT_LEAKY_SLOPE),
            },
            "elu" => ActivationKind::Elu {
                alpha: params.and_then(|p| p.alpha).unwrap_or(DEFAULT_ELU_ALPHA),
            },
            "softmax" => ActivationKind::Softmax,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown activation '{other}'"
                )))
            }
        };
        kind.validate()?;
        Ok(kind)
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    /// Parses an activation name with default parameters.
    fn from_str(s: &str) -> Result<Self> {
        ActivationKind::from_parts(&s.trim().to_ascii_lowercase(), None)
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn activate(kind: ActivationKind, z: &Vector) -> Vector {
    Vector::from_raw(kind.apply(z.as_slice()))
}

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    weights: Matrix,
    biases: Vector,
    activation: ActivationKind,
}

impl Layer {
    pub fn new(weights: Matrix, biases: Vector, activation: ActivationKind) -> Result<Self> {
        if weights.cols() != biases.len() {
            return Err(Error::shape(
                "Layer::new",
                format!("weights {}x{}", weights.rows(), weights.cols()),
                format!("{} biases", biases.len()),
            ));
        }
        activation.validate()?;
        Ok(Self {
            weights,
            biases,
            activation,
        })
    }

    pub fn fan_in(&self) -> usize {
        self.weights.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.cols()
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn biases(&self) -> &Vector {
        &self.biases
    }

    pub fn activation(&self) -> ActivationKind {
        self.activation
    }

    /// Pre-activation `Wᵀa + b`, each entry a correctly rounded sum.
    pub fn pre_activation(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.fan_in() {
            return Err(Error::shape(
                "pre_activation",
                format!("layer fan-in {}", self.fan_in()),
                format!("input of length {}", input.len()),
            ));
        }
        let w = &self.weights;
        Ok((0..self.fan_out())
            .map(|i| {
                let terms = input.iter().enumerate().map(|(j, &a)| w.get(j, i) * a);
                exact_sum(terms.chain(std::iter::once(self.biases[i])))
            })
            .collect())
    }

    pub(crate) fn params_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (self.weights.as_mut_slice(), self.biases.as_mut_slice())
    }
}

/// Post-activation values of every layer for one instance.
///
/// `activations[0]` is the input instance and `activations[l]` is `A⁽ˡ⁾`.
/// `pre_activations[l-1]` holds the matching `Wᵀa + b` for `l ≥ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTrace {
    pub activations: Vec<Vector>,
    pub pre_activations: Vec<Vector>,
}

impl ActivationTrace {
    pub fn input(&self) -> &Vector {
        &self.activations[0]
    }

    pub fn output(&self) -> &Vector {
        self.activations.last().expect("trace holds at least the input")
    }

    /// Pre-activation scores of the output layer.
    pub fn logits(&self) -> &Vector {
        self.pre_activations
            .last()
            .expect("network has at least one layer")
    }

    pub fn predicted_class(&self) -> usize {
        argmax(self.output().as_slice())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input_width: usize,
    layers: Vec<Layer>,
}

impl Network {
    pub fn new(input_width: usize, layers: Vec<Layer>) -> Result<Self> {
        if input_width == 0 {
            return Err(Error::InvalidArgument("input width must be positive".into()));
        }
        if layers.is_empty() {
            return Err(Error::InvalidArgument(
                "network needs at least one layer".into(),
            ));
        }
        if layers[0].fan_in() != input_width {
            return Err(Error::shape(
                "Network::new",
                format!("input width {input_width}"),
                format!("layer 0 fan-in {}", layers[0].fan_in()),
            ));
        }
        for (l, pair) in layers.windows(2).enumerate() {
            if pair[0].fan_out() != pair[1].fan_in() {
                return Err(Error::shape(
                    "Network::new",
                    format!("layer {l} fan-out {}", pair[0].fan_out()),
                    format!("layer {} fan-in {}", l + 1, pair[1].fan_in()),
                ));
            }
        }
        let last = layers.len() - 1;
        if let Some(l) = layers[..last]
            .iter()
            .position(|layer| layer.activation == ActivationKind::Softmax)
        {
            return Err(Error::InvalidArgument(format!(
                "softmax is only permitted on the output layer (found on layer {l})"
            )));
        }
        Ok(Self {
            input_width,
            layers,
        })
    }

    /// Glorot-uniform weights and zero biases for the given layer widths
    /// (`widths[0]` is the input width). Hidden layers use `hidden`, the
    /// last layer uses `output`.
    pub fn glorot(
        widths: &[usize],
        hidden: ActivationKind,
        output: ActivationKind,
        seed: u64,
    ) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "invalid layer widths {widths:?}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(widths.len() - 1);
        for (l, pair) in widths.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit);
            let data = (0..fan_in * fan_out).map(|_| dist.sample(&mut rng)).collect();
            let activation = if l + 2 == widths.len() { output } else { hidden };
            layers.push(Layer::new(
                Matrix::new(fan_in, fan_out, data)?,
                Vector::new(vec![0.0; fan_out])?,
                activation,
            )?);
        }
        Self::new(widths[0], layers)
    }

    pub fn input_width(&self) -> usize {
        self.input_width
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().map(Layer::fan_out).unwrap_or(0)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    /// Number of hidden layers, `H`.
    pub fn hidden_count(&self) -> usize {
        self.layers.len() - 1
    }

    /// Widths of all layers including the input.
    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.input_width)
            .chain(self.layers.iter().map(Layer::fan_out))
            .collect()
    }

    pub fn forward(&self, x: &Vector) -> Result<ActivationTrace> {
        if x.len() != self.input_width {
            return Err(Error::shape(
                "forward",
                format!("network input width {}", self.input_width),
                format!("instance of length {}", x.len()),
            ));
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        activations.push(x.clone());
        for (l, layer) in self.layers.iter().enumerate() {
            let z = layer.pre_activation(activations[l].as_slice())?;
            let a = layer.activation.apply(&z);
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

    pub fn predict(&self, x: &Vector) -> Result<usize> {
        Ok(self.forward(x)?.predicted_class())
    }

    /// Copy of this network with the output layer's activation replaced.
    pub fn with_output_activation(&self, activation: ActivationKind) -> Result<Self> {
        let mut layers = self.layers.clone();
        let last = layers.last_mut().expect("non-empty");
        activation.validate()?;
        last.activation = activation;
        Self::new(self.input_width, layers)
    }

    /// Copy of this network with the biases of layer `layer` (0-based over
    /// weight layers) replaced.
    pub fn with_biases(&self, layer: usize, biases: Vector) -> Result<Self> {
        let mut layers = self.layers.clone();
        let target = layers.get_mut(layer).ok_or_else(|| {
            Error::InvalidArgument(format!("layer {layer} out of range"))
        })?;
        *target = Layer::new(target.weights.clone(), biases, target.activation)?;
        Self::new(self.input_width, layers)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDoc::from(self);
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(text).map_err(|e| Error::Model {
            location: format!("line {}, column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        doc.into_network()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_atomic(path.as_ref(), self.to_json()?.as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

pub fn forward(net: &Network, x: &Vector) -> Result<ActivationTrace> {
    net.forward(x)
}

pub fn predict(net: &Network, x: &Vector) -> Result<usize> {
    net.predict(x)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    input_width: usize,
    layers: Vec<LayerDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerDoc {
    activation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    activation_params: Option<ActivationParams>,
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActivationParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    slope: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
}

impl From<&Network> for ModelDoc {
    fn from(net: &Network) -> Self {
        ModelDoc {
            input_width: net.input_width,
            layers: net
                .layers
                .iter()
                .map(|layer| LayerDoc {
                    activation: layer.activation.name().to_string(),
                    activation_params: layer.activation.params(),
                    weights: layer.weights.to_rows(),
                    biases: layer.biases.as_slice().to_vec(),
                })
                .collect(),
        }
    }
}

impl ModelDoc {
    fn into_network(self) -> Result<Network> {
        let err = |location: String, message: String| Error::Model { location, message };
        if self.layers.is_empty() {
            return Err(err("layers".into(), "at least one layer is required".into()));
        }
        let last = self.layers.len() - 1;
        let mut expected_rows = self.input_width;
        let mut layers = Vec::with_capacity(self.layers.len());
        for (l, doc) in self.layers.into_iter().enumerate() {
            let at = |field: &str| format!("layers[{l}].{field}");
            let activation = ActivationKind::from_parts(&doc.activation, doc.activation_params.as_ref())
                .map_err(|e| err(at("activation"), e.to_string()))?;
            if activation == ActivationKind::Softmax && l != last {
                return Err(err(
                    at("activation"),
                    format!("softmax is only permitted on the output layer, found on hidden layer {l}"),
                ));
            }
            if doc.weights.len() != expected_rows {
                let message = if l == 0 {
                    format!(
                        "expected {expected_rows} weight rows (input_width), found {}",
                        doc.weights.len()
                    )
                } else {
                    format!(
                        "layers {} and {l} do not chain: layer {} has {expected_rows} outputs but layer {l} has {} weight rows",
                        l - 1,
                        l - 1,
                        doc.weights.len()
                    )
                };
                return Err(err(at("weights"), message));
            }
            let fan_out = doc.biases.len();
            let weights = Matrix::from_rows(&doc.weights).map_err(|e| err(at("weights"), e.to_string()))?;
            if weights.cols() != fan_out {
                return Err(err(
                    at("biases"),
                    format!("{} biases for {} weight columns", fan_out, weights.cols()),
                ));
            }
            let biases = Vector::new(doc.biases).map_err(|e| err(at("biases"), e.to_string()))?;
            layers.push(Layer::new(weights, biases, activation).map_err(|e| err(format!("layers[{l}]"), e.to_string()))?);
            expected_rows = fan_out;
        }
        Network::new(self.input_width, layers).map_err(|e| err("network".into(), e.to_string()))
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// The three-layer sigmoid network with zero biases used throughout the
    /// worked composition example.
    pub(crate) fn worked_example_network() -> Network {
        let w1 = Matrix::from_rows(&[[-0.01, 0.3, 0.8], [0.4, -0.1, 0.6]]).unwrap();
        let w2 = Matrix::from_rows(&[[0.7, -0.5], [-0.2, 0.1], [0.3, 0.4]]).unwrap();
        Network::new(
            2,
            vec![
                Layer::new(w1, Vector::new(vec![0.0; 3]).unwrap(), ActivationKind::Sigmoid).unwrap(),
                Layer::new(w2, Vector::new(vec![0.0; 2]).unwrap(), ActivationKind::Sigmoid).unwrap(),
            ],
        )
        .unwrap()
    }

    fn v(x: &[f64]) -> Vector {
        Vector::new(x.to_vec()).unwrap()
    }

    #[test]
    fn sigmoid_values() {
        assert_eq!(activate(ActivationKind::Sigmoid, &v(&[0.0])).as_slice(), &[0.5]);
        let a = activate(ActivationKind::Sigmoid, &v(&[0.315, 0.07, 0.88]));
        for (got, want) in a.iter().zip([0.578, 0.517, 0.707]) {
            assert!((got - want).abs() <= 0.005, "{got} vs {want}");
        }
    }

    #[test]
    fn softmax_uniform_and_stable() {
        let a = activate(ActivationKind::Softmax, &v(&[3.0, 3.0, 3.0]));
        for p in a.iter() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        let big = activate(ActivationKind::Softmax, &v(&[1000.0, 0.0]));
        assert!(big.iter().all(|p| p.is_finite()));
        assert!((big[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn piecewise_definitions() {
        let z = v(&[-2.0, 0.0, 3.0]);
        assert_eq!(activate(ActivationKind::ReLU, &z).as_slice(), &[0.0, 0.0, 3.0]);
        assert_eq!(
            activate(ActivationKind::leaky_relu(), &z).as_slice(),
            &[-0.02, 0.0, 3.0]
        );
        let elu = activate(ActivationKind::elu(), &z);
        assert!((elu[0] - ((-2.0f64).exp() - 1.0)).abs() < 1e-15);
        assert_eq!(elu[2], 3.0);
        assert_eq!(activate(ActivationKind::Identity, &z), z);
    }

    #[test]
    fn activation_parameter_bounds() {
        assert!(ActivationKind::LeakyReLU { slope: 1.5 }.validate().is_err());
        assert!(ActivationKind::LeakyReLU { slope: 0.0 }.validate().is_err());
        assert!(ActivationKind::Elu { alpha: -1.0 }.validate().is_err());
        assert_eq!("ELU".parse::<ActivationKind>().unwrap(), ActivationKind::elu());
        assert!("swish".parse::<ActivationKind>().is_err());
    }

    #[test]
    fn worked_example_forward() {
        let net = worked_example_network();
        let trace = net.forward(&v(&[0.5, 0.8])).unwrap();
        assert_eq!(trace.activations.len(), 3);
        for (got, want) in trace.activations[1].iter().zip([0.58, 0.52, 0.71]) {
            assert!((got - want).abs() <= 0.01);
        }
        for (got, want) in trace.activations[2].iter().zip([0.63, 0.51]) {
            assert!((got - want).abs() <= 0.01);
        }
        assert_eq!(trace.predicted_class(), 0);
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let layer = Layer::new(
            Matrix::identity(3),
            Vector::new(vec![0.0; 3]).unwrap(),
            ActivationKind::Identity,
        )
        .unwrap();
        let net = Network::new(3, vec![layer]).unwrap();
        let x = v(&[0.1, -2.0, 5.0]);
        assert_eq!(net.forward(&x).unwrap().activations[1], x);
    }

    #[test]
    fn zero_sigmoid_network_gives_half() {
        let layer = Layer::new(
            Matrix::zeros(2, 4),
            Vector::new(vec![0.0; 4]).unwrap(),
            ActivationKind::Sigmoid,
        )
        .unwrap();
        let net = Network::new(2, vec![layer]).unwrap();
        let trace = net.forward(&v(&[0.3, 0.9])).unwrap();
        assert!(trace.activations[1].iter().all(|&a| a == 0.5));
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let net = worked_example_network();
        assert!(matches!(net.forward(&v(&[1.0])), Err(Error::Shape { .. })));
    }

    #[test]
    fn argmax_tie_rule() {
        assert_eq!(argmax(&[0.63, 0.51]), 0);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.1, 0.2, 0.9]), 2);
    }

    #[test]
    fn construction_checks() {
        let hidden_softmax = Layer::new(
            Matrix::zeros(2, 2),
            Vector::new(vec![0.0; 2]).unwrap(),
            ActivationKind::Softmax,
        )
        .unwrap();
        let out = Layer::new(
            Matrix::zeros(2, 2),
            Vector::new(vec![0.0; 2]).unwrap(),
            ActivationKind::Softmax,
        )
        .unwrap();
        assert!(Network::new(2, vec![hidden_softmax, out.clone()]).is_err());
        assert!(Network::new(3, vec![out.clone()]).is_err());
        assert!(Network::new(2, vec![]).is_err());
        assert!(Layer::new(Matrix::zeros(2, 2), Vector::new(vec![0.0; 3]).unwrap(), ActivationKind::Tanh).is_err());
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let net = Network::glorot(&[5, 7, 3], ActivationKind::leaky_relu(), ActivationKind::Softmax, 9).unwrap();
        let back = Network::from_json(&net.to_json().unwrap()).unwrap();
        assert_eq!(back, net);
        for (a, b) in net.layers().iter().zip(back.layers()) {
            for (x, y) in a.weights().as_slice().iter().zip(b.weights().as_slice()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        let example = worked_example_network();
        assert_eq!(Network::from_json(&example.to_json().unwrap()).unwrap(), example);
    }

    #[test]
    fn json_chaining_violation_names_layers() {
        let doc = r#"{"input_width": 2, "layers": [
            {"activation": "sigmoid", "weights": [[1, 2, 3], [4, 5, 6]], "biases": [0, 0, 0]},
            {"activation": "sigmoid", "weights": [[1], [2]], "biases": [0]}
        ]}"#;
        let err = Network::from_json(doc).unwrap_err().to_string();
        assert!(err.contains("layers 0 and 1"), "{err}");
    }

    #[test]
    fn json_hidden_softmax_rejected() {
        let doc = r#"{"input_width": 1, "layers": [
            {"activation": "softmax", "weights": [[1, 2]], "biases": [0, 0]},
            {"activation": "sigmoid", "weights": [[1], [2]], "biases": [0]}
        ]}"#;
        let err = Network::from_json(doc).unwrap_err();
        assert!(matches!(err, Error::Model { .. }));
        assert!(err.to_string().contains("layers[0].activation"), "{err}");
    }

    #[test]
    fn json_malformed_and_unknown_activation() {
        assert!(matches!(Network::from_json("{\"input_width\": 2,"), Err(Error::Model { .. })));
        let doc = r#"{"input_width": 1, "layers": [{"activation": "gelu", "weights": [[1]], "biases": [0]}]}"#;
        let err = Network::from_json(doc).unwrap_err().to_string();
        assert!(err.contains("gelu"), "{err}");
    }

    #[test]
    fn json_activation_params() {
        let doc = r#"{"input_width": 1, "layers": [
            {"activation": "leaky_relu", "activation_params": {"slope": 0.2}, "weights": [[1]], "biases": [0]}
        ]}"#;
        let net = Network::from_json(doc).unwrap();
        assert_eq!(net.layers()[0].activation(), ActivationKind::LeakyReLU { slope: 0.2 });
    }
}
