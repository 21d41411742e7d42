//! Forward composition propagation.
//!
//! Every neuron gets an `N`-dimensional composition vector describing the
//! signed share each input feature has in that neuron for one instance.
//! The input layer starts from the identity matrix; each following layer
//! mixes the previous compositions through the incoming weights, scaled by
//! the absolute activations of the source neurons, and then normalizes each
//! row to unit L1 norm:
//!
//! ```text
//! raw[i][k] = Σⱼ w[j][i] · theta[j][k] · |a[j]|
//! theta'[i][k] = raw[i][k] / Σᵥ |raw[i][v]|
//! ```
//!
//! Biases never enter the propagation. A row whose L1 mass falls below
//! [`DEGENERACY_THRESHOLD`] is emitted as zeros and flagged.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{col_expand_mul, exact_sum, matmul, transpose, Matrix, Vector};
use crate::network::{ActivationTrace, Network};

pub const DEGENERACY_THRESHOLD: f64 = 1e-12;

/// Composition matrices for every layer of a network, for one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositionTrace {
    layers: Vec<Matrix>,
    degenerate: Vec<(usize, usize)>,
    activations: ActivationTrace,
}

/// Output of [`normalize_rows`].
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedRows {
    pub matrix: Matrix,
    /// Rows whose L1 mass was below the threshold; they are all-zero.
    pub degenerate_rows: Vec<usize>,
}

pub fn init_compositions(n_features: usize) -> Result<Matrix> {
    if n_features == 0 {
        return Err(Error::InvalidArgument(
            "composition matrix needs at least one feature".into(),
        ));
    }
    Ok(Matrix::identity(n_features))
}

/// Unnormalized compositions of the next layer:
/// `(((|A|)ᵀ ⊗ Θ)ᵀ · W)ᵀ`.
pub fn propagate_raw(theta_prev: &Matrix, act_prev: &Vector, weights: &Matrix) -> Result<Matrix> {
    if theta_prev.rows() != act_prev.len() || act_prev.len() != weights.rows() {
        return Err(Error::shape(
            "propagate_raw",
            format!(
                "compositions {}x{} with {} activations",
                theta_prev.rows(),
                theta_prev.cols(),
                act_prev.len()
            ),
            format!("weights {}x{}", weights.rows(), weights.cols()),
        ));
    }
    let scaled = transpose(&col_expand_mul(&act_prev.abs(), theta_prev)?);
    Ok(transpose(&matmul(&scaled, weights)?))
}

/// Divides each row by its L1 norm, keeping signs.
pub fn normalize_rows(theta_raw: &Matrix) -> NormalizedRows {
    let cols = theta_raw.cols();
    let mut data = Vec::with_capacity(theta_raw.rows() * cols);
    let mut degenerate_rows = Vec::new();
    for (i, row) in theta_raw.row_iter().enumerate() {
        let mass = exact_sum(row.iter().map(|v| v.abs()));
        if mass < DEGENERACY_THRESHOLD {
            degenerate_rows.push(i);
            data.extend(std::iter::repeat_n(0.0, cols));
        } else {
            data.extend(row.iter().map(|v| v / mass));
        }
    }
    NormalizedRows {
        matrix: Matrix::from_raw(theta_raw.rows(), cols, data),
        degenerate_rows,
    }
}

/// Runs the forward pass on `x` and propagates compositions through every
/// layer of `net`.
pub fn explain(net: &Network, x: &Vector) -> Result<CompositionTrace> {
    let activations = net.forward(x)?;
    let mut layers = Vec::with_capacity(net.layers().len() + 1);
    let mut degenerate = Vec::new();
    layers.push(init_compositions(net.input_width())?);
    for (l, layer) in net.layers().iter().enumerate() {
        let raw = propagate_raw(&layers[l], &activations.activations[l], layer.weights())?;
        let normalized = normalize_rows(&raw);
        degenerate.extend(normalized.degenerate_rows.iter().map(|&i| (l + 1, i)));
        layers.push(normalized.matrix);
    }
    Ok(CompositionTrace {
        layers,
        degenerate,
        activations,
    })
}

impl CompositionTrace {
    /// `Θ⁽⁰⁾ … Θ⁽ᴴ⁺¹⁾`.
    pub fn layers(&self) -> &[Matrix] {
        &self.layers
    }

    pub fn layer(&self, l: usize) -> &Matrix {
        &self.layers[l]
    }

    /// Compositions of the output neurons.
    pub fn output(&self) -> &Matrix {
        self.layers.last().expect("trace always holds the input layer")
    }

    pub fn n_features(&self) -> usize {
        self.layers[0].cols()
    }

    /// `(layer, row)` pairs that were degenerate during normalization.
    pub fn degenerate_rows(&self) -> &[(usize, usize)] {
        &self.degenerate
    }

    pub fn is_degenerate(&self, layer: usize, row: usize) -> bool {
        self.degenerate.contains(&(layer, row))
    }

    pub fn instance(&self) -> &Vector {
        self.activations.input()
    }

    /// The forward pass the compositions were derived from.
    pub fn activations(&self) -> &ActivationTrace {
        &self.activations
    }

    pub fn predicted_class(&self) -> usize {
        self.activations.predicted_class()
    }

    pub fn to_export(&self) -> ExplanationExport {
        ExplanationExport {
            instance: self.instance().as_slice().to_vec(),
            degenerate_rows: self.degenerate.iter().map(|&(l, i)| [l, i]).collect(),
            layers: self
                .layers
                .iter()
                .enumerate()
                .map(|(layer, m)| LayerExport {
                    layer,
                    compositions: m.to_rows(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_export())?)
    }
}

/// JSON shape of an exported explanation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationExport {
    pub instance: Vec<f64>,
    pub degenerate_rows: Vec<[usize; 2]>,
    pub layers: Vec<LayerExport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerExport {
    pub layer: usize,
    pub compositions: Vec<Vec<f64>>,
}
