//! Small feed-forward networks read from the JSON interchange format.
//!
//! ```text
//! {
//!   "latent_dim": m,
//!   "output_dim": n,
//!   "layers": [
//!     {"weights": [[...], ...], "bias": [...], "activation": "tanh"},
//!     ...
//!   ],
//!   "reference_io": [{"z": [...], "x": [...]}, ...]
//! }
//! ```
//!
//! `weights` is row-major `out_dim x in_dim`. Each layer computes
//! `x <- act(W x + b)`. `reference_io` is optional; when present it records
//! forward passes made by whatever produced the file.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "identity" | "linear" => Some(Activation::Identity),
            "relu" => Some(Activation::Relu),
            "tanh" => Some(Activation::Tanh),
            "sigmoid" => Some(Activation::Sigmoid),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        }
    }

    // relu'(0) is taken as 0; finite differences straddling the kink see the average.
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Identity => v,
            Activation::Relu => v.max(0.0),
            Activation::Tanh => v.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-v).exp()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Layer {
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferencePair {
    pub z: Vec<f64>,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct NetworkSpec {
    latent_dim: usize,
    output_dim: usize,
    layers: Vec<Layer>,
    reference_io: Vec<ReferencePair>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LayerFile {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
    activation: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct NetworkFile {
    latent_dim: usize,
    output_dim: usize,
    layers: Vec<LayerFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reference_io: Option<Vec<ReferencePair>>,
}

fn layer_err(layer: usize, message: impl Into<String>) -> Error {
    Error::LayerLoad { layer, message: message.into() }
}

impl NetworkSpec {
    /// Validates the dimension chain and builds the network.
    pub fn new(latent_dim: usize, output_dim: usize, layers: Vec<Layer>) -> Result<Self> {
        if latent_dim == 0 || output_dim == 0 {
            return Err(Error::Load("latent_dim and output_dim must be positive".into()));
        }
        if layers.is_empty() {
            return Err(Error::Load("network has no layers".into()));
        }
        let mut width = latent_dim;
        for (i, layer) in layers.iter().enumerate() {
            if layer.in_dim() != width {
                return Err(layer_err(
                    i,
                    format!("expects input width {} but previous width is {width}", layer.in_dim()),
                ));
            }
            if layer.bias.len() != layer.out_dim() {
                return Err(layer_err(
                    i,
                    format!("bias has length {} but layer has {} outputs", layer.bias.len(), layer.out_dim()),
                ));
            }
            width = layer.out_dim();
        }
        if width != output_dim {
            return Err(layer_err(
                layers.len() - 1,
                format!("final width {width} does not match output_dim {output_dim}"),
            ));
        }
        Ok(NetworkSpec { latent_dim, output_dim, layers, reference_io: Vec::new() })
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: NetworkFile =
            serde_json::from_str(text).map_err(|e| Error::Load(format!("malformed network file: {e}")))?;
        let mut layers = Vec::with_capacity(file.layers.len());
        for (i, lf) in file.layers.iter().enumerate() {
            let activation = Activation::parse(&lf.activation)
                .ok_or_else(|| layer_err(i, format!("unknown activation '{}'", lf.activation)))?;
            let rows = lf.weights.len();
            if rows == 0 {
                return Err(layer_err(i, "empty weight matrix"));
            }
            let cols = lf.weights[0].len();
            if let Some((r, row)) = lf.weights.iter().enumerate().find(|(_, row)| row.len() != cols) {
                return Err(layer_err(i, format!("weight row {r} has length {}, expected {cols}", row.len())));
            }
            if lf.weights.iter().flatten().chain(&lf.bias).any(|v| !v.is_finite()) {
                return Err(layer_err(i, "non-finite parameter"));
            }
            layers.push(Layer {
                weights: DMatrix::from_fn(rows, cols, |r, c| lf.weights[r][c]),
                bias: DVector::from_column_slice(&lf.bias),
                activation,
            });
        }
        let mut spec = NetworkSpec::new(file.latent_dim, file.output_dim, layers)?;
        let reference_io = file.reference_io.unwrap_or_default();
        for (i, pair) in reference_io.iter().enumerate() {
            if pair.z.len() != spec.latent_dim || pair.x.len() != spec.output_dim {
                return Err(Error::Load(format!("reference_io[{i}] has wrong dimensions")));
            }
        }
        spec.reference_io = reference_io;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> Result<String> {
        let file = NetworkFile {
            latent_dim: self.latent_dim,
            output_dim: self.output_dim,
            layers: self
                .layers
                .iter()
                .map(|l| LayerFile {
                    weights: l.weights.row_iter().map(|r| r.iter().copied().collect()).collect(),
                    bias: l.bias.iter().copied().collect(),
                    activation: l.activation.name().to_string(),
                })
                .collect(),
            reference_io: (!self.reference_io.is_empty()).then(|| self.reference_io.clone()),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn reference_io(&self) -> &[ReferencePair] {
        &self.reference_io
    }

    pub(crate) fn evaluate(&self, z: &DVector<f64>) -> DVector<f64> {
        let mut x = z.clone();
        for layer in &self.layers {
            x = (&layer.weights * x + &layer.bias).map(|v| layer.activation.apply(v));
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_activation_names_layer() {
        let text = r#"{"latent_dim":1,"output_dim":1,"layers":[
            {"weights":[[1.0]],"bias":[0.0],"activation":"identity"},
            {"weights":[[1.0]],"bias":[0.0],"activation":"swish"}]}"#;
        match NetworkSpec::from_json_str(text) {
            Err(Error::LayerLoad { layer, message }) => {
                assert_eq!(layer, 1);
                assert!(message.contains("swish"));
            }
            other => panic!("expected layer error, got {other:?}"),
        }
    }

    #[test]
    fn broken_chain_names_layer() {
        let text = r#"{"latent_dim":2,"output_dim":1,"layers":[
            {"weights":[[1.0,0.0],[0.0,1.0]],"bias":[0.0,0.0],"activation":"tanh"},
            {"weights":[[1.0,1.0,1.0]],"bias":[0.0],"activation":"identity"}]}"#;
        assert!(matches!(NetworkSpec::from_json_str(text), Err(Error::LayerLoad { layer: 1, .. })));
    }

    #[test]
    fn wrong_bias_length_names_layer() {
        let text = r#"{"latent_dim":1,"output_dim":2,"layers":[
            {"weights":[[1.0],[2.0]],"bias":[0.0],"activation":"relu"}]}"#;
        assert!(matches!(NetworkSpec::from_json_str(text), Err(Error::LayerLoad { layer: 0, .. })));
    }

    #[test]
    fn ragged_weights_name_layer() {
        let text = r#"{"latent_dim":2,"output_dim":2,"layers":[
            {"weights":[[1.0,0.0],[1.0]],"bias":[0.0,0.0],"activation":"relu"}]}"#;
        assert!(matches!(NetworkSpec::from_json_str(text), Err(Error::LayerLoad { layer: 0, .. })));
    }

    #[test]
    fn output_dim_mismatch_is_rejected() {
        let text = r#"{"latent_dim":1,"output_dim":3,"layers":[
            {"weights":[[1.0],[2.0]],"bias":[0.0,0.0],"activation":"relu"}]}"#;
        assert!(matches!(NetworkSpec::from_json_str(text), Err(Error::LayerLoad { .. })));
    }

    #[test]
    fn garbage_is_a_load_error() {
        assert!(matches!(NetworkSpec::from_json_str("{not json"), Err(Error::Load(_))));
    }

    #[test]
    fn json_round_trip_preserves_parameters() {
        let text = r#"{"latent_dim":2,"output_dim":1,"layers":[
            {"weights":[[0.1,-0.2]],"bias":[0.3],"activation":"sigmoid"}],
            "reference_io":[{"z":[1.0,2.0],"x":[0.5]}]}"#;
        let a = NetworkSpec::from_json_str(text).unwrap();
        let b = NetworkSpec::from_json_str(&a.to_json_string().unwrap()).unwrap();
        assert_eq!(a.layers()[0].weights, b.layers()[0].weights);
        assert_eq!(a.layers()[0].bias, b.layers()[0].bias);
        assert_eq!(a.reference_io(), b.reference_io());
    }
}
