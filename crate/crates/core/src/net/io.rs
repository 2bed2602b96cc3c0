//! Text serialization of networks.
//!
//! The format is JSON with a fixed field order so files diff cleanly:
//!
//! ```text
//! { "format": "eflab-relu-net/1", "input_dim": 2,
//!   "final_activation": { "kind": "clamp", "r": 2.0 },
//!   "layers": [ { "rows": 4, "cols": 2, "weights": [...row-major...], "bias": [...] },
//!               { "rows": 1, "cols": 4, "sparse": { "row_ptr": [...], "col_idx": [...], "values": [...] }, "bias": [...] } ] }
//! ```
//!
//! Floats are written in shortest round-trip form, so `load(save(net))`
//! reproduces every parameter bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Csr, FinalActivation, Layer, ReluNet, Weights};
use crate::error::{Error, Result};

pub const NET_FORMAT: &str = "eflab-relu-net/1";

#[derive(Serialize, Deserialize)]
struct LayerFile {
    rows: usize,
    cols: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sparse: Option<Csr>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct NetFile {
    format: String,
    input_dim: usize,
    final_activation: FinalActivation,
    layers: Vec<LayerFile>,
}

impl ReluNet {
    pub fn to_json(&self) -> String {
        let file = NetFile {
            format: NET_FORMAT.to_string(),
            input_dim: self.input_dim(),
            final_activation: self.final_activation(),
            layers: self
                .layers()
                .iter()
                .map(|l| {
                    let (weights, sparse) = match l.weights() {
                        Weights::Dense(w) => (Some(w.clone()), None),
                        Weights::Sparse(csr) => (None, Some(csr.clone())),
                    };
                    LayerFile { rows: l.rows(), cols: l.cols(), weights, sparse, bias: l.bias().to_vec() }
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("network serializes")
    }

    pub fn from_json(text: &str) -> Result<ReluNet> {
        let file: NetFile = serde_json::from_str(text)?;
        if file.format != NET_FORMAT {
            return Err(Error::Parse(format!("unsupported network format '{}'", file.format)));
        }
        let layers = file
            .layers
            .into_iter()
            .enumerate()
            .map(|(i, l)| {
                let weights = match (l.weights, l.sparse) {
                    (Some(w), None) => Weights::Dense(w),
                    (None, Some(csr)) => Weights::Sparse(csr),
                    _ => return Err(Error::Parse(format!("layer {i} needs exactly one of 'weights' or 'sparse'"))),
                };
                Layer::from_parts(l.rows, l.cols, weights, l.bias)
            })
            .collect::<Result<Vec<_>>>()?;
        ReluNet::new(file.input_dim, layers, file.final_activation)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ReluNet> {
        ReluNet::from_json(&std::fs::read_to_string(path)?)
    }
}
