use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{GcnModel, Linear, CONCAT_DIM, HIDDEN_DIM, NUM_LAYERS};
use crate::error::Error;

/// One flattened parameter array in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// Serialized model: architecture constants plus flattened parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub concat_dim: usize,
    pub num_classes: usize,
    pub parameters: Vec<ParamTensor>,
}

const LAYER_NAMES: [&str; NUM_LAYERS + 1] = ["conv1", "conv2", "conv3", "fc"];

impl From<GcnModel> for ModelRecord {
    fn from(m: GcnModel) -> Self {
        let mut parameters = Vec::with_capacity(2 * LAYER_NAMES.len());
        for (name, layer) in LAYER_NAMES.iter().zip(m.layers()) {
            parameters.push(ParamTensor {
                name: format!("{name}.weight"),
                shape: layer.weight.shape().to_vec(),
                values: layer.weight.iter().copied().collect(),
            });
            parameters.push(ParamTensor {
                name: format!("{name}.bias"),
                shape: vec![layer.bias.len()],
                values: layer.bias.to_vec(),
            });
        }
        Self {
            input_dim: m.input_dim(),
            hidden_dim: HIDDEN_DIM,
            num_layers: NUM_LAYERS,
            concat_dim: CONCAT_DIM,
            num_classes: m.num_classes(),
            parameters,
        }
    }
}

impl TryFrom<ModelRecord> for GcnModel {
    type Error = Error;

    fn try_from(rec: ModelRecord) -> Result<Self, Error> {
        if rec.hidden_dim != HIDDEN_DIM || rec.num_layers != NUM_LAYERS || rec.concat_dim != CONCAT_DIM {
            return Err(Error::Dimension(format!(
                "unsupported architecture: hidden {} x {} layers (concat {})",
                rec.hidden_dim, rec.num_layers, rec.concat_dim
            )));
        }
        let mut model = GcnModel::zeros(rec.input_dim, rec.num_classes);
        let mut params = rec.parameters.into_iter();
        for (name, layer) in LAYER_NAMES.iter().zip(model.layers_mut()) {
            let (w, b) = (params.next(), params.next());
            let (Some(w), Some(b)) = (w, b) else {
                return Err(Error::Dimension(format!("missing parameters for {name}")));
            };
            if w.name != format!("{name}.weight") || b.name != format!("{name}.bias") {
                return Err(Error::Dimension(format!(
                    "unexpected parameter order near {name}: {} / {}",
                    w.name, b.name
                )));
            }
            let expected = layer.weight.dim();
            if w.shape != [expected.0, expected.1] || b.shape != [expected.1] {
                return Err(Error::Dimension(format!("shape mismatch for {name}")));
            }
            *layer = Linear {
                weight: Array2::from_shape_vec(expected, w.values)
                    .map_err(|e| Error::Dimension(e.to_string()))?,
                bias: Array1::from_vec(b.values),
            };
            if layer.bias.len() != expected.1 {
                return Err(Error::Dimension(format!("bias length mismatch for {name}")));
            }
        }
        if params.next().is_some() {
            return Err(Error::Dimension("unexpected extra parameters".into()));
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_is_exact() {
        let m = GcnModel::glorot(10, 4, 3);
        let json = serde_json::to_string(&m).unwrap();
        let back: GcnModel = serde_json::from_str(&json).unwrap();
        assert_eq!(m, back);
        assert_eq!(m.fingerprint(), back.fingerprint());
    }

    #[test]
    fn rejects_wrong_architecture() {
        let mut rec = ModelRecord::from(GcnModel::zeros(2, 2));
        rec.hidden_dim = 16;
        assert!(GcnModel::try_from(rec).is_err());
        let mut rec = ModelRecord::from(GcnModel::zeros(2, 2));
        rec.parameters[0].values.pop();
        assert!(GcnModel::try_from(rec).is_err());
    }
}
