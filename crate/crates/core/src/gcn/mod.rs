//! Three-layer GCN with a concatenation head.
//!
//! `h_l = ReLU(Â · h_{l-1} · W_l + b_l)` for `l = 1..3` with `h_0 = X`, then
//! `logits = [h_1 | h_2 | h_3] · W_fc + b_fc`. Everything is dense `f64`
//! except the propagation matrix, which stays sparse.

mod backward;
mod checkpoint;
mod train;

pub use backward::{backward, backward_logit, backward_logit_traced, FullGradients, GradientBundle};
pub use checkpoint::{ModelRecord, ParamTensor};
pub use train::{accuracy, train, Adam, EpochRecord, SplitAccuracy, TrainConfig, TrainOutcome};

use ndarray::{s, Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::NormalizedAdjacency;
use crate::rng;

pub const HIDDEN_DIM: usize = 20;
pub const NUM_LAYERS: usize = 3;
pub const CONCAT_DIM: usize = HIDDEN_DIM * NUM_LAYERS;

/// Affine map `x · weight + bias`, with `weight` shaped `(in, out)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Linear {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: Array2::zeros((input, output)),
            bias: Array1::zeros(output),
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot(input: usize, output: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (input + output) as f64).sqrt();
        Self {
            weight: Array2::from_shape_simple_fn((input, output), || {
                rng.random_range(-limit..limit)
            }),
            bias: Array1::zeros(output),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.ncols()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelRecord", into = "ModelRecord")]
pub struct GcnModel {
    pub convs: [Linear; NUM_LAYERS],
    pub head: Linear,
}

impl GcnModel {
    pub fn zeros(input_dim: usize, num_classes: usize) -> Self {
        Self {
            convs: [
                Linear::zeros(input_dim, HIDDEN_DIM),
                Linear::zeros(HIDDEN_DIM, HIDDEN_DIM),
                Linear::zeros(HIDDEN_DIM, HIDDEN_DIM),
            ],
            head: Linear::zeros(CONCAT_DIM, num_classes),
        }
    }

    /// Seeded Glorot initialization, layers drawn in order conv1..conv3, head.
    pub fn glorot(input_dim: usize, num_classes: usize, seed: u64) -> Self {
        let mut rng = rng::stream(seed, "gcn-init");
        Self {
            convs: [
                Linear::glorot(input_dim, HIDDEN_DIM, &mut rng),
                Linear::glorot(HIDDEN_DIM, HIDDEN_DIM, &mut rng),
                Linear::glorot(HIDDEN_DIM, HIDDEN_DIM, &mut rng),
            ],
            head: Linear::glorot(CONCAT_DIM, num_classes, &mut rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.convs[0].input_dim()
    }

    pub fn num_classes(&self) -> usize {
        self.head.output_dim()
    }

    /// Conv layers followed by the head.
    pub fn layers(&self) -> [&Linear; NUM_LAYERS + 1] {
        [&self.convs[0], &self.convs[1], &self.convs[2], &self.head]
    }

    pub fn layers_mut(&mut self) -> [&mut Linear; NUM_LAYERS + 1] {
        let [a, b, c] = &mut self.convs;
        [a, b, c, &mut self.head]
    }

    pub fn num_parameters(&self) -> usize {
        self.layers()
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers()
            .iter()
            .all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    /// Hex SHA-256 over the exact parameter bits.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.input_dim() as u64).to_le_bytes());
        h.update((self.num_classes() as u64).to_le_bytes());
        for l in self.layers() {
            for v in l.weight.iter().chain(l.bias.iter()) {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    fn check_input(&self, adj: &NormalizedAdjacency, x: &Array2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "features have {} columns, model expects {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        if x.nrows() != adj.num_nodes() {
            return Err(Error::Dimension(format!(
                "features have {} rows, graph has {} nodes",
                x.nrows(),
                adj.num_nodes()
            )));
        }
        Ok(())
    }
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Pre-activations `Â · h_{l-1} · W_l + b_l`.
    pub pre: [Array2<f64>; NUM_LAYERS],
    /// Post-ReLU activations `h_l`.
    pub hidden: [Array2<f64>; NUM_LAYERS],
    pub concat: Array2<f64>,
    pub logits: Array2<f64>,
}

pub fn forward(
    model: &GcnModel,
    adj: &NormalizedAdjacency,
    x: &Array2<f64>,
) -> Result<ForwardTrace> {
    model.check_input(adj, x)?;
    let n = x.nrows();
    let mut pre: Vec<Array2<f64>> = Vec::with_capacity(NUM_LAYERS);
    let mut hidden: Vec<Array2<f64>> = Vec::with_capacity(NUM_LAYERS);
    for (l, conv) in model.convs.iter().enumerate() {
        let input = if l == 0 { x } else { &hidden[l - 1] };
        let mut p = adj.matmul(&input.dot(&conv.weight));
        p += &conv.bias;
        hidden.push(p.mapv(|v| v.max(0.0)));
        pre.push(p);
    }
    let mut concat = Array2::zeros((n, CONCAT_DIM));
    for (l, h) in hidden.iter().enumerate() {
        concat
            .slice_mut(s![.., l * HIDDEN_DIM..(l + 1) * HIDDEN_DIM])
            .assign(h);
    }
    let mut logits = concat.dot(&model.head.weight);
    logits += &model.head.bias;
    Ok(ForwardTrace {
        pre: to_array(pre),
        hidden: to_array(hidden),
        concat,
        logits,
    })
}

fn to_array(v: Vec<Array2<f64>>) -> [Array2<f64>; NUM_LAYERS] {
    v.try_into().expect("one entry per layer")
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Predicted class and logits of node `v`.
pub fn predict_class(
    model: &GcnModel,
    adj: &NormalizedAdjacency,
    x: &Array2<f64>,
    v: usize,
) -> Result<(usize, Vec<f64>)> {
    if v >= adj.num_nodes() {
        return Err(Error::NodeOutOfRange {
            index: v,
            num_nodes: adj.num_nodes(),
        });
    }
    let trace = forward(model, adj, x)?;
    let row = trace.logits.row(v).to_vec();
    Ok((argmax(&row), row))
}

/// Predicted class of every node.
pub fn predict_all(trace: &ForwardTrace) -> Vec<usize> {
    trace
        .logits
        .axis_iter(Axis(0))
        .map(|r| argmax(r.as_slice().expect("standard layout")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_model_gives_zero_logits() {
        let g = Graph::build(&[(0, 1), (1, 2)], 3, None).unwrap();
        let adj = g.normalized_adjacency();
        let x = Array2::from_elem((3, 4), 0.7);
        let t = forward(&GcnModel::zeros(4, 3), &adj, &x).unwrap();
        assert!(t.logits.iter().all(|&v| v == 0.0));
        assert_eq!(t.concat.ncols(), 60);
    }

    #[test]
    fn isolated_node_by_hand() {
        // Â = [[1]], X = [[2]]. Layer 1 uses column 0 only: w=0.5, b=-0.25 →
        // h1[0] = relu(0.75) = 0.75. Column 1 has w=-1 → relu(-2) = 0.
        // Layer 2: h2[0] = relu(0.75 * 2 - 1) = 0.5. Layer 3: relu(0.5 * 4) = 2.
        // Head reads h1[0], h2[0], h3[0] with weights 1, 10, 100 plus bias 0.5.
        let mut m = GcnModel::zeros(1, 1);
        m.convs[0].weight[[0, 0]] = 0.5;
        m.convs[0].weight[[0, 1]] = -1.0;
        m.convs[0].bias[0] = -0.25;
        m.convs[1].weight[[0, 0]] = 2.0;
        m.convs[1].bias[0] = -1.0;
        m.convs[2].weight[[0, 0]] = 4.0;
        m.head.weight[[0, 0]] = 1.0;
        m.head.weight[[20, 0]] = 10.0;
        m.head.weight[[40, 0]] = 100.0;
        m.head.bias[0] = 0.5;
        let g = Graph::build(&[], 1, None).unwrap();
        let t = forward(&m, &g.normalized_adjacency(), &ndarray::arr2(&[[2.0]])).unwrap();
        assert_abs_diff_eq!(t.hidden[0][[0, 0]], 0.75);
        assert_eq!(t.hidden[0][[0, 1]], 0.0);
        assert_abs_diff_eq!(t.hidden[1][[0, 0]], 0.5);
        assert_abs_diff_eq!(t.hidden[2][[0, 0]], 2.0);
        assert_abs_diff_eq!(t.logits[[0, 0]], 0.75 + 5.0 + 200.0 + 0.5, epsilon = 1e-12);
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.1, 0.9]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[-1.0, 3.0, 3.0]), 1);
    }

    #[test]
    fn rejects_mismatched_features() {
        let g = Graph::build(&[(0, 1)], 2, None).unwrap();
        let adj = g.normalized_adjacency();
        let m = GcnModel::zeros(3, 2);
        assert!(forward(&m, &adj, &Array2::zeros((2, 4))).is_err());
        assert!(forward(&m, &adj, &Array2::zeros((3, 3))).is_err());
    }

    #[test]
    fn fingerprint_tracks_parameters() {
        let a = GcnModel::glorot(4, 3, 1);
        let mut b = a.clone();
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.head.bias[0] += 1e-12;
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_ne!(a, GcnModel::glorot(4, 3, 2));
    }
}
