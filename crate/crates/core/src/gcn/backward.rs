//! Reverse-mode gradients of the GCN.
//!
//! [`backward`] propagates an arbitrary upstream gradient over all nodes and
//! is used for training. [`backward_logit_traced`] differentiates one logit
//! and only touches rows inside the growing receptive field of the target, so
//! rows beyond three hops are exactly zero by construction.

use ndarray::{s, Array2, Axis};

use super::{forward, ForwardTrace, GcnModel, HIDDEN_DIM, NUM_LAYERS};
use crate::error::{Error, Result};
use crate::graph::NormalizedAdjacency;

/// Gradients of a scalar loss w.r.t. every parameter, the input features and
/// each hidden activation.
#[derive(Debug, Clone)]
pub struct FullGradients {
    /// Parameter gradients, laid out like the model.
    pub params: GcnModel,
    pub input: Array2<f64>,
    pub hidden: [Array2<f64>; NUM_LAYERS],
}

/// Gradients of the single logit `logits[node, class]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub node: usize,
    pub class: usize,
    /// `∂logit / ∂X`, shape `N × D`.
    pub input: Array2<f64>,
    /// `∂logit / ∂h_l`, shape `N × 20` per layer.
    pub hidden: [Array2<f64>; NUM_LAYERS],
}

fn relu_mask(grad: &Array2<f64>, pre: &Array2<f64>) -> Array2<f64> {
    let mut out = grad.clone();
    out.zip_mut_with(pre, |g, &p| {
        if p <= 0.0 {
            *g = 0.0;
        }
    });
    out
}

/// Backpropagates `d_logits` (`N × C`) through a recorded forward pass.
pub fn backward(
    model: &GcnModel,
    adj: &NormalizedAdjacency,
    x: &Array2<f64>,
    trace: &ForwardTrace,
    d_logits: &Array2<f64>,
) -> FullGradients {
    let mut grads = GcnModel::zeros(model.input_dim(), model.num_classes());
    grads.head.weight = trace.concat.t().dot(d_logits);
    grads.head.bias = d_logits.sum_axis(Axis(0));

    let d_concat = d_logits.dot(&model.head.weight.t());
    let mut d_hidden: Vec<Array2<f64>> = (0..NUM_LAYERS)
        .map(|l| {
            d_concat
                .slice(s![.., l * HIDDEN_DIM..(l + 1) * HIDDEN_DIM])
                .to_owned()
        })
        .collect();

    let mut d_input = Array2::zeros(x.raw_dim());
    for l in (0..NUM_LAYERS).rev() {
        let d_pre = relu_mask(&d_hidden[l], &trace.pre[l]);
        // Â is symmetric, so Âᵀ · d_pre = Â · d_pre.
        let d_msg = adj.matmul(&d_pre);
        let layer_input = if l == 0 { x } else { &trace.hidden[l - 1] };
        grads.convs[l].weight = layer_input.t().dot(&d_msg);
        grads.convs[l].bias = d_pre.sum_axis(Axis(0));
        let back = d_msg.dot(&model.convs[l].weight.t());
        if l == 0 {
            d_input = back;
        } else {
            d_hidden[l - 1] += &back;
        }
    }

    FullGradients {
        params: grads,
        input: d_input,
        hidden: d_hidden.try_into().expect("one entry per layer"),
    }
}

/// Gradient bundle for `logits[node, class]`, running the forward pass first.
pub fn backward_logit(
    model: &GcnModel,
    adj: &NormalizedAdjacency,
    x: &Array2<f64>,
    node: usize,
    class: usize,
) -> Result<GradientBundle> {
    let trace = forward(model, adj, x)?;
    backward_logit_traced(model, adj, x, &trace, node, class)
}

/// Gradient bundle for `logits[node, class]` reusing an existing trace.
pub fn backward_logit_traced(
    model: &GcnModel,
    adj: &NormalizedAdjacency,
    x: &Array2<f64>,
    trace: &ForwardTrace,
    node: usize,
    class: usize,
) -> Result<GradientBundle> {
    let n = adj.num_nodes();
    if node >= n {
        return Err(Error::NodeOutOfRange {
            index: node,
            num_nodes: n,
        });
    }
    if class >= model.num_classes() {
        return Err(Error::ClassOutOfRange {
            class,
            num_classes: model.num_classes(),
        });
    }
    let hd = HIDDEN_DIM;
    let dim = x.ncols();

    let mut d_hidden: Vec<Array2<f64>> = (0..NUM_LAYERS).map(|_| Array2::zeros((n, hd))).collect();
    for (l, dh) in d_hidden.iter_mut().enumerate() {
        for f in 0..hd {
            dh[[node, f]] = model.head.weight[[l * hd + f, class]];
        }
    }

    // Rows of d_pre outside `active` are never written, so they stay zero.
    let mut active = vec![node];
    let mut seen = vec![false; n];
    seen[node] = true;
    let mut d_pre = vec![0.0; n * hd];
    let mut d_msg = vec![0.0; n * hd];
    let mut d_input = Array2::zeros((n, dim));

    for l in (0..NUM_LAYERS).rev() {
        let pre = trace.pre[l].as_slice().expect("standard layout");
        let dh = d_hidden[l].as_slice().expect("standard layout");
        for &i in &active {
            for f in 0..hd {
                let k = i * hd + f;
                d_pre[k] = if pre[k] > 0.0 { dh[k] } else { 0.0 };
            }
        }

        let mut next = active.clone();
        for &i in &active {
            for (j, _) in adj.row(i) {
                if !seen[j] {
                    seen[j] = true;
                    next.push(j);
                }
            }
        }
        for &i in &next {
            let row = &mut d_msg[i * hd..(i + 1) * hd];
            row.fill(0.0);
            for (j, a) in adj.row(i) {
                for (r, &g) in row.iter_mut().zip(&d_pre[j * hd..(j + 1) * hd]) {
                    *r += a * g;
                }
            }
        }

        let weight = model.convs[l].weight.as_standard_layout();
        let w = weight.as_slice().expect("standard layout");
        let in_dim = model.convs[l].input_dim();
        let target = if l == 0 {
            d_input.as_slice_mut().expect("standard layout")
        } else {
            d_hidden[l - 1].as_slice_mut().expect("standard layout")
        };
        for &i in &next {
            let msg = &d_msg[i * hd..(i + 1) * hd];
            for k in 0..in_dim {
                let wk = &w[k * hd..(k + 1) * hd];
                let dot: f64 = msg.iter().zip(wk).map(|(a, b)| a * b).sum();
                target[i * in_dim + k] += dot;
            }
        }
        active = next;
    }

    Ok(GradientBundle {
        node,
        class,
        input: d_input,
        hidden: d_hidden.try_into().expect("one entry per layer"),
    })
}
