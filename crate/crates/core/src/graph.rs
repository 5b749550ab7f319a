//! Undirected graphs in CSR form, GCN propagation matrices and hop queries.

use std::collections::VecDeque;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Immutable undirected graph.
///
/// Each undirected edge is stored once in the edge count and twice in the CSR
/// arrays. Neighbor lists are sorted ascending and never contain the node
/// itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphRecord", into = "GraphRecord")]
pub struct Graph {
    num_edges: usize,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    features: Option<Array2<f64>>,
}

impl Graph {
    /// Builds a graph from an undirected edge list.
    ///
    /// Edges may be given in either orientation; `(i, j)` and `(j, i)` are the
    /// same edge and listing both is a duplicate.
    pub fn build(
        edges: &[(usize, usize)],
        num_nodes: usize,
        features: Option<Array2<f64>>,
    ) -> Result<Self> {
        let mut canonical = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            for idx in [a, b] {
                if idx >= num_nodes {
                    return Err(Error::NodeOutOfRange { index: idx, num_nodes });
                }
            }
            if a == b {
                return Err(Error::SelfLoop(a));
            }
            canonical.push((a.min(b), a.max(b)));
        }
        canonical.sort_unstable();
        if let Some(w) = canonical.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateEdge(w[0].0, w[0].1));
        }
        if let Some(x) = &features {
            if x.nrows() != num_nodes {
                return Err(Error::Dimension(format!(
                    "feature matrix has {} rows, graph has {} nodes",
                    x.nrows(),
                    num_nodes
                )));
            }
        }

        let mut degree = vec![0usize; num_nodes];
        for &(a, b) in &canonical {
            degree[a] += 1;
            degree[b] += 1;
        }
        let mut offsets = Vec::with_capacity(num_nodes + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut cursor = offsets[..num_nodes].to_vec();
        let mut neighbors = vec![0usize; 2 * canonical.len()];
        for &(a, b) in &canonical {
            neighbors[cursor[a]] = b;
            cursor[a] += 1;
            neighbors[cursor[b]] = a;
            cursor[b] += 1;
        }
        for i in 0..num_nodes {
            neighbors[offsets[i]..offsets[i + 1]].sort_unstable();
        }

        Ok(Self {
            num_edges: canonical.len(),
            offsets,
            neighbors,
            features: features.map(|x| x.as_standard_layout().into_owned()),
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    /// CSR row pointer, length `num_nodes + 1`.
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Flattened CSR neighbor array, length `2 * num_edges`.
    pub fn csr_neighbors(&self) -> &[usize] {
        &self.neighbors
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[self.offsets[node]..self.offsets[node + 1]]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.offsets[node + 1] - self.offsets[node]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.num_nodes()).map(|i| self.degree(i)).collect()
    }

    pub fn features(&self) -> Option<&Array2<f64>> {
        self.features.as_ref()
    }

    /// Number of feature columns, or 0 when the graph carries no features.
    pub fn feature_dim(&self) -> usize {
        self.features.as_ref().map_or(0, |x| x.ncols())
    }

    /// Replaces the node features.
    pub fn with_features(mut self, features: Array2<f64>) -> Result<Self> {
        if features.nrows() != self.num_nodes() {
            return Err(Error::Dimension(format!(
                "feature matrix has {} rows, graph has {} nodes",
                features.nrows(),
                self.num_nodes()
            )));
        }
        self.features = Some(features.as_standard_layout().into_owned());
        Ok(self)
    }

    /// Undirected edges as `(i, j)` with `i < j`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_nodes()).flat_map(move |i| {
            self.neighbors(i)
                .iter()
                .filter(move |&&j| j > i)
                .map(move |&j| (i, j))
        })
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a < self.num_nodes() && self.neighbors(a).binary_search(&b).is_ok()
    }

    fn check_node(&self, node: usize) -> Result<()> {
        if node >= self.num_nodes() {
            return Err(Error::NodeOutOfRange {
                index: node,
                num_nodes: self.num_nodes(),
            });
        }
        Ok(())
    }

    /// BFS hop counts from `source`; `None` for nodes farther than `max_hops`
    /// (or unreachable).
    pub fn hop_distances(&self, source: usize, max_hops: usize) -> Result<Vec<Option<usize>>> {
        self.check_node(source)?;
        let mut dist = vec![None; self.num_nodes()];
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap();
            if du == max_hops {
                continue;
            }
            for &w in self.neighbors(u) {
                if dist[w].is_none() {
                    dist[w] = Some(du + 1);
                    queue.push_back(w);
                }
            }
        }
        Ok(dist)
    }

    /// Nodes within `k` hops of `source` (source included), ascending.
    pub fn k_hop_nodes(&self, source: usize, k: usize) -> Result<Vec<usize>> {
        Ok(self
            .hop_distances(source, k)?
            .iter()
            .enumerate()
            .filter_map(|(i, d)| d.map(|_| i))
            .collect())
    }

    /// The symmetric GCN propagation matrix `D̃^{-1/2}(A+I)D̃^{-1/2}`.
    pub fn normalized_adjacency(&self) -> NormalizedAdjacency {
        NormalizedAdjacency::new(self)
    }
}

/// Serialized graph layout shared by all dataset files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphRecord {
    pub num_nodes: usize,
    pub edges: Vec<[usize; 2]>,
    pub features: Option<Vec<Vec<f64>>>,
}

impl From<Graph> for GraphRecord {
    fn from(g: Graph) -> Self {
        Self {
            num_nodes: g.num_nodes(),
            edges: g.edges().map(|(i, j)| [i, j]).collect(),
            features: g
                .features
                .as_ref()
                .map(|x| x.rows().into_iter().map(|r| r.to_vec()).collect()),
        }
    }
}

impl TryFrom<GraphRecord> for Graph {
    type Error = Error;

    fn try_from(rec: GraphRecord) -> Result<Self> {
        let features = match rec.features {
            None => None,
            Some(rows) => {
                let dim = rows.first().map_or(0, Vec::len);
                if rows.iter().any(|r| r.len() != dim) {
                    return Err(Error::Dimension("ragged feature rows".into()));
                }
                let flat: Vec<f64> = rows.into_iter().flatten().collect();
                let n = flat.len().checked_div(dim).unwrap_or(0);
                Some(
                    Array2::from_shape_vec((n, dim), flat)
                        .map_err(|e| Error::Dimension(e.to_string()))?,
                )
            }
        };
        let edges: Vec<(usize, usize)> = rec.edges.iter().map(|e| (e[0], e[1])).collect();
        Graph::build(&edges, rec.num_nodes, features)
    }
}

/// Sparse symmetric propagation matrix with self-loops, in CSR form.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    offsets: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

impl NormalizedAdjacency {
    fn new(g: &Graph) -> Self {
        let n = g.num_nodes();
        let inv_sqrt: Vec<f64> = (0..n)
            .map(|i| 1.0 / ((g.degree(i) + 1) as f64).sqrt())
            .collect();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(g.neighbors.len() + n);
        let mut values = Vec::with_capacity(g.neighbors.len() + n);
        offsets.push(0);
        for i in 0..n {
            let nbrs = g.neighbors(i);
            let split = nbrs.partition_point(|&j| j < i);
            let row = nbrs[..split]
                .iter()
                .chain(std::iter::once(&i))
                .chain(&nbrs[split..]);
            for &j in row {
                cols.push(j);
                values.push(inv_sqrt[i] * inv_sqrt[j]);
            }
            offsets.push(cols.len());
        }
        Self {
            offsets,
            cols,
            values,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Nonzero `(column, value)` pairs of row `i`, columns ascending.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.offsets[i]..self.offsets[i + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.offsets[i]..self.offsets[i + 1];
        match self.cols[span.clone()].binary_search(&j) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let n = self.num_nodes();
        let mut out = Array2::zeros((n, n));
        for i in 0..n {
            for (j, v) in self.row(i) {
                out[[i, j]] = v;
            }
        }
        out
    }

    /// `Â · m` for a dense `m` with one row per node.
    pub fn matmul(&self, m: &Array2<f64>) -> Array2<f64> {
        let n = self.num_nodes();
        assert_eq!(m.nrows(), n, "propagation input must have one row per node");
        let width = m.ncols();
        let m = m.as_standard_layout();
        let src = m.as_slice().expect("standard layout");
        let mut out = vec![0.0; n * width];
        for i in 0..n {
            let dst = &mut out[i * width..(i + 1) * width];
            for (j, a) in self.row(i) {
                let s = &src[j * width..(j + 1) * width];
                for (d, &x) in dst.iter_mut().zip(s) {
                    *d += a * x;
                }
            }
        }
        Array2::from_shape_vec((n, width), out).expect("shape")
    }
}
