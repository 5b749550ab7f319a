//! Seeded generators for the four motif benchmarks.
//!
//! Each generator plants motifs on a base graph (Barabási–Albert or a perfect
//! binary tree), labels nodes by their motif role and records which motif
//! instance every node belongs to. Node splits are a seeded 80/10/10
//! permutation.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    BaShapes,
    BaCommunity,
    TreeCycles,
    TreeGrid,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 4] = [
        DatasetKind::BaShapes,
        DatasetKind::BaCommunity,
        DatasetKind::TreeCycles,
        DatasetKind::TreeGrid,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetKind::BaShapes => "ba-shapes",
            DatasetKind::BaCommunity => "ba-community",
            DatasetKind::TreeCycles => "tree-cycles",
            DatasetKind::TreeGrid => "tree-grid",
        }
    }

    /// Labels of nodes that are not part of any motif.
    pub fn base_classes(self) -> &'static [usize] {
        match self {
            DatasetKind::BaCommunity => &[0, 4],
            _ => &[0],
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DatasetKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown dataset '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Construction parameters. Defaults follow the usual GNNExplainer-style
/// benchmark construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    /// Nodes in each Barabási–Albert base graph.
    pub ba_nodes: usize,
    /// Edges added per new node in preferential attachment.
    pub ba_edges_per_node: usize,
    /// Levels of the perfect binary tree (depth 8 gives 255 nodes).
    pub tree_depth: u32,
    /// Motif instances planted per base graph.
    pub num_motifs: usize,
    /// Random extra edges, as a fraction of the node count.
    pub perturbation_ratio: f64,
    pub feature_dim: usize,
    /// One inter-community edge per this many nodes (BA-Community).
    pub nodes_per_bridge: usize,
    /// Community feature means are `-mean` and `+mean` (BA-Community).
    pub community_feature_mean: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            ba_nodes: 300,
            ba_edges_per_node: 5,
            tree_depth: 8,
            num_motifs: 80,
            perturbation_ratio: 0.1,
            feature_dim: 10,
            nodes_per_bridge: 100,
            community_feature_mean: 1.0,
        }
    }
}

impl GeneratorConfig {
    fn validate(&self) -> Result<()> {
        if self.ba_edges_per_node == 0 || self.ba_nodes <= self.ba_edges_per_node {
            return Err(Error::Config(
                "BA base graph needs more nodes than edges per node".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.perturbation_ratio) {
            return Err(Error::Config("perturbation_ratio must be in [0, 1]".into()));
        }
        if self.tree_depth == 0 || self.tree_depth > 20 {
            return Err(Error::Config("tree_depth must be in 1..=20".into()));
        }
        if self.feature_dim == 0 || self.nodes_per_bridge == 0 {
            return Err(Error::Config(
                "feature_dim and nodes_per_bridge must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A labelled benchmark graph with motif ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: DatasetKind,
    pub seed: u64,
    pub graph: Graph,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub motif_mask: Vec<bool>,
    pub motif_id: Vec<Option<usize>>,
    pub split: Vec<Split>,
    pub generator_config: GeneratorConfig,
}

impl Dataset {
    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn nodes_in(&self, split: Split) -> Vec<usize> {
        (0..self.num_nodes())
            .filter(|&i| self.split[i] == split)
            .collect()
    }

    /// Checks the structural invariants of a (possibly deserialized) dataset.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_nodes();
        let bad = |msg: String| Err(Error::InvalidDataset(msg));
        if self.labels.len() != n
            || self.motif_mask.len() != n
            || self.motif_id.len() != n
            || self.split.len() != n
        {
            return bad("per-node arrays do not match the node count".into());
        }
        if self.graph.features().is_none() {
            return bad("dataset graph has no node features".into());
        }
        let base = self.name.base_classes();
        for v in 0..n {
            if self.labels[v] >= self.num_classes {
                return bad(format!("label of node {v} exceeds num_classes"));
            }
            let in_motif = !base.contains(&self.labels[v]);
            if in_motif != self.motif_mask[v] {
                return bad(format!("motif mask disagrees with label at node {v}"));
            }
            if in_motif != self.motif_id[v].is_some() {
                return bad(format!("motif id disagrees with mask at node {v}"));
            }
        }
        Ok(())
    }
}

/// Generates any of the four benchmarks with its default configuration.
pub fn generate(kind: DatasetKind, seed: u64) -> Dataset {
    generate_with(kind, &GeneratorConfig::default(), seed)
        .expect("default generator configuration is valid")
}

pub fn generate_with(kind: DatasetKind, config: &GeneratorConfig, seed: u64) -> Result<Dataset> {
    config.validate()?;
    let dataset = match kind {
        DatasetKind::BaShapes => ba_shapes_with(config, seed),
        DatasetKind::BaCommunity => ba_community_with(config, seed),
        DatasetKind::TreeCycles => tree_motifs(kind, config, seed, Motif::Cycle),
        DatasetKind::TreeGrid => tree_motifs(kind, config, seed, Motif::Grid),
    }?;
    Ok(assign_splits(dataset, seed))
}

pub fn gen_ba_shapes(seed: u64) -> Dataset {
    generate(DatasetKind::BaShapes, seed)
}

pub fn gen_ba_community(seed: u64) -> Dataset {
    generate(DatasetKind::BaCommunity, seed)
}

pub fn gen_tree_cycles(seed: u64) -> Dataset {
    generate(DatasetKind::TreeCycles, seed)
}

pub fn gen_tree_grid(seed: u64) -> Dataset {
    generate(DatasetKind::TreeGrid, seed)
}

/// Shuffles nodes and assigns the first 80% to train, then 10% to val and
/// 10% to test. Val and test sizes round down, so train absorbs the rest.
pub fn assign_splits(mut d: Dataset, seed: u64) -> Dataset {
    let n = d.num_nodes();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, "split"));
    let (n_train, n_val, _) = split_sizes(n);
    d.split = vec![Split::Test; n];
    for (pos, &v) in order.iter().enumerate() {
        d.split[v] = if pos < n_train {
            Split::Train
        } else if pos < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
    }
    d
}

/// `(train, val, test)` sizes for `n` nodes.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let val = n / 10;
    let test = n / 10;
    (n - val - test, val, test)
}

/// Mutable edge set used while assembling a generated graph.
struct Builder {
    num_nodes: usize,
    edges: BTreeSet<(usize, usize)>,
    labels: Vec<usize>,
    motif_id: Vec<Option<usize>>,
}

impl Builder {
    fn new() -> Self {
        Self {
            num_nodes: 0,
            edges: BTreeSet::new(),
            labels: Vec::new(),
            motif_id: Vec::new(),
        }
    }

    fn add_nodes(&mut self, count: usize, label: usize, motif: Option<usize>) -> usize {
        let first = self.num_nodes;
        self.num_nodes += count;
        self.labels.extend(std::iter::repeat_n(label, count));
        self.motif_id.extend(std::iter::repeat_n(motif, count));
        first
    }

    /// Returns false when the edge already exists or is a self-loop.
    fn add_edge(&mut self, a: usize, b: usize) -> bool {
        a != b && self.edges.insert((a.min(b), a.max(b)))
    }

    fn add_random_edges(&mut self, count: usize, rng: &mut ChaCha8Rng) {
        let n = self.num_nodes;
        let max_edges = n * n.saturating_sub(1) / 2;
        let mut added = 0;
        while added < count && self.edges.len() < max_edges {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            if self.add_edge(a, b) {
                added += 1;
            }
        }
    }

    fn finish(
        self,
        kind: DatasetKind,
        num_classes: usize,
        features: Array2<f64>,
        config: &GeneratorConfig,
        seed: u64,
    ) -> Result<Dataset> {
        let edges: Vec<_> = self.edges.into_iter().collect();
        let graph = Graph::build(&edges, self.num_nodes, Some(features))?;
        let base = kind.base_classes();
        let motif_mask = self.labels.iter().map(|l| !base.contains(l)).collect();
        let n = self.num_nodes;
        Ok(Dataset {
            name: kind,
            seed,
            graph,
            labels: self.labels,
            num_classes,
            motif_mask,
            motif_id: self.motif_id,
            split: vec![Split::Train; n],
            generator_config: config.clone(),
        })
    }
}

/// Barabási–Albert preferential attachment on nodes `first..first + n`.
///
/// Starts from `m` isolated nodes; every later node links to `m` distinct
/// existing nodes drawn with probability proportional to degree.
fn barabasi_albert(b: &mut Builder, n: usize, m: usize, rng: &mut ChaCha8Rng) -> usize {
    let first = b.add_nodes(n, 0, None);
    let mut repeated: Vec<usize> = Vec::with_capacity(2 * n * m);
    let mut targets: Vec<usize> = (first..first + m).collect();
    for source in first + m..first + n {
        for &t in &targets {
            b.add_edge(source, t);
        }
        repeated.extend(&targets);
        repeated.extend(std::iter::repeat_n(source, m));
        let mut chosen = BTreeSet::new();
        while chosen.len() < m {
            chosen.insert(*repeated.choose(rng).expect("non-empty"));
        }
        targets = chosen.into_iter().collect();
    }
    first
}

#[derive(Debug, Clone, Copy)]
enum Motif {
    House,
    Cycle,
    Grid,
}

impl Motif {
    fn size(self) -> usize {
        match self {
            Motif::House => 5,
            Motif::Cycle => 6,
            Motif::Grid => 9,
        }
    }

    /// Local edges, per-node labels (with `label_offset` added) and the local
    /// node that connects to the base graph.
    fn shape(self, label_offset: usize) -> (Vec<(usize, usize)>, Vec<usize>, usize) {
        match self {
            // 0 = roof, 1/2 = middle left/right, 3/4 = bottom left/right.
            Motif::House => (
                vec![(0, 1), (0, 2), (1, 2), (1, 3), (2, 4), (3, 4)],
                [1, 2, 2, 3, 3].iter().map(|l| l + label_offset).collect(),
                1,
            ),
            Motif::Cycle => (
                (0..6).map(|i| (i, (i + 1) % 6)).collect(),
                vec![1 + label_offset; 6],
                0,
            ),
            Motif::Grid => {
                let mut edges = Vec::with_capacity(12);
                for r in 0..3 {
                    for c in 0..3 {
                        let v = r * 3 + c;
                        if c < 2 {
                            edges.push((v, v + 1));
                        }
                        if r < 2 {
                            edges.push((v, v + 3));
                        }
                    }
                }
                (edges, vec![1 + label_offset; 9], 0)
            }
        }
    }
}

/// Plants `count` motifs, each joined by one edge to a distinct, uniformly
/// drawn node among `anchors`.
fn plant_motifs(
    b: &mut Builder,
    motif: Motif,
    anchors: &[usize],
    count: usize,
    label_offset: usize,
    motif_id_offset: usize,
    rng: &mut ChaCha8Rng,
) {
    let (local_edges, local_labels, attach) = motif.shape(label_offset);
    let picked: Vec<usize> = if count <= anchors.len() {
        anchors.choose_multiple(rng, count).copied().collect()
    } else {
        (0..count).map(|_| *anchors.choose(rng).expect("anchors")).collect()
    };
    for (instance, &anchor) in picked.iter().enumerate() {
        let id = Some(motif_id_offset + instance);
        let first = b.num_nodes;
        for &label in &local_labels {
            b.add_nodes(1, label, id);
        }
        debug_assert_eq!(b.num_nodes, first + motif.size());
        for &(i, j) in &local_edges {
            b.add_edge(first + i, first + j);
        }
        b.add_edge(first + attach, anchor);
    }
}

fn ba_shapes_builder(config: &GeneratorConfig, rng: &mut ChaCha8Rng) -> Builder {
    let mut b = Builder::new();
    barabasi_albert(&mut b, config.ba_nodes, config.ba_edges_per_node, rng);
    let anchors: Vec<usize> = (0..config.ba_nodes).collect();
    plant_motifs(&mut b, Motif::House, &anchors, config.num_motifs, 0, 0, rng);
    let extra = (config.perturbation_ratio * b.num_nodes as f64).round() as usize;
    b.add_random_edges(extra, rng);
    b
}

fn ba_shapes_with(config: &GeneratorConfig, seed: u64) -> Result<Dataset> {
    let mut rng = rng::stream(seed, "ba-shapes");
    let b = ba_shapes_builder(config, &mut rng);
    let features = Array2::ones((b.num_nodes, config.feature_dim));
    b.finish(DatasetKind::BaShapes, 4, features, config, seed)
}

fn ba_community_with(config: &GeneratorConfig, seed: u64) -> Result<Dataset> {
    let mut first = ba_shapes_builder(config, &mut rng::stream(seed, "ba-community/0"));
    let second = ba_shapes_builder(config, &mut rng::stream(seed, "ba-community/1"));
    let offset = first.num_nodes;
    first.add_nodes(second.num_nodes, 0, None);
    for v in 0..second.num_nodes {
        first.labels[offset + v] = second.labels[v] + 4;
        first.motif_id[offset + v] = second.motif_id[v].map(|m| m + config.num_motifs);
    }
    for &(a, b) in &second.edges {
        first.add_edge(a + offset, b + offset);
    }

    let mut rng = rng::stream(seed, "ba-community/bridge");
    let n = first.num_nodes;
    let bridges = n / config.nodes_per_bridge;
    let mut added = 0;
    while added < bridges {
        let a = rng.random_range(0..offset);
        let b = rng.random_range(offset..n);
        if first.add_edge(a, b) {
            added += 1;
        }
    }

    let mut rng = rng::stream(seed, "ba-community/features");
    let mean = config.community_feature_mean;
    let low = Normal::new(-mean, 1.0).expect("unit variance");
    let high = Normal::new(mean, 1.0).expect("unit variance");
    let features = Array2::from_shape_fn((n, config.feature_dim), |(v, _)| {
        if v < offset {
            low.sample(&mut rng)
        } else {
            high.sample(&mut rng)
        }
    });
    first.finish(DatasetKind::BaCommunity, 8, features, config, seed)
}

fn tree_motifs(
    kind: DatasetKind,
    config: &GeneratorConfig,
    seed: u64,
    motif: Motif,
) -> Result<Dataset> {
    let mut rng = rng::stream(seed, kind.as_str());
    let mut b = Builder::new();
    let tree_nodes = (1usize << config.tree_depth) - 1;
    b.add_nodes(tree_nodes, 0, None);
    for child in 1..tree_nodes {
        b.add_edge((child - 1) / 2, child);
    }
    let anchors: Vec<usize> = (0..tree_nodes).collect();
    plant_motifs(&mut b, motif, &anchors, config.num_motifs, 0, 0, &mut rng);
    let extra = (config.perturbation_ratio * b.num_nodes as f64).round() as usize;
    b.add_random_edges(extra, &mut rng);
    let features = Array2::ones((b.num_nodes, config.feature_dim));
    b.finish(kind, 2, features, config, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn motif_members(d: &Dataset) -> std::collections::BTreeMap<usize, Vec<usize>> {
        let mut out = std::collections::BTreeMap::<usize, Vec<usize>>::new();
        for (v, id) in d.motif_id.iter().enumerate() {
            if let Some(id) = id {
                out.entry(*id).or_default().push(v);
            }
        }
        out
    }

    fn is_connected(g: &Graph) -> bool {
        g.hop_distances(0, usize::MAX)
            .unwrap()
            .iter()
            .all(Option::is_some)
    }

    #[test]
    fn ba_shapes_structure() {
        let d = gen_ba_shapes(0);
        d.validate().unwrap();
        assert_eq!(d.num_nodes(), 700);
        assert_eq!(d.num_classes, 4);
        assert_eq!(d.motif_mask.iter().filter(|&&m| m).count(), 400);
        assert_eq!(d.graph.feature_dim(), 10);
        assert!(d.graph.features().unwrap().iter().all(|&x| x == 1.0));
        // 295 * 5 BA edges + 80 * (6 + 1) motif edges + 70 perturbations.
        assert_eq!(d.graph.num_edges(), 1475 + 560 + 70);
        let members = motif_members(&d);
        assert_eq!(members.len(), 80);
        for nodes in members.values() {
            assert_eq!(nodes.len(), 5);
            let mut labels: Vec<usize> = nodes.iter().map(|&v| d.labels[v]).collect();
            labels.sort();
            assert_eq!(labels, vec![1, 2, 2, 3, 3]);
        }
        assert!(is_connected(&d.graph));
    }

    #[test]
    fn ba_community_structure() {
        let d = gen_ba_community(3);
        d.validate().unwrap();
        assert_eq!(d.num_nodes(), 1400);
        assert_eq!(d.num_classes, 8);
        assert_eq!(motif_members(&d).len(), 160);
        assert!(d.labels[700..].iter().all(|&l| l >= 4));
        assert!(d.labels[..700].iter().all(|&l| l < 4));
        let bridges = d.graph.edges().filter(|&(a, b)| a < 700 && b >= 700).count();
        assert_eq!(bridges, 14);
        assert!(is_connected(&d.graph));

        // Per-dimension community means within 3 sigma / sqrt(n).
        let x = d.graph.features().unwrap();
        let tol = 3.0 / (700f64).sqrt();
        for dim in 0..10 {
            let low: f64 = (0..700).map(|v| x[[v, dim]]).sum::<f64>() / 700.0;
            let high: f64 = (700..1400).map(|v| x[[v, dim]]).sum::<f64>() / 700.0;
            assert!((low + 1.0).abs() < tol, "dim {dim}: {low}");
            assert!((high - 1.0).abs() < tol, "dim {dim}: {high}");
        }
    }

    #[test]
    fn tree_cycles_structure() {
        let d = gen_tree_cycles(1);
        d.validate().unwrap();
        assert_eq!(d.num_nodes(), 735);
        assert_eq!(d.num_classes, 2);
        assert_eq!(d.motif_mask.iter().filter(|&&m| m).count(), 480);
        assert_eq!(d.graph.num_edges(), 254 + 80 * 7 + 74);
        for v in 255..735 {
            assert!(d.graph.degree(v) >= 2);
        }
        assert!(is_connected(&d.graph));
    }

    #[test]
    fn tree_grid_structure() {
        let d = gen_tree_grid(2);
        d.validate().unwrap();
        assert_eq!(d.num_nodes(), 975);
        assert_eq!(d.graph.num_edges(), 254 + 80 * 13 + 98);
        assert!(is_connected(&d.graph));

        // Random extra edges may land inside a grid, so check shapes without them.
        let config = GeneratorConfig {
            perturbation_ratio: 0.0,
            ..GeneratorConfig::default()
        };
        let d = generate_with(DatasetKind::TreeGrid, &config, 2).unwrap();
        assert_eq!(d.num_classes, 2);
        for nodes in motif_members(&d).values() {
            let inside = |v: usize| nodes.contains(&v);
            let internal_edges: usize = nodes
                .iter()
                .map(|&v| d.graph.neighbors(v).iter().filter(|&&w| inside(w)).count())
                .sum::<usize>()
                / 2;
            assert_eq!(internal_edges, 12);
            // Corner opposite the attachment corner.
            let far_corner = nodes[8];
            let internal = d.graph.neighbors(far_corner).iter().filter(|&&w| inside(w)).count();
            assert_eq!(internal, 2);
        }
        assert!(is_connected(&d.graph));
    }

    #[test]
    fn split_sizes_and_determinism() {
        assert_eq!(split_sizes(10), (8, 1, 1));
        assert_eq!(split_sizes(700), (560, 70, 70));
        let a = gen_ba_shapes(5);
        let b = gen_ba_shapes(5);
        assert_eq!(a, b);
        assert_eq!(a.nodes_in(Split::Train).len(), 560);
        assert_eq!(a.nodes_in(Split::Val).len(), 70);
        assert_eq!(a.nodes_in(Split::Test).len(), 70);
        let c = assign_splits(a.clone(), 6);
        assert_ne!(a.split, c.split);
    }

    #[test]
    fn dataset_kind_parsing() {
        for k in DatasetKind::ALL {
            assert_eq!(k.as_str().parse::<DatasetKind>().unwrap(), k);
        }
        assert!("cora".parse::<DatasetKind>().is_err());
    }
}
