//! Gradient-based node attributions: SA, Grad*Input and GradCAM.
//!
//! Every method differentiates one logit `logits[v, c]` and reduces the result
//! to one nonnegative score per node.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, RwLock};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gcn::{argmax, backward_logit_traced, forward, ForwardTrace, GcnModel, GradientBundle, NUM_LAYERS};
use crate::graph::{Graph, NormalizedAdjacency};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ExplainerKind {
    #[serde(rename = "sa")]
    Sa,
    #[serde(rename = "gradinput")]
    GradInput,
    #[serde(rename = "gradcam")]
    GradCam,
}

impl ExplainerKind {
    pub const ALL: [ExplainerKind; 3] = [ExplainerKind::Sa, ExplainerKind::GradInput, ExplainerKind::GradCam];

    pub fn as_str(self) -> &'static str {
        match self {
            ExplainerKind::Sa => "sa",
            ExplainerKind::GradInput => "gradinput",
            ExplainerKind::GradCam => "gradcam",
        }
    }
}

impl fmt::Display for ExplainerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExplainerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExplainerKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown explainer '{s}' (expected sa, gradinput or gradcam)")))
    }
}

/// Per-node importance for one `(target, class)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationScores {
    pub target: usize,
    pub class_used: usize,
    pub scores: Vec<f64>,
}

/// Reduces a gradient bundle to node scores.
///
/// * SA: `Σ_d |g[u,d]|`
/// * Grad*Input: `|Σ_d X[u,d]·g[u,d]|`
/// * GradCAM: `|⅓ Σ_l Σ_f h_l[u,f]·∂h_l[u,f]|`
pub fn scores_from_gradients(
    kind: ExplainerKind,
    bundle: &GradientBundle,
    x: &Array2<f64>,
    trace: &ForwardTrace,
) -> Vec<f64> {
    let n = bundle.input.nrows();
    match kind {
        ExplainerKind::Sa => bundle
            .input
            .rows()
            .into_iter()
            .map(|g| g.iter().map(|v| v.abs()).sum())
            .collect(),
        ExplainerKind::GradInput => bundle
            .input
            .rows()
            .into_iter()
            .zip(x.rows())
            .map(|(g, xr)| g.dot(&xr).abs())
            .collect(),
        ExplainerKind::GradCam => (0..n)
            .map(|u| {
                let total: f64 = (0..NUM_LAYERS)
                    .map(|l| trace.hidden[l].row(u).dot(&bundle.hidden[l].row(u)))
                    .sum();
                (total / NUM_LAYERS as f64).abs()
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct CacheKey {
    model_id: Arc<str>,
    kind: ExplainerKind,
    node: usize,
    class: usize,
}

#[derive(Debug, Default)]
struct CacheInner {
    map: HashMap<CacheKey, Arc<ExplanationScores>>,
    order: VecDeque<CacheKey>,
}

/// Size-bounded explanation store keyed by `(model, kind, node, class)`.
///
/// Reads take a shared lock; inserts take the write lock and evict the oldest
/// entry once `capacity` is reached.
#[derive(Debug)]
pub struct ExplanationCache {
    capacity: usize,
    inner: RwLock<CacheInner>,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

impl ExplanationCache {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            inner: RwLock::new(CacheInner::default()),
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
        }
    }

    fn get(&self, key: &CacheKey) -> Option<Arc<ExplanationScores>> {
        let found = self.inner.read().expect("cache lock").map.get(key).cloned();
        let counter = if found.is_some() { &self.hits } else { &self.misses };
        counter.fetch_add(1, Ordering::Relaxed);
        found
    }

    fn insert(&self, key: CacheKey, value: Arc<ExplanationScores>) {
        if self.capacity == 0 {
            return;
        }
        let mut inner = self.inner.write().expect("cache lock");
        if inner.map.contains_key(&key) {
            return;
        }
        while inner.map.len() >= self.capacity {
            match inner.order.pop_front() {
                Some(old) => {
                    inner.map.remove(&old);
                }
                None => break,
            }
        }
        inner.order.push_back(key.clone());
        inner.map.insert(key, value);
    }

    pub fn len(&self) -> usize {
        self.inner.read().expect("cache lock").map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(hits, misses)` since creation.
    pub fn stats(&self) -> (usize, usize) {
        (self.hits.load(Ordering::Relaxed), self.misses.load(Ordering::Relaxed))
    }
}

/// A trained model bound to one graph, with its forward pass precomputed.
pub struct Explainer<'a> {
    model: &'a GcnModel,
    graph: &'a Graph,
    features: &'a Array2<f64>,
    adj: NormalizedAdjacency,
    trace: ForwardTrace,
    model_id: Arc<str>,
    cache: Option<Arc<ExplanationCache>>,
}

impl<'a> Explainer<'a> {
    pub fn new(model: &'a GcnModel, graph: &'a Graph) -> Result<Self> {
        let features = graph.features().ok_or(Error::MissingFeatures)?;
        let adj = graph.normalized_adjacency();
        let trace = forward(model, &adj, features)?;
        Ok(Self {
            model,
            graph,
            features,
            adj,
            trace,
            model_id: model.fingerprint().into(),
            cache: None,
        })
    }

    /// Attaches a private cache holding up to `capacity` explanations.
    pub fn with_cache(self, capacity: usize) -> Self {
        self.with_shared_cache(Arc::new(ExplanationCache::new(capacity)))
    }

    pub fn with_shared_cache(mut self, cache: Arc<ExplanationCache>) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn cache(&self) -> Option<&ExplanationCache> {
        self.cache.as_deref()
    }

    pub fn model(&self) -> &GcnModel {
        self.model
    }

    pub fn graph(&self) -> &Graph {
        self.graph
    }

    pub fn features(&self) -> &Array2<f64> {
        self.features
    }

    pub fn adjacency(&self) -> &NormalizedAdjacency {
        &self.adj
    }

    pub fn trace(&self) -> &ForwardTrace {
        &self.trace
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn predicted_class(&self, v: usize) -> Result<usize> {
        if v >= self.num_nodes() {
            return Err(Error::NodeOutOfRange {
                index: v,
                num_nodes: self.num_nodes(),
            });
        }
        Ok(argmax(self.trace.logits.row(v).as_slice().expect("standard layout")))
    }

    pub fn gradients(&self, v: usize, class: usize) -> Result<GradientBundle> {
        backward_logit_traced(self.model, &self.adj, self.features, &self.trace, v, class)
    }

    /// Explanation of `logits[v, class]`, served from the cache when possible.
    pub fn explain(&self, kind: ExplainerKind, v: usize, class: usize) -> Result<ExplanationScores> {
        let key = self.cache.as_ref().map(|_| CacheKey {
            model_id: Arc::clone(&self.model_id),
            kind,
            node: v,
            class,
        });
        if let (Some(cache), Some(key)) = (&self.cache, &key) {
            if let Some(hit) = cache.get(key) {
                return Ok((*hit).clone());
            }
        }
        let bundle = self.gradients(v, class)?;
        let out = ExplanationScores {
            target: v,
            class_used: class,
            scores: scores_from_gradients(kind, &bundle, self.features, &self.trace),
        };
        if let (Some(cache), Some(key)) = (&self.cache, key) {
            cache.insert(key, Arc::new(out.clone()));
        }
        Ok(out)
    }
}

/// One-shot explanation without a reusable [`Explainer`].
pub fn explain(kind: ExplainerKind, model: &GcnModel, graph: &Graph, v: usize, class: usize) -> Result<ExplanationScores> {
    Explainer::new(model, graph)?.explain(kind, v, class)
}

pub fn explain_sa(model: &GcnModel, graph: &Graph, v: usize, class: usize) -> Result<ExplanationScores> {
    explain(ExplainerKind::Sa, model, graph, v, class)
}

pub fn explain_grad_input(model: &GcnModel, graph: &Graph, v: usize, class: usize) -> Result<ExplanationScores> {
    explain(ExplainerKind::GradInput, model, graph, v, class)
}

pub fn explain_gradcam(model: &GcnModel, graph: &Graph, v: usize, class: usize) -> Result<ExplanationScores> {
    explain(ExplainerKind::GradCam, model, graph, v, class)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(features: Array2<f64>) -> Graph {
        Graph::build(&[(0, 1), (1, 2), (2, 3), (3, 4), (1, 5)], 6, Some(features)).unwrap()
    }

    fn wavy(n: usize, d: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, d), |(i, j)| ((i * d + j) as f64 * 0.71).cos())
    }

    #[test]
    fn zero_model_scores_are_zero() {
        let g = toy(wavy(6, 3));
        let m = GcnModel::zeros(3, 2);
        for kind in ExplainerKind::ALL {
            let s = explain(kind, &m, &g, 2, 1).unwrap();
            assert!(s.scores.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn zero_features_give_zero_grad_input() {
        let g = toy(Array2::zeros((6, 3)));
        let s = explain_grad_input(&GcnModel::glorot(3, 2, 1), &g, 0, 0).unwrap();
        assert!(s.scores.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn all_ones_grad_input_is_abs_row_sum_and_bounded_by_sa() {
        let g = toy(Array2::ones((6, 4)));
        let m = GcnModel::glorot(4, 3, 2);
        let ex = Explainer::new(&m, &g).unwrap();
        let grads = ex.gradients(1, 2).unwrap();
        let gi = ex.explain(ExplainerKind::GradInput, 1, 2).unwrap();
        let sa = ex.explain(ExplainerKind::Sa, 1, 2).unwrap();
        for u in 0..6 {
            let row_sum: f64 = grads.input.row(u).sum();
            assert!((gi.scores[u] - row_sum.abs()).abs() < 1e-15);
            assert!(gi.scores[u] <= sa.scores[u] + 1e-15);
        }
    }

    #[test]
    fn gradcam_with_dead_upper_layers_is_grad_times_h1() {
        let g = toy(wavy(6, 3));
        let mut m = GcnModel::glorot(3, 2, 5);
        for l in 1..3 {
            m.convs[l].weight.fill(0.0);
            m.convs[l].bias.fill(0.0);
        }
        let ex = Explainer::new(&m, &g).unwrap();
        let grads = ex.gradients(3, 0).unwrap();
        let cam = ex.explain(ExplainerKind::GradCam, 3, 0).unwrap();
        for u in 0..6 {
            let s1 = ex.trace().hidden[0].row(u).dot(&grads.hidden[0].row(u));
            assert!((cam.scores[u] - (s1 / 3.0).abs()).abs() < 1e-15);
        }
    }

    #[test]
    fn dispatch_purity_and_cache() {
        let g = toy(wavy(6, 3));
        let m = GcnModel::glorot(3, 2, 3);
        let plain = Explainer::new(&m, &g).unwrap();
        let cached = Explainer::new(&m, &g).unwrap().with_cache(4);
        for kind in ExplainerKind::ALL {
            let a = plain.explain(kind, 4, 1).unwrap();
            let b = cached.explain(kind, 4, 1).unwrap();
            let c = cached.explain(kind, 4, 1).unwrap();
            assert_eq!(a, b);
            assert_eq!(b, c);
            assert!(a.scores.iter().all(|&s| s >= 0.0));
        }
        assert_eq!(explain_sa(&m, &g, 4, 1).unwrap(), plain.explain(ExplainerKind::Sa, 4, 1).unwrap());
        assert_eq!(cached.cache().unwrap().stats(), (3, 3));
    }

    #[test]
    fn cache_is_bounded() {
        let g = toy(wavy(6, 3));
        let m = GcnModel::glorot(3, 2, 3);
        let ex = Explainer::new(&m, &g).unwrap().with_cache(2);
        for v in 0..5 {
            ex.explain(ExplainerKind::Sa, v, 0).unwrap();
        }
        assert_eq!(ex.cache().unwrap().len(), 2);
    }

    #[test]
    fn missing_features_is_an_error() {
        let g = Graph::build(&[(0, 1)], 2, None).unwrap();
        assert!(matches!(
            Explainer::new(&GcnModel::zeros(1, 2), &g),
            Err(Error::MissingFeatures)
        ));
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("gradcam".parse::<ExplainerKind>().unwrap(), ExplainerKind::GradCam);
        assert!("lrp".parse::<ExplainerKind>().is_err());
        assert_eq!(serde_json::to_string(&ExplainerKind::GradInput).unwrap(), "\"gradinput\"");
    }
}
