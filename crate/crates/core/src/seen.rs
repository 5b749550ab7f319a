//! Explanation sharpening with auxiliary explanations from assistant nodes.
//!
//! For a target `v_t` explained for class `c`, every node within `k` hops
//! (excluding `v_t`) is an assistant. Assistants are ranked by their score in
//! the target's own explanation, each is explained for the same class `c`, and
//! the results are folded in with weight `α·β^(r-1)` for rank `r`:
//!
//! ```text
//! S̄(v_t) = S(v_t) + α · Σ_r β^(r-1) · S(v^(r))
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::{Explainer, ExplainerKind, ExplanationScores};
use crate::graph::Graph;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeenConfig {
    /// Weight of the auxiliary explanations, in `[0, 1]`.
    pub alpha: f64,
    /// Per-rank decay, in `[0, 1)`; `1` only with `allow_beta_one`.
    pub beta: f64,
    /// Assistant boundary in hops; matches the number of message-passing layers.
    pub k_hops: usize,
    /// Permits `beta = 1` for the uniform-weight ablation.
    #[serde(default)]
    pub allow_beta_one: bool,
    /// Drops assistants whose score in the target explanation is exactly 0.
    #[serde(default)]
    pub skip_zero_score: bool,
}

impl Default for SeenConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.5,
            k_hops: 3,
            allow_beta_one: false,
            skip_zero_score: false,
        }
    }
}

impl SeenConfig {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let cfg = Self {
            alpha,
            beta,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        let beta_ok = (0.0..1.0).contains(&self.beta) || (self.allow_beta_one && self.beta == 1.0);
        if !beta_ok {
            return Err(Error::Config(format!("beta must lie in [0, 1), got {}", self.beta)));
        }
        if self.k_hops == 0 {
            return Err(Error::Config("k_hops must be at least 1".into()));
        }
        Ok(())
    }
}

/// Nodes at hop distance in `(0, k]` from `target`, ascending.
pub fn select_assistants(graph: &Graph, target: usize, k: usize) -> Result<Vec<usize>> {
    Ok(graph
        .hop_distances(target, k)?
        .iter()
        .enumerate()
        .filter_map(|(v, d)| matches!(d, Some(h) if *h > 0).then_some(v))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedAssistant {
    pub node: usize,
    /// 1-based rank.
    pub rank: usize,
    /// Score of this node in the target explanation.
    pub score: f64,
}

/// Assistants ordered by decreasing importance in the target explanation.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AssistantRanking {
    pub entries: Vec<RankedAssistant>,
}

impl AssistantRanking {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|e| e.node)
    }
}

/// Sorts `assistants` by descending target score, ties by ascending node index.
pub fn rank_assistants(target: &ExplanationScores, assistants: &[usize]) -> Result<AssistantRanking> {
    let n = target.scores.len();
    let mut entries = Vec::with_capacity(assistants.len());
    for &node in assistants {
        if node >= n {
            return Err(Error::NodeOutOfRange { index: node, num_nodes: n });
        }
        entries.push(RankedAssistant {
            node,
            rank: 0,
            score: target.scores[node],
        });
    }
    entries.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.node.cmp(&b.node)));
    for (i, e) in entries.iter_mut().enumerate() {
        e.rank = i + 1;
    }
    Ok(AssistantRanking { entries })
}

fn check_lengths(base: &ExplanationScores, aux: &[ExplanationScores]) -> Result<()> {
    for a in aux {
        if a.scores.len() != base.scores.len() {
            return Err(Error::LengthMismatch {
                expected: base.scores.len(),
                found: a.scores.len(),
            });
        }
    }
    Ok(())
}

/// Weighted aggregation; `aux[r - 1]` must be the rank-`r` auxiliary.
pub fn sharpen(base: &ExplanationScores, aux: &[ExplanationScores], cfg: &SeenConfig) -> Result<ExplanationScores> {
    cfg.validate()?;
    check_lengths(base, aux)?;
    let mut out = base.clone();
    for (r, a) in aux.iter().enumerate() {
        // powi(0) is 1 for every base, including beta = 0.
        let w = cfg.alpha * cfg.beta.powi(r as i32);
        for (o, s) in out.scores.iter_mut().zip(&a.scores) {
            *o += w * s;
        }
    }
    Ok(out)
}

/// The `β → 1` limit: every auxiliary weighted by `alpha` alone.
pub fn sharpen_uniform_limit(base: &ExplanationScores, aux: &[ExplanationScores], alpha: f64) -> Result<ExplanationScores> {
    check_lengths(base, aux)?;
    let mut out = base.clone();
    for a in aux {
        for (o, s) in out.scores.iter_mut().zip(&a.scores) {
            *o += alpha * s;
        }
    }
    Ok(out)
}

/// Everything needed to sharpen one target under any `(α, β)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliarySet {
    pub kind: ExplainerKind,
    pub base: ExplanationScores,
    pub ranking: AssistantRanking,
    /// Auxiliary explanations in rank order.
    pub aux: Vec<ExplanationScores>,
}

impl AuxiliarySet {
    pub fn sharpen(&self, cfg: &SeenConfig) -> Result<ExplanationScores> {
        if cfg.beta == 1.0 && cfg.allow_beta_one {
            cfg.validate()?;
            return sharpen_uniform_limit(&self.base, &self.aux, cfg.alpha);
        }
        sharpen(&self.base, &self.aux, cfg)
    }
}

/// Explains `target` and its assistants for `class`.
pub fn gather_auxiliaries(
    explainer: &Explainer<'_>,
    target: usize,
    class: usize,
    kind: ExplainerKind,
    k_hops: usize,
    skip_zero_score: bool,
) -> Result<AuxiliarySet> {
    let base = explainer.explain(kind, target, class)?;
    let mut assistants = select_assistants(explainer.graph(), target, k_hops)?;
    if skip_zero_score {
        assistants.retain(|&v| base.scores[v] != 0.0);
    }
    let ranking = rank_assistants(&base, &assistants)?;
    let aux = ranking
        .nodes()
        .map(|v| explainer.explain(kind, v, class))
        .collect::<Result<Vec<_>>>()?;
    Ok(AuxiliarySet {
        kind,
        base,
        ranking,
        aux,
    })
}

/// A sharpened explanation with the assistants that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SeenExplanation {
    pub explanation: ExplanationScores,
    pub ranking: AssistantRanking,
    pub alpha: f64,
    pub beta: f64,
}

/// Sharpened explanation of `target` for its predicted class.
pub fn seen_explain(
    explainer: &Explainer<'_>,
    target: usize,
    kind: ExplainerKind,
    cfg: &SeenConfig,
) -> Result<SeenExplanation> {
    let class = explainer.predicted_class(target)?;
    seen_explain_for_class(explainer, target, class, kind, cfg)
}

/// Sharpened explanation of `target` for an explicit class (e.g. the true label).
pub fn seen_explain_for_class(
    explainer: &Explainer<'_>,
    target: usize,
    class: usize,
    kind: ExplainerKind,
    cfg: &SeenConfig,
) -> Result<SeenExplanation> {
    cfg.validate()?;
    let set = gather_auxiliaries(explainer, target, class, kind, cfg.k_hops, cfg.skip_zero_score)?;
    Ok(SeenExplanation {
        explanation: set.sharpen(cfg)?,
        ranking: set.ranking,
        alpha: cfg.alpha,
        beta: cfg.beta,
    })
}
