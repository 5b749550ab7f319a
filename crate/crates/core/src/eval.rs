//! Ground-truth evaluation of explanations and the `(α, β)` grid scan.

use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::{Explainer, ExplainerKind};
use crate::gcn::GcnModel;
use crate::seen::{rank_assistants, select_assistants, SeenConfig};
use crate::synth::{Dataset, DatasetKind, Split};

/// Area under the ROC curve, i.e. the Mann–Whitney probability that a
/// positive outscores a negative, counting ties as ½.
pub fn auc_roc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: scores.len(),
            found: labels.len(),
        });
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::UndefinedAuc { positives, negatives });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Sum of (1-based, tie-averaged) ranks of the positives.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let pos_in_group = order[i..j].iter().filter(|&&k| labels[k]).count();
        rank_sum += pos_in_group as f64 * (i + 1 + j) as f64 / 2.0;
        i = j;
    }
    let p = positives as f64;
    let u = rank_sum - p * (p + 1.0) / 2.0;
    Ok(u / (p * negatives as f64))
}

macro_rules! string_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl $name {
            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }
        impl FromStr for $name {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(Error::Config(format!(
                        concat!("unknown ", stringify!($name), " '{}'"), s
                    ))),
                }
            }
        }
        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

/// Which explanation entries are scored for a target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CandidateMode {
    /// Nodes within `k_hops` of the target.
    #[default]
    #[serde(rename = "khop")]
    KHop,
    /// Every node in the graph.
    #[serde(rename = "all")]
    All,
}
string_enum!(CandidateMode { KHop => "khop", All => "all" });

/// Which candidates count as ground-truth positives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PositiveMode {
    /// Members of the target's own motif instance.
    #[default]
    #[serde(rename = "same-motif")]
    SameMotif,
    /// Any motif-participating node.
    #[serde(rename = "any-motif")]
    AnyMotif,
}
string_enum!(PositiveMode { SameMotif => "same-motif", AnyMotif => "any-motif" });

/// Class whose logit is explained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ClassMode {
    #[default]
    #[serde(rename = "predicted")]
    Predicted,
    #[serde(rename = "true")]
    True,
}
string_enum!(ClassMode { Predicted => "predicted", True => "true" });

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum AucMode {
    /// AUC per target, then the unweighted mean.
    #[default]
    #[serde(rename = "per-target")]
    PerTarget,
    /// One AUC over all targets' candidates.
    #[serde(rename = "pooled")]
    Pooled,
}
string_enum!(AucMode { PerTarget => "per-target", Pooled => "pooled" });

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub candidates: CandidateMode,
    pub positives: PositiveMode,
    pub class_mode: ClassMode,
    pub auc_mode: AucMode,
    pub k_hops: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            candidates: CandidateMode::default(),
            positives: PositiveMode::default(),
            class_mode: ClassMode::default(),
            auc_mode: AucMode::default(),
            k_hops: 3,
        }
    }
}

/// One explained node and the ground truth its explanation is scored against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalTarget {
    pub node: usize,
    /// Candidate nodes, ascending; never contains `node`.
    pub candidates: Vec<usize>,
    /// Ground truth per candidate.
    pub positive: Vec<bool>,
}

/// One target per motif node in the test split.
pub fn build_eval_targets(dataset: &Dataset, opts: &EvalOptions) -> Result<Vec<EvalTarget>> {
    let graph = &dataset.graph;
    let mut targets = Vec::new();
    for node in dataset.nodes_in(Split::Test) {
        if !dataset.motif_mask[node] {
            continue;
        }
        let candidates: Vec<usize> = match opts.candidates {
            CandidateMode::KHop => select_assistants(graph, node, opts.k_hops)?,
            CandidateMode::All => (0..graph.num_nodes()).filter(|&u| u != node).collect(),
        };
        let positive = candidates
            .iter()
            .map(|&u| match opts.positives {
                PositiveMode::SameMotif => dataset.motif_id[u] == dataset.motif_id[node],
                PositiveMode::AnyMotif => dataset.motif_mask[u],
            })
            .collect();
        targets.push(EvalTarget {
            node,
            candidates,
            positive,
        });
    }
    Ok(targets)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetAuc {
    pub node: usize,
    pub class_used: usize,
    /// `None` when the candidate set has only one label.
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub mean_auc: f64,
    pub n_targets: usize,
    pub n_skipped: usize,
    pub per_target: Vec<TargetAuc>,
}

/// One `(α, β)` setting to score; `uniform` selects the `β → 1` limit.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Cell {
    alpha: f64,
    beta: f64,
    uniform: bool,
}

impl Cell {
    fn weight(&self, rank_index: usize) -> f64 {
        if self.uniform {
            self.alpha
        } else {
            self.alpha * self.beta.powi(rank_index as i32)
        }
    }
}

/// Candidate scores of one target under each cell (base explanation when
/// `cells` is empty). Accumulates in the same order as [`crate::seen::sharpen`],
/// so results agree bit for bit with the full-vector path.
fn target_cell_scores(
    explainer: &Explainer<'_>,
    target: &EvalTarget,
    class: usize,
    kind: ExplainerKind,
    cells: &[Cell],
    k_hops: usize,
    skip_zero_score: bool,
) -> Result<Vec<Vec<f64>>> {
    let base = explainer.explain(kind, target.node, class)?;
    let restricted: Vec<f64> = target.candidates.iter().map(|&u| base.scores[u]).collect();
    if cells.is_empty() {
        return Ok(vec![restricted]);
    }
    let mut out = vec![restricted; cells.len()];
    let mut assistants = select_assistants(explainer.graph(), target.node, k_hops)?;
    if skip_zero_score {
        assistants.retain(|&v| base.scores[v] != 0.0);
    }
    let ranking = rank_assistants(&base, &assistants)?;
    for (r, assistant) in ranking.nodes().enumerate() {
        let aux = explainer.explain(kind, assistant, class)?;
        for (cell, acc) in cells.iter().zip(out.iter_mut()) {
            let w = cell.weight(r);
            for (o, &u) in acc.iter_mut().zip(&target.candidates) {
                *o += w * aux.scores[u];
            }
        }
    }
    Ok(out)
}

fn target_class(explainer: &Explainer<'_>, dataset: &Dataset, node: usize, mode: ClassMode) -> Result<usize> {
    match mode {
        ClassMode::Predicted => explainer.predicted_class(node),
        ClassMode::True => Ok(dataset.labels[node]),
    }
}

/// Aggregates per-target candidate scores into an [`Evaluation`].
pub fn summarize(
    targets: &[EvalTarget],
    classes: &[usize],
    scores: &[Vec<f64>],
    mode: AucMode,
) -> Result<Evaluation> {
    let per_target: Vec<TargetAuc> = targets
        .iter()
        .zip(classes)
        .zip(scores)
        .map(|((t, &class_used), s)| TargetAuc {
            node: t.node,
            class_used,
            auc: auc_roc(s, &t.positive).ok(),
        })
        .collect();
    let n_skipped = per_target.iter().filter(|t| t.auc.is_none()).count();
    let mean_auc = match mode {
        AucMode::PerTarget => {
            let valid: Vec<f64> = per_target.iter().filter_map(|t| t.auc).collect();
            if valid.is_empty() {
                return Err(Error::NoValidTargets);
            }
            valid.iter().sum::<f64>() / valid.len() as f64
        }
        AucMode::Pooled => {
            let all_scores: Vec<f64> = scores.iter().flatten().copied().collect();
            let all_labels: Vec<bool> = targets.iter().flat_map(|t| t.positive.iter().copied()).collect();
            auc_roc(&all_scores, &all_labels).map_err(|_| Error::NoValidTargets)?
        }
    };
    Ok(Evaluation {
        mean_auc,
        n_targets: targets.len(),
        n_skipped,
        per_target,
    })
}

fn evaluate_cells(
    explainer: &Explainer<'_>,
    dataset: &Dataset,
    kind: ExplainerKind,
    cells: &[Cell],
    k_hops: usize,
    skip_zero_score: bool,
    opts: &EvalOptions,
) -> Result<Vec<Evaluation>> {
    let targets = build_eval_targets(dataset, opts)?;
    let mut classes = Vec::with_capacity(targets.len());
    let width = cells.len().max(1);
    let mut per_cell: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(targets.len()); width];
    for t in &targets {
        let class = target_class(explainer, dataset, t.node, opts.class_mode)?;
        classes.push(class);
        let scores = target_cell_scores(explainer, t, class, kind, cells, k_hops, skip_zero_score)?;
        for (slot, s) in per_cell.iter_mut().zip(scores) {
            slot.push(s);
        }
    }
    per_cell
        .iter()
        .map(|s| summarize(&targets, &classes, s, opts.auc_mode))
        .collect()
}

/// Mean explanation AUC over the test-split motif nodes, with or without
/// sharpening.
pub fn evaluate(
    explainer: &Explainer<'_>,
    dataset: &Dataset,
    kind: ExplainerKind,
    seen: Option<&SeenConfig>,
    opts: &EvalOptions,
) -> Result<Evaluation> {
    let (cells, k, skip) = match seen {
        None => (vec![], opts.k_hops, false),
        Some(cfg) => {
            cfg.validate()?;
            let uniform = cfg.beta == 1.0 && cfg.allow_beta_one;
            (
                vec![Cell {
                    alpha: cfg.alpha,
                    beta: cfg.beta,
                    uniform,
                }],
                cfg.k_hops,
                cfg.skip_zero_score,
            )
        }
    };
    Ok(evaluate_cells(explainer, dataset, kind, &cells, k, skip, opts)?.remove(0))
}

/// Coefficient grid for [`grid_scan`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    /// Adds `β = 1` cells (uniform weights), reported separately.
    pub include_beta_one: bool,
    pub k_hops: usize,
    pub skip_zero_score: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            alphas: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            betas: vec![0.0, 0.25, 0.5, 0.75],
            include_beta_one: false,
            k_hops: 3,
            skip_zero_score: false,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() || self.betas.is_empty() {
            return Err(Error::Config("grid needs at least one alpha and one beta".into()));
        }
        for &a in &self.alphas {
            for &b in &self.betas {
                SeenConfig {
                    alpha: a,
                    beta: b,
                    k_hops: self.k_hops,
                    allow_beta_one: false,
                    skip_zero_score: self.skip_zero_score,
                }
                .validate()?;
            }
        }
        Ok(())
    }

    fn cells(&self) -> Vec<Cell> {
        let mut cells: Vec<Cell> = self
            .alphas
            .iter()
            .flat_map(|&alpha| {
                self.betas.iter().map(move |&beta| Cell {
                    alpha,
                    beta,
                    uniform: false,
                })
            })
            .collect();
        if self.include_beta_one {
            cells.extend(self.alphas.iter().map(|&alpha| Cell {
                alpha,
                beta: 1.0,
                uniform: true,
            }));
        }
        cells
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedEvaluation {
    pub seed: u64,
    pub mean_auc: f64,
    pub n_targets: usize,
    pub n_skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanCell {
    pub alpha: f64,
    pub beta: f64,
    /// Mean over seeds of the per-seed mean AUC.
    pub mean_auc: f64,
    pub per_seed: Vec<SeedEvaluation>,
}

impl ScanCell {
    pub fn seed_aucs(&self) -> Vec<f64> {
        self.per_seed.iter().map(|s| s.mean_auc).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub dataset: DatasetKind,
    pub explainer: ExplainerKind,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub options: EvalOptions,
    /// Row-major over `alphas × betas`.
    pub cells: Vec<ScanCell>,
    /// `β = 1` cells, one per alpha; empty unless requested.
    pub beta_one_cells: Vec<ScanCell>,
    pub best_alpha: f64,
    pub best_beta: f64,
}

impl ScanReport {
    pub fn cell(&self, alpha: f64, beta: f64) -> Option<&ScanCell> {
        self.cells.iter().find(|c| c.alpha == alpha && c.beta == beta)
    }

    /// Highest mean AUC; ties go to the earliest cell in row-major order.
    pub fn best_cell(&self) -> &ScanCell {
        self.cell(self.best_alpha, self.best_beta).expect("best cell is on the grid")
    }

    /// The unsharpened baseline (`α = 0`), if the grid includes it.
    pub fn base_cell(&self) -> Option<&ScanCell> {
        self.cells.iter().find(|c| c.alpha == 0.0)
    }
}

/// Evaluates every grid cell for every `(seed, model)`.
///
/// Each target's base and auxiliary explanations are computed once per model
/// and shared by all cells.
pub fn grid_scan(
    models: &[(u64, GcnModel)],
    dataset: &Dataset,
    kind: ExplainerKind,
    grid: &GridSpec,
    opts: &EvalOptions,
    cache_capacity: usize,
) -> Result<ScanReport> {
    grid.validate()?;
    if models.is_empty() {
        return Err(Error::Config("grid scan needs at least one model".into()));
    }
    let cells = grid.cells();
    let per_model: Vec<Vec<Evaluation>> = models
        .par_iter()
        .map(|(_, model)| {
            let explainer = Explainer::new(model, &dataset.graph)?.with_cache(cache_capacity);
            evaluate_cells(&explainer, dataset, kind, &cells, grid.k_hops, grid.skip_zero_score, opts)
        })
        .collect::<Result<_>>()?;

    let mut scan_cells: Vec<ScanCell> = cells
        .iter()
        .enumerate()
        .map(|(i, cell)| {
            let per_seed: Vec<SeedEvaluation> = models
                .iter()
                .zip(&per_model)
                .map(|((seed, _), evals)| SeedEvaluation {
                    seed: *seed,
                    mean_auc: evals[i].mean_auc,
                    n_targets: evals[i].n_targets,
                    n_skipped: evals[i].n_skipped,
                })
                .collect();
            let mean_auc = per_seed.iter().map(|s| s.mean_auc).sum::<f64>() / per_seed.len() as f64;
            ScanCell {
                alpha: cell.alpha,
                beta: cell.beta,
                mean_auc,
                per_seed,
            }
        })
        .collect();
    let main = grid.alphas.len() * grid.betas.len();
    let beta_one_cells = scan_cells.split_off(main);
    let best = scan_cells
        .iter()
        .fold(&scan_cells[0], |best, c| if c.mean_auc > best.mean_auc { c } else { best });
    Ok(ScanReport {
        dataset: dataset.name,
        explainer: kind,
        alphas: grid.alphas.clone(),
        betas: grid.betas.clone(),
        options: *opts,
        best_alpha: best.alpha,
        best_beta: best.beta,
        cells: scan_cells,
        beta_one_cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_basic_cases() {
        assert_eq!(auc_roc(&[0.9, 0.8, 0.1], &[true, true, false]).unwrap(), 1.0);
        assert_eq!(auc_roc(&[0.5, 0.5], &[true, false]).unwrap(), 0.5);
        assert_eq!(auc_roc(&[0.1, 0.9], &[true, false]).unwrap(), 0.0);
        assert_eq!(
            auc_roc(&[0.1, 0.2], &[true, true]),
            Err(Error::UndefinedAuc {
                positives: 2,
                negatives: 0
            })
        );
        assert!(auc_roc(&[0.1], &[true, false]).is_err());
    }

    #[test]
    fn grid_shape() {
        let g = GridSpec::default();
        assert_eq!(g.cells().len(), 20);
        let with_one = GridSpec {
            include_beta_one: true,
            ..GridSpec::default()
        };
        assert_eq!(with_one.cells().len(), 25);
        let bad = GridSpec {
            betas: vec![0.5, 1.5],
            ..GridSpec::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("all".parse::<CandidateMode>().unwrap(), CandidateMode::All);
        assert_eq!("true".parse::<ClassMode>().unwrap(), ClassMode::True);
        assert_eq!("pooled".parse::<AucMode>().unwrap(), AucMode::Pooled);
        assert_eq!("any-motif".parse::<PositiveMode>().unwrap(), PositiveMode::AnyMotif);
        assert!("sometimes".parse::<ClassMode>().is_err());
    }
}
