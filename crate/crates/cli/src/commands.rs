use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use seen_core::eval::{grid_scan, ClassMode, ScanCell, ScanReport};
use seen_core::explain::{ExplanationScores, Explainer, ExplainerKind};
use seen_core::gcn::{train as train_model, EpochRecord, GcnModel, SplitAccuracy, TrainConfig};
use seen_core::seen::{seen_explain_for_class, AssistantRanking, SeenConfig};
use seen_core::stats::{paired_tests, MIN_PAIRS, SIGNIFICANCE_LEVEL};
use seen_core::synth::{generate as generate_dataset, Dataset, DatasetKind};

use crate::artifacts::{
    parse_json, read_artifact, with_suffix, write_json_with_provenance, write_with_sidecar, Layout, Provenance,
};
use crate::settings::Settings;
use crate::{CliError, TargetArgs};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub dataset: DatasetKind,
    pub data_seed: u64,
    pub seed: u64,
    pub train_config: TrainConfig,
    pub final_accuracy: SplitAccuracy,
    pub history: Vec<EpochRecord>,
    pub model: GcnModel,
}

pub struct Target {
    seed: u64,
    node: usize,
    class: Option<usize>,
}

impl Target {
    pub fn from_args(a: &TargetArgs) -> Self {
        Self {
            seed: a.seed,
            node: a.node,
            class: a.class,
        }
    }
}

fn single<T: Copy + std::fmt::Display>(items: &[T], what: &str) -> Result<T, CliError> {
    match items {
        [one] => Ok(*one),
        _ => Err(CliError::Config(format!("this command needs exactly one {what}"))),
    }
}

fn load_dataset(layout: &Layout, kind: DatasetKind, data_seed: u64) -> Result<(Dataset, Vec<u8>, std::path::PathBuf), CliError> {
    let path = layout.dataset(kind, data_seed);
    let bytes = read_artifact(&path, "run `seen-bench generate` first")?;
    let d: Dataset = parse_json(&path, &bytes)?;
    d.validate()?;
    Ok((d, bytes, path))
}

fn load_model(layout: &Layout, kind: DatasetKind, data_seed: u64, seed: u64) -> Result<(ModelArtifact, Vec<u8>, std::path::PathBuf), CliError> {
    let path = layout.model(kind, data_seed, seed);
    let bytes = read_artifact(&path, "run `seen-bench train` first")?;
    let m: ModelArtifact = parse_json(&path, &bytes)?;
    Ok((m, bytes, path))
}

pub fn generate(s: &Settings) -> Result<(), CliError> {
    let layout = Layout::new(&s.out);
    for &kind in &s.datasets {
        let d = generate_dataset(kind, s.data_seed);
        let path = layout.dataset(kind, s.data_seed);
        write_json_with_provenance(&path, &d, &Provenance::new("generate", s))?;
        println!(
            "{kind}: {} nodes, {} edges, {} motif nodes -> {}",
            d.num_nodes(),
            d.graph.num_edges(),
            d.motif_mask.iter().filter(|&&m| m).count(),
            path.display()
        );
    }
    Ok(())
}

fn train_config(s: &Settings, kind: DatasetKind, seed: u64) -> Result<TrainConfig, CliError> {
    let mut c = TrainConfig::for_dataset(kind, seed);
    if let Some(e) = s.train.epochs {
        c.epochs = e;
    }
    if let Some(lr) = s.train.lr {
        c.lr = lr;
    }
    if let Some(wd) = s.train.weight_decay {
        c.weight_decay = wd;
    }
    c.decay_biases = s.train.decay_biases;
    c.log_every = c.log_every.min(c.epochs.max(1));
    c.validate()?;
    Ok(c)
}

pub fn train(s: &Settings) -> Result<(), CliError> {
    let layout = Layout::new(&s.out);
    for &kind in &s.datasets {
        let (dataset, bytes, data_path) = load_dataset(&layout, kind, s.data_seed)?;
        let configs = s
            .seeds
            .iter()
            .map(|&seed| train_config(s, kind, seed))
            .collect::<Result<Vec<_>, _>>()?;
        let outcomes = configs
            .par_iter()
            .map(|cfg| {
                let init = GcnModel::glorot(dataset.graph.feature_dim(), dataset.num_classes, cfg.seed);
                train_model(init, &dataset, cfg).map(|o| (cfg.clone(), o))
            })
            .collect::<Result<Vec<_>, _>>()?;
        for (cfg, out) in outcomes {
            let artifact = ModelArtifact {
                dataset: kind,
                data_seed: s.data_seed,
                seed: cfg.seed,
                train_config: cfg.clone(),
                final_accuracy: out.final_accuracy,
                history: out.history,
                model: out.model,
            };
            let path = layout.model(kind, s.data_seed, cfg.seed);
            let prov = Provenance::new("train", s).with_input(&data_path, &bytes);
            write_json_with_provenance(&path, &artifact, &prov)?;
            let a = artifact.final_accuracy;
            println!(
                "{kind} seed {}: accuracy train {:.3} val {:.3} test {:.3} -> {}",
                cfg.seed,
                a.train,
                a.val,
                a.test,
                path.display()
            );
        }
    }
    Ok(())
}

fn resolve_class(explainer: &Explainer<'_>, dataset: &Dataset, t: &Target, mode: ClassMode) -> Result<usize, CliError> {
    if t.node >= dataset.num_nodes() {
        return Err(CliError::Config(format!(
            "node {} out of range (dataset has {} nodes)",
            t.node,
            dataset.num_nodes()
        )));
    }
    let class = match (t.class, mode) {
        (Some(c), _) => c,
        (None, ClassMode::Predicted) => explainer.predicted_class(t.node)?,
        (None, ClassMode::True) => dataset.labels[t.node],
    };
    if class >= dataset.num_classes {
        return Err(CliError::Config(format!(
            "class {class} out of range ({} classes)",
            dataset.num_classes
        )));
    }
    Ok(class)
}

fn top_nodes(scores: &[f64], k: usize) -> String {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
        .iter()
        .take(k)
        .map(|&v| format!("{v}:{:.4}", scores[v]))
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Serialize)]
struct ExplanationArtifact<'a> {
    dataset: DatasetKind,
    explainer: ExplainerKind,
    model_seed: u64,
    model_fingerprint: String,
    explanation: &'a ExplanationScores,
}

pub fn explain(s: &Settings, t: &Target) -> Result<(), CliError> {
    let layout = Layout::new(&s.out);
    let kind = single(&s.datasets, "dataset")?;
    let ek = single(&s.explainers, "explainer")?;
    let (dataset, dbytes, dpath) = load_dataset(&layout, kind, s.data_seed)?;
    let (m, mbytes, mpath) = load_model(&layout, kind, s.data_seed, t.seed)?;
    let explainer = Explainer::new(&m.model, &dataset.graph)?;
    let class = resolve_class(&explainer, &dataset, t, s.eval.class_mode)?;
    let e = explainer.explain(ek, t.node, class)?;
    let path = layout.explanation(kind, ek, t.seed, t.node, "base");
    let artifact = ExplanationArtifact {
        dataset: kind,
        explainer: ek,
        model_seed: t.seed,
        model_fingerprint: m.model.fingerprint(),
        explanation: &e,
    };
    let prov = Provenance::new("explain", s)
        .with_input(&dpath, &dbytes)
        .with_input(&mpath, &mbytes);
    write_json_with_provenance(&path, &artifact, &prov)?;
    println!("{kind}/{ek} node {} class {class}: top {}", t.node, top_nodes(&e.scores, 10));
    println!("-> {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct SeenArtifact<'a> {
    dataset: DatasetKind,
    explainer: ExplainerKind,
    model_seed: u64,
    model_fingerprint: String,
    config: &'a SeenConfig,
    base: ExplanationScores,
    explanation: &'a ExplanationScores,
    ranking: &'a AssistantRanking,
}

pub fn seen(s: &Settings, t: &Target, cfg: &SeenConfig) -> Result<(), CliError> {
    cfg.validate()?;
    let layout = Layout::new(&s.out);
    let kind = single(&s.datasets, "dataset")?;
    let ek = single(&s.explainers, "explainer")?;
    let (dataset, dbytes, dpath) = load_dataset(&layout, kind, s.data_seed)?;
    let (m, mbytes, mpath) = load_model(&layout, kind, s.data_seed, t.seed)?;
    let explainer = Explainer::new(&m.model, &dataset.graph)?.with_cache(s.cache_capacity);
    let class = resolve_class(&explainer, &dataset, t, s.eval.class_mode)?;
    let out = seen_explain_for_class(&explainer, t.node, class, ek, cfg)?;
    let base = explainer.explain(ek, t.node, class)?;
    let tag = format!("seen-a{}-b{}", cfg.alpha, cfg.beta);
    let path = layout.explanation(kind, ek, t.seed, t.node, &tag);
    let artifact = SeenArtifact {
        dataset: kind,
        explainer: ek,
        model_seed: t.seed,
        model_fingerprint: m.model.fingerprint(),
        config: cfg,
        base,
        explanation: &out.explanation,
        ranking: &out.ranking,
    };
    let prov = Provenance::new("seen", s)
        .with_input(&dpath, &dbytes)
        .with_input(&mpath, &mbytes);
    write_json_with_provenance(&path, &artifact, &prov)?;
    println!(
        "{kind}/{ek} node {} class {class}, {} assistants, alpha {} beta {}: top {}",
        t.node,
        out.ranking.len(),
        cfg.alpha,
        cfg.beta,
        top_nodes(&out.explanation.scores, 10)
    );
    println!("-> {}", path.display());
    Ok(())
}

fn scan_csv(report: &ScanReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["dataset", "explainer", "alpha", "beta", "seed", "mean_auc", "n_targets", "n_skipped"])
        .expect("in-memory write");
    for cell in report.cells.iter().chain(&report.beta_one_cells) {
        for p in &cell.per_seed {
            w.write_record([
                report.dataset.to_string(),
                report.explainer.to_string(),
                cell.alpha.to_string(),
                cell.beta.to_string(),
                p.seed.to_string(),
                p.mean_auc.to_string(),
                p.n_targets.to_string(),
                p.n_skipped.to_string(),
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

/// Mean AUC grid: one row per alpha, one column per beta.
fn heatmap_csv(report: &ScanReport) -> String {
    let mut betas = report.betas.clone();
    if !report.beta_one_cells.is_empty() {
        betas.push(1.0);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["alpha\\beta".to_string()];
    header.extend(betas.iter().map(|b| b.to_string()));
    w.write_record(&header).expect("in-memory write");
    let lookup = |a: f64, b: f64| -> Option<&ScanCell> {
        report
            .cells
            .iter()
            .chain(&report.beta_one_cells)
            .find(|c| c.alpha == a && c.beta == b)
    };
    for &a in &report.alphas {
        let mut row = vec![a.to_string()];
        row.extend(
            betas
                .iter()
                .map(|&b| lookup(a, b).map(|c| c.mean_auc.to_string()).unwrap_or_default()),
        );
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

pub fn scan(s: &Settings) -> Result<(), CliError> {
    let layout = Layout::new(&s.out);
    for &kind in &s.datasets {
        let (dataset, dbytes, dpath) = load_dataset(&layout, kind, s.data_seed)?;
        let mut prov = Provenance::new("scan", s).with_input(&dpath, &dbytes);
        let mut models = Vec::with_capacity(s.seeds.len());
        for &seed in &s.seeds {
            let (m, bytes, path) = load_model(&layout, kind, s.data_seed, seed)?;
            prov = prov.with_input(&path, &bytes);
            models.push((seed, m.model));
        }
        for &ek in &s.explainers {
            let report = grid_scan(&models, &dataset, ek, &s.grid, &s.eval, s.cache_capacity)?;
            let stem = layout.scan_stem(kind, ek);
            write_with_sidecar(&with_suffix(&stem, ".csv"), scan_csv(&report).as_bytes(), &prov)?;
            write_with_sidecar(&with_suffix(&stem, ".heatmap.csv"), heatmap_csv(&report).as_bytes(), &prov)?;
            write_json_with_provenance(&with_suffix(&stem, ".json"), &report, &prov)?;
            let base = report.base_cell().map(|c| c.mean_auc);
            let best = report.best_cell();
            println!(
                "{kind}/{ek}: base {} best ({}, {}) {:.4} over {} seeds -> {}.csv",
                base.map(|b| format!("{b:.4}")).unwrap_or_else(|| "n/a".into()),
                best.alpha,
                best.beta,
                best.mean_auc,
                models.len(),
                stem.display()
            );
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub dataset: DatasetKind,
    pub explainer: ExplainerKind,
    pub seeds: Vec<u64>,
    pub base_auc: f64,
    pub seen_auc: f64,
    pub improvement: f64,
    /// Relative to the base AUC, in percent.
    pub improvement_pct: f64,
    pub best_alpha: f64,
    pub best_beta: f64,
    pub p_t: Option<f64>,
    pub p_wilcoxon: Option<f64>,
    pub significant_t: Option<bool>,
    pub significant_wilcoxon: Option<bool>,
    pub note: Option<String>,
}

#[derive(Serialize)]
struct Summary {
    significance_level: f64,
    rows: Vec<SummaryRow>,
}

fn summary_row(report: &ScanReport) -> Result<SummaryRow, CliError> {
    let base = report
        .base_cell()
        .ok_or_else(|| CliError::Config("scan has no alpha = 0 row to use as the base".into()))?;
    let best = report.best_cell();
    let base_aucs = base.seed_aucs();
    let seen_aucs = best.seed_aucs();
    let (mut p_t, mut p_w, mut note) = (None, None, None);
    if base_aucs.len() < MIN_PAIRS {
        note = Some(format!("significance needs at least {MIN_PAIRS} seeds"));
    } else {
        let tests = paired_tests(&base_aucs, &seen_aucs)?;
        p_t = Some(tests.t_test.p_value);
        match tests.wilcoxon {
            Some(w) => p_w = Some(w.p_value),
            None => note = Some("all paired differences are zero; Wilcoxon undefined".into()),
        }
    }
    let improvement = best.mean_auc - base.mean_auc;
    Ok(SummaryRow {
        dataset: report.dataset,
        explainer: report.explainer,
        seeds: base.per_seed.iter().map(|p| p.seed).collect(),
        base_auc: base.mean_auc,
        seen_auc: best.mean_auc,
        improvement,
        improvement_pct: 100.0 * improvement / base.mean_auc,
        best_alpha: best.alpha,
        best_beta: best.beta,
        p_t,
        p_wilcoxon: p_w,
        significant_t: p_t.map(|p| p < SIGNIFICANCE_LEVEL),
        significant_wilcoxon: p_w.map(|p| p < SIGNIFICANCE_LEVEL),
        note,
    })
}

fn fmt_p(p: Option<f64>) -> String {
    p.map(|p| format!("{p:.4}")).unwrap_or_else(|| "-".into())
}

pub fn report(s: &Settings) -> Result<(), CliError> {
    let layout = Layout::new(&s.out);
    let mut prov = Provenance::new("report", s);
    let mut rows = Vec::new();
    for &kind in &s.datasets {
        for &ek in &s.explainers {
            let path = with_suffix(&layout.scan_stem(kind, ek), ".json");
            let bytes = read_artifact(&path, "run `seen-bench scan` first")?;
            let report: ScanReport = parse_json(&path, &bytes)?;
            prov = prov.with_input(&path, &bytes);
            rows.push(summary_row(&report)?);
        }
    }
    let path = layout.summary();
    write_json_with_provenance(
        &path,
        &Summary {
            significance_level: SIGNIFICANCE_LEVEL,
            rows: rows.clone(),
        },
        &prov,
    )?;
    let mut table = String::new();
    writeln!(
        table,
        "{:<13} {:<10} {:>7} {:>7} {:>8} {:>11} {:>8} {:>8}",
        "dataset", "explainer", "base", "seen", "change", "(alpha,beta)", "p_t", "p_wilc"
    )
    .unwrap();
    for r in &rows {
        writeln!(
            table,
            "{:<13} {:<10} {:>7.4} {:>7.4} {:>+7.2}% {:>11} {:>8} {:>8}",
            r.dataset.to_string(),
            r.explainer.to_string(),
            r.base_auc,
            r.seen_auc,
            r.improvement_pct,
            format!("({},{})", r.best_alpha, r.best_beta),
            fmt_p(r.p_t),
            fmt_p(r.p_wilcoxon)
        )
        .unwrap();
    }
    print!("{table}");
    println!("-> {}", path.display());
    Ok(())
}

pub fn reproduce(s: &Settings) -> Result<(), CliError> {
    generate(s)?;
    train(s)?;
    scan(s)?;
    report(s)
}
