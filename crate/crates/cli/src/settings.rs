//! Run configuration: an optional TOML file, overridden field by field by
//! command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use seen_core::eval::{AucMode, CandidateMode, ClassMode, EvalOptions, GridSpec, PositiveMode};
use seen_core::explain::ExplainerKind;
use seen_core::synth::DatasetKind;

use crate::CliError;

/// Environment variable naming the output root when neither a flag nor the
/// config file sets one.
pub const OUT_ENV: &str = "SEEN_BENCH_OUT";
pub const DEFAULT_OUT: &str = "seen-out";

/// Seeds as written by users: `"0..9"` (inclusive), `"0,3,5"`, or a TOML array.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    List(Vec<u64>),
    Text(String),
}

impl SeedSpec {
    pub fn resolve(&self) -> Result<Vec<u64>, CliError> {
        match self {
            SeedSpec::List(v) => non_empty(v.clone()),
            SeedSpec::Text(s) => parse_seeds(s),
        }
    }
}

fn non_empty(v: Vec<u64>) -> Result<Vec<u64>, CliError> {
    if v.is_empty() {
        return Err(CliError::Config("seed list is empty".into()));
    }
    Ok(v)
}

/// Parses `"a..b"` (inclusive) or a comma-separated list.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::Config(format!("cannot parse seeds '{s}' (use e.g. 0..9 or 0,1,2)"));
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if b < a {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    let seeds = s
        .split(',')
        .map(|p| p.trim().parse::<u64>().map_err(|_| bad()))
        .collect::<Result<Vec<_>, _>>()?;
    non_empty(seeds)
}

/// `"all"` or a comma-separated list of names.
pub fn parse_list<T>(s: &str, all: &[T]) -> Result<Vec<T>, CliError>
where
    T: std::str::FromStr + Clone,
    T::Err: std::fmt::Display,
{
    if s.trim() == "all" {
        return Ok(all.to_vec());
    }
    s.split(',')
        .map(|p| p.trim().parse::<T>().map_err(|e| CliError::Config(e.to_string())))
        .collect()
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("cannot parse number '{p}'")))
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub weight_decay: Option<f64>,
    pub decay_biases: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub alphas: Option<Vec<f64>>,
    pub betas: Option<Vec<f64>>,
    pub include_beta_one: Option<bool>,
    pub k_hops: Option<usize>,
    pub skip_zero_score: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub candidates: Option<CandidateMode>,
    pub positives: Option<PositiveMode>,
    pub class_mode: Option<ClassMode>,
    pub auc_mode: Option<AucMode>,
}

/// Contents of a `--config` file. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub out: Option<PathBuf>,
    pub data_seed: Option<u64>,
    pub seeds: Option<SeedSpec>,
    pub datasets: Option<Vec<DatasetKind>>,
    pub explainers: Option<Vec<ExplainerKind>>,
    pub cache_capacity: Option<usize>,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub eval: EvalSection,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Flag values; `None` means "not given on the command line".
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub data_seed: Option<u64>,
    pub seeds: Option<String>,
    pub datasets: Option<String>,
    pub explainers: Option<String>,
    pub cache_capacity: Option<usize>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub weight_decay: Option<f64>,
    pub decay_biases: bool,
    pub alphas: Option<String>,
    pub betas: Option<String>,
    pub include_beta_one: bool,
    pub k_hops: Option<usize>,
    pub skip_zero_score: bool,
    pub candidates: Option<CandidateMode>,
    pub positives: Option<PositiveMode>,
    pub class_mode: Option<ClassMode>,
    pub auc_mode: Option<AucMode>,
}

/// Training overrides applied on top of the per-dataset defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TrainOverrides {
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub weight_decay: Option<f64>,
    pub decay_biases: bool,
}

/// Fully resolved settings, recorded in every artifact's provenance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub out: PathBuf,
    pub data_seed: u64,
    pub seeds: Vec<u64>,
    pub datasets: Vec<DatasetKind>,
    pub explainers: Vec<ExplainerKind>,
    pub cache_capacity: usize,
    pub train: TrainOverrides,
    pub grid: GridSpec,
    pub eval: EvalOptions,
}

impl Settings {
    /// Precedence: flag, then config file, then `SEEN_BENCH_OUT` (output root
    /// only), then built-in defaults.
    pub fn resolve(file: FileConfig, flags: Overrides) -> Result<Self, CliError> {
        let out = flags
            .out
            .or(file.out)
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
        let seeds = match (flags.seeds, file.seeds) {
            (Some(s), _) => parse_seeds(&s)?,
            (None, Some(spec)) => spec.resolve()?,
            (None, None) => vec![0, 1, 2],
        };
        let datasets = match (flags.datasets, file.datasets) {
            (Some(s), _) => parse_list(&s, &DatasetKind::ALL)?,
            (None, Some(v)) => v,
            (None, None) => DatasetKind::ALL.to_vec(),
        };
        let explainers = match (flags.explainers, file.explainers) {
            (Some(s), _) => parse_list(&s, &ExplainerKind::ALL)?,
            (None, Some(v)) => v,
            (None, None) => ExplainerKind::ALL.to_vec(),
        };
        if datasets.is_empty() || explainers.is_empty() {
            return Err(CliError::Config("dataset and explainer lists must not be empty".into()));
        }

        let default_grid = GridSpec::default();
        let grid = GridSpec {
            alphas: match flags.alphas {
                Some(s) => parse_f64_list(&s)?,
                None => file.grid.alphas.unwrap_or(default_grid.alphas),
            },
            betas: match flags.betas {
                Some(s) => parse_f64_list(&s)?,
                None => file.grid.betas.unwrap_or(default_grid.betas),
            },
            include_beta_one: flags.include_beta_one || file.grid.include_beta_one.unwrap_or(false),
            k_hops: flags.k_hops.or(file.grid.k_hops).unwrap_or(default_grid.k_hops),
            skip_zero_score: flags.skip_zero_score || file.grid.skip_zero_score.unwrap_or(false),
        };
        grid.validate().map_err(CliError::from)?;

        let d = EvalOptions::default();
        let eval = EvalOptions {
            candidates: flags.candidates.or(file.eval.candidates).unwrap_or(d.candidates),
            positives: flags.positives.or(file.eval.positives).unwrap_or(d.positives),
            class_mode: flags.class_mode.or(file.eval.class_mode).unwrap_or(d.class_mode),
            auc_mode: flags.auc_mode.or(file.eval.auc_mode).unwrap_or(d.auc_mode),
            k_hops: d.k_hops,
        };

        Ok(Settings {
            out,
            data_seed: flags.data_seed.or(file.data_seed).unwrap_or(0),
            seeds,
            datasets,
            explainers,
            cache_capacity: flags.cache_capacity.or(file.cache_capacity).unwrap_or(8192),
            train: TrainOverrides {
                epochs: flags.epochs.or(file.train.epochs),
                lr: flags.lr.or(file.train.lr),
                weight_decay: flags.weight_decay.or(file.train.weight_decay),
                decay_biases: flags.decay_biases || file.train.decay_biases.unwrap_or(false),
            },
            grid,
            eval,
        })
    }
}
