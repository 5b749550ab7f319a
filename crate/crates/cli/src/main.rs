//! `seen-bench`: dataset generation, model training, explanation sharpening,
//! grid scans and significance reports.

mod artifacts;
mod commands;
mod settings;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use seen_core::eval::{AucMode, CandidateMode, ClassMode, PositiveMode};
use settings::{FileConfig, Overrides, Settings};

/// Failure classes, each with its own exit status.
#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration or arguments (exit 2).
    Config(String),
    /// A required input artifact does not exist (exit 3).
    Missing(PathBuf, String),
    /// Training diverged or an evaluation had nothing to measure (exit 4).
    Numerical(String),
    /// Anything else, mostly I/O (exit 1).
    Io(String),
}

impl CliError {
    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Missing(..) => 3,
            CliError::Numerical(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Missing(p, hint) => write!(f, "missing artifact {}: {hint}", p.display()),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "{m}"),
        }
    }
}

impl From<seen_core::Error> for CliError {
    fn from(e: seen_core::Error) -> Self {
        use seen_core::Error as E;
        match e {
            E::Diverged { .. } | E::NoValidTargets | E::AllDifferencesZero | E::UndefinedAuc { .. } => {
                CliError::Numerical(e.to_string())
            }
            other => CliError::Config(other.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "seen-bench", version, about = "Explanation sharpening benchmark harness")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output root (default: $SEEN_BENCH_OUT, then ./seen-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Selection {
    /// Dataset name, comma-separated list, or "all".
    #[arg(long)]
    dataset: Option<String>,
    /// Explainer (sa, gradinput, gradcam), comma-separated list, or "all".
    #[arg(long)]
    explainer: Option<String>,
    /// Seed of the generated dataset.
    #[arg(long)]
    data_seed: Option<u64>,
    /// Model seeds: inclusive range "0..9" or list "0,1,2".
    #[arg(long)]
    seeds: Option<String>,
}

#[derive(Args, Debug, Default)]
struct TrainArgs {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    /// Apply weight decay to biases too.
    #[arg(long)]
    decay_biases: bool,
}

#[derive(Args, Debug, Default)]
struct GridArgs {
    /// Comma-separated alpha values.
    #[arg(long)]
    alphas: Option<String>,
    /// Comma-separated beta values, each in [0, 1).
    #[arg(long)]
    betas: Option<String>,
    /// Add uniform-weight (beta = 1) cells, reported separately.
    #[arg(long)]
    include_beta_one: bool,
    #[arg(long)]
    k_hops: Option<usize>,
    /// Ignore assistants that score exactly zero in the target explanation.
    #[arg(long)]
    skip_zero_score: bool,
}

#[derive(Args, Debug, Default)]
struct EvalArgs {
    /// khop (default) or all.
    #[arg(long)]
    candidates: Option<CandidateMode>,
    /// same-motif (default) or any-motif.
    #[arg(long)]
    positives: Option<PositiveMode>,
    /// predicted (default) or true.
    #[arg(long)]
    class_mode: Option<ClassMode>,
    /// per-target (default) or pooled.
    #[arg(long)]
    auc_mode: Option<AucMode>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate benchmark datasets.
    Generate {
        #[arg(long)]
        dataset: Option<String>,
        /// Dataset seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train one model per seed on generated datasets.
    Train {
        #[command(flatten)]
        sel: Selection,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Explain one node with a trained model.
    Explain {
        #[command(flatten)]
        sel: Selection,
        #[command(flatten)]
        target: TargetArgs,
    },
    /// Sharpen the explanation of one node.
    Seen {
        #[command(flatten)]
        sel: Selection,
        #[command(flatten)]
        target: TargetArgs,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 0.5)]
        beta: f64,
        /// Permit beta = 1 (uniform weights).
        #[arg(long)]
        allow_beta_one: bool,
        #[arg(long)]
        k_hops: Option<usize>,
        #[arg(long)]
        skip_zero_score: bool,
    },
    /// Evaluate the (alpha, beta) grid over all seeds.
    Scan {
        #[command(flatten)]
        sel: Selection,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        eval: EvalArgs,
        /// Explanations kept in memory per model.
        #[arg(long)]
        cache_capacity: Option<usize>,
    },
    /// Summarize scans with paired significance tests.
    Report {
        #[command(flatten)]
        sel: Selection,
    },
    /// Run generate, train, scan and report end to end.
    Reproduce {
        #[command(flatten)]
        sel: Selection,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        eval: EvalArgs,
        #[arg(long)]
        cache_capacity: Option<usize>,
    },
}

#[derive(Args, Debug)]
struct TargetArgs {
    /// Model seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Node to explain.
    #[arg(long)]
    node: usize,
    /// Class whose logit is explained (default: per --class-mode).
    #[arg(long)]
    class: Option<usize>,
    /// predicted (default) or true.
    #[arg(long)]
    class_mode: Option<ClassMode>,
}

fn overrides(out: Option<PathBuf>, sel: &Selection) -> Overrides {
    Overrides {
        out,
        data_seed: sel.data_seed,
        seeds: sel.seeds.clone(),
        datasets: sel.dataset.clone(),
        explainers: sel.explainer.clone(),
        ..Overrides::default()
    }
}

fn apply_train(o: &mut Overrides, t: &TrainArgs) {
    o.epochs = t.epochs;
    o.lr = t.lr;
    o.weight_decay = t.weight_decay;
    o.decay_biases = t.decay_biases;
}

fn apply_grid(o: &mut Overrides, g: &GridArgs) {
    o.alphas = g.alphas.clone();
    o.betas = g.betas.clone();
    o.include_beta_one = g.include_beta_one;
    o.k_hops = g.k_hops;
    o.skip_zero_score = g.skip_zero_score;
}

fn apply_eval(o: &mut Overrides, e: &EvalArgs) {
    o.candidates = e.candidates;
    o.positives = e.positives;
    o.class_mode = e.class_mode;
    o.auc_mode = e.auc_mode;
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    match &cli.command {
        Command::Generate { dataset, seed } => {
            let o = Overrides {
                out: cli.out.clone(),
                data_seed: *seed,
                datasets: dataset.clone(),
                ..Overrides::default()
            };
            commands::generate(&Settings::resolve(file, o)?)
        }
        Command::Train { sel, train } => {
            let mut o = overrides(cli.out.clone(), sel);
            apply_train(&mut o, train);
            commands::train(&Settings::resolve(file, o)?)
        }
        Command::Explain { sel, target } => {
            let mut o = overrides(cli.out.clone(), sel);
            o.class_mode = target.class_mode;
            let s = Settings::resolve(file, o)?;
            commands::explain(&s, &commands::Target::from_args(target))
        }
        Command::Seen {
            sel,
            target,
            alpha,
            beta,
            allow_beta_one,
            k_hops,
            skip_zero_score,
        } => {
            let mut o = overrides(cli.out.clone(), sel);
            o.class_mode = target.class_mode;
            o.k_hops = *k_hops;
            o.skip_zero_score = *skip_zero_score;
            let s = Settings::resolve(file, o)?;
            let cfg = seen_core::seen::SeenConfig {
                alpha: *alpha,
                beta: *beta,
                k_hops: s.grid.k_hops,
                allow_beta_one: *allow_beta_one,
                skip_zero_score: s.grid.skip_zero_score,
            };
            commands::seen(&s, &commands::Target::from_args(target), &cfg)
        }
        Command::Scan {
            sel,
            grid,
            eval,
            cache_capacity,
        } => {
            let mut o = overrides(cli.out.clone(), sel);
            apply_grid(&mut o, grid);
            apply_eval(&mut o, eval);
            o.cache_capacity = *cache_capacity;
            commands::scan(&Settings::resolve(file, o)?)
        }
        Command::Report { sel } => {
            let o = overrides(cli.out.clone(), sel);
            commands::report(&Settings::resolve(file, o)?)
        }
        Command::Reproduce {
            sel,
            train,
            grid,
            eval,
            cache_capacity,
        } => {
            let mut o = overrides(cli.out.clone(), sel);
            apply_train(&mut o, train);
            apply_grid(&mut o, grid);
            apply_eval(&mut o, eval);
            o.cache_capacity = *cache_capacity;
            commands::reproduce(&Settings::resolve(file, o)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("seen-bench: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
