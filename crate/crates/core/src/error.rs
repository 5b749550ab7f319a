use thiserror::Error;

/// Errors produced across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("node index {index} out of range for graph with {num_nodes} nodes")]
    NodeOutOfRange { index: usize, num_nodes: usize },

    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),

    #[error("self-loop on node {0}")]
    SelfLoop(usize),

    #[error("class index {class} out of range for model with {num_classes} classes")]
    ClassOutOfRange { class: usize, num_classes: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("graph has no node features")]
    MissingFeatures,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("training diverged at epoch {epoch} (loss = {loss})")]
    Diverged { epoch: usize, loss: f64 },

    #[error("AUC undefined: {positives} positives and {negatives} negatives")]
    UndefinedAuc { positives: usize, negatives: usize },

    #[error("need at least {needed} paired samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("Wilcoxon signed-rank test undefined: every paired difference is zero")]
    AllDifferencesZero,

    #[error("no valid evaluation targets")]
    NoValidTargets,
}

pub type Result<T> = std::result::Result<T, Error>;
