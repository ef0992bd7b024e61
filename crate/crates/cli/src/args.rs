use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nadp::mechanisms::{DEFAULT_ALPHA1, DEFAULT_ALPHA2, DEFAULT_ETA0, DEFAULT_LAMBDA, DEFAULT_M_DENSITY};
use nadp::neighbours::{DEFAULT_M, DEFAULT_TAU};
use nadp::privacy::DEFAULT_PRIVACY_M;
use nadp::MechanismKind;
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "nadp", version, about = "Neighbourhood-aware differential privacy for word embeddings")]
pub struct Cli {
    /// Re-run the command recorded in a manifest.json.
    #[arg(long, global = true, value_name = "MANIFEST")]
    pub config: Option<PathBuf>,

    /// Directory for all artifacts [default: nadp-out, or the manifest's].
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Build the nearest-neighbour graph.
    Graph(GraphArgs),
    /// Split the graph into components and compute their sensitivities.
    Components(GraphArgs),
    /// Solve for u* and report per-component noise scales.
    Calibrate(CalibrateArgs),
    /// Perturb embeddings with one mechanism.
    Perturb(PerturbArgs),
    /// Neighbour-overlap privacy of a perturbed embedding file.
    EvalPrivacy(EvalPrivacyArgs),
    /// Downstream utility, optionally swept over mechanisms, epsilons and seeds.
    EvalUtility(EvalUtilityArgs),
    /// Clean vs perturbed nearest neighbours for a list of words.
    Neighbours(NeighboursArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Graph(_) => "graph",
            Command::Components(_) => "components",
            Command::Calibrate(_) => "calibrate",
            Command::Perturb(_) => "perturb",
            Command::EvalPrivacy(_) => "eval-privacy",
            Command::EvalUtility(_) => "eval-utility",
            Command::Neighbours(_) => "neighbours",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct InputArgs {
    /// GloVe-style text file: `token v1 v2 ... vd` per line.
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Keep only the first N rows (after the vocabulary filter).
    #[arg(long)]
    pub limit: Option<usize>,
    /// Restrict to the tokens listed in this file, one per line.
    #[arg(long)]
    pub vocab_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Args, Serialize, Deserialize)]
pub struct NeighbourhoodArgs {
    /// Neighbourhood size for the graph.
    #[arg(long, default_value_t = DEFAULT_M)]
    pub m: usize,
    /// Jaccard threshold for an edge.
    #[arg(long, default_value_t = DEFAULT_TAU)]
    pub tau: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GraphArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub graph: NeighbourhoodArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub graph: NeighbourhoodArgs,
    #[arg(long)]
    pub epsilon: f64,
    /// Defaults to 1/n for the loaded vocabulary.
    #[arg(long)]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Copy, Args, Serialize, Deserialize)]
pub struct KnobArgs {
    /// Mahalanobis regulariser in [0, 1].
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    pub lambda: f64,
    /// Density threshold of the Jaccard mechanism.
    #[arg(long, default_value_t = DEFAULT_ETA0)]
    pub eta0: f64,
    /// Dense-category constant of the Jaccard mechanism.
    #[arg(long, default_value_t = DEFAULT_ALPHA1)]
    pub alpha1: f64,
    /// Sparse-category constant of the Jaccard mechanism.
    #[arg(long, default_value_t = DEFAULT_ALPHA2)]
    pub alpha2: f64,
    /// Neighbours used for the density of the Jaccard mechanism.
    #[arg(long, default_value_t = DEFAULT_M_DENSITY)]
    pub m_density: usize,
    /// Allow the classic Gaussian calibration at epsilon >= 1 (no DP guarantee).
    #[arg(long)]
    pub extrapolate_classic: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PerturbArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub graph: NeighbourhoodArgs,
    #[arg(long, value_parser = parse_mechanism)]
    pub mechanism: MechanismKind,
    #[arg(long)]
    pub epsilon: f64,
    /// Defaults to 1/n for the loaded vocabulary.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Drawn at random and recorded in the manifest when absent.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub knobs: KnobArgs,
    /// Perturbed embeddings [default: <out-dir>/perturbed.txt].
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// JSON report [default: <out-dir>/perturbation.json].
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Decimal places in the output; 17 or more writes shortest round-trip values.
    #[arg(long, default_value_t = 17)]
    pub precision: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvalPrivacyArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Perturbed embeddings with the same vocabulary.
    #[arg(long)]
    pub perturbed: PathBuf,
    /// Neighbourhood size for the overlap.
    #[arg(long, default_value_t = DEFAULT_PRIVACY_M)]
    pub m: usize,
    /// Let a word count as a neighbour of its own perturbed vector.
    #[arg(long)]
    pub include_self: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskSelector {
    All,
    WordSimilarity,
    Sts,
    OddManOut,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvalUtilityArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub graph: NeighbourhoodArgs,
    /// Word-pair similarity files (`w1<TAB>w2<TAB>rating`).
    #[arg(long = "word-sim")]
    pub word_sim: Vec<PathBuf>,
    /// Sentence-pair files (`s1<TAB>s2<TAB>rating`).
    #[arg(long)]
    pub sts: Vec<PathBuf>,
    /// Odd-man-out files (`w1 w2 ... wk<TAB>gold`).
    #[arg(long)]
    pub odd_man: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = TaskSelector::All)]
    pub task: TaskSelector,
    /// Comma-separated mechanisms; empty evaluates the clean embeddings only.
    #[arg(long, value_delimiter = ',', value_parser = parse_mechanism)]
    pub mechanisms: Vec<MechanismKind>,
    /// Comma-separated epsilon grid.
    #[arg(long, value_delimiter = ',')]
    pub epsilons: Vec<f64>,
    /// Defaults to 1/n for the loaded vocabulary.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Comma-separated seeds; one per repeat.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    /// Number of repeats when --seeds is absent; seeds are drawn and recorded.
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    #[command(flatten)]
    pub knobs: KnobArgs,
    /// Keep the case of dataset tokens instead of lowercasing them.
    #[arg(long)]
    pub keep_case: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct NeighboursArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub perturbed: PathBuf,
    /// Comma-separated query words.
    #[arg(long, value_delimiter = ',', required_unless_present = "words_file")]
    pub words: Vec<String>,
    /// Query words, one per line.
    #[arg(long)]
    pub words_file: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
}

fn parse_mechanism(s: &str) -> Result<MechanismKind, String> {
    s.parse().map_err(|e: nadp::Error| e.to_string())
}
