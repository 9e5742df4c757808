use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "chipower",
    version,
    about = "Compositional data analysis with logratio and chiPower transformations",
    after_help = "Set CHIPOWER_THREADS to limit the worker thread count."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Apply a logratio or power transformation.
    Transform(TransformArgs),
    /// PCA of transformed data.
    Pca(PcaArgs),
    /// Correspondence analysis, optionally of powered compositions.
    Ca(CaArgs),
    /// Logratio analysis (unweighted PCA of centred logratios).
    Lra(LraArgs),
    /// Between-sample distance matrix.
    Distances(DistanceArgs),
    /// Compare logratio distances with chiPower distances.
    Compare(CompareArgs),
    /// Procrustes correlation with the logratio geometry across a power grid.
    Isometry(IsometryArgs),
    /// Subcompositional coherence of the chiPower part geometry.
    Coherence(CoherenceArgs),
    /// Zero injection, replacement and zero-strategy reports.
    #[command(subcommand)]
    Zeros(ZerosCommand),
    /// Forward stepwise logistic regression by BIC.
    Fit(FitArgs),
    /// Stratified k-fold cross-validation of the stepwise model.
    Cv(CvArgs),
    /// Choose the power by cross-validated AUC.
    Tune(TuneArgs),
    /// Refit a model on random subcompositions containing its parts.
    Stability(StabilityArgs),
    /// Effect of multiplying one part on a model's prediction.
    Effect(EffectArgs),
    /// Generate seeded synthetic compositional data.
    Synth(SynthArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Zeros(ZerosCommand::Inject(_)) => "zeros-inject",
            Command::Zeros(ZerosCommand::Apply(_)) => "zeros-apply",
            Command::Zeros(ZerosCommand::Report(_)) => "zeros-report",
            Command::Transform(_) => "transform",
            Command::Pca(_) => "pca",
            Command::Ca(_) => "ca",
            Command::Lra(_) => "lra",
            Command::Distances(_) => "distances",
            Command::Compare(_) => "compare",
            Command::Isometry(_) => "isometry",
            Command::Coherence(_) => "coherence",
            Command::Fit(_) => "fit",
            Command::Cv(_) => "cv",
            Command::Tune(_) => "tune",
            Command::Stability(_) => "stability",
            Command::Effect(_) => "effect",
            Command::Synth(_) => "synth",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InputArgs {
    /// Delimited input file (comma or tab) with a header row of part labels.
    pub input: PathBuf,
    /// The first column holds sample labels.
    #[arg(long)]
    pub row_labels: bool,
    /// Zero strategy applied after loading: none, add:<delta> or replace:<delta>.
    #[arg(long, default_value = "none")]
    pub zeros: String,
    /// A non-part column to leave out, such as a response.
    #[arg(long)]
    pub ignore: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OutputArgs {
    /// Directory for the JSON report and delimited artifacts.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformChoice {
    /// All pairwise logratios.
    Lr,
    Alr,
    Clr,
    Chipower,
    /// Power of the closed compositions only.
    Power,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TransformSpec {
    #[arg(long, value_enum, default_value = "chipower")]
    pub kind: TransformChoice,
    /// Power for chipower and power.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// ALR reference part label; chosen automatically when omitted.
    #[arg(long = "ref")]
    pub reference: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TransformArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub transform: TransformSpec,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PcaArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub transform: TransformSpec,
    /// Dimensions of coordinates reported in the JSON.
    #[arg(long, default_value_t = 2)]
    pub dims: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CaArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 2)]
    pub dims: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LraArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 2)]
    pub dims: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceChoice {
    Logratio,
    Chipower,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DistanceArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value = "logratio")]
    pub kind: DistanceChoice,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CompareArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub lambda: f64,
    /// Strictly positive version of the input for the logratio distances.
    #[arg(long, conflicts_with = "logratio_zeros")]
    pub logratio_source: Option<PathBuf>,
    /// Derive the logratio side from the input with this zero strategy.
    #[arg(long)]
    pub logratio_zeros: Option<String>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct IsometryArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Power grid as start:end:step or a comma-separated list.
    #[arg(long, default_value = "0.01:1:0.01")]
    pub grid: String,
    /// Strictly positive version of the input for the logratio geometry.
    #[arg(long, conflicts_with = "logratio_zeros")]
    pub logratio_source: Option<PathBuf>,
    /// Derive the logratio side from the input with this zero strategy.
    #[arg(long)]
    pub logratio_zeros: Option<String>,
    /// Compare only the leading dimensions instead of all of them.
    #[arg(long)]
    pub dims: Option<usize>,
    /// Refine the optimum between its grid neighbours.
    #[arg(long)]
    pub refine: bool,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisChoice {
    /// Fractions of all parts.
    All,
    /// Fractions of the parts not forced into every subset.
    Remaining,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PlanArgs {
    /// Subcomposition sizes as fractions of the parts.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9"
    )]
    pub fractions: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    pub replicates: usize,
    #[arg(long)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineChoice {
    /// Untransformed closed compositions.
    Raw,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CoherenceArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub lambda: f64,
    #[command(flatten)]
    pub plan: PlanArgs,
    /// Part labels included in every subcomposition.
    #[arg(long, value_delimiter = ',')]
    pub must_include: Vec<String>,
    #[arg(long, value_enum, default_value = "all")]
    pub basis: BasisChoice,
    /// Also run the same protocol on a baseline.
    #[arg(long, value_enum)]
    pub baseline: Option<BaselineChoice>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZerosCommand {
    /// Set counts below a detection limit to zero.
    Inject(InjectArgs),
    /// Apply a zero strategy and write the result.
    Apply(ApplyArgs),
    /// Zeros, CA inertia and logratio variance for several zero strategies.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InjectArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Detection limit; values strictly below it become zero.
    #[arg(
        long,
        conflicts_with = "fraction",
        required_unless_present = "fraction"
    )]
    pub limit: Option<f64>,
    /// Choose the limit that zeroes this fraction of the cells.
    #[arg(long)]
    pub fraction: Option<f64>,
    /// Output file for the matrix with zeros.
    #[arg(long)]
    pub output: PathBuf,
    /// Binary response column carried through to the output.
    #[arg(long)]
    pub response: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ApplyArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// none, add:<delta> or replace:<delta>.
    #[arg(long)]
    pub strategy: String,
    #[arg(long)]
    pub output: PathBuf,
    /// Binary response column carried through to the output.
    #[arg(long)]
    pub response: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReportArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "none,replace:0.5,add:0.5,add:1"
    )]
    pub strategies: Vec<String>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ResponseArgs {
    /// Name of the binary response column.
    #[arg(long)]
    pub response: String,
    /// Response value treated as the positive class; by default "1", or
    /// else the lexicographically larger label.
    #[arg(long)]
    pub positive: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub response: ResponseArgs,
    /// Power applied to the closed parts before selection.
    #[arg(long)]
    pub lambda: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CvArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub response: ResponseArgs,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TuneArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub response: ResponseArgs,
    #[arg(long, default_value = "0.01:1:0.01")]
    pub grid: String,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub response: ResponseArgs,
    /// Model JSON written by `fit`.
    #[arg(long)]
    pub model: PathBuf,
    /// Power; defaults to the model's.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[command(flatten)]
    pub plan: PlanArgs,
    #[arg(long, value_enum, default_value = "remaining")]
    pub basis: BasisChoice,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EffectChoice {
    Naive,
    Reclosed,
    Both,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EffectArgs {
    /// Data whose mean composition is the baseline.
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub model: PathBuf,
    /// Label of the part to change.
    #[arg(long)]
    pub part: String,
    #[arg(long)]
    pub multiplier: f64,
    #[arg(long, value_enum, default_value = "both")]
    pub mode: EffectChoice,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 40)]
    pub rows: usize,
    #[arg(long, default_value_t = 15)]
    pub parts: usize,
    #[arg(long, default_value_t = 3)]
    pub factors: usize,
    /// Spread of part abundance levels on the log scale (skew).
    #[arg(long, default_value_t = 1.0)]
    pub spread: f64,
    #[arg(long, default_value_t = 0.6)]
    pub factor_scale: f64,
    #[arg(long, default_value_t = 0.2)]
    pub noise: f64,
    #[arg(long, default_value_t = 10_000.0)]
    pub depth: f64,
    /// Inject zeros at the limit that zeroes this fraction of cells.
    #[arg(long)]
    pub zero_fraction: Option<f64>,
    /// Add a binary response with this log-odds effect of the first latent score.
    #[arg(long)]
    pub response_effect: Option<f64>,
    #[arg(long)]
    pub seed: u64,
    /// Output file for the generated table.
    #[arg(long)]
    pub output: PathBuf,
}
