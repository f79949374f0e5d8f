use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "provenance",
    about = "Image provenance: index, search, re-rank and localise edits"
)]
pub struct Cli {
    /// Seed for every stochastic step [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (results do not depend on it)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Suppress informational messages on stderr
    #[arg(long, global = true)]
    pub quiet: bool,
    /// TOML file with default values; explicit flags win
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract descriptors (SIPD) or 64-bit perceptual hashes (SIPH) for a manifest
    Describe(DescribeArgs),
    /// Train the coarse and product quantizers and index the descriptors
    TrainIndex(TrainIndexArgs),
    /// Append descriptors to an existing index
    Add(AddArgs),
    /// Top-k search for every query descriptor
    Search(SearchArgs),
    /// Score the retrieved candidates pairwise and pick the match
    Rerank(RerankArgs),
    /// Warp an image by a flow field
    Dewarp(DewarpArgs),
    /// Manipulation heatmap and mask for one pair
    Heatmap(HeatmapArgs),
    /// Evaluation metrics
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Recall/latency sweep on a synthetic corpus
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Gem,
    Phash,
}

#[derive(Debug, Args)]
pub struct DescribeArgs {
    /// Image manifest (id, path, group)
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Gem)]
    pub method: Method,
    /// GeM exponent
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainIndexArgs {
    #[arg(long)]
    pub descriptors: PathBuf,
    /// Manifest giving the id of each descriptor row; row numbers otherwise
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub coarse_k: Option<usize>,
    #[arg(long)]
    pub pq_m: Option<usize>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AddArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub descriptors: PathBuf,
    /// Manifest giving the id of each descriptor row
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// First id when no manifest is given [default: current index size]
    #[arg(long)]
    pub first_id: Option<u64>,
    /// Output index [default: overwrite --index]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub nprobe: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RerankArgs {
    /// Search results (query_row, rank, id, distance)
    #[arg(long)]
    pub results: PathBuf,
    /// Corpus manifest resolving candidate ids to images
    #[arg(long)]
    pub manifest: PathBuf,
    /// Query manifest; row i is query_row i of the results
    #[arg(long)]
    pub query_manifest: PathBuf,
    /// `classical` or `file:<scores.tsv>`
    #[arg(long, default_value = "classical")]
    pub scorer: String,
    /// Candidates re-ranked per query
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub tau_same: Option<f64>,
    /// Write `<query_id>.pgm` heatmaps and `<query_id>_mask.pgm` masks for matched queries
    #[arg(long)]
    pub heatmap_dir: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DewarpArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub flow: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    #[arg(long)]
    pub query: PathBuf,
    #[arg(long)]
    pub candidate: PathBuf,
    #[arg(long)]
    pub flow: Option<PathBuf>,
    #[arg(long)]
    pub theta: Option<f32>,
    /// Upsampled heatmap (PGM)
    #[arg(long)]
    pub out: PathBuf,
    /// Verdict-adjusted binary mask (PGM)
    #[arg(long)]
    pub mask: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Fraction of queries whose original is within the top k
    Ir(EvalIrArgs),
    /// Average precision of scored, labelled pairs
    Ap(EvalApArgs),
    /// Classification-adjusted IoU of one pair against a ground-truth mask
    Iou(EvalIouArgs),
}

#[derive(Debug, Args)]
pub struct EvalIrArgs {
    /// Search results (query_row, rank, id, distance)
    #[arg(
        long,
        conflicts_with = "decisions",
        required_unless_present = "decisions"
    )]
    pub results: Option<PathBuf>,
    /// Re-rank decisions (query_id, match_id, same_score, verdict)
    #[arg(long)]
    pub decisions: Option<PathBuf>,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub query_manifest: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = vec![1usize, 10, 100])]
    pub k: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct EvalApArgs {
    /// TSV of `score  label` rows, label 0 or 1
    #[arg(long)]
    pub scores: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalIouArgs {
    #[arg(long)]
    pub query: PathBuf,
    #[arg(long)]
    pub candidate: PathBuf,
    #[arg(long)]
    pub flow: Option<PathBuf>,
    /// Ground-truth mask (PGM, non-zero = manipulated)
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub theta: Option<f32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Clustered,
    GaussianUnit,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 1_000_000)]
    pub n: usize,
    #[arg(long, default_value_t = 256)]
    pub dim: usize,
    #[arg(long, default_value_t = 1000)]
    pub queries: usize,
    #[arg(long, value_delimiter = ',', default_values_t = vec![1usize, 8, 32, 128, 1024])]
    pub nprobe: Vec<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub coarse_k: Option<usize>,
    #[arg(long)]
    pub pq_m: Option<usize>,
    #[arg(long)]
    pub iters: Option<usize>,
    /// Vectors sampled for coarse training
    #[arg(long, default_value_t = 65_536)]
    pub train_sample: usize,
    #[arg(long, value_enum, default_value_t = Mode::Clustered)]
    pub mode: Mode,
    /// Noise norm around cluster centres
    #[arg(long, default_value_t = provenance_core::eval::DEFAULT_CLUSTER_SPREAD)]
    pub spread: f64,
    /// Also report recall against an exhaustive-ADC oracle
    #[arg(long)]
    pub adc_oracle: bool,
    /// Report path [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
}
