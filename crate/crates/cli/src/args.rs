use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use repoctx::dataset_io::ContextKind;
use repoctx::hole_gen::{DEFAULT_HOLE_CAP, DEFAULT_MIN_FILES};
use repoctx::packing::{Strategy, DEFAULT_CONTEXT_LEN, DEFAULT_N_CONTEXTS};

#[derive(Debug, Parser)]
#[command(
    name = "repoctx",
    version,
    about = "Repository-context code-completion datasets, packing and evaluation"
)]
pub struct Cli {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// File of `key=value` lines applied as flags of the subcommand.
    /// Flags given on the command line take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Index repositories and report files, lines and skipped files.
    #[command(args_override_self = true)]
    Scan(ScanArgs),
    /// Generate target holes as NDJSON.
    #[command(args_override_self = true)]
    Holes(HolesArgs),
    /// Build a Stack-Repo tree (sources plus one NDJSON file per context kind).
    #[command(args_override_self = true)]
    BuildDataset(BuildArgs),
    /// Pack repo contexts for every hole and write the packed examples.
    #[command(args_override_self = true)]
    Pack(PackArgs),
    /// Score a completion provider on a dataset split.
    #[command(args_override_self = true)]
    Eval(EvalArgs),
    /// Train the toy fusion-in-decoder model on a dataset split.
    #[command(args_override_self = true)]
    TrainToy(TrainArgs),
    /// Repository, file and hole counts per split.
    #[command(args_override_self = true)]
    Stats(StatsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Pp,
    Bm25,
    RandomNn,
}

impl From<KindArg> for ContextKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Pp => ContextKind::Pp,
            KindArg::Bm25 => ContextKind::Bm25,
            KindArg::RandomNn => ContextKind::RandomNn,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    TRank,
    TRand,
    NtRank,
    NtPriorLast,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::TRank => Strategy::TRank,
            StrategyArg::TRand => Strategy::TRand,
            StrategyArg::NtRank => Strategy::NtRank,
            StrategyArg::NtPriorLast => Strategy::NtPriorLast,
        }
    }
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// A repository, or with `--corpus` a directory of repositories.
    pub root: PathBuf,

    /// Treat each subdirectory of ROOT as a repository.
    #[arg(long)]
    pub corpus: bool,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Write here instead of standard output.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Emit one JSON object per repository.
    #[arg(long)]
    pub json: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct HolesArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Maximum holes per repository.
    #[arg(long, default_value_t = DEFAULT_HOLE_CAP)]
    pub cap: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct PackingArgs {
    #[arg(long, value_enum, default_value_t = StrategyArg::NtPriorLast)]
    pub strategy: StrategyArg,
    /// Number of repo contexts N.
    #[arg(long = "n", default_value_t = DEFAULT_N_CONTEXTS)]
    pub n_contexts: usize,
    /// Tokens per repo context l.
    #[arg(long = "l", default_value_t = DEFAULT_CONTEXT_LEN)]
    pub context_len: usize,
    /// Leave the `hole_context:` segment out of every repo context.
    #[arg(long)]
    pub no_surrounding: bool,
    /// Fill all N slots from this one context (e.g. `current/post_lines`).
    #[arg(long, value_name = "NAME")]
    pub repeat_single: Option<String>,
    /// Prompt proposal ranking, one name per line; defaults to the built-in order.
    #[arg(long, value_name = "FILE")]
    pub ranking: Option<PathBuf>,
    /// Files kept per hole for BM25 contexts (default: N).
    #[arg(long)]
    pub bm25_top_k: Option<usize>,
    /// Candidate chunks sampled per hole for RandomNN contexts.
    #[arg(long, default_value_t = 512)]
    pub random_nn_candidates: usize,
    /// Lines per RandomNN chunk.
    #[arg(long, default_value_t = 10)]
    pub random_nn_chunk_lines: usize,
    /// Maximum holes per repository.
    #[arg(long, default_value_t = DEFAULT_HOLE_CAP)]
    pub hole_cap: usize,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Directory whose subdirectories are repositories.
    pub corpus: PathBuf,
    /// Output directory; must be empty or absent.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Context kinds to write.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [KindArg::Pp, KindArg::Bm25, KindArg::RandomNn])]
    pub kinds: Vec<KindArg>,
    /// `repo=split` lines; without it repositories are split 2:1:1 at random.
    #[arg(long, value_name = "FILE")]
    pub splits: Option<PathBuf>,
    /// Repositories with fewer files are left out of automatic splits.
    #[arg(long, default_value_t = DEFAULT_MIN_FILES)]
    pub min_files: usize,
    /// Delete a non-empty output directory first.
    #[arg(long)]
    pub force: bool,
    #[command(flatten)]
    pub packing: PackingArgs,
}

#[derive(Debug, Args)]
pub struct PackArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value_t = KindArg::Pp)]
    pub kind: KindArg,
    #[command(flatten)]
    pub packing: PackingArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Split directory of a Stack-Repo tree (e.g. `data/test`).
    pub split_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = KindArg::Pp)]
    pub kind: KindArg,
    /// `oracle-copy`, `post-first-line`, `replay:<predictions.ndjson>` or `fid:<model dir>`.
    #[arg(long)]
    pub provider: String,
    /// Compare bytes exactly instead of ignoring trailing whitespace.
    #[arg(long)]
    pub strict_bytes: bool,
    /// Per-example outcomes as NDJSON.
    #[arg(long, value_name = "FILE")]
    pub outcomes: Option<PathBuf>,
    /// Summary as JSON.
    #[arg(long, value_name = "FILE")]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Split directory of a Stack-Repo tree.
    pub split_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = KindArg::Pp)]
    pub kind: KindArg,
    /// Output directory for parameters, vocabulary and loss curve.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Examples drawn from the split (seeded); 0 takes all.
    #[arg(long, default_value_t = 50)]
    pub examples: usize,
    #[arg(long, default_value_t = 2000)]
    pub steps: usize,
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 64)]
    pub d_model: usize,
    #[arg(long, default_value_t = 2)]
    pub heads: usize,
    #[arg(long, default_value_t = 256)]
    pub d_ff: usize,
    #[arg(long, default_value_t = 1)]
    pub enc_layers: usize,
    #[arg(long, default_value_t = 1)]
    pub dec_layers: usize,
    /// Model tokens kept from the end of each repo context.
    #[arg(long, default_value_t = 32)]
    pub max_rc_tokens: usize,
    /// Turn off the learned bias over concatenated encoder positions.
    #[arg(long)]
    pub no_cross_bias: bool,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Root of a Stack-Repo tree with train/val/test directories.
    pub root: PathBuf,
    #[arg(long)]
    pub json: bool,
}
