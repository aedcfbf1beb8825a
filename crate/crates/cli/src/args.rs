//! Command-line flags. Every value flag is optional so that a `--config`
//! file can supply it; precedence is flag, then config file, then default.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "nthought",
    about = "Train, encode with, evaluate and explore skip-thought neighbor sentence encoders",
    disable_version_flag = true
)]
pub struct Cli {
    /// Print name and version as JSON and exit.
    #[arg(long, global = false)]
    pub version: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model on a corpus and write a checkpoint.
    Train(TrainArgs),
    /// Write sentence vectors for every line of a file.
    Encode(EncodeArgs),
    /// Run a downstream evaluation task and report its metrics.
    Eval(EvalArgs),
    /// Nearest database sentences for every query by cosine similarity.
    Retrieve(RetrieveArgs),
    /// Greedily decode the representation of every input sentence.
    Generate(GenerateArgs),
    /// Map an outer word-vector space into a model's embedding space.
    ExpandVocab(ExpandArgs),
    /// Print a checkpoint's configuration and parameter counts.
    InspectCkpt(InspectArgs),
    /// Re-run a recorded run and compare output hashes.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON object of settings; explicit flags take precedence.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Print the effective settings as JSON and exit without running.
    #[arg(long)]
    pub dump_config: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    /// Corpus: one sentence per line, blank lines between documents.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Checkpoint path; the vocabulary goes to `<out>.vocab`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// neighbor, neighbor-ae, one-target, skip-thought, skip-thought-ae or k-neighbor:K.
    #[arg(long)]
    pub variant: Option<String>,
    /// uni or bi.
    #[arg(long)]
    pub encoder: Option<String>,
    #[arg(long)]
    pub d_emb: Option<usize>,
    #[arg(long)]
    pub d_z: Option<usize>,
    /// Fixed sentence length including EOS.
    #[arg(long)]
    pub len: Option<usize>,
    #[arg(long)]
    pub vocab_size: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta1: Option<f64>,
    #[arg(long)]
    pub beta2: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// Element-wise gradient bound.
    #[arg(long)]
    pub clip: Option<f64>,
    /// Reshuffle examples every epoch.
    #[arg(long)]
    pub shuffle: bool,
    #[arg(long)]
    pub log_every: Option<u64>,
    /// Loss log CSV path, or `-` for standard output.
    #[arg(long)]
    pub loss_log: Option<String>,
    #[arg(long)]
    pub checkpoint_every: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
pub struct ModelArgs {
    #[arg(long)]
    pub ckpt: Option<PathBuf>,
    /// Second checkpoint for the combine encoder (one uni and one bi).
    #[arg(long)]
    pub ckpt2: Option<PathBuf>,
    /// Word-vector table to use instead of the embedding of --ckpt.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Word-vector table to use instead of the embedding of --ckpt2.
    #[arg(long)]
    pub lexicon2: Option<PathBuf>,
    /// joint or per-model.
    #[arg(long)]
    pub combine_norm: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct EncodeArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub models: ModelArgs,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// l2-normalize every vector.
    #[arg(long)]
    pub normalize: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    /// sick, msrp, mr, cr, subj, mpqa or trec.
    #[arg(long)]
    pub task: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub models: ModelArgs,
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// l2-normalize sentence vectors before building features.
    #[arg(long)]
    pub normalize: bool,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Report path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct RetrieveArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub models: ModelArgs,
    #[arg(long)]
    pub db: Option<PathBuf>,
    #[arg(long)]
    pub query: Option<PathBuf>,
    #[arg(short, long)]
    pub k: Option<usize>,
    /// Skip database sentences identical to the query.
    #[arg(long)]
    pub exclude_self: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    #[arg(long)]
    pub ckpt: Option<PathBuf>,
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ExpandArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    #[arg(long)]
    pub ckpt: Option<PathBuf>,
    /// Text word vectors, one `token v1 ... vd` line each.
    #[arg(long)]
    pub outer: Option<PathBuf>,
    /// Expanded lexicon in the same text format.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub ridge: Option<f64>,
    #[arg(long)]
    pub ols: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct InspectArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    #[arg(long)]
    pub ckpt: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory for the replayed outputs; a fresh temporary one by default.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}
