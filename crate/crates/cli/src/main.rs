mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "semcom",
    version,
    about = "Task-adaptive visual semantic communication toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build relation statistics from an annotation corpus.
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Filter the scene graph of one annotation.
    Filter {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        stats: PathBuf,
        #[command(flatten)]
        embed: EmbedArgs,
        #[command(flatten)]
        thresholds: Thresholds,
        /// Filter report (JSON).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Filtered annotation document.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Look up the semantics for a task and optionally encode them for a scene.
    Select {
        #[arg(long)]
        task: String,
        #[arg(long)]
        fidelity: String,
        /// Policy override file (`task,fidelity=kind+kind` lines).
        #[arg(long)]
        policy: Option<PathBuf>,
        #[command(flatten)]
        source: SceneSource,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Encode semantic kinds of a scene into a payload container.
    Encode {
        #[arg(long, value_delimiter = ',', required = true)]
        kinds: Vec<String>,
        #[command(flatten)]
        source: SceneSource,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Estimate block error rates over SNR and code rate.
    Simulate {
        /// Kinds whose code block size to simulate (text kinds use K=1056, others K=8448).
        #[arg(long, value_delimiter = ',', default_value = "objects")]
        kinds: Vec<String>,
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        snrs: Vec<f64>,
        #[arg(long, default_value = "auto")]
        rate: String,
        #[arg(long, default_value_t = 1000)]
        blocks: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Throughput per kind and SNR over a corpus (CSV).
    Sweep {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        kinds: Vec<String>,
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        snrs: Vec<f64>,
        /// Relation statistics; built from the corpus when absent.
        #[arg(long)]
        stats: Option<PathBuf>,
        #[command(flatten)]
        embed: EmbedArgs,
        #[command(flatten)]
        thresholds: Thresholds,
        #[command(flatten)]
        link: LinkArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tasks per second from a latency profile.
    Latency {
        #[arg(long)]
        profile: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Sequential)]
        mode: ModeArg,
        /// Payload kinds used to compute a missing `tau_tx`.
        #[arg(long, value_delimiter = ',')]
        kinds: Vec<String>,
        /// Single SNR used to compute a missing `tau_tx`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        snrs: Vec<f64>,
        #[command(flatten)]
        source: SceneSource,
        #[command(flatten)]
        link: LinkArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone)]
pub struct EmbedArgs {
    #[arg(long, value_enum, default_value_t = EmbedderArg::Hash)]
    pub embedder: EmbedderArg,
    #[arg(long)]
    pub embeddings_file: Option<PathBuf>,
    #[arg(long, env = "SEMCOM_EMBED_URL")]
    pub endpoint: Option<String>,
    #[arg(long, default_value_t = 384)]
    pub dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone)]
pub struct Thresholds {
    #[arg(long, default_value_t = 0.8)]
    pub tau_f: f64,
    #[arg(long, default_value_t = 0.8)]
    pub tau_r: f64,
}

/// A scene plus what is needed to filter it when a selection asks for it.
#[derive(Args, Debug, Clone)]
pub struct SceneSource {
    #[arg(long)]
    pub scene: Option<PathBuf>,
    #[arg(long)]
    pub stats: Option<PathBuf>,
    #[command(flatten)]
    pub embed: EmbedArgs,
    #[command(flatten)]
    pub thresholds: Thresholds,
}

#[derive(Args, Debug, Clone)]
pub struct LinkArgs {
    /// `auto` or a fixed rate (1/3, 1/2, 2/3, 5/6).
    #[arg(long, default_value = "auto")]
    pub rate: String,
    #[arg(long, default_value_t = 0.01)]
    pub target_bler: f64,
    #[arg(long, default_value_t = 1000)]
    pub blocks: u64,
    /// Ignore block errors in the goodput.
    #[arg(long)]
    pub ideal_link: bool,
    #[arg(long, default_value_t = 2)]
    pub grant_rb: u32,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbedderArg {
    Hash,
    File,
    Remote,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeArg {
    Sequential,
    Pipelined,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.name());
            ExitCode::from(e.exit_code())
        }
    }
}
