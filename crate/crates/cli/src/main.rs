//! `faultlm`: build prompt corpora from bearing vibration recordings, split
//! them, run baselines and score a served model.

mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::PipelineConfig;
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "faultlm", version, about = "Bearing-fault prompt corpora and LLM evaluation")]
struct Cli {
    /// Base directory for every relative path.
    #[arg(long, global = true, default_value = ".")]
    workdir: PathBuf,
    /// TOML pipeline config; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write one synthetic recording as a little-endian float64 stream.
    Synth(SynthArgs),
    /// Load recordings listed in a CSV index into a signal directory.
    Ingest(IngestArgs),
    /// Build the JSONL prompt corpus of one or more subsets.
    Build(BuildArgs),
    /// Split corpora into train and eval id manifests.
    Split(SplitArgs),
    /// Fit and score a nearest-neighbour baseline.
    Baseline(BaselineArgs),
    /// Query an OpenAI-compatible endpoint on an eval set and score it.
    Eval(EvalArgs),
    /// Print report files as tables.
    Report(ReportArgs),
    /// Encode the FFT magnitudes of one segment of a float stream.
    Encode(EncodeArgs),
}

#[derive(Args)]
pub struct SynthArgs {
    /// normal, inner, outer or rolling.
    #[arg(long)]
    pub kind: String,
    /// Defect diameter in inches (0.007) or mils (7); omit for normal.
    #[arg(long)]
    pub size: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub load: u8,
    #[arg(long, default_value = "de")]
    pub position: String,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct IngestArgs {
    /// CSV with columns path,kind,size,load_hp and optional
    /// speed_rpm,channel,sampling_rate_hz.
    #[arg(long)]
    pub index: PathBuf,
    /// Output signal directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct BuildArgs {
    /// Subset ids such as 0HPDE; repeat for several.
    #[arg(long, required = true)]
    pub subset: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub track: Option<String>,
    /// 4 or 10.
    #[arg(long)]
    pub scheme: Option<String>,
    /// Drop the machine-information clause from instructions.
    #[arg(long)]
    pub no_equip_info: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Use synthetic signals even when the config names a data root.
    #[arg(long, conflicts_with = "data_root")]
    pub synthetic: bool,
    /// Ingested signal directory.
    #[arg(long)]
    pub data_root: Option<PathBuf>,
    /// Segment length L.
    #[arg(long)]
    pub l: Option<usize>,
    /// Decimal places D.
    #[arg(long)]
    pub d: Option<u32>,
    /// Segments per annotation group K.
    #[arg(long)]
    pub k: Option<usize>,
    /// Also write the numeric vectors with their labels as CSV.
    #[arg(long)]
    pub vectors_csv: Option<PathBuf>,
}

#[derive(Args)]
pub struct SplitArgs {
    /// Corpus JSONL files; repeat for several.
    #[arg(long, required = true)]
    pub corpus: Vec<PathBuf>,
    /// task1-de, task1-fe, task2 or task3.
    #[arg(long)]
    pub plan: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum BaselineModel {
    Knn,
    Centroid,
}

#[derive(Args)]
pub struct BaselineArgs {
    #[arg(long, value_enum, default_value = "knn")]
    pub model: BaselineModel,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Labelled vector CSV, corpus JSONL or split manifest.
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Decimal places of FFT inputs.
    #[arg(long)]
    pub d: Option<u32>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// Split manifest or corpus JSONL.
    #[arg(long)]
    pub set: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Response cache (JSONL); answered prompts are not re-sent.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Synonym table (TOML) replacing the built-in one.
    #[arg(long)]
    pub synonyms: Option<PathBuf>,
    #[arg(long)]
    pub concurrency: Option<usize>,
}

#[derive(Args)]
pub struct ReportArgs {
    /// Report JSON files written by `eval` or `baseline`.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    /// Print one JSON summary instead of tables.
    #[arg(long)]
    pub json: bool,
}

#[derive(Args)]
pub struct EncodeArgs {
    /// Float stream (text, one number per line, or raw float64); stdin if absent.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 512)]
    pub l: usize,
    #[arg(long, default_value_t = 3)]
    pub d: u32,
    #[arg(long, default_value_t = 0)]
    pub offset: usize,
}

/// Resolved global context of a run.
pub struct Ctx {
    pub workdir: PathBuf,
    pub cfg: PipelineConfig,
}

impl Ctx {
    pub fn path(&self, p: &std::path::Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.workdir.join(p)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config_path = cli.config.as_ref().map(|p| {
        if p.is_absolute() {
            p.clone()
        } else {
            cli.workdir.join(p)
        }
    });
    let cfg = PipelineConfig::load(config_path.as_deref())?;
    let mut ctx = Ctx {
        workdir: cli.workdir,
        cfg,
    };
    match cli.command {
        Command::Synth(a) => commands::synth(&mut ctx, a),
        Command::Ingest(a) => commands::ingest(&mut ctx, a),
        Command::Build(a) => commands::build(&mut ctx, a),
        Command::Split(a) => commands::split(&mut ctx, a),
        Command::Baseline(a) => commands::baseline(&mut ctx, a),
        Command::Eval(a) => commands::eval(&mut ctx, a),
        Command::Report(a) => commands::report(&ctx, a),
        Command::Encode(a) => commands::encode(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("{}", CliError::Usage(first.to_string()).line());
            return ExitCode::FAILURE;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::FAILURE
        }
    }
}
