mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use attnrec::model::ModelKind;
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

/// Soft-attention LSTM action recognition over feature cubes.
#[derive(Parser, Debug)]
#[command(name = "attnrec", version, arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the synthetic moving-signature dataset.
    Synth(SynthArgs),
    /// Train a model on a dataset manifest.
    Train(TrainArgs),
    /// Evaluate a checkpoint on one split of a dataset.
    Eval(EvalArgs),
    /// Compare analytic and finite-difference gradients on a tiny model.
    Gradcheck(GradcheckArgs),
    /// Export per-step attention heat-maps for one clip.
    Viz(VizArgs),
    /// Re-optimize only the location softmax on one clip.
    Reglimpse(ReglimpseArgs),
}

#[derive(Args, Debug, Clone)]
pub struct BlockArgs {
    /// Frames per block.
    #[arg(long, default_value_t = 30)]
    pub block_len: usize,
    /// Offset between consecutive blocks.
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Use every n-th frame inside a block.
    #[arg(long, default_value_t = 1)]
    pub fps_step: usize,
}

#[derive(Args, Debug, Clone)]
pub struct SynthArgs {
    /// Read settings from a key=value file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Grid side K.
    #[arg(long, default_value_t = 7)]
    pub grid: usize,
    #[arg(long, default_value_t = 32)]
    pub feat_dim: usize,
    #[arg(long, default_value_t = 6)]
    pub classes: usize,
    /// Frames per clip.
    #[arg(long, default_value_t = 30)]
    pub clip_len: usize,
    #[arg(long, default_value_t = 120)]
    pub train_clips: usize,
    #[arg(long, default_value_t = 60)]
    pub test_clips: usize,
    /// Standard deviation of the background cells.
    #[arg(long, default_value_t = 0.5)]
    pub noise_sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone)]
pub struct TrainArgs {
    /// Read settings from a key=value file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset manifest.
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// attention, avg_pool, max_pool or softmax_regression.
    #[arg(long, default_value = "attention")]
    pub model: ModelKind,
    /// LSTM width.
    #[arg(long, default_value_t = 64)]
    pub hidden_dim: usize,
    /// Stacked LSTM layers.
    #[arg(long, default_value_t = 3)]
    pub layers: usize,
    /// Dropout on non-recurrent connections.
    #[arg(long, default_value_t = 0.5)]
    pub dropout: f64,
    /// Passes over the training blocks.
    #[arg(long, default_value_t = 15)]
    pub epochs: usize,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    /// Adam step size.
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.9)]
    pub beta1: f64,
    #[arg(long, default_value_t = 0.999)]
    pub beta2: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub adam_epsilon: f64,
    /// Attention penalty weight.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Weight decay.
    #[arg(long, default_value_t = 1e-5)]
    pub gamma: f64,
    #[command(flatten)]
    pub blocks: BlockArgs,
    /// Stop after this many updates (0: no limit).
    #[arg(long, default_value_t = 0)]
    pub max_updates: usize,
    /// Report training accuracy after every epoch.
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
    pub track_train_accuracy: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone)]
pub struct EvalArgs {
    /// Read settings from a key=value file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    /// Model checkpoint written by `train`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// train or test.
    #[arg(long, default_value = "test")]
    pub split: attnrec::data::Split,
    #[command(flatten)]
    pub blocks: BlockArgs,
}

#[derive(Args, Debug, Clone)]
pub struct GradcheckArgs {
    /// Read settings from a key=value file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Where to echo the resolved settings.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, default_value = "attention")]
    pub model: ModelKind,
    #[arg(long, default_value_t = 3)]
    pub grid: usize,
    #[arg(long, default_value_t = 8)]
    pub feat_dim: usize,
    #[arg(long, default_value_t = 6)]
    pub hidden_dim: usize,
    #[arg(long, default_value_t = 2)]
    pub layers: usize,
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    #[arg(long, default_value_t = 4)]
    pub steps: usize,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub gamma: f64,
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-5)]
    pub eps: f64,
    /// Number of random models to check.
    #[arg(long, default_value_t = 5)]
    pub trials: u64,
    /// Largest acceptable relative error.
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone)]
pub struct VizArgs {
    /// Read settings from a key=value file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Model checkpoint written by `train`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Feature cube file.
    #[arg(long)]
    pub clip: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Integer magnification of each K×K map.
    #[arg(long, default_value_t = 16)]
    pub upsample: usize,
    #[command(flatten)]
    pub blocks: BlockArgs,
}

#[derive(Args, Debug, Clone)]
pub struct ReglimpseArgs {
    /// Read settings from a key=value file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Model checkpoint written by `train`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Feature cube file.
    #[arg(long)]
    pub clip: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Adam updates.
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub gamma: f64,
    /// Class to optimize for: a class index, or "label" for the clip's first label.
    #[arg(long, default_value = "label")]
    pub target: commands::Target,
    /// Redraw the location-softmax weights before optimizing.
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
    pub reinit: bool,
    #[arg(long, default_value_t = 16)]
    pub upsample: usize,
    #[command(flatten)]
    pub blocks: BlockArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Required options may come from the config file, so the first pass
/// accepts their absence; the re-parse enforces them.
fn lenient(cli: clap::Command) -> clap::Command {
    let names: Vec<String> = cli
        .get_subcommands()
        .map(|s| s.get_name().to_string())
        .collect();
    names.into_iter().fold(cli, |cli, name| {
        cli.mut_subcommand(name, |sub| {
            let ids: Vec<String> = sub
                .get_arguments()
                .map(|a| a.get_id().to_string())
                .collect();
            ids.into_iter()
                .fold(sub, |sub, id| sub.mut_arg(id, |a| a.required(false)))
        })
    })
}

/// Parses argv, folds in the config file, and re-parses the merged settings
/// so every value goes through the same validation.
fn parse(argv: Vec<String>) -> Result<(Command, String)> {
    let mut cli = lenient(Cli::command());
    let matches = match cli.try_get_matches_from_mut(&argv) {
        Ok(m) => m,
        // Help, version and usage errors are reported by the strict parser.
        Err(e) => match Cli::command().try_get_matches_from(&argv) {
            Err(strict) => strict.exit(),
            Ok(_) => e.exit(),
        },
    };
    let (name, sub_matches) = matches.subcommand().expect("subcommand is required");
    let sub = cli
        .find_subcommand(name)
        .expect("matched subcommand exists")
        .clone();
    let file = match sub_matches.get_one::<PathBuf>("config") {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| attnrec::Error::Io {
                path: path.clone(),
                source: e,
            })?;
            settings::parse_config_file(&text, path)?
        }
        None => Default::default(),
    };
    let resolved = settings::resolve(&sub, sub_matches, &file)?;
    let merged = Cli::command()
        .try_get_matches_from(settings::to_argv(name, &resolved))
        .and_then(|m| Cli::from_arg_matches(&m))
        .map_err(|e| {
            let msg = e.to_string();
            let summary: Vec<&str> = msg
                .lines()
                .take_while(|l| !l.trim().is_empty())
                .map(|l| l.trim().trim_start_matches("error: "))
                .collect();
            attnrec::Error::Config(format!("invalid configuration: {}", summary.join(" ")))
        })?;
    Ok((merged.command, settings::render(name, &resolved)))
}

fn run(argv: Vec<String>) -> Result<()> {
    let (command, echo) = parse(argv)?;
    let ctx = commands::Context::new(echo);
    match command {
        Command::Synth(a) => commands::synth(&ctx, a),
        Command::Train(a) => commands::train(&ctx, a),
        Command::Eval(a) => commands::eval(&ctx, a),
        Command::Gradcheck(a) => commands::gradcheck(&ctx, a),
        Command::Viz(a) => commands::viz(&ctx, a),
        Command::Reglimpse(a) => commands::reglimpse(&ctx, a),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<commands::GradcheckFailed>().is_some() {
        return 4;
    }
    match err.downcast_ref::<attnrec::Error>() {
        Some(attnrec::Error::Config(_)) => 2,
        Some(attnrec::Error::Data(_) | attnrec::Error::Format(_)) => 3,
        Some(attnrec::Error::Numeric(_)) => 4,
        Some(attnrec::Error::Io { .. }) => 5,
        _ => 1,
    }
}

fn main() -> ExitCode {
    match run(std::env::args().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
