use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use anyhow::{Context as _, Result};
use attnrec::checkpoint::{load_checkpoint, save_checkpoint};
use attnrec::data::{read_cube, synth_generate, DatasetManifest, FrameView, Split, SynthConfig};
use attnrec::gradcheck::grad_check;
use attnrec::model::{Mode, ModelConfig, ModelKind, Network, ParamSet};
use attnrec::objective::LossConfig;
use attnrec::optim::AdamConfig;
use attnrec::pipeline::{
    self, argmax, attention_maps, evaluate, loss_curve_text, network_gradient, reoptimize_glimpse,
    BlockConfig, GlimpseConfig, TrainConfig,
};
use attnrec::rng::Rng;
use attnrec::viz::viz_attention;
use attnrec::Error;

use crate::{BlockArgs, EvalArgs, GradcheckArgs, ReglimpseArgs, SynthArgs, TrainArgs, VizArgs};

pub const RESOLVED_CONFIG: &str = "resolved_config.txt";

/// Raised when analytic and numeric gradients disagree beyond tolerance.
#[derive(Debug)]
pub struct GradcheckFailed(pub f64);

impl std::fmt::Display for GradcheckFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "gradient check failed: max relative error {:.3e}",
            self.0
        )
    }
}

impl std::error::Error for GradcheckFailed {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Label,
    Class(usize),
}

impl FromStr for Target {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s == "label" {
            return Ok(Target::Label);
        }
        s.parse()
            .map(Target::Class)
            .map_err(|_| format!("expected \"label\" or a class index, got {s:?}"))
    }
}

impl std::fmt::Display for Target {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Target::Label => f.write_str("label"),
            Target::Class(c) => write!(f, "{c}"),
        }
    }
}

pub struct Context {
    echo: String,
}

impl Context {
    pub fn new(echo: String) -> Self {
        Self { echo }
    }

    /// Creates `dir` and records the resolved settings in it.
    fn prepare(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
        write_file(&dir.join(RESOLVED_CONFIG), self.echo.as_bytes())
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

impl From<&BlockArgs> for BlockConfig {
    fn from(b: &BlockArgs) -> Self {
        BlockConfig {
            block_len: b.block_len,
            stride: b.stride,
            frame_step: b.fps_step,
        }
    }
}

pub fn synth(ctx: &Context, a: SynthArgs) -> Result<()> {
    ctx.prepare(&a.out_dir)?;
    let config = SynthConfig {
        grid: a.grid,
        feat_dim: a.feat_dim,
        classes: a.classes,
        clip_len: a.clip_len,
        train_clips: a.train_clips,
        test_clips: a.test_clips,
        noise_sigma: a.noise_sigma,
        seed: a.seed,
    };
    let manifest = synth_generate(&config, &a.out_dir)?;
    println!(
        "wrote {} clips and {}",
        manifest.entries.len(),
        a.out_dir.join("manifest.tsv").display()
    );
    Ok(())
}

pub fn train(ctx: &Context, a: TrainArgs) -> Result<()> {
    ctx.prepare(&a.out_dir)?;
    let manifest = DatasetManifest::read(&a.data)?;
    manifest.validate()?;
    let clips = manifest.load(Split::Train)?;
    let first = clips
        .first()
        .ok_or_else(|| Error::Config("training split is empty".into()))?;
    let blocks = BlockConfig::from(&a.blocks);
    let model = ModelConfig {
        kind: a.model,
        grid: first.grid(),
        feat_dim: first.dim(),
        hidden: a.hidden_dim,
        layers: a.layers,
        classes: manifest.num_classes(),
        steps: blocks.block_len,
        dropout: a.dropout,
    };
    let mut rng = Rng::new(a.seed);
    let network = Network::init(model, &mut rng.fork())?;
    let config = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        loss: LossConfig::new(a.lambda, a.gamma),
        adam: AdamConfig {
            alpha: a.lr,
            beta1: a.beta1,
            beta2: a.beta2,
            epsilon: a.adam_epsilon,
        },
        blocks,
        seed: rng.next_u64(),
        max_updates: (a.max_updates > 0).then_some(a.max_updates),
        track_train_accuracy: a.track_train_accuracy,
    };
    println!(
        "training {} on {} clips ({} parameters)",
        model.kind,
        clips.len(),
        network.num_params()
    );
    let out = pipeline::train(&clips, network, &config)?;
    for e in &out.history {
        match e.train_accuracy {
            Some(acc) => println!(
                "epoch {:3}  loss {:.6}  train accuracy {:.4}",
                e.epoch, e.mean_loss, acc
            ),
            None => println!("epoch {:3}  loss {:.6}", e.epoch, e.mean_loss),
        }
    }
    let checkpoint = a.out_dir.join("model.grnn");
    save_checkpoint(&checkpoint, &out.network, Some(&out.optimizer))?;
    write_file(
        &a.out_dir.join("loss_curve.tsv"),
        loss_curve_text(&out.history).as_bytes(),
    )?;
    println!("saved {}", checkpoint.display());
    Ok(())
}

pub fn eval(ctx: &Context, a: EvalArgs) -> Result<()> {
    ctx.prepare(&a.out_dir)?;
    let manifest = DatasetManifest::read(&a.data)?;
    manifest.validate()?;
    let network = load_checkpoint(&a.checkpoint)?.network;
    if network.config().classes != manifest.num_classes() {
        return Err(Error::Config(format!(
            "checkpoint has {} classes, manifest has {}",
            network.config().classes,
            manifest.num_classes()
        ))
        .into());
    }
    let clips = manifest.load(a.split)?;
    let report = evaluate(&clips, &network, &BlockConfig::from(&a.blocks))?;
    let text = report.to_text(&manifest.class_names);
    write_file(&a.out_dir.join("report.txt"), text.as_bytes())?;
    write_file(
        &a.out_dir.join("scores.tsv"),
        report.score_table().as_bytes(),
    )?;
    let map = report
        .mean_average_precision
        .map_or_else(|| "n/a".to_string(), |m| format!("{m:.4}"));
    println!(
        "{} clips ({} split): accuracy {:.4}, mAP {map}",
        clips.len(),
        a.split.name(),
        report.accuracy
    );
    Ok(())
}

pub fn gradcheck(ctx: &Context, a: GradcheckArgs) -> Result<()> {
    match &a.out_dir {
        Some(dir) => ctx.prepare(dir)?,
        None => print!("{}", ctx.echo),
    }
    if a.tolerance.is_nan() || a.tolerance <= 0.0 {
        return Err(Error::Config("tolerance must be positive".into()).into());
    }
    let model = ModelConfig {
        kind: a.model,
        grid: a.grid,
        feat_dim: a.feat_dim,
        hidden: a.hidden_dim,
        layers: a.layers,
        classes: a.classes,
        steps: a.steps,
        dropout: 0.0,
    };
    model.validate()?;
    let loss = LossConfig::new(a.lambda, a.gamma);
    let regions = model.regions();
    let mut worst: f64 = 0.0;
    for trial in 0..a.trials {
        let mut rng = Rng::new(a.seed.wrapping_add(trial));
        let mut net = Network::init(model, &mut rng)?;
        let flat: Vec<f64> = (0..net.num_params()).map(|_| 0.5 * rng.normal()).collect();
        net.assign_flat(&flat)?;
        let frames: Vec<f64> = (0..a.steps * regions * a.feat_dim)
            .map(|_| rng.normal())
            .collect();
        let view = FrameView::new(&frames, a.steps, regions, a.feat_dim)?;
        let targets: Vec<usize> = (0..a.steps).map(|_| rng.below(a.classes)).collect();
        let (grad, _) = network_gradient(&net, &view, &targets, &loss, Mode::Train, None)?;
        let objective = |theta: &[f64]| {
            let mut p = net.clone();
            p.assign_flat(theta).expect("same length");
            network_gradient(&p, &view, &targets, &loss, Mode::Train, None)
                .map(|(_, b)| b.total)
                .unwrap_or(f64::NAN)
        };
        let err = grad_check(objective, &flat, &grad.flatten(), a.eps)?;
        println!(
            "trial {trial}: {} parameters, max relative error {err:.3e}",
            flat.len()
        );
        worst = worst.max(err);
    }
    println!(
        "max relative error {worst:.3e} (tolerance {:.1e})",
        a.tolerance
    );
    if worst > a.tolerance {
        return Err(GradcheckFailed(worst).into());
    }
    Ok(())
}

fn attention_network(path: &Path) -> Result<Network> {
    let network = load_checkpoint(path)?.network;
    if network.config().kind != ModelKind::Attention {
        return Err(Error::Config(format!(
            "{} holds a {} model; attention maps need the attention model",
            path.display(),
            network.config().kind
        ))
        .into());
    }
    Ok(network)
}

pub fn viz(ctx: &Context, a: VizArgs) -> Result<()> {
    ctx.prepare(&a.out_dir)?;
    let network = attention_network(&a.checkpoint)?;
    let clip = read_cube(&a.clip)?;
    let maps = attention_maps(&clip, &network, &BlockConfig::from(&a.blocks))?;
    let files = viz_attention(&maps, clip.grid(), &a.out_dir, a.upsample)?;
    println!(
        "wrote {} files for {} blocks of {} to {}",
        files.len(),
        maps.len(),
        clip.clip_id,
        a.out_dir.display()
    );
    Ok(())
}

pub fn reglimpse(ctx: &Context, a: ReglimpseArgs) -> Result<()> {
    ctx.prepare(&a.out_dir)?;
    let network = attention_network(&a.checkpoint)?;
    let params = network.as_recurrent()?;
    let clip = read_cube(&a.clip)?;
    let config = GlimpseConfig {
        steps: a.steps,
        adam: AdamConfig::with_alpha(a.lr),
        loss: LossConfig::new(a.lambda, a.gamma),
        blocks: BlockConfig::from(&a.blocks),
        target: match a.target {
            Target::Label => None,
            Target::Class(c) => Some(c),
        },
        reinit_seed: a.reinit.then_some(a.seed),
    };
    let result = reoptimize_glimpse(params, &clip, &config)?;
    let k = clip.grid();
    viz_attention(
        &result.maps_before,
        k,
        &a.out_dir.join("before"),
        a.upsample,
    )?;
    viz_attention(&result.maps_after, k, &a.out_dir.join("after"), a.upsample)?;
    let mut losses = String::from("step\tloss\n");
    for (i, l) in result.losses.iter().enumerate() {
        writeln!(losses, "{i}\t{l:.10}").unwrap();
    }
    write_file(&a.out_dir.join("losses.tsv"), losses.as_bytes())?;
    save_checkpoint(
        &a.out_dir.join("glimpse.grnn"),
        &Network::Recurrent(result.params.clone()),
        None,
    )
    .context("saving re-optimized model")?;
    println!(
        "clip {}: top class {} -> {}, loss {:.4} -> {:.4}, {}",
        clip.clip_id,
        argmax(&result.scores_before),
        argmax(&result.scores_after),
        result.losses[0],
        result.losses.last().copied().unwrap_or(f64::NAN),
        match result.recovered_at {
            Some(s) => format!("labelled class on top after {s} steps"),
            None => "labelled class never on top".to_string(),
        }
    );
    Ok(())
}
