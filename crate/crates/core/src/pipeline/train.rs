use rayon::prelude::*;

use crate::data::{split_into_blocks, Block, DatasetManifest, FeatureCubeClip, Split};
use crate::error::{Error, Result};
use crate::model::{DropoutMasks, Mode, Network, ParamSet};
use crate::objective::LossConfig;
use crate::optim::{adam_step, AdamConfig, AdamState};
use crate::rng::Rng;

use super::metrics::accuracy;
use super::{clip_scores, network_gradient, BlockConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub loss: LossConfig,
    pub adam: AdamConfig,
    pub blocks: BlockConfig,
    pub seed: u64,
    /// Stop after this many optimizer updates, even mid-epoch.
    pub max_updates: Option<usize>,
    /// Evaluate training-set accuracy after every epoch.
    pub track_train_accuracy: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 15,
            batch_size: 16,
            loss: LossConfig::default(),
            adam: AdamConfig::default(),
            blocks: BlockConfig::default(),
            seed: 0,
            max_updates: None,
            track_train_accuracy: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config(format!(
                "epochs ({}) and batch size ({}) must be positive",
                self.epochs, self.batch_size
            )));
        }
        self.loss.validate()?;
        self.adam.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean per-block objective over the epoch's samples.
    pub mean_loss: f64,
    /// Optimizer updates completed so far.
    pub updates: usize,
    pub train_accuracy: Option<f64>,
}

pub struct TrainOutcome {
    pub network: Network,
    pub optimizer: AdamState<Network>,
    pub history: Vec<EpochStats>,
}

struct Sample {
    block: Block,
    label: usize,
}

/// One sample per (clip, label, block); multi-label clips contribute a copy
/// of each block for every label.
fn expand_samples(clips: &[FeatureCubeClip], blocks: &BlockConfig) -> Result<Vec<Sample>> {
    let mut samples = Vec::new();
    for clip in clips {
        let cut = split_into_blocks(clip, blocks.block_len, blocks.stride, blocks.frame_step)?;
        for &label in &clip.labels {
            samples.extend(cut.iter().map(|b| Sample {
                block: b.clone(),
                label,
            }));
        }
    }
    Ok(samples)
}

/// Trains `network` with minibatch Adam.
///
/// Every epoch shuffles the samples with the run's RNG; each minibatch draws
/// its dropout masks sequentially before computing block gradients in
/// parallel, so results do not depend on the thread count.
pub fn train(
    clips: &[FeatureCubeClip],
    network: Network,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    let model = *network.config();
    model.validate()?;
    if clips.is_empty() {
        return Err(Error::Config("training split is empty".into()));
    }
    if config.blocks.block_len != model.steps {
        return Err(Error::Config(format!(
            "block length {} differs from the model's {} steps",
            config.blocks.block_len, model.steps
        )));
    }
    if let Some(bad) = clips
        .iter()
        .find(|c| c.labels.iter().any(|&l| l >= model.classes))
    {
        return Err(Error::Data(format!(
            "clip {} has a label outside the model's {} classes",
            bad.clip_id, model.classes
        )));
    }

    let samples = expand_samples(clips, &config.blocks)?;
    let mut network = network;
    let mut optimizer = AdamState::new(&network, config.adam)?;
    let mut rng = Rng::new(config.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut updates = 0;

    'epochs: for epoch in 0..config.epochs {
        if config.max_updates.is_some_and(|m| updates >= m) {
            break;
        }
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut seen = 0;
        for batch in order.chunks(config.batch_size) {
            let masks: Vec<Option<DropoutMasks>> = batch
                .iter()
                .map(|_| match &network {
                    Network::Recurrent(p) if model.dropout > 0.0 => {
                        Some(DropoutMasks::sample(p, &mut rng))
                    }
                    _ => None,
                })
                .collect();
            let results: Vec<_> = batch
                .par_iter()
                .zip(masks.par_iter())
                .map(|(&i, m)| {
                    let s = &samples[i];
                    let targets = vec![s.label; s.block.steps];
                    network_gradient(
                        &network,
                        &s.block.view(),
                        &targets,
                        &config.loss,
                        Mode::Train,
                        m.as_ref(),
                    )
                })
                .collect::<Result<_>>()?;

            let mut grad = network.zeros_like();
            for (g, breakdown) in &results {
                grad.add_scaled(g, 1.0 / results.len() as f64);
                loss_sum += breakdown.total;
            }
            seen += results.len();
            if !loss_sum.is_finite() {
                return Err(Error::Numeric(format!(
                    "training loss became non-finite in epoch {epoch}"
                )));
            }
            adam_step(&mut network, &grad, &mut optimizer)?;
            updates += 1;
            if config.max_updates.is_some_and(|m| updates >= m) {
                history.push(epoch_stats(
                    clips,
                    &network,
                    config,
                    epoch,
                    loss_sum / seen as f64,
                    updates,
                )?);
                break 'epochs;
            }
        }
        history.push(epoch_stats(
            clips,
            &network,
            config,
            epoch,
            loss_sum / seen as f64,
            updates,
        )?);
    }
    Ok(TrainOutcome {
        network,
        optimizer,
        history,
    })
}

fn epoch_stats(
    clips: &[FeatureCubeClip],
    network: &Network,
    config: &TrainConfig,
    epoch: usize,
    mean_loss: f64,
    updates: usize,
) -> Result<EpochStats> {
    let train_accuracy = if config.track_train_accuracy {
        let scores = clip_scores(clips, network, &config.blocks)?;
        let labels: Vec<Vec<usize>> = clips.iter().map(|c| c.labels.clone()).collect();
        Some(accuracy(&scores, &labels))
    } else {
        None
    };
    Ok(EpochStats {
        epoch,
        mean_loss,
        updates,
        train_accuracy,
    })
}

/// Loads the manifest's training split and trains on it.
pub fn train_manifest(
    manifest: &DatasetManifest,
    network: Network,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    manifest.validate()?;
    if manifest.num_classes() != network.config().classes {
        return Err(Error::Config(format!(
            "manifest has {} classes, model has {}",
            manifest.num_classes(),
            network.config().classes
        )));
    }
    let clips = manifest.load(Split::Train)?;
    train(&clips, network, config)
}
