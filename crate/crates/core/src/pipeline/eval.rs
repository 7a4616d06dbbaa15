use rayon::prelude::*;

use crate::data::{split_into_blocks, DatasetManifest, FeatureCubeClip, Split};
use crate::error::{Error, Result};
use crate::model::Network;

use super::metrics::{accuracy, mean_average_precision};
use super::{predict_block, BlockConfig};

/// Aggregate attention behaviour over every evaluated block.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionStats {
    /// Mean over blocks of `Σ_t l_{t,i}` for each region.
    pub region_mass: Vec<f64>,
    /// Mean over blocks of the attention entropy (nats) at each step.
    pub step_entropy: Vec<f64>,
    pub blocks: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub clip_ids: Vec<String>,
    pub labels: Vec<Vec<usize>>,
    /// Clip-level class scores, `[clips × classes]`.
    pub scores: Vec<Vec<f64>>,
    pub accuracy: f64,
    /// Mean AP over classes with at least one positive clip.
    pub mean_average_precision: Option<f64>,
    pub per_class_ap: Vec<Option<f64>>,
    pub attention: Option<AttentionStats>,
}

struct ClipResult {
    score: Vec<f64>,
    maps: Vec<Vec<Vec<f64>>>,
}

fn mean_rows(rows: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; rows[0].len()];
    for r in rows {
        out.iter_mut().zip(r).for_each(|(o, v)| *o += v);
    }
    out.iter_mut().for_each(|o| *o /= rows.len() as f64);
    out
}

fn run_clip(clip: &FeatureCubeClip, network: &Network, blocks: &BlockConfig) -> Result<ClipResult> {
    let cut = split_into_blocks(clip, blocks.block_len, blocks.stride, blocks.frame_step)?;
    let mut block_scores = Vec::with_capacity(cut.len());
    let mut maps = Vec::new();
    for b in &cut {
        let (preds, l) = predict_block(network, &b.view())?;
        block_scores.push(mean_rows(&preds));
        maps.extend(l);
    }
    Ok(ClipResult {
        score: mean_rows(&block_scores),
        maps,
    })
}

fn check_compatible(
    clips: &[FeatureCubeClip],
    network: &Network,
    blocks: &BlockConfig,
) -> Result<()> {
    let config = network.config();
    if blocks.block_len != config.steps {
        return Err(Error::Config(format!(
            "block length {} differs from the model's {} steps",
            blocks.block_len, config.steps
        )));
    }
    for c in clips {
        if c.grid() != config.grid || c.dim() != config.feat_dim {
            return Err(Error::Data(format!(
                "clip {} has grid {} and feature size {}, model expects {} and {}",
                c.clip_id,
                c.grid(),
                c.dim(),
                config.grid,
                config.feat_dim
            )));
        }
    }
    Ok(())
}

/// Clip-level scores: the mean over blocks of each block's mean per-step
/// class distribution.
pub fn clip_scores(
    clips: &[FeatureCubeClip],
    network: &Network,
    blocks: &BlockConfig,
) -> Result<Vec<Vec<f64>>> {
    check_compatible(clips, network, blocks)?;
    clips
        .par_iter()
        .map(|c| run_clip(c, network, blocks).map(|r| r.score))
        .collect()
}

/// Per-block, per-step attention maps of one clip.
pub fn attention_maps(
    clip: &FeatureCubeClip,
    network: &Network,
    blocks: &BlockConfig,
) -> Result<Vec<Vec<Vec<f64>>>> {
    check_compatible(std::slice::from_ref(clip), network, blocks)?;
    let cut = split_into_blocks(clip, blocks.block_len, blocks.stride, blocks.frame_step)?;
    cut.iter()
        .map(|b| {
            predict_block(network, &b.view())?
                .1
                .ok_or_else(|| Error::Contract("model has no attention".into()))
        })
        .collect()
}

fn entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&x| x > 0.0)
        .map(|x| x * x.ln())
        .sum::<f64>()
}

fn attention_stats(results: &[ClipResult]) -> Option<AttentionStats> {
    let all: Vec<&Vec<Vec<f64>>> = results.iter().flat_map(|r| &r.maps).collect();
    let first = all.first()?;
    let steps = first.len();
    let regions = first[0].len();
    let mut region_mass = vec![0.0; regions];
    let mut step_entropy = vec![0.0; steps];
    for block in &all {
        for (t, l) in block.iter().enumerate() {
            region_mass.iter_mut().zip(l).for_each(|(m, v)| *m += v);
            step_entropy[t] += entropy(l);
        }
    }
    let n = all.len() as f64;
    region_mass.iter_mut().for_each(|m| *m /= n);
    step_entropy.iter_mut().for_each(|e| *e /= n);
    Some(AttentionStats {
        region_mass,
        step_entropy,
        blocks: all.len(),
    })
}

/// Scores every clip and computes accuracy, per-class AP and attention
/// statistics.
pub fn evaluate(
    clips: &[FeatureCubeClip],
    network: &Network,
    blocks: &BlockConfig,
) -> Result<EvalReport> {
    if clips.is_empty() {
        return Err(Error::Config("evaluation split is empty".into()));
    }
    check_compatible(clips, network, blocks)?;
    let results: Vec<ClipResult> = clips
        .par_iter()
        .map(|c| run_clip(c, network, blocks))
        .collect::<Result<_>>()?;
    let scores: Vec<Vec<f64>> = results.iter().map(|r| r.score.clone()).collect();
    let labels: Vec<Vec<usize>> = clips.iter().map(|c| c.labels.clone()).collect();
    let (map, per_class) = mean_average_precision(&scores, &labels, network.config().classes);
    Ok(EvalReport {
        clip_ids: clips.iter().map(|c| c.clip_id.clone()).collect(),
        accuracy: accuracy(&scores, &labels),
        labels,
        scores,
        mean_average_precision: map,
        per_class_ap: per_class,
        attention: attention_stats(&results),
    })
}

/// Loads the manifest's test split and evaluates it.
pub fn evaluate_manifest(
    manifest: &DatasetManifest,
    network: &Network,
    blocks: &BlockConfig,
) -> Result<EvalReport> {
    manifest.validate()?;
    let clips = manifest.load(Split::Test)?;
    evaluate(&clips, network, blocks)
}
