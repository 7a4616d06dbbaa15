//! Re-optimizing only the location softmax of a trained model on one clip.

use crate::data::{split_into_blocks, FeatureCubeClip};
use crate::error::{Error, Result};
use crate::model::{
    backward_block, forward_block_with, Affine, GradientSet, InputPolicy, Mode, ModelKind,
    ModelParams, ParamSet,
};
use crate::objective::LossConfig;
use crate::optim::{adam_step, AdamConfig, AdamState};
use crate::rng::Rng;

use super::metrics::argmax;
use super::BlockConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct GlimpseConfig {
    pub steps: usize,
    pub adam: AdamConfig,
    pub loss: LossConfig,
    pub blocks: BlockConfig,
    /// Class to optimize for; the clip's first label when unset.
    pub target: Option<usize>,
    /// Replace the attention weights with uniform draws between the trained
    /// minimum and maximum before optimizing.
    pub reinit_seed: Option<u64>,
}

impl Default for GlimpseConfig {
    fn default() -> Self {
        Self {
            steps: 100,
            adam: AdamConfig::with_alpha(0.05),
            loss: LossConfig::default(),
            blocks: BlockConfig::default(),
            target: None,
            reinit_seed: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GlimpseResult {
    pub params: ModelParams,
    /// Per-block, per-step attention before and after optimization.
    pub maps_before: Vec<Vec<Vec<f64>>>,
    pub maps_after: Vec<Vec<Vec<f64>>>,
    /// Objective before each update, followed by the final value.
    pub losses: Vec<f64>,
    pub scores_before: Vec<f64>,
    pub scores_after: Vec<f64>,
    /// First update count after which the clip's top class is a label.
    pub recovered_at: Option<usize>,
}

struct Evaluation {
    loss: f64,
    grad: GradientSet,
    scores: Vec<f64>,
    maps: Vec<Vec<Vec<f64>>>,
}

fn evaluate_clip(
    params: &ModelParams,
    clip: &FeatureCubeClip,
    target: usize,
    config: &GlimpseConfig,
) -> Result<Evaluation> {
    let b = &config.blocks;
    let blocks = split_into_blocks(clip, b.block_len, b.stride, b.frame_step)?;
    let n = blocks.len() as f64;
    let mut grad = params.zeros_like();
    let mut loss = 0.0;
    let mut scores = vec![0.0; params.config.classes];
    let mut maps = Vec::with_capacity(blocks.len());
    for block in &blocks {
        let out = forward_block_with(
            &block.view(),
            params,
            Mode::Eval,
            None,
            InputPolicy::Learned,
        )?;
        let targets = vec![target; block.steps];
        let (g, breakdown) = backward_block(&out.cache, params, &targets, &config.loss)?;
        grad.add_scaled(&g, 1.0 / n);
        loss += breakdown.total / n;
        for step in &out.steps {
            scores
                .iter_mut()
                .zip(&step.y_hat)
                .for_each(|(s, y)| *s += y / (n * block.steps as f64));
        }
        maps.push(out.attention());
    }
    if let Some(attn) = grad.attn.take() {
        grad = grad.zeros_like();
        grad.attn = Some(attn);
    }
    Ok(Evaluation {
        loss,
        grad,
        scores,
        maps,
    })
}

/// Clip objective and its gradient with every parameter outside the
/// location softmax frozen (their gradient entries are zero).
pub fn frozen_gradient(
    params: &ModelParams,
    clip: &FeatureCubeClip,
    config: &GlimpseConfig,
) -> Result<(GradientSet, f64)> {
    let target = check(params, clip, config)?;
    let e = evaluate_clip(params, clip, target, config)?;
    Ok((e.grad, e.loss))
}

fn check(params: &ModelParams, clip: &FeatureCubeClip, config: &GlimpseConfig) -> Result<usize> {
    if params.config.kind != ModelKind::Attention {
        return Err(Error::Contract(
            "glimpse re-optimization needs the attention model".into(),
        ));
    }
    params.attn()?;
    let target = match config.target {
        Some(t) => t,
        None => *clip
            .labels
            .first()
            .ok_or_else(|| Error::Data(format!("clip {} has no labels", clip.clip_id)))?,
    };
    if target >= params.config.classes {
        return Err(Error::Data(format!("target class {target} out of range")));
    }
    Ok(target)
}

fn reinitialize(attn: &mut Affine, seed: u64) {
    let mut rng = Rng::new(seed);
    for t in attn.tensors_mut() {
        let lo = t.data().iter().copied().fold(f64::INFINITY, f64::min);
        let hi = t.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        t.data_mut()
            .iter_mut()
            .for_each(|v| *v = rng.uniform_range(lo, hi));
    }
}

/// Adam on the location-softmax weights alone, maximizing the likelihood of
/// the target class on `clip` with the evaluation-mode forward pass.
pub fn reoptimize_glimpse(
    params: &ModelParams,
    clip: &FeatureCubeClip,
    config: &GlimpseConfig,
) -> Result<GlimpseResult> {
    let target = check(params, clip, config)?;
    let mut params = params.clone();
    let before = evaluate_clip(&params, clip, target, config)?;
    if let Some(seed) = config.reinit_seed {
        reinitialize(params.attn.as_mut().expect("checked"), seed);
    }
    let frozen = {
        let mut p = params.clone();
        p.attn = None;
        p
    };
    let mut optimizer = AdamState::new(&params, config.adam)?;
    let mut losses = Vec::with_capacity(config.steps + 1);
    let mut recovered_at = None;
    let mut current = evaluate_clip(&params, clip, target, config)?;
    for step in 0..config.steps {
        if recovered_at.is_none() && clip.labels.contains(&argmax(&current.scores)) {
            recovered_at = Some(step);
        }
        losses.push(current.loss);
        adam_step(&mut params, &current.grad, &mut optimizer)?;
        let mut check = params.clone();
        check.attn = None;
        if check != frozen {
            return Err(Error::Numeric(
                "a frozen parameter moved during glimpse re-optimization".into(),
            ));
        }
        current = evaluate_clip(&params, clip, target, config)?;
    }
    if recovered_at.is_none() && clip.labels.contains(&argmax(&current.scores)) {
        recovered_at = Some(config.steps);
    }
    losses.push(current.loss);
    Ok(GlimpseResult {
        params,
        maps_before: before.maps,
        maps_after: current.maps,
        losses,
        scores_before: before.scores,
        scores_after: current.scores,
        recovered_at,
    })
}
