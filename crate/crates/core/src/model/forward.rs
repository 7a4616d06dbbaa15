//! Forward pass over one block, keeping everything the backward pass needs.

use crate::data::{pool_frame, FrameView, PoolMode};
use crate::error::{Error, Result};
use crate::rng::Rng;

use super::cell::{
    attend_unchecked, classify_cached, init_state_cached, lstm_step_cached, resolve_dropout,
    ClassifierCache, DropoutMasks, InitCache, LayerCache, LstmState, Mode, StepOutput,
};
use super::config::{ModelConfig, ModelKind};
use super::params::ModelParams;
use crate::tensor::softmax_unchecked;

/// How the per-step LSTM input is formed from a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputPolicy {
    /// Location softmax over the previous top hidden state.
    Learned,
    /// A constant uniform distribution in place of the location softmax.
    ForcedUniform,
    /// Attention-free pooling over the slices.
    Pooled(PoolMode),
}

impl InputPolicy {
    pub fn for_kind(kind: ModelKind) -> Result<Self> {
        match kind {
            ModelKind::Attention => Ok(InputPolicy::Learned),
            ModelKind::AvgPool => Ok(InputPolicy::Pooled(PoolMode::Average)),
            ModelKind::MaxPool => Ok(InputPolicy::Pooled(PoolMode::Max)),
            ModelKind::SoftmaxRegression => Err(Error::Contract(
                "softmax regression has no recurrent forward pass".into(),
            )),
        }
    }
}

pub(crate) struct StepCache {
    pub l: Option<Vec<f64>>,
    pub layers: Vec<LayerCache>,
    pub classifier: ClassifierCache,
    pub y_hat: Vec<f64>,
    /// Layer states after this step.
    pub state: LstmState,
}

/// Intermediates recorded by [`forward_block`].
pub struct BlockCache {
    pub(crate) config: ModelConfig,
    pub(crate) mode: Mode,
    pub(crate) policy: InputPolicy,
    pub(crate) init: InitCache,
    pub(crate) initial: LstmState,
    pub(crate) masks: Option<DropoutMasks>,
    pub(crate) steps: Vec<StepCache>,
    /// Each frame's `K²·D` slice data, copied so the cache is self-contained.
    pub(crate) frames: Vec<Vec<f64>>,
}

impl BlockCache {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }
}

pub struct BlockOutput {
    pub steps: Vec<StepOutput>,
    pub final_state: LstmState,
    pub cache: BlockCache,
}

impl BlockOutput {
    pub fn attention(&self) -> Vec<Vec<f64>> {
        self.steps.iter().filter_map(|s| s.l.clone()).collect()
    }

    pub fn predictions(&self) -> Vec<Vec<f64>> {
        self.steps.iter().map(|s| s.y_hat.clone()).collect()
    }
}

/// Runs the model over a block of exactly `config.steps` frames.
///
/// Training mode draws one set of dropout masks for the whole block from
/// `rng` (when dropout is enabled); evaluation mode never touches `rng`.
pub fn forward_block(
    frames: &FrameView<'_>,
    params: &ModelParams,
    mode: Mode,
    rng: &mut Rng,
) -> Result<BlockOutput> {
    let policy = InputPolicy::for_kind(params.config.kind)?;
    let masks = match mode {
        Mode::Train if params.config.dropout > 0.0 => Some(DropoutMasks::sample(params, rng)),
        _ => None,
    };
    forward_block_with(frames, params, mode, masks.as_ref(), policy)
}

/// [`forward_block`] with explicit masks and input policy.
pub fn forward_block_with(
    frames: &FrameView<'_>,
    params: &ModelParams,
    mode: Mode,
    masks: Option<&DropoutMasks>,
    policy: InputPolicy,
) -> Result<BlockOutput> {
    let config = params.config;
    if frames.steps != config.steps {
        return Err(Error::Data(format!(
            "block has {} frames, model expects {}",
            frames.steps, config.steps
        )));
    }
    if policy == InputPolicy::Learned {
        params.attn()?;
    }
    let masks = resolve_dropout(params, mode, masks)?;
    let (initial, init) = init_state_cached(frames, params)?;
    let regions = config.regions();
    let uniform = vec![1.0 / regions as f64; regions];

    let mut state = initial.clone();
    let mut steps = Vec::with_capacity(config.steps);
    let mut outputs = Vec::with_capacity(config.steps);
    for t in 0..config.steps {
        let frame = frames.frame(t);
        let (l, x) = match policy {
            InputPolicy::Learned => {
                let attn = params.attn.as_ref().expect("checked above");
                let l = softmax_unchecked(&attn.apply(state.top()));
                let x = attend_unchecked(frame, &l);
                (Some(l), x)
            }
            InputPolicy::ForcedUniform => {
                (Some(uniform.clone()), attend_unchecked(frame, &uniform))
            }
            InputPolicy::Pooled(mode) => (None, pool_frame(frame, regions, mode)),
        };
        let (next, layers) = lstm_step_cached(&x, &state, params, masks.as_ref());
        let cls_mask = masks.as_ref().map(|m| m.classifier.as_slice());
        let (y_hat, classifier) = classify_cached(next.top(), params, cls_mask);
        outputs.push(StepOutput {
            l: l.clone(),
            y_hat: y_hat.clone(),
            x,
        });
        steps.push(StepCache {
            l,
            layers,
            classifier,
            y_hat,
            state: next.clone(),
        });
        state = next;
    }
    Ok(BlockOutput {
        steps: outputs,
        final_state: state,
        cache: BlockCache {
            config,
            mode,
            policy,
            init,
            initial,
            masks,
            steps,
            frames: (0..config.steps)
                .map(|t| frames.frame(t).to_vec())
                .collect(),
        },
    })
}
