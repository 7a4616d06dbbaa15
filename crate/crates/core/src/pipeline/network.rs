use crate::data::FrameView;
use crate::error::{Error, Result};
use crate::model::{
    backward_block, forward_block, forward_block_with, regression_backward, regression_forward,
    DropoutMasks, InputPolicy, Mode, ModelKind, Network,
};
use crate::objective::{LossBreakdown, LossConfig};

/// Loss and gradient of one block for any model kind.
///
/// `masks` are the block's dropout masks (recurrent models in training only).
pub fn network_gradient(
    network: &Network,
    frames: &FrameView<'_>,
    targets: &[usize],
    loss: &LossConfig,
    mode: Mode,
    masks: Option<&DropoutMasks>,
) -> Result<(Network, LossBreakdown)> {
    match network {
        Network::Recurrent(p) => {
            let policy = InputPolicy::for_kind(p.config.kind)?;
            let out = forward_block_with(frames, p, mode, masks, policy)?;
            let (g, b) = backward_block(&out.cache, p, targets, loss)?;
            Ok((Network::Recurrent(g), b))
        }
        Network::Regression(p) => {
            let (g, b) = regression_backward(frames, p, targets, loss)?;
            Ok((Network::Regression(g), b))
        }
    }
}

/// Per-step class distributions and, for the attention model, per-step
/// attention maps.
pub type BlockPrediction = (Vec<Vec<f64>>, Option<Vec<Vec<f64>>>);

/// Evaluation-mode forward pass over one block.
pub fn predict_block(network: &Network, frames: &FrameView<'_>) -> Result<BlockPrediction> {
    match network {
        Network::Recurrent(p) => {
            let mut unused = crate::rng::Rng::new(0);
            let out = forward_block(frames, p, Mode::Eval, &mut unused)?;
            let maps = (p.config.kind == ModelKind::Attention).then(|| out.attention());
            Ok((out.predictions(), maps))
        }
        Network::Regression(p) => Ok((regression_forward(frames, p)?, None)),
    }
}

/// Per-step predictions of one of the attention-free baselines.
pub fn run_baseline_forward(
    frames: &FrameView<'_>,
    network: &Network,
    mode: ModelKind,
) -> Result<Vec<Vec<f64>>> {
    if mode == ModelKind::Attention {
        return Err(Error::Contract("attention is not a baseline mode".into()));
    }
    if network.config().kind != mode {
        return Err(Error::Contract(format!(
            "parameters were built for {}, not {mode}",
            network.config().kind
        )));
    }
    predict_block(network, frames).map(|(y, _)| y)
}
