//! Softmax regression over the full flattened cube at every step.

use crate::data::FrameView;
use crate::error::{Error, Result};
use crate::objective::{self, LossBreakdown, LossConfig};
use crate::tensor::softmax_unchecked;

use super::params::{ParamSet, RegressionParams};

fn check_frames(frames: &FrameView<'_>, params: &RegressionParams) -> Result<()> {
    let c = &params.config;
    if frames.regions != c.regions() || frames.dim != c.feat_dim {
        return Err(Error::dim(
            "regression_forward",
            &[frames.regions, frames.dim],
            &[c.regions(), c.feat_dim],
        ));
    }
    if frames.steps != c.steps {
        return Err(Error::Data(format!(
            "block has {} frames, model expects {}",
            frames.steps, c.steps
        )));
    }
    Ok(())
}

pub fn regression_forward(
    frames: &FrameView<'_>,
    params: &RegressionParams,
) -> Result<Vec<Vec<f64>>> {
    check_frames(frames, params)?;
    Ok((0..frames.steps)
        .map(|t| softmax_unchecked(&params.readout.apply(frames.frame(t))))
        .collect())
}

/// Per-step cross-entropy plus weight decay; there is no attention term.
pub fn regression_backward(
    frames: &FrameView<'_>,
    params: &RegressionParams,
    targets: &[usize],
    loss: &LossConfig,
) -> Result<(RegressionParams, LossBreakdown)> {
    loss.validate()?;
    let y_hats = regression_forward(frames, params)?;
    if targets.len() != y_hats.len() {
        return Err(Error::Contract(format!(
            "{} targets for {} steps",
            targets.len(),
            y_hats.len()
        )));
    }
    let refs: Vec<&[f64]> = y_hats.iter().map(Vec::as_slice).collect();
    let ce = objective::cross_entropy_indices(&refs, targets)?;
    let wd = objective::weight_decay_term(params, loss.gamma);
    let mut grad = params.zeros_like();
    for (t, (y, &target)) in y_hats.iter().zip(targets).enumerate() {
        let mut dz = y.clone();
        dz[target] -= 1.0;
        params
            .readout
            .backward(&mut grad.readout, frames.frame(t), &dz, None);
    }
    if loss.gamma != 0.0 {
        grad.add_scaled(params, 2.0 * loss.gamma);
    }
    Ok((grad, LossBreakdown::new(ce, 0.0, wd)))
}
