//! The recurrent soft-attention classifier and its attention-free variants.

mod backward;
mod cell;
mod config;
mod forward;
mod params;
mod regression;

pub use backward::backward_block;
pub use cell::{
    attend, classify, feature_mean, init_state, location_softmax, lstm_step, DropoutMasks,
    LstmState, Mode, StepOutput,
};
pub use config::{ModelConfig, ModelKind};
pub use forward::{forward_block, forward_block_with, BlockCache, BlockOutput, InputPolicy};
pub use params::{Affine, GradientSet, Mlp, ModelParams, Network, ParamSet, RegressionParams};
pub use regression::{regression_backward, regression_forward};
