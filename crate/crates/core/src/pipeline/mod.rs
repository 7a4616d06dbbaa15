//! Training, the block-averaged evaluation protocol, attention-free
//! baselines and glimpse re-optimization.

mod eval;
mod glimpse;
mod metrics;
mod network;
mod report;
mod train;

pub use eval::{
    attention_maps, clip_scores, evaluate, evaluate_manifest, AttentionStats, EvalReport,
};
pub use glimpse::{frozen_gradient, reoptimize_glimpse, GlimpseConfig, GlimpseResult};
pub use metrics::{accuracy, argmax, average_precision, mean_average_precision};
pub use network::{network_gradient, predict_block, run_baseline_forward, BlockPrediction};
pub use report::{loss_curve_text, read_loss_curve};
pub use train::{train, train_manifest, EpochStats, TrainConfig, TrainOutcome};

/// How clips are cut into fixed-length blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockConfig {
    pub block_len: usize,
    pub stride: usize,
    pub frame_step: usize,
}

impl Default for BlockConfig {
    /// 30-frame blocks, stride 1, every frame.
    fn default() -> Self {
        Self {
            block_len: 30,
            stride: 1,
            frame_step: 1,
        }
    }
}
