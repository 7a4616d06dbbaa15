use crate::error::{Error, Result};

use super::{FeatureCubeClip, FrameView};

/// A fixed-length run of frames cut from a clip.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    /// `[steps × regions × dim]`.
    pub data: Vec<f64>,
    pub steps: usize,
    pub regions: usize,
    pub dim: usize,
    /// Source frame index of every step.
    pub frame_indices: Vec<usize>,
    /// Set when the clip was too short and the last frame was repeated.
    pub padded: bool,
}

impl Block {
    pub fn view(&self) -> FrameView<'_> {
        FrameView {
            data: &self.data,
            steps: self.steps,
            regions: self.regions,
            dim: self.dim,
        }
    }

    pub fn start(&self) -> usize {
        self.frame_indices[0]
    }
}

fn gather(clip: &FeatureCubeClip, indices: Vec<usize>, padded: bool) -> Block {
    let view = clip.view();
    let mut data = Vec::with_capacity(indices.len() * view.regions * view.dim);
    for &t in &indices {
        data.extend_from_slice(view.frame(t));
    }
    Block {
        data,
        steps: indices.len(),
        regions: view.regions,
        dim: view.dim,
        frame_indices: indices,
        padded,
    }
}

/// Cuts a clip into blocks of `block_len` frames spaced `frame_step` apart,
/// with consecutive blocks starting `stride` frames later.
///
/// Blocks that would run past the end are dropped. A clip too short for even
/// one block yields a single block padded by repeating its final frame.
pub fn split_into_blocks(
    clip: &FeatureCubeClip,
    block_len: usize,
    stride: usize,
    frame_step: usize,
) -> Result<Vec<Block>> {
    if block_len == 0 || stride == 0 || frame_step == 0 {
        return Err(Error::Config(format!(
            "block_len, stride and frame_step must be >= 1 (got {block_len}, {stride}, {frame_step})"
        )));
    }
    let n = clip.steps();
    let span = (block_len - 1) * frame_step + 1;
    if span > n {
        let last = n - 1;
        let indices = (0..block_len).map(|j| (j * frame_step).min(last)).collect();
        return Ok(vec![gather(clip, indices, true)]);
    }
    Ok((0..=n - span)
        .step_by(stride)
        .map(|offset| {
            let indices = (0..block_len).map(|j| offset + j * frame_step).collect();
            gather(clip, indices, false)
        })
        .collect())
}
