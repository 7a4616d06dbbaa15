//! Feature cubes, their on-disk format, block sampling and the synthetic
//! dataset generator.
//!
//! A frame is a `K × K` grid of `D`-dimensional slices. Slices are indexed
//! row-major, `i = row * K + col`, and stored contiguously so that frame `t`,
//! slice `i`, channel `j` lives at `((t * K² + i) * D) + j`.

mod blocks;
mod cube;
mod manifest;
mod pool;
mod synth;

pub use blocks::{split_into_blocks, Block};
pub use cube::{decode_cube, encode_cube, read_cube, write_cube, CUBE_MAGIC, CUBE_VERSION};
pub use manifest::{DatasetManifest, ManifestEntry, Split};
pub use pool::{pool_block, pool_frame, PoolMode};
pub use synth::{synth_clips, synth_generate, SynthClip, SynthConfig, MOVE_PROB};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Borrowed `[steps × regions × dim]` frame sequence.
#[derive(Debug, Clone, Copy)]
pub struct FrameView<'a> {
    pub data: &'a [f64],
    pub steps: usize,
    pub regions: usize,
    pub dim: usize,
}

impl<'a> FrameView<'a> {
    pub fn new(data: &'a [f64], steps: usize, regions: usize, dim: usize) -> Result<Self> {
        if data.len() != steps * regions * dim {
            return Err(Error::dim(
                "FrameView",
                &[data.len()],
                &[steps, regions, dim],
            ));
        }
        Ok(Self {
            data,
            steps,
            regions,
            dim,
        })
    }

    pub fn frame(&self, t: usize) -> &'a [f64] {
        let n = self.regions * self.dim;
        &self.data[t * n..(t + 1) * n]
    }

    pub fn slice(&self, t: usize, i: usize) -> &'a [f64] {
        let start = (t * self.regions + i) * self.dim;
        &self.data[start..start + self.dim]
    }
}

/// One clip's feature cubes and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCubeClip {
    /// `[T_clip, K, K, D]`.
    pub frames: Tensor,
    pub labels: Vec<usize>,
    pub clip_id: String,
    /// Nominal sampling rate of the stored frames. Not persisted by the cube
    /// format.
    pub fps_tag: f64,
}

impl FeatureCubeClip {
    pub fn new(frames: Tensor, labels: Vec<usize>, clip_id: impl Into<String>) -> Result<Self> {
        let s = frames.shape();
        if s.len() != 4 || s[1] != s[2] {
            return Err(Error::Data(format!(
                "clip tensor must be [T, K, K, D], got {s:?}"
            )));
        }
        if labels.is_empty() {
            return Err(Error::Data("clip needs at least one label".into()));
        }
        if !frames.is_finite() {
            return Err(Error::Data("clip contains non-finite values".into()));
        }
        Ok(Self {
            frames,
            labels,
            clip_id: clip_id.into(),
            fps_tag: 1.0,
        })
    }

    pub fn steps(&self) -> usize {
        self.frames.shape()[0]
    }

    pub fn grid(&self) -> usize {
        self.frames.shape()[1]
    }

    pub fn regions(&self) -> usize {
        self.grid() * self.grid()
    }

    pub fn dim(&self) -> usize {
        self.frames.shape()[3]
    }

    pub fn view(&self) -> FrameView<'_> {
        FrameView {
            data: self.frames.data(),
            steps: self.steps(),
            regions: self.regions(),
            dim: self.dim(),
        }
    }
}
