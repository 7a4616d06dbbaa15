use crate::error::{Error, Result};

use super::FrameView;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolMode {
    Average,
    Max,
}

impl std::str::FromStr for PoolMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "average" | "avg" => Ok(PoolMode::Average),
            "max" => Ok(PoolMode::Max),
            other => Err(Error::Config(format!("unknown pooling mode {other:?}"))),
        }
    }
}

/// Reduces one frame's `regions` slices to a single vector.
pub fn pool_frame(frame: &[f64], regions: usize, mode: PoolMode) -> Vec<f64> {
    let dim = frame.len() / regions;
    let mut slices = frame.chunks_exact(dim);
    let mut out = slices.next().expect("at least one region").to_vec();
    for s in slices {
        match mode {
            PoolMode::Average => out.iter_mut().zip(s).for_each(|(a, b)| *a += b),
            PoolMode::Max => out.iter_mut().zip(s).for_each(|(a, &b)| *a = a.max(b)),
        }
    }
    if mode == PoolMode::Average {
        out.iter_mut().for_each(|v| *v /= regions as f64);
    }
    out
}

/// One pooled vector per frame.
pub fn pool_block(frames: &FrameView<'_>, mode: PoolMode) -> Vec<Vec<f64>> {
    (0..frames.steps)
        .map(|t| pool_frame(frames.frame(t), frames.regions, mode))
        .collect()
}
