//! `FCUB` feature-cube files.
//!
//! Layout, all integers and floats little-endian:
//!
//! | offset      | size      | field                                   |
//! |-------------|-----------|-----------------------------------------|
//! | 0           | 4         | magic `FCUB`                            |
//! | 4           | 4         | `u32` version (1)                       |
//! | 8           | 4         | `u32` T_clip                            |
//! | 12          | 4         | `u32` K                                 |
//! | 16          | 4         | `u32` D                                 |
//! | 20          | 2         | `u16` label count `n`                   |
//! | 22          | 2n        | `u16` labels                            |
//! | 22 + 2n     | 4·T·K·K·D | `f32` payload, t-major, row-major, channel |
//! | end − 4     | 4         | `u32` CRC-32 of all preceding bytes     |
//!
//! Values are widened to `f64` on load, so a round trip is bit-exact for any
//! clip whose values are representable as `f32`.

use std::path::Path;

use crate::codec::{Reader, WriteLe};
use crate::error::{Error, FormatError, Result};
use crate::tensor::Tensor;

use super::FeatureCubeClip;

pub const CUBE_MAGIC: [u8; 4] = *b"FCUB";
pub const CUBE_VERSION: u32 = 1;

pub fn encode_cube(clip: &FeatureCubeClip) -> Result<Vec<u8>> {
    let dims = [clip.steps(), clip.grid(), clip.dim()];
    if dims.iter().any(|&v| v > u32::MAX as usize) || clip.labels.len() > u16::MAX as usize {
        return Err(Error::Data("clip too large for the cube format".into()));
    }
    let mut out = Vec::with_capacity(26 + 2 * clip.labels.len() + 4 * clip.frames.len());
    out.extend_from_slice(&CUBE_MAGIC);
    out.put_u32(CUBE_VERSION);
    for d in dims {
        out.put_u32(d as u32);
    }
    out.put_u16(clip.labels.len() as u16);
    for &l in &clip.labels {
        let l = u16::try_from(l).map_err(|_| Error::Data(format!("label {l} exceeds u16")))?;
        out.put_u16(l);
    }
    for &v in clip.frames.data() {
        let narrow = v as f32;
        if !narrow.is_finite() {
            return Err(Error::Data(format!(
                "value {v} is not representable as a finite f32"
            )));
        }
        out.put_f32(narrow);
    }
    out.put_crc();
    Ok(out)
}

pub fn decode_cube(bytes: &[u8], clip_id: &str) -> Result<FeatureCubeClip> {
    let mut r = Reader::new(bytes);
    r.magic(CUBE_MAGIC)?;
    r.version(CUBE_VERSION)?;
    let steps = r.u32()? as usize;
    let grid = r.u32()? as usize;
    let dim = r.u32()? as usize;
    if steps == 0 || grid == 0 || dim == 0 {
        return Err(FormatError::Malformed(format!(
            "zero extent in [{steps}, {grid}, {grid}, {dim}]"
        ))
        .into());
    }
    let n_labels = r.u16()? as usize;
    let labels = (0..n_labels)
        .map(|_| r.u16().map(usize::from))
        .collect::<Result<Vec<_>, _>>()?;
    let count = steps
        .checked_mul(grid * grid)
        .and_then(|v| v.checked_mul(dim))
        .ok_or_else(|| FormatError::Malformed("payload size overflows".into()))?;
    let needed = count * 4 + 4;
    if r.remaining() < needed {
        return Err(FormatError::Truncated {
            offset: r.pos(),
            needed,
            available: r.remaining(),
        }
        .into());
    }
    let data = (0..count)
        .map(|_| r.f32().map(f64::from))
        .collect::<Result<Vec<_>, _>>()?;
    r.finish_crc()?;
    let frames = Tensor::from_vec(&[steps, grid, grid, dim], data)?;
    FeatureCubeClip::new(frames, labels, clip_id)
}

pub fn write_cube(path: &Path, clip: &FeatureCubeClip) -> Result<()> {
    let bytes = encode_cube(clip)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Reads a cube; the clip id is the file stem.
pub fn read_cube(path: &Path) -> Result<FeatureCubeClip> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    decode_cube(&bytes, &id)
}
