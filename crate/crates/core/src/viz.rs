//! Attention heat-maps: per-step grids as delimited text and grayscale PGM.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Bilinear upsampling of a `k × k` row-major map by an integer factor.
///
/// Output pixel `p` samples source coordinate `(p + 0.5) / factor - 0.5`,
/// clamped to `[0, k - 1]`.
pub fn upsample_bilinear(map: &[f64], k: usize, factor: usize) -> Result<Vec<f64>> {
    if k == 0 || map.len() != k * k {
        return Err(Error::dim("upsample_bilinear", &[k, k], &[map.len()]));
    }
    if factor == 0 {
        return Err(Error::Config("upsampling factor must be positive".into()));
    }
    let n = k * factor;
    let coord = |p: usize| -> (usize, usize, f64) {
        let s = ((p as f64 + 0.5) / factor as f64 - 0.5).clamp(0.0, (k - 1) as f64);
        let lo = s.floor() as usize;
        let hi = (lo + 1).min(k - 1);
        (lo, hi, s - lo as f64)
    };
    let axis: Vec<_> = (0..n).map(coord).collect();
    let mut out = Vec::with_capacity(n * n);
    for &(r0, r1, fr) in &axis {
        for &(c0, c1, fc) in &axis {
            let top = map[r0 * k + c0] * (1.0 - fc) + map[r0 * k + c1] * fc;
            let bottom = map[r1 * k + c0] * (1.0 - fc) + map[r1 * k + c1] * fc;
            out.push(top * (1.0 - fr) + bottom * fr);
        }
    }
    Ok(out)
}

/// Scales so the largest value becomes 255, rounding to the nearest level.
/// An all-zero map stays black.
pub fn to_gray(values: &[f64]) -> Vec<u8> {
    let max = values.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return vec![0; values.len()];
    }
    values
        .iter()
        .map(|v| (255.0 * v.max(0.0) / max).round() as u8)
        .collect()
}

/// Binary (P5) PGM bytes.
pub fn encode_pgm(width: usize, height: usize, pixels: &[u8]) -> Result<Vec<u8>> {
    if pixels.len() != width * height {
        return Err(Error::dim("encode_pgm", &[height, width], &[pixels.len()]));
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    Ok(out)
}

/// Tab-separated `k × k` grid, one row per line.
pub fn map_text(map: &[f64], k: usize) -> String {
    let mut s = String::new();
    for row in map.chunks(k) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
        writeln!(s, "{}", cells.join("\t")).unwrap();
    }
    s
}

/// Writes `block{b}_step{t}.tsv` and `.pgm` for every attention map.
///
/// `maps` is indexed by block, then step; each map has `k²` entries.
pub fn viz_attention(
    maps: &[Vec<Vec<f64>>],
    k: usize,
    out_dir: &Path,
    upsample: usize,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    for (b, block) in maps.iter().enumerate() {
        for (t, map) in block.iter().enumerate() {
            let stem = format!("block{b:03}_step{t:03}");
            let pixels = to_gray(&upsample_bilinear(map, k, upsample)?);
            let side = k * upsample;
            let text_path = out_dir.join(format!("{stem}.tsv"));
            fs::write(&text_path, map_text(map, k)).map_err(|e| Error::io(&text_path, e))?;
            let pgm_path = out_dir.join(format!("{stem}.pgm"));
            fs::write(&pgm_path, encode_pgm(side, side, &pixels)?)
                .map_err(|e| Error::io(&pgm_path, e))?;
            written.push(text_path);
            written.push(pgm_path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_map_is_white() {
        let map = vec![1.0 / 49.0; 49];
        let up = upsample_bilinear(&map, 7, 4).unwrap();
        assert_eq!(up.len(), 28 * 28);
        assert!(to_gray(&up).iter().all(|&p| p == 255));
    }

    #[test]
    fn one_hot_without_upsampling() {
        let mut map = vec![0.0; 49];
        map[24] = 1.0;
        let gray = to_gray(&upsample_bilinear(&map, 7, 1).unwrap());
        assert_eq!(gray.iter().filter(|&&p| p == 255).count(), 1);
        assert_eq!(gray[24], 255);
        assert_eq!(gray.iter().map(|&p| p as u32).sum::<u32>(), 255);
    }

    #[test]
    fn corner_map_doubled() {
        // Per-axis weights on the second source cell: 0, 0.25, 0.75, 1.
        let up = upsample_bilinear(&[0.0, 0.0, 0.0, 1.0], 2, 2).unwrap();
        let w = [0.0, 0.25, 0.75, 1.0];
        for r in 0..4 {
            for c in 0..4 {
                assert!((up[r * 4 + c] - w[r] * w[c]).abs() < 1e-12);
            }
        }
        let gray = to_gray(&up);
        assert_eq!(&gray[..4], &[0, 0, 0, 0]);
        assert_eq!(&gray[4..8], &[0, 16, 48, 64]);
        assert_eq!(&gray[12..], &[0, 64, 191, 255]);
    }

    #[test]
    fn pgm_header() {
        let bytes = encode_pgm(2, 1, &[0, 255]).unwrap();
        assert_eq!(bytes, b"P5\n2 1\n255\n\x00\xff");
        assert!(encode_pgm(2, 2, &[0]).is_err());
    }

    #[test]
    fn writes_both_files_per_step() {
        let dir = tempfile::tempdir().unwrap();
        let maps = vec![vec![vec![0.25; 4]; 3]];
        let files = viz_attention(&maps, 2, dir.path(), 3).unwrap();
        assert_eq!(files.len(), 6);
        let pgm = std::fs::read(dir.path().join("block000_step002.pgm")).unwrap();
        assert_eq!(pgm.len(), b"P5\n6 6\n255\n".len() + 36);
        let text = std::fs::read_to_string(dir.path().join("block000_step000.tsv")).unwrap();
        assert_eq!(text, "0.250000\t0.250000\n0.250000\t0.250000\n");
    }

    #[test]
    fn unwritable_directory_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, b"x").unwrap();
        let err = viz_attention(&[vec![vec![1.0]]], 1, &blocker.join("sub"), 1).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
