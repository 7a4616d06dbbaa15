//! Synthetic clips in which the class is only visible at one moving grid cell.
//!
//! Every class owns a fixed random unit signature vector. In each clip the
//! signature occupies a single cell that starts at the grid centre and, on
//! every frame after the first, moves to a uniformly chosen in-grid 4-neighbour
//! with probability [`MOVE_PROB`]. Every other cell holds i.i.d. Gaussian
//! noise with standard deviation `noise_sigma`. All values are rounded to
//! `f32` so the clips survive the cube format unchanged.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

use super::{write_cube, DatasetManifest, FeatureCubeClip, ManifestEntry, Split};

pub const MOVE_PROB: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub grid: usize,
    pub feat_dim: usize,
    pub classes: usize,
    pub clip_len: usize,
    pub train_clips: usize,
    pub test_clips: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            grid: 7,
            feat_dim: 32,
            classes: 6,
            clip_len: 30,
            train_clips: 60,
            test_clips: 30,
            noise_sigma: 0.3,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.grid >= 1
            && self.feat_dim >= 1
            && self.classes >= 2
            && self.clip_len >= 1
            && self.train_clips >= 1
            && self.test_clips >= 1
            && self.noise_sigma.is_finite()
            && self.noise_sigma >= 0.0
            && self.classes <= u16::MAX as usize;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid synthetic dataset config: {self:?}"
            )))
        }
    }
}

/// A generated clip plus the ground-truth signature positions.
#[derive(Debug, Clone)]
pub struct SynthClip {
    pub clip: FeatureCubeClip,
    pub split: Split,
    /// Region index `row * K + col` of the signature at every frame.
    pub path: Vec<usize>,
}

fn signatures(config: &SynthConfig, rng: &mut Rng) -> Vec<Vec<f64>> {
    (0..config.classes)
        .map(|_| {
            let v: Vec<f64> = (0..config.feat_dim).map(|_| rng.normal()).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter().map(|x| x / norm).collect()
        })
        .collect()
}

fn random_walk(grid: usize, steps: usize, rng: &mut Rng) -> Vec<usize> {
    let (mut row, mut col) = (grid / 2, grid / 2);
    let mut path = Vec::with_capacity(steps);
    for t in 0..steps {
        if t > 0 && rng.bernoulli(MOVE_PROB) {
            let mut moves = Vec::with_capacity(4);
            if row > 0 {
                moves.push((row - 1, col));
            }
            if row + 1 < grid {
                moves.push((row + 1, col));
            }
            if col > 0 {
                moves.push((row, col - 1));
            }
            if col + 1 < grid {
                moves.push((row, col + 1));
            }
            if !moves.is_empty() {
                (row, col) = moves[rng.below(moves.len())];
            }
        }
        path.push(row * grid + col);
    }
    path
}

fn make_clip(
    config: &SynthConfig,
    signature: &[f64],
    label: usize,
    id: String,
    rng: &mut Rng,
) -> (FeatureCubeClip, Vec<usize>) {
    let regions = config.grid * config.grid;
    let dim = config.feat_dim;
    let path = random_walk(config.grid, config.clip_len, rng);
    let mut data = Vec::with_capacity(config.clip_len * regions * dim);
    for &target in &path {
        for i in 0..regions {
            if i == target {
                data.extend(signature.iter().map(|&v| v as f32 as f64));
            } else {
                data.extend((0..dim).map(|_| (config.noise_sigma * rng.normal()) as f32 as f64));
            }
        }
    }
    let frames = Tensor::from_vec(&[config.clip_len, config.grid, config.grid, dim], data)
        .expect("shape matches");
    let clip = FeatureCubeClip {
        frames,
        labels: vec![label],
        clip_id: id,
        fps_tag: 1.0,
    };
    (clip, path)
}

/// Generates the dataset in memory; returns the class signatures and clips.
///
/// Classes are assigned round-robin within each split. Each clip draws from
/// its own stream forked off the seeded generator in a fixed order, so the
/// output does not depend on thread scheduling.
pub fn synth_clips(config: &SynthConfig) -> Result<(Vec<Vec<f64>>, Vec<SynthClip>)> {
    config.validate()?;
    let mut rng = Rng::new(config.seed);
    let sigs = signatures(config, &mut rng);
    let jobs: Vec<(Split, usize, Rng)> = [
        (Split::Train, config.train_clips),
        (Split::Test, config.test_clips),
    ]
    .into_iter()
    .flat_map(|(split, n)| (0..n).map(move |i| (split, i)))
    .map(|(split, i)| (split, i, rng.fork()))
    .collect();
    let clips = jobs
        .into_par_iter()
        .map(|(split, i, mut r)| {
            let label = i % config.classes;
            let id = format!("{}_{i:04}", split.name());
            let (clip, path) = make_clip(config, &sigs[label], label, id, &mut r);
            SynthClip { clip, split, path }
        })
        .collect();
    Ok((sigs, clips))
}

/// Writes every clip as `<split>_<index>.fcub` under `out_dir` plus a
/// `manifest.tsv`, and returns the manifest.
pub fn synth_generate(config: &SynthConfig, out_dir: &Path) -> Result<DatasetManifest> {
    let (_, clips) = synth_clips(config)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    clips
        .par_iter()
        .map(|c| write_cube(&out_dir.join(format!("{}.fcub", c.clip.clip_id)), &c.clip))
        .collect::<Result<Vec<_>>>()?;
    let manifest = DatasetManifest {
        class_names: (0..config.classes).map(|c| format!("class_{c}")).collect(),
        entries: clips
            .iter()
            .map(|c| ManifestEntry {
                path: PathBuf::from(format!("{}.fcub", c.clip.clip_id)),
                labels: c.clip.labels.clone(),
                split: c.split,
            })
            .collect(),
        root: out_dir.to_path_buf(),
    };
    manifest.write(&out_dir.join("manifest.tsv"))?;
    Ok(manifest)
}
