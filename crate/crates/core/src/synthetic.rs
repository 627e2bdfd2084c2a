//! Generated two-sequence video datasets with exact masks and annotations.
//!
//! Each sequence shows a static textured scene with a bright square sliding
//! across its upper half (the foreground instance) and two static patches
//! in its lower half (background instances). Frames are numbered from 1.
//! The first annotated frame is 2, since frame 1 has no predecessor for
//! optical flow.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{GrayFrame, PixelSet};
use crate::mask::{write_mask_index, InstanceMask};
use crate::pipeline::{PipelineConfig, SequenceSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticOptions {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub sequences: usize,
    pub square: usize,
    /// Uniform per-pixel noise amplitude in gray levels.
    pub noise: u8,
    pub seed: u64,
}

impl Default for SyntheticOptions {
    fn default() -> Self {
        Self { width: 64, height: 64, frames: 30, sequences: 2, square: 10, noise: 3, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticSequence {
    pub name: String,
    /// Frame numbers, starting at 1.
    pub numbers: Vec<usize>,
    pub frames: Vec<GrayFrame>,
    pub masks: Vec<InstanceMask>,
    /// Annotation images in the change-detection encoding.
    pub ground_truth: Vec<GrayFrame>,
    /// First and last annotated frame numbers.
    pub roi: (usize, usize),
}

fn texture(k: usize, r: f64, c: f64) -> f64 {
    let a = 5.0 + k as f64;
    110.0 + 35.0 * (c / a).sin() * (r / (a + 2.0)).cos() + 20.0 * ((r + 2.0 * c) / 9.0).sin()
}

fn rect(w: usize, h: usize, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> Result<PixelSet> {
    PixelSet::from_coords(w, h, rows.flat_map(|r| cols.clone().map(move |c| (r, c))))
}

/// Builds the dataset in memory.
pub fn generate(opts: &SyntheticOptions) -> Result<Vec<SyntheticSequence>> {
    let (w, h, s) = (opts.width, opts.height, opts.square);
    if w < 32 || h < 32 || opts.frames < 3 || opts.sequences < 2 || s < 2 || s > h / 3 {
        return Err(Error::Parameter("synthetic dataset needs ≥32×32 frames, ≥3 frames, ≥2 sequences".into()));
    }
    let mut out = Vec::with_capacity(opts.sequences);
    for k in 0..opts.sequences {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(k as u64));
        let top = h / 8 + (k * 3) % (h / 4);
        let start = 2.0 + k as f64;
        // about one pixel per frame keeps the flow inside the square well posed
        let speed = (((w - s - 2) as f64 - start) / (opts.frames - 1) as f64).min(1.0 + 0.25 * k as f64);
        let patches = [
            rect(w, h, h * 5 / 8..h * 5 / 8 + h / 8, w / 8..w / 8 + w / 5)?,
            rect(w, h, h * 11 / 16..h * 11 / 16 + h / 6, w / 2..w / 2 + w / 4)?,
        ];
        let mut seq = SyntheticSequence {
            name: format!("synthetic{k}"),
            numbers: Vec::new(),
            frames: Vec::new(),
            masks: Vec::new(),
            ground_truth: Vec::new(),
            roi: (2, opts.frames),
        };
        for t in 0..opts.frames {
            let n = t + 1;
            let left = (start + speed * t as f64).round() as usize;
            let square = rect(w, h, top..top + s, left..left + s)?;
            let mut img = GrayFrame::from_fn(w, h, |r, c| {
                let mut v = texture(k, r as f64, c as f64);
                if patches[0].contains(r, c) {
                    v = 60.0 + 0.5 * (v - 110.0);
                } else if patches[1].contains(r, c) {
                    v = 170.0 + 0.5 * (v - 110.0);
                }
                v.round().clamp(0.0, 255.0) as u8
            });
            // the square carries its own texture
            for (r, c) in square.coords() {
                let (u, v) = ((r - top) as f64, (c - left) as f64);
                img.set(r, c, (215.0 + 30.0 * (u / 1.7).sin() * (v / 1.7).sin()).round() as u8);
            }
            if opts.noise > 0 {
                let a = opts.noise as i32;
                for r in 0..h {
                    for c in 0..w {
                        let v = img.get(r, c) as i32 + rng.random_range(-a..=a);
                        img.set(r, c, v.clamp(0, 255) as u8);
                    }
                }
            }
            let mut gt = GrayFrame::filled(w, h, 0);
            for (r, c) in square.coords() {
                gt.set(r, c, 255);
            }
            seq.masks.push(InstanceMask::new("square", n, square)?);
            for (p, px) in patches.iter().enumerate() {
                seq.masks.push(InstanceMask::new(format!("patch{p}"), n, px.clone())?);
            }
            seq.numbers.push(n);
            seq.frames.push(img);
            seq.ground_truth.push(gt);
        }
        out.push(seq);
    }
    Ok(out)
}

/// Writes the dataset under `dir` in the change-detection directory layout
/// and returns the path of a ready-to-run pipeline config.
///
/// ```text
/// dir/config.json
/// dir/<sequence>/input/in000001.png …
/// dir/<sequence>/groundtruth/gt000001.png …
/// dir/<sequence>/masks.json
/// dir/<sequence>/temporalROI.txt
/// ```
pub fn write_dataset(dir: &Path, opts: &SyntheticOptions) -> Result<PathBuf> {
    let seqs = generate(opts)?;
    let mut specs = Vec::new();
    for seq in &seqs {
        let root = dir.join(&seq.name);
        let input = root.join("input");
        let gt = root.join("groundtruth");
        for d in [&input, &gt] {
            std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
        }
        for ((n, f), g) in seq.numbers.iter().zip(&seq.frames).zip(&seq.ground_truth) {
            f.save_png(&input.join(format!("in{n:06}.png")))?;
            g.save_png(&gt.join(format!("gt{n:06}.png")))?;
        }
        write_mask_index(&root.join("masks.json"), &seq.masks)?;
        let roi = root.join("temporalROI.txt");
        std::fs::write(&roi, format!("{} {}\n", seq.roi.0, seq.roi.1)).map_err(|e| Error::io(&roi, e))?;
        specs.push(SequenceSpec {
            name: seq.name.clone(),
            frames: PathBuf::from(&seq.name).join("input"),
            masks: PathBuf::from(&seq.name).join("masks.json"),
            gt: Some(PathBuf::from(&seq.name).join("groundtruth")),
            roi: Some(PathBuf::from(&seq.name).join("temporalROI.txt")),
        });
    }
    let config = PipelineConfig { sequences: specs, workdir: PathBuf::from("work"), ..Default::default() };
    let path = dir.join("config.json");
    config.save(&path)?;
    Ok(path)
}
