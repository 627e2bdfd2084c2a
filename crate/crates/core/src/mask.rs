//! Instance masks produced by an external segmenter.
//!
//! Two on-disk encodings are read:
//!
//! * a JSON index
//!   `{"width": W, "height": H, "instances": {id: {frame: [[row, col, len], …]}}}`
//!   where each triple is a horizontal run of `len` pixels starting at
//!   `(row, col)`;
//! * a directory of binary PNGs named `<frame>_<instance>.png`, nonzero
//!   pixels belonging to the instance.
//!
//! Masks are always returned sorted by `(frame, instance_id)`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{load_gray, BoundingBox, PixelSet};

/// One segmented object instance in one frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceMask {
    pub instance_id: String,
    /// Frame number within its sequence.
    pub frame: usize,
    pixels: PixelSet,
    bbox: BoundingBox,
}

impl InstanceMask {
    pub fn new(instance_id: impl Into<String>, frame: usize, pixels: PixelSet) -> Result<Self> {
        let instance_id = instance_id.into();
        let bbox = pixels
            .bounding_box()
            .ok_or_else(|| Error::Structural(format!("instance {instance_id:?} on frame {frame} has no pixels")))?;
        Ok(Self { instance_id, frame, pixels, bbox })
    }

    pub fn pixels(&self) -> &PixelSet {
        &self.pixels
    }

    pub fn bounding_box(&self) -> &BoundingBox {
        &self.bbox
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct MaskIndex {
    width: usize,
    height: usize,
    instances: BTreeMap<String, BTreeMap<String, Vec<[usize; 3]>>>,
}

fn sort_masks(masks: &mut [InstanceMask]) {
    masks.sort_by(|a, b| (a.frame, &a.instance_id).cmp(&(b.frame, &b.instance_id)));
}

/// Reads a JSON run-length mask index.
pub fn load_mask_index(path: &Path) -> Result<Vec<InstanceMask>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let index: MaskIndex =
        serde_json::from_str(&text).map_err(|e| Error::format("mask index", format!("{}: {e}", path.display())))?;
    let mut masks = Vec::new();
    for (id, frames) in index.instances {
        for (frame_key, runs) in frames {
            let frame: usize = frame_key
                .parse()
                .map_err(|_| Error::format("mask index", format!("frame key {frame_key:?} is not a number")))?;
            let coords = runs.iter().flat_map(|&[r, c, len]| (c..c + len).map(move |cc| (r, cc)));
            let pixels = PixelSet::from_coords(index.width, index.height, coords)?;
            masks.push(InstanceMask::new(id.clone(), frame, pixels)?);
        }
    }
    sort_masks(&mut masks);
    Ok(masks)
}

fn runs_of(pixels: &PixelSet) -> Vec<[usize; 3]> {
    let mut runs: Vec<[usize; 3]> = Vec::new();
    for (r, c) in pixels.coords() {
        match runs.last_mut() {
            Some(last) if last[0] == r && last[1] + last[2] == c => last[2] += 1,
            _ => runs.push([r, c, 1]),
        }
    }
    runs
}

/// Writes masks as a JSON run-length index.
pub fn write_mask_index(path: &Path, masks: &[InstanceMask]) -> Result<()> {
    let first = masks.first().ok_or_else(|| Error::Structural("no masks to write".into()))?;
    let (width, height) = (first.pixels.width(), first.pixels.height());
    let mut instances: BTreeMap<String, BTreeMap<String, Vec<[usize; 3]>>> = BTreeMap::new();
    for m in masks {
        if (m.pixels.width(), m.pixels.height()) != (width, height) {
            return Err(Error::Structural("masks with different frame sizes".into()));
        }
        instances
            .entry(m.instance_id.clone())
            .or_default()
            .insert(m.frame.to_string(), runs_of(&m.pixels));
    }
    let text = serde_json::to_string(&MaskIndex { width, height, instances }).expect("mask index serializes");
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads `<frame>_<instance>.png` binary masks from a directory.
pub fn load_mask_dir(dir: &Path) -> Result<Vec<InstanceMask>> {
    let rd = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut masks = Vec::new();
    for entry in rd {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() != Some("png") {
            continue;
        }
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        let (frame, instance) = stem
            .split_once('_')
            .and_then(|(f, i)| Some((f.trim_start_matches(|c: char| !c.is_ascii_digit()).parse().ok()?, i)))
            .ok_or_else(|| Error::format("mask file name", format!("{} is not <frame>_<instance>.png", path.display())))?;
        let img = load_gray(&path)?;
        let pixels = PixelSet::from_frame(&img, |v| v != 0);
        if pixels.is_empty() {
            log::warn!("mask {} is empty, ignored", path.display());
            continue;
        }
        masks.push(InstanceMask::new(instance, frame, pixels)?);
    }
    sort_masks(&mut masks);
    Ok(masks)
}

/// Loads masks from either a JSON index file or a PNG directory.
pub fn load_masks(path: &Path) -> Result<Vec<InstanceMask>> {
    if path.is_dir() {
        load_mask_dir(path)
    } else {
        load_mask_index(path)
    }
}
