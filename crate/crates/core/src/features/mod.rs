//! Per-instance node features.
//!
//! Each instance mask `P_v` on frame `t` becomes one feature vector:
//!
//! | block | content |
//! |-------|---------|
//! | `vx` histogram + 6 statistics | horizontal Lucas–Kanade flow over `P_v` |
//! | `vy` histogram + 6 statistics | vertical flow over `P_v` |
//! | 4 intensity histograms | `I_t`, `I_{t-1}`, `B`, `\|I_t − B\|` over `P_v` |
//! | 4 LBP histograms | the same four images cropped to the bounding box |
//!
//! `B` is the temporal-median background of the sequence.

mod background;
mod flow;
mod histogram;
mod texture;

use std::collections::BTreeMap;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use background::{median_background, median_of_frames, BackgroundModel};
pub use flow::{lucas_kanade, FlowField, DEFAULT_WINDOW};
pub use histogram::{flow_statistics, intensity_histogram, value_histogram};
pub use texture::{lbp_bin, lbp_code, lbp_histogram, lbp_histogram_full, LBP_BINS};

use crate::error::{Error, Result};
use crate::frame::FrameSequence;
use crate::graph::FeatureMatrix;
use crate::mask::InstanceMask;

pub const STAT_COUNT: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum LbpVariant {
    #[default]
    #[serde(rename = "uniform-P8R1")]
    UniformP8R1,
}

impl LbpVariant {
    pub fn bins(self) -> usize {
        match self {
            LbpVariant::UniformP8R1 => LBP_BINS,
        }
    }
}

/// Block sizes of the node feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureLayout {
    pub of_hist_bins: usize,
    /// Flow histograms cover `[-flow_range, flow_range]` pixels per frame.
    pub flow_range: f64,
    pub intensity_bins: usize,
    pub lbp_variant: LbpVariant,
}

impl Default for FeatureLayout {
    fn default() -> Self {
        Self { of_hist_bins: 64, flow_range: 5.0, intensity_bins: 32, lbp_variant: LbpVariant::UniformP8R1 }
    }
}

impl FeatureLayout {
    pub fn total_dim(&self) -> usize {
        2 * (self.of_hist_bins + STAT_COUNT) + 4 * self.intensity_bins + 4 * self.lbp_variant.bins()
    }

    pub fn validate(&self) -> Result<()> {
        if self.of_hist_bins == 0 || self.intensity_bins == 0 || !(self.flow_range > 0.0) {
            return Err(Error::Parameter("feature layout needs positive bin counts and flow range".into()));
        }
        Ok(())
    }
}

/// Feature rows for a set of masks, in mask order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeFeatures {
    pub node_ids: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Index into the input masks of every row.
    pub mask_index: Vec<usize>,
    /// Ids of masks dropped because their frame has no predecessor.
    pub skipped: Vec<String>,
}

impl NodeFeatures {
    pub fn extend(&mut self, other: NodeFeatures, mask_offset: usize) {
        self.node_ids.extend(other.node_ids);
        self.rows.extend(other.rows);
        self.mask_index.extend(other.mask_index.into_iter().map(|i| i + mask_offset));
        self.skipped.extend(other.skipped);
    }

    pub fn into_matrix(self) -> Result<FeatureMatrix> {
        let cols = self.rows.first().map_or(0, Vec::len);
        let n = self.rows.len();
        FeatureMatrix::new(n, cols, self.rows.into_iter().flatten().collect(), self.node_ids)
    }
}

/// Node id `"<sequence>/<frame>/<instance>"`.
pub fn node_id(sequence: &str, mask: &InstanceMask) -> String {
    format!("{sequence}/{}/{}", mask.frame, mask.instance_id)
}

/// Builds one feature row per mask, skipping masks on the first frame.
pub fn node_feature_rows(
    seq: &FrameSequence,
    masks: &[InstanceMask],
    bg: &BackgroundModel,
    layout: &FeatureLayout,
    window: usize,
) -> Result<NodeFeatures> {
    layout.validate()?;
    let (h, w) = seq.dims();
    if bg.image.dims() != (h, w) {
        return Err(Error::Structural("background and frames differ in size".into()));
    }

    let mut out = NodeFeatures::default();
    let mut by_position: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (k, m) in masks.iter().enumerate() {
        if (m.pixels().height(), m.pixels().width()) != (h, w) {
            return Err(Error::Structural(format!(
                "mask {} is {}×{}, frames are {h}×{w}",
                node_id(seq.id(), m),
                m.pixels().height(),
                m.pixels().width()
            )));
        }
        match seq.position(m.frame) {
            Some(0) => {
                warn!("mask {} lies on the first frame and has no predecessor; skipped", node_id(seq.id(), m));
                out.skipped.push(node_id(seq.id(), m));
            }
            Some(pos) => by_position.entry(pos).or_default().push(k),
            None => {
                return Err(Error::Structural(format!(
                    "mask {} refers to a frame missing from the sequence",
                    node_id(seq.id(), m)
                )))
            }
        }
    }

    let per_frame: Vec<Vec<(usize, Vec<f64>)>> = by_position
        .into_par_iter()
        .map(|(pos, ks)| {
            let curr = &seq.frames()[pos];
            let prev = &seq.frames()[pos - 1];
            let flow = lucas_kanade(prev, curr, window)?;
            let diff = curr.abs_diff(&bg.image)?;
            ks.into_iter()
                .map(|k| Ok((k, instance_vector(&masks[k], curr, prev, &bg.image, &diff, &flow, layout)?)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut rows: Vec<(usize, Vec<f64>)> = per_frame.into_iter().flatten().collect();
    rows.sort_by_key(|(k, _)| *k);
    for (k, row) in rows {
        out.node_ids.push(node_id(seq.id(), &masks[k]));
        out.rows.push(row);
        out.mask_index.push(k);
    }
    Ok(out)
}

/// Feature matrix for one sequence.
pub fn build_node_features(
    seq: &FrameSequence,
    masks: &[InstanceMask],
    bg: &BackgroundModel,
    layout: &FeatureLayout,
) -> Result<FeatureMatrix> {
    node_feature_rows(seq, masks, bg, layout, DEFAULT_WINDOW)?.into_matrix()
}

fn instance_vector(
    mask: &InstanceMask,
    curr: &crate::frame::GrayFrame,
    prev: &crate::frame::GrayFrame,
    bg: &crate::frame::GrayFrame,
    diff: &crate::frame::GrayFrame,
    flow: &FlowField,
    layout: &FeatureLayout,
) -> Result<Vec<f64>> {
    let px = mask.pixels();
    let mut v = Vec::with_capacity(layout.total_dim());
    for field in [&flow.vx, &flow.vy] {
        let values: Vec<f64> = px.indices().iter().map(|&i| field[i as usize]).collect();
        v.extend(value_histogram(&values, layout.of_hist_bins, layout.flow_range)?);
        v.extend(flow_statistics(&values)?);
    }
    for img in [curr, prev, bg, diff] {
        v.extend(intensity_histogram(img, px, layout.intensity_bins)?);
    }
    let bbox = mask.bounding_box();
    for img in [curr, prev, bg, diff] {
        v.extend(lbp_histogram_full(&img.crop(bbox)));
    }
    debug_assert_eq!(v.len(), layout.total_dim());
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{GrayFrame, PixelSet};

    fn texture(r: isize, c: isize) -> u8 {
        let (r, c) = (r as f64, c as f64);
        (120.0 + 50.0 * (c / 5.0).sin() * (r / 7.0).cos() + 30.0 * ((r + 2.0 * c) / 11.0).sin()).round() as u8
    }

    fn scene(w: usize, h: usize, frames: usize, dr: isize, dc: isize) -> FrameSequence {
        // a bright square drifting one pixel per frame over a static texture;
        // the whole scene is offset by (dr, dc)
        let imgs = (0..frames)
            .map(|t| {
                GrayFrame::from_fn(w, h, |r, c| {
                    let (rr, cc) = (r as isize - dr, c as isize - dc);
                    let left = 8 + t as isize;
                    if (10..18).contains(&rr) && (left..left + 8).contains(&cc) {
                        230
                    } else {
                        texture(rr, cc)
                    }
                })
            })
            .collect();
        FrameSequence::from_frames("s", imgs).unwrap()
    }

    fn square_mask(frame: usize, w: usize, h: usize, dr: isize, dc: isize) -> InstanceMask {
        let left = 8 + frame as isize;
        let coords = (10..18).flat_map(|r| (left..left + 8).map(move |c| ((r + dr) as usize, (c + dc) as usize)));
        InstanceMask::new("sq", frame, PixelSet::from_coords(w, h, coords).unwrap()).unwrap()
    }

    #[test]
    fn layout_dimension() {
        assert_eq!(FeatureLayout::default().total_dim(), 504);
        let l = FeatureLayout { of_hist_bins: 10, intensity_bins: 8, ..Default::default() };
        assert_eq!(l.total_dim(), 2 * 16 + 32 + 4 * 59);
    }

    #[test]
    fn static_instance_on_static_video() {
        let f = GrayFrame::from_fn(32, 32, |r, c| texture(r as isize, c as isize));
        let seq = FrameSequence::from_frames("s", vec![f.clone(); 3]).unwrap();
        let bg = median_background(&seq, 1).unwrap();
        let coords = (5..15).flat_map(|r| (5..15).map(move |c| (r, c)));
        let m = InstanceMask::new("a", 2, PixelSet::from_coords(32, 32, coords).unwrap()).unwrap();
        let layout = FeatureLayout::default();
        let rows = node_feature_rows(&seq, &[m], &bg, &layout, 5).unwrap();
        let v = &rows.rows[0];
        assert_eq!(v.len(), 504);
        let stats_vx = &v[64..70];
        assert!(stats_vx.iter().all(|&s| s == 0.0));
        // I_t and B intensity histograms coincide
        let base = 2 * 70;
        assert_eq!(&v[base..base + 32], &v[base + 64..base + 96]);
        // |I_t − B| is all zero
        assert_eq!(v[base + 96], 1.0);
    }

    #[test]
    fn histogram_blocks_are_normalized() {
        let seq = scene(40, 32, 6, 0, 0);
        let bg = median_background(&seq, 1).unwrap();
        let masks: Vec<_> = (1..6).map(|t| square_mask(t, 40, 32, 0, 0)).collect();
        let layout = FeatureLayout::default();
        let feats = node_feature_rows(&seq, &masks, &bg, &layout, 5).unwrap();
        for v in &feats.rows {
            assert!(v.iter().all(|x| x.is_finite()));
            let mut off = 0;
            for block in [64, 6, 64, 6, 32, 32, 32, 32, 59, 59, 59, 59] {
                if block != 6 {
                    let s: f64 = v[off..off + block].iter().sum();
                    assert!((s - 1.0).abs() < 1e-10);
                }
                off += block;
            }
        }
        // the moving square has positive mean horizontal flow
        assert!(feats.rows[2][64 + 2] > 0.3);
    }

    #[test]
    fn first_frame_masks_are_skipped() {
        let seq = scene(40, 32, 3, 0, 0);
        let bg = median_background(&seq, 1).unwrap();
        let masks = vec![square_mask(0, 40, 32, 0, 0), square_mask(1, 40, 32, 0, 0), square_mask(2, 40, 32, 0, 0)];
        let feats = node_feature_rows(&seq, &masks, &bg, &FeatureLayout::default(), 5).unwrap();
        assert_eq!(feats.skipped, vec!["s/0/sq".to_string()]);
        assert_eq!(feats.node_ids, vec!["s/1/sq".to_string(), "s/2/sq".to_string()]);
        assert_eq!(feats.mask_index, vec![1, 2]);
    }

    #[test]
    fn permuting_masks_permutes_rows() {
        let seq = scene(40, 32, 4, 0, 0);
        let bg = median_background(&seq, 1).unwrap();
        let a = square_mask(1, 40, 32, 0, 0);
        let b = InstanceMask::new("bg", 3, PixelSet::from_coords(40, 32, (20..30).map(|c| (25, c))).unwrap()).unwrap();
        let c = square_mask(3, 40, 32, 0, 0);
        let layout = FeatureLayout::default();
        let fwd = node_feature_rows(&seq, &[a.clone(), b.clone(), c.clone()], &bg, &layout, 5).unwrap();
        let rev = node_feature_rows(&seq, &[c, b, a], &bg, &layout, 5).unwrap();
        assert_eq!(fwd.rows[0], rev.rows[2]);
        assert_eq!(fwd.rows[1], rev.rows[1]);
        assert_eq!(fwd.rows[2], rev.rows[0]);
    }

    #[test]
    fn translation_invariance() {
        let (w, h) = (64, 56);
        let layout = FeatureLayout::default();
        let base = scene(w, h, 8, 0, 0);
        let moved = scene(w, h, 8, 9, 13);
        let bg0 = median_background(&base, 1).unwrap();
        let bg1 = median_background(&moved, 1).unwrap();
        let m0 = square_mask(4, w, h, 0, 0);
        let m1 = square_mask(4, w, h, 9, 13);
        let f0 = node_feature_rows(&base, &[m0], &bg0, &layout, 5).unwrap();
        let f1 = node_feature_rows(&moved, &[m1], &bg1, &layout, 5).unwrap();
        assert_eq!(f0.rows, f1.rows);
    }

    #[test]
    fn mask_frame_must_exist() {
        let seq = scene(40, 32, 3, 0, 0);
        let bg = median_background(&seq, 1).unwrap();
        let m = square_mask(1, 40, 32, 0, 0);
        let m = InstanceMask::new("x", 9, m.pixels().clone()).unwrap();
        assert!(node_feature_rows(&seq, &[m], &bg, &FeatureLayout::default(), 5).is_err());
    }
}
