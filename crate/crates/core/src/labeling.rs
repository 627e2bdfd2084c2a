//! Ground-truth node labels and pixel-level evaluation.
//!
//! A node's label compares its mask `P_v` with the foreground of its
//! frame's annotation: `ξ = |P_v ∩ GT| / |P_v|` and
//! `μ = max_f |P_v ∩ GT_f| / |P_v ∪ GT_f|` over the 8-connected foreground
//! regions `GT_f`.
//!
//! Annotations use the change-detection encoding: 255 is foreground, 0 and
//! 50 are background, 85 and 170 are excluded from both labeling and
//! scoring. Any other value is treated as background.

use std::collections::{BTreeMap, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{list_frames, load_gray, GrayFrame, PixelSet};
use crate::mask::InstanceMask;
use crate::sampling::SamplingSet;
use crate::sobolev::{LabelMatrix, BACKGROUND, FOREGROUND};

pub const GT_FOREGROUND: u8 = 255;
pub const GT_OUTSIDE_ROI: u8 = 85;
pub const GT_UNKNOWN: u8 = 170;

/// Annotation of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthFrame {
    pub frame: usize,
    fg: PixelSet,
    regions: Vec<PixelSet>,
    excluded: PixelSet,
}

impl GroundTruthFrame {
    pub fn new(frame: usize, fg: PixelSet, excluded: PixelSet) -> Result<Self> {
        if (fg.width(), fg.height()) != (excluded.width(), excluded.height()) {
            return Err(Error::Structural("foreground and exclusion sets differ in frame size".into()));
        }
        let excluded = excluded.difference(&fg);
        let regions = connected_regions(&fg);
        Ok(Self { frame, fg, regions, excluded })
    }

    pub fn from_image(frame: usize, img: &GrayFrame) -> Self {
        let fg = PixelSet::from_frame(img, |v| v == GT_FOREGROUND);
        let excluded = PixelSet::from_frame(img, |v| v == GT_OUTSIDE_ROI || v == GT_UNKNOWN);
        let regions = connected_regions(&fg);
        Self { frame, fg, regions, excluded }
    }

    pub fn load(frame: usize, path: &Path) -> Result<Self> {
        Ok(Self::from_image(frame, &load_gray(path)?))
    }

    pub fn width(&self) -> usize {
        self.fg.width()
    }

    pub fn height(&self) -> usize {
        self.fg.height()
    }

    pub fn foreground(&self) -> &PixelSet {
        &self.fg
    }

    /// 8-connected components of the foreground, ordered by first pixel.
    pub fn regions(&self) -> &[PixelSet] {
        &self.regions
    }

    pub fn excluded(&self) -> &PixelSet {
        &self.excluded
    }
}

/// Loads every annotation image of a directory, keyed by frame number,
/// keeping only frames inside `roi` (inclusive) when given.
pub fn load_ground_truth_dir(dir: &Path, roi: Option<(usize, usize)>) -> Result<BTreeMap<usize, GroundTruthFrame>> {
    let mut out = BTreeMap::new();
    for (n, path) in list_frames(dir)? {
        if roi.is_some_and(|(a, b)| n < a || n > b) {
            continue;
        }
        out.insert(n, GroundTruthFrame::load(n, &path)?);
    }
    Ok(out)
}

/// Reads a `first last` frame range file.
pub fn read_temporal_roi(path: &Path) -> Result<(usize, usize)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let nums: Vec<usize> = text.split_whitespace().filter_map(|t| t.parse().ok()).collect();
    match nums[..] {
        [a, b] if a <= b => Ok((a, b)),
        _ => Err(Error::format("temporal ROI", format!("{}: expected two frame numbers `first last`", path.display()))),
    }
}

/// 8-connected components, each as a sorted pixel set.
pub fn connected_regions(px: &PixelSet) -> Vec<PixelSet> {
    let (w, h) = (px.width(), px.height());
    let mut on = vec![false; w * h];
    for &i in px.indices() {
        on[i as usize] = true;
    }
    let mut seen = vec![false; w * h];
    let mut regions = Vec::new();
    let mut queue = VecDeque::new();
    for &start in px.indices() {
        let start = start as usize;
        if seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut members = Vec::new();
        while let Some(i) = queue.pop_front() {
            members.push(i as u32);
            let (r, c) = ((i / w) as isize, (i % w) as isize);
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (rr, cc) = (r + dr, c + dc);
                    if rr < 0 || cc < 0 || rr >= h as isize || cc >= w as isize {
                        continue;
                    }
                    let j = rr as usize * w + cc as usize;
                    if on[j] && !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        members.sort_unstable();
        regions.push(PixelSet::from_sorted(w, h, members));
    }
    regions
}

/// `ξ = |P_v ∩ GT| / |P_v|`.
pub fn intersection_over_node(pv: &PixelSet, gt: &PixelSet) -> Result<f64> {
    if pv.is_empty() {
        return Err(Error::Degenerate("intersection over node of an empty mask".into()));
    }
    Ok(pv.intersection_len(gt) as f64 / pv.len() as f64)
}

/// `u(f) = |P_v ∩ GT_f| / |P_v ∪ GT_f|` for every region.
pub fn region_iou(pv: &PixelSet, regions: &[PixelSet]) -> Vec<f64> {
    regions
        .iter()
        .map(|g| {
            let union = pv.union_len(g);
            if union == 0 {
                0.0
            } else {
                pv.intersection_len(g) as f64 / union as f64
            }
        })
        .collect()
}

/// `μ = max_f u(f)`, 0 for no regions.
pub fn max_iou(u: &[f64]) -> f64 {
    u.iter().copied().fold(0.0, f64::max)
}

/// Foreground thresholds on `(ξ, μ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThresholdRule {
    pub t_mu_strong: f64,
    pub t_xi_mid: f64,
    pub t_mu_mid: f64,
    pub t_xi_high: f64,
    pub t_mu_low: f64,
}

impl Default for ThresholdRule {
    fn default() -> Self {
        Self { t_mu_strong: 0.25, t_xi_mid: 0.45, t_mu_mid: 0.05, t_xi_high: 0.9, t_mu_low: 0.02 }
    }
}

impl ThresholdRule {
    pub fn validate(&self) -> Result<()> {
        let all = [self.t_mu_strong, self.t_xi_mid, self.t_mu_mid, self.t_xi_high, self.t_mu_low];
        if all.iter().all(|t| (0.0..=1.0).contains(t)) {
            Ok(())
        } else {
            Err(Error::Parameter("label thresholds must lie in [0, 1]".into()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Background,
    Foreground,
}

impl Label {
    pub fn class(self) -> usize {
        match self {
            Label::Background => BACKGROUND,
            Label::Foreground => FOREGROUND,
        }
    }

    pub fn from_class(class: usize) -> Self {
        if class == FOREGROUND {
            Label::Foreground
        } else {
            Label::Background
        }
    }
}

pub fn decide_label(xi: f64, mu: f64, regions_empty: bool, rule: &ThresholdRule) -> Label {
    if regions_empty || mu == 0.0 || xi == 0.0 {
        return Label::Background;
    }
    let fg = mu > rule.t_mu_strong
        || (xi > rule.t_xi_mid && mu > rule.t_mu_mid)
        || (xi > rule.t_xi_high && mu > rule.t_mu_low);
    if fg {
        Label::Foreground
    } else {
        Label::Background
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeLabelDecision {
    pub xi: f64,
    pub mu: f64,
    pub label: Label,
}

/// Label of one mask against its frame's annotation. Excluded pixels are
/// removed from the mask first; a mask lying entirely on excluded pixels
/// gets no label.
pub fn label_instance(mask: &InstanceMask, gt: &GroundTruthFrame, rule: &ThresholdRule) -> Result<Option<NodeLabelDecision>> {
    let px = mask.pixels();
    if (px.width(), px.height()) != (gt.width(), gt.height()) {
        return Err(Error::Structural(format!(
            "mask {} on frame {} is {}×{}, annotation is {}×{}",
            mask.instance_id,
            mask.frame,
            px.height(),
            px.width(),
            gt.height(),
            gt.width()
        )));
    }
    let pv = px.difference(gt.excluded());
    if pv.is_empty() {
        return Ok(None);
    }
    let xi = intersection_over_node(&pv, gt.foreground())?;
    let mu = max_iou(&region_iou(&pv, gt.regions()));
    Ok(Some(NodeLabelDecision { xi, mu, label: decide_label(xi, mu, gt.regions().is_empty(), rule) }))
}

/// Per-node ground-truth labels; `None` where the frame has no annotation.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSignal {
    pub decisions: Vec<Option<NodeLabelDecision>>,
}

impl GraphSignal {
    pub fn n_nodes(&self) -> usize {
        self.decisions.len()
    }

    pub fn labeled(&self) -> impl Iterator<Item = (usize, Label)> + '_ {
        self.decisions.iter().enumerate().filter_map(|(i, d)| d.map(|d| (i, d.label)))
    }

    /// One-hot labels on the given nodes, which must all be labeled.
    pub fn label_matrix(&self, nodes: &[usize]) -> Result<LabelMatrix> {
        let known = nodes
            .iter()
            .map(|&i| match self.decisions.get(i) {
                Some(Some(d)) => Ok((i, d.label.class())),
                _ => Err(Error::Structural(format!("node {i} has no ground-truth label"))),
            })
            .collect::<Result<Vec<_>>>()?;
        LabelMatrix::from_classes(self.n_nodes(), 2, &known)
    }

    /// One-hot labels on every labeled node.
    pub fn full_label_matrix(&self) -> Result<LabelMatrix> {
        let nodes: Vec<usize> = self.labeled().map(|(i, _)| i).collect();
        if nodes.is_empty() {
            return Err(Error::Degenerate("no node has a ground-truth label".into()));
        }
        self.label_matrix(&nodes)
    }

    pub fn sampling_set(&self) -> Result<SamplingSet> {
        SamplingSet::new(self.labeled().map(|(i, _)| i).collect(), self.n_nodes())
    }
}

/// Labels of `masks` (one row each) from annotations keyed by frame number.
pub fn build_graph_signal(
    masks: &[InstanceMask],
    gts: &BTreeMap<usize, GroundTruthFrame>,
    rule: &ThresholdRule,
) -> Result<GraphSignal> {
    rule.validate()?;
    let decisions = masks
        .iter()
        .map(|m| match gts.get(&m.frame) {
            Some(gt) => label_instance(m, gt, rule),
            None => Ok(None),
        })
        .collect::<Result<_>>()?;
    Ok(GraphSignal { decisions })
}

/// Pixel counts of a foreground prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl std::ops::Add for Confusion {
    type Output = Confusion;

    fn add(self, o: Confusion) -> Confusion {
        Confusion { tp: self.tp + o.tp, fp: self.fp + o.fp, fn_: self.fn_ + o.fn_ }
    }
}

impl std::ops::AddAssign for Confusion {
    fn add_assign(&mut self, o: Confusion) {
        *self = *self + o;
    }
}

impl std::iter::Sum for Confusion {
    fn sum<I: Iterator<Item = Confusion>>(iter: I) -> Confusion {
        iter.fold(Confusion::default(), |a, b| a + b)
    }
}

impl Confusion {
    pub fn metrics(&self) -> Metrics {
        f_measure(self.tp, self.fp, self.fn_)
    }
}

/// Confusion of the union of the masks predicted foreground against one
/// annotation, ignoring excluded pixels.
pub fn pixel_confusion<'a>(
    predictions: impl IntoIterator<Item = (&'a InstanceMask, Label)>,
    gt: &GroundTruthFrame,
) -> Result<Confusion> {
    let (w, h) = (gt.width(), gt.height());
    let mut pred = vec![false; w * h];
    for (m, label) in predictions {
        let px = m.pixels();
        if (px.width(), px.height()) != (w, h) {
            return Err(Error::Structural(format!("mask {} does not match the annotation size", m.instance_id)));
        }
        if label == Label::Foreground {
            for &i in px.indices() {
                pred[i as usize] = true;
            }
        }
    }
    let mut truth = vec![false; w * h];
    for &i in gt.foreground().indices() {
        truth[i as usize] = true;
    }
    for &i in gt.excluded().indices() {
        pred[i as usize] = false;
        truth[i as usize] = false;
    }
    let mut c = Confusion::default();
    for (p, t) in pred.into_iter().zip(truth) {
        match (p, t) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

/// Precision, recall and their harmonic mean.
///
/// A ratio with a zero denominator is 1 when prediction and truth are both
/// empty and 0 otherwise.
pub fn f_measure(tp: u64, fp: u64, fn_: u64) -> Metrics {
    let both_empty = tp == 0 && fp == 0 && fn_ == 0;
    let ratio = |num: u64, den: u64| {
        if den == 0 {
            if both_empty {
                1.0
            } else {
                0.0
            }
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    // 2PR/(P+R) written in counts, which avoids rounding in P and R
    let f_measure = if tp > 0 {
        (2 * tp) as f64 / (2 * tp + fp + fn_) as f64
    } else if both_empty {
        1.0
    } else {
        0.0
    };
    Metrics { precision, recall, f_measure }
}
