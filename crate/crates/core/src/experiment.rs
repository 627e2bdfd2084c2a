//! Monte Carlo cross-validation over video sequences.
//!
//! For every target sequence, density and trial, a fraction of the
//! annotated frames of the *other* sequences is drawn without replacement;
//! all labeled nodes in those frames form the sampled set. The recovered
//! classes are scored on every annotated frame of the target.
//!
//! Every trial draws from its own stream seeded by
//! `(master seed, sequence name, density, trial)`, so results do not depend
//! on scheduling.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Laplacian;
use crate::labeling::{pixel_confusion, Confusion, GraphSignal, GroundTruthFrame, Label, Metrics};
use crate::mask::InstanceMask;
use crate::sampling::sample_count;
use crate::sobolev::{solve, SolverOptions};

pub const DEFAULT_DENSITIES: [f64; 8] = [0.001, 0.005, 0.01, 0.02, 0.04, 0.06, 0.08, 0.10];
pub const DEFAULT_TRIALS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentPlan {
    /// Fractions of annotated frames to label, each in `(0, 1]`.
    pub densities: Vec<f64>,
    pub trials_per_density: usize,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self { densities: DEFAULT_DENSITIES.to_vec(), trials_per_density: DEFAULT_TRIALS }
    }
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.densities.is_empty() || self.trials_per_density == 0 {
            return Err(Error::Config("experiment plan has no densities or no trials".into()));
        }
        if let Some(d) = self.densities.iter().find(|d| !(**d > 0.0 && **d <= 1.0)) {
            return Err(Error::Config(format!("density {d} outside (0, 1]")));
        }
        Ok(())
    }
}

/// One graph node: an instance of a sequence.
#[derive(Debug, Clone)]
pub struct NodeRecord {
    pub sequence: usize,
    pub mask: InstanceMask,
}

/// Annotations of one sequence, keyed by frame number.
#[derive(Debug, Clone)]
pub struct SequenceTruth {
    pub name: String,
    pub gts: BTreeMap<usize, GroundTruthFrame>,
}

/// Everything a run needs; the graph covers every node of every sequence.
pub struct ExperimentInput<'a> {
    pub laplacian: &'a Laplacian,
    pub sequences: &'a [SequenceTruth],
    pub nodes: &'a [NodeRecord],
    pub signal: &'a GraphSignal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub sequence: String,
    pub density: f64,
    pub trial: usize,
    pub seed: u64,
    pub sampled_frames: usize,
    pub sampled_nodes: usize,
    pub confusion: Confusion,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedTrial {
    pub sequence: String,
    pub density: f64,
    pub trial: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitySummary {
    pub sequence: String,
    pub density: f64,
    pub trials: usize,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub mean_f_measure: f64,
    pub best_trial_f_measure: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub trials: Vec<TrialResult>,
    pub skipped: Vec<SkippedTrial>,
}

/// 64-bit FNV-1a.
fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one trial's random stream.
pub fn trial_seed(master: u64, sequence: &str, density: f64, trial: usize) -> u64 {
    let mut h = splitmix(master);
    for part in [fnv1a(sequence), density.to_bits(), trial as u64] {
        h = splitmix(h ^ part);
    }
    h
}

struct Index {
    /// Labeled nodes per (sequence, frame).
    labeled: HashMap<(usize, usize), Vec<usize>>,
    /// All nodes per (sequence, frame).
    all: HashMap<(usize, usize), Vec<usize>>,
}

fn build_index(input: &ExperimentInput) -> Index {
    let mut labeled: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    let mut all: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (i, node) in input.nodes.iter().enumerate() {
        let key = (node.sequence, node.mask.frame);
        all.entry(key).or_default().push(i);
        if input.signal.decisions[i].is_some() {
            labeled.entry(key).or_default().push(i);
        }
    }
    Index { labeled, all }
}

enum Outcome {
    Done(TrialResult),
    Skipped(SkippedTrial),
}

fn run_trial(
    input: &ExperimentInput,
    index: &Index,
    opts: &SolverOptions,
    target: usize,
    density: f64,
    trial: usize,
    seed: u64,
) -> Result<Outcome> {
    let name = &input.sequences[target].name;
    let eligible: Vec<(usize, usize)> = input
        .sequences
        .iter()
        .enumerate()
        .filter(|&(s, _)| s != target)
        .flat_map(|(s, seq)| seq.gts.keys().map(move |&f| (s, f)))
        .collect();
    let skip = |reason: String| {
        Ok(Outcome::Skipped(SkippedTrial { sequence: name.clone(), density, trial, reason }))
    };
    if eligible.is_empty() {
        return skip("no annotated frames outside the target sequence".into());
    }
    let count = sample_count(eligible.len(), density).clamp(1, eligible.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks = rand::seq::index::sample(&mut rng, eligible.len(), count).into_vec();
    picks.sort_unstable();

    let mut sampled: Vec<usize> =
        picks.iter().flat_map(|&p| index.labeled.get(&eligible[p]).into_iter().flatten().copied()).collect();
    sampled.sort_unstable();
    if sampled.is_empty() {
        return skip(format!("{count} sampled frames contain no labeled node"));
    }
    if let Some(&bad) = sampled.iter().find(|&&i| input.nodes[i].sequence == target) {
        return Err(Error::Verification(format!("target node {bad} entered the sampled set of {name}")));
    }

    let labels = input.signal.label_matrix(&sampled)?;
    let classes = solve(input.laplacian, &labels, opts)?.labels;

    let mut confusion = Confusion::default();
    for (&frame, gt) in &input.sequences[target].gts {
        let preds = index
            .all
            .get(&(target, frame))
            .into_iter()
            .flatten()
            .map(|&i| (&input.nodes[i].mask, Label::from_class(classes[i])));
        confusion += pixel_confusion(preds, gt)?;
    }
    Ok(Outcome::Done(TrialResult {
        sequence: name.clone(),
        density,
        trial,
        seed,
        sampled_frames: count,
        sampled_nodes: sampled.len(),
        confusion,
        metrics: confusion.metrics(),
    }))
}

/// Runs every (target sequence, density, trial) job.
pub fn run_experiment(
    input: &ExperimentInput,
    plan: &ExperimentPlan,
    opts: &SolverOptions,
    master_seed: u64,
) -> Result<ExperimentReport> {
    plan.validate()?;
    if input.nodes.len() != input.laplacian.n() || input.signal.n_nodes() != input.nodes.len() {
        return Err(Error::Structural(format!(
            "{} nodes, {} graph nodes, {} labels",
            input.nodes.len(),
            input.laplacian.n(),
            input.signal.n_nodes()
        )));
    }
    let index = build_index(input);
    let jobs: Vec<(usize, f64, usize)> = (0..input.sequences.len())
        .flat_map(|s| plan.densities.iter().flat_map(move |&d| (0..plan.trials_per_density).map(move |t| (s, d, t))))
        .collect();
    let outcomes: Vec<Outcome> = jobs
        .par_iter()
        .map(|&(s, d, t)| {
            let seed = trial_seed(master_seed, &input.sequences[s].name, d, t);
            run_trial(input, &index, opts, s, d, t, seed)
        })
        .collect::<Result<_>>()?;
    let mut report = ExperimentReport::default();
    for o in outcomes {
        match o {
            Outcome::Done(r) => report.trials.push(r),
            Outcome::Skipped(s) => {
                log::warn!("skipped {} density {} trial {}: {}", s.sequence, s.density, s.trial, s.reason);
                report.skipped.push(s)
            }
        }
    }
    Ok(report)
}

impl ExperimentReport {
    /// Per (sequence, density) means, in first-appearance order.
    pub fn summary(&self) -> Vec<DensitySummary> {
        let mut order: Vec<(String, u64)> = Vec::new();
        let mut groups: HashMap<(String, u64), Vec<&TrialResult>> = HashMap::new();
        for r in &self.trials {
            let key = (r.sequence.clone(), r.density.to_bits());
            if !groups.contains_key(&key) {
                order.push(key.clone());
            }
            groups.entry(key).or_default().push(r);
        }
        order
            .into_iter()
            .map(|key| {
                let rs = &groups[&key];
                let n = rs.len() as f64;
                let mean = |f: fn(&Metrics) -> f64| rs.iter().map(|r| f(&r.metrics)).sum::<f64>() / n;
                DensitySummary {
                    sequence: key.0.clone(),
                    density: f64::from_bits(key.1),
                    trials: rs.len(),
                    mean_precision: mean(|m| m.precision),
                    mean_recall: mean(|m| m.recall),
                    mean_f_measure: mean(|m| m.f_measure),
                    best_trial_f_measure: rs.iter().map(|r| r.metrics.f_measure).fold(0.0, f64::max),
                }
            })
            .collect()
    }

    /// Per sequence, the density with the highest mean F-measure (the
    /// smallest such density on ties).
    pub fn best(&self) -> Vec<DensitySummary> {
        let mut best: Vec<DensitySummary> = Vec::new();
        for s in self.summary() {
            match best.iter_mut().find(|b| b.sequence == s.sequence) {
                Some(b) => {
                    if s.mean_f_measure > b.mean_f_measure
                        || (s.mean_f_measure == b.mean_f_measure && s.density < b.density)
                    {
                        *b = s;
                    }
                }
                None => best.push(s),
            }
        }
        best
    }

    pub fn mean_f_at(&self, sequence: &str, density: f64) -> Option<f64> {
        self.summary()
            .into_iter()
            .find(|s| s.sequence == sequence && s.density == density)
            .map(|s| s.mean_f_measure)
    }

    pub fn results_csv(&self) -> String {
        let mut out = String::from("sequence,density,trial,tp,fp,fn,precision,recall,f_measure,seed,sampled_frames,sampled_nodes\n");
        for r in &self.trials {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                csv_field(&r.sequence),
                r.density,
                r.trial,
                r.confusion.tp,
                r.confusion.fp,
                r.confusion.fn_,
                r.metrics.precision,
                r.metrics.recall,
                r.metrics.f_measure,
                r.seed,
                r.sampled_frames,
                r.sampled_nodes
            );
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let best: BTreeSet<(String, u64)> =
            self.best().into_iter().map(|b| (b.sequence, b.density.to_bits())).collect();
        let mut out =
            String::from("sequence,density,trials,mean_precision,mean_recall,mean_f_measure,best_trial_f_measure,is_best\n");
        for s in self.summary() {
            let is_best = best.contains(&(s.sequence.clone(), s.density.to_bits()));
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                csv_field(&s.sequence),
                s.density,
                s.trials,
                s.mean_precision,
                s.mean_recall,
                s.mean_f_measure,
                s.best_trial_f_measure,
                is_best as u8
            );
        }
        out
    }

    /// Best-over-densities F-measure per sequence, then their mean.
    pub fn best_csv(&self) -> String {
        let best = self.best();
        let mut out = String::from("sequence,best_density,f_measure\n");
        for b in &best {
            let _ = writeln!(out, "{},{},{}", csv_field(&b.sequence), b.density, b.mean_f_measure);
        }
        if !best.is_empty() {
            let mean = best.iter().map(|b| b.mean_f_measure).sum::<f64>() / best.len() as f64;
            let _ = writeln!(out, "mean,,{mean}");
        }
        out
    }

    pub fn skipped_csv(&self) -> String {
        let mut out = String::from("sequence,density,trial,reason\n");
        for s in &self.skipped {
            let _ = writeln!(out, "{},{},{},{}", csv_field(&s.sequence), s.density, s.trial, csv_field(&s.reason));
        }
        out
    }

    /// Mean F-measure against density, one line per sequence, log-scaled
    /// density axis.
    pub fn curve_svg(&self) -> String {
        const W: f64 = 640.0;
        const H: f64 = 400.0;
        const PAD: f64 = 50.0;
        let summary = self.summary();
        let mut out = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
             <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
        );
        let densities: Vec<f64> = summary.iter().map(|s| s.density).collect();
        let lo = densities.iter().copied().fold(f64::INFINITY, f64::min).log10();
        let hi = densities.iter().copied().fold(f64::NEG_INFINITY, f64::max).log10();
        let span = if hi > lo { hi - lo } else { 1.0 };
        let x = |d: f64| PAD + (d.log10() - lo) / span * (W - 2.0 * PAD);
        let y = |f: f64| H - PAD - f * (H - 2.0 * PAD);
        let _ = writeln!(
            out,
            "<line x1=\"{PAD}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
             <line x1=\"{PAD}\" y1=\"{PAD}\" x2=\"{PAD}\" y2=\"{}\" stroke=\"black\"/>",
            H - PAD,
            W - PAD,
            H - PAD,
            H - PAD
        );
        for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let _ = writeln!(
                out,
                "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{tick}</text>",
                PAD - 6.0,
                y(tick) + 4.0
            );
        }
        let mut ticks: Vec<f64> = densities.clone();
        ticks.sort_by(f64::total_cmp);
        ticks.dedup();
        for d in ticks {
            let _ = writeln!(
                out,
                "<text x=\"{:.1}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{d}</text>",
                x(d),
                H - PAD + 16.0
            );
        }
        const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
        let mut names: Vec<&str> = Vec::new();
        for s in &summary {
            if !names.contains(&s.sequence.as_str()) {
                names.push(&s.sequence);
            }
        }
        for (k, name) in names.iter().enumerate() {
            let pts: Vec<String> = summary
                .iter()
                .filter(|s| s.sequence == *name)
                .map(|s| format!("{:.1},{:.1}", x(s.density), y(s.mean_f_measure)))
                .collect();
            let color = COLORS[k % COLORS.len()];
            let _ = writeln!(out, "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>", pts.join(" "));
            let _ = writeln!(
                out,
                "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{color}\">{}</text>",
                W - PAD + 4.0 - 120.0,
                PAD + 14.0 * k as f64,
                xml_escape(name)
            );
        }
        out.push_str("</svg>\n");
        out
    }

    /// Writes `results.csv`, `summary.csv`, `best.csv`, `skipped.csv` and
    /// `curve.svg` into `dir`.
    pub fn write_all(&self, dir: &Path, svg: bool) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut files = vec![
            ("results.csv", self.results_csv()),
            ("summary.csv", self.summary_csv()),
            ("best.csv", self.best_csv()),
            ("skipped.csv", self.skipped_csv()),
        ];
        if svg {
            files.push(("curve.svg", self.curve_svg()));
        }
        for (name, text) in files {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::PixelSet;
    use crate::graph::Graph;
    use crate::labeling::{build_graph_signal, ThresholdRule};

    /// Two sequences of `frames` frames, each with a foreground and a
    /// background instance; foreground nodes form one clique, background
    /// nodes another, joined by one weak edge.
    fn toy(frames: usize) -> (Laplacian, Vec<SequenceTruth>, Vec<NodeRecord>, GraphSignal) {
        let (w, h) = (4, 2);
        let fg_px = PixelSet::from_coords(w, h, [(0, 0), (0, 1)]).unwrap();
        let bg_px = PixelSet::from_coords(w, h, [(1, 2), (1, 3)]).unwrap();
        let mut seqs = Vec::new();
        let mut nodes = Vec::new();
        for s in 0..2 {
            let mut gts = BTreeMap::new();
            for f in 0..frames {
                gts.insert(f, GroundTruthFrame::new(f, fg_px.clone(), PixelSet::empty(w, h)).unwrap());
                nodes.push(NodeRecord { sequence: s, mask: InstanceMask::new("fg", f, fg_px.clone()).unwrap() });
                nodes.push(NodeRecord { sequence: s, mask: InstanceMask::new("bg", f, bg_px.clone()).unwrap() });
            }
            seqs.push(SequenceTruth { name: format!("seq{s}"), gts });
        }
        let n = nodes.len();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if i % 2 == j % 2 {
                    edges.push((i, j, 1.0));
                }
            }
        }
        edges.push((0, 1, 1e-3));
        let g = Graph::new(n, edges).unwrap();
        let masks: Vec<_> = nodes.iter().map(|r| r.mask.clone()).collect();
        // labels are per sequence; both share frame numbers, so label each half
        let mut decisions = Vec::new();
        for s in 0..2 {
            let part: Vec<_> = masks[s * 2 * frames..(s + 1) * 2 * frames].to_vec();
            decisions.extend(build_graph_signal(&part, &seqs[s].gts, &ThresholdRule::default()).unwrap().decisions);
        }
        (g.laplacian(), seqs, nodes, GraphSignal { decisions })
    }

    #[test]
    fn plan_defaults_and_validation() {
        let p = ExperimentPlan::default();
        assert_eq!(p.densities, vec![0.001, 0.005, 0.01, 0.02, 0.04, 0.06, 0.08, 0.10]);
        assert_eq!(p.trials_per_density, 5);
        assert!(ExperimentPlan { densities: vec![], trials_per_density: 5 }.validate().is_err());
        assert!(ExperimentPlan { densities: vec![1.5], trials_per_density: 5 }.validate().is_err());
        assert!(ExperimentPlan { densities: vec![0.5], trials_per_density: 0 }.validate().is_err());
    }

    #[test]
    fn seeds_differ_by_every_key() {
        let base = trial_seed(1, "a", 0.1, 0);
        assert_ne!(base, trial_seed(2, "a", 0.1, 0));
        assert_ne!(base, trial_seed(1, "b", 0.1, 0));
        assert_ne!(base, trial_seed(1, "a", 0.2, 0));
        assert_ne!(base, trial_seed(1, "a", 0.1, 1));
        assert_eq!(base, trial_seed(1, "a", 0.1, 0));
    }

    #[test]
    fn separable_toy_is_perfect_and_deterministic() {
        let (l, seqs, nodes, signal) = toy(10);
        let input = ExperimentInput { laplacian: &l, sequences: &seqs, nodes: &nodes, signal: &signal };
        let plan = ExperimentPlan { densities: vec![0.1, 0.5], trials_per_density: 3 };
        let opts = SolverOptions::default();
        let a = run_experiment(&input, &plan, &opts, 7).unwrap();
        assert_eq!(a.trials.len(), 12);
        assert!(a.skipped.is_empty());
        for r in &a.trials {
            assert_eq!(r.metrics.f_measure, 1.0, "{r:?}");
            assert_eq!(r.confusion, Confusion { tp: 20, fp: 0, fn_: 0 });
            assert_eq!(r.sampled_nodes, 2 * r.sampled_frames);
        }
        assert_eq!(a.trials[0].sampled_frames, 1);
        assert_eq!(a.trials[3].sampled_frames, 5);
        let b = run_experiment(&input, &plan, &opts, 7).unwrap();
        assert_eq!(a.results_csv(), b.results_csv());
        let c = run_experiment(&input, &plan, &opts, 8).unwrap();
        assert_ne!(
            a.trials.iter().map(|r| r.seed).collect::<Vec<_>>(),
            c.trials.iter().map(|r| r.seed).collect::<Vec<_>>()
        );
    }

    #[test]
    fn frames_without_labels_are_skipped() {
        let (l, seqs, nodes, mut signal) = toy(4);
        // strip labels from sequence 1
        for (i, n) in nodes.iter().enumerate() {
            if n.sequence == 1 {
                signal.decisions[i] = None;
            }
        }
        let input = ExperimentInput { laplacian: &l, sequences: &seqs, nodes: &nodes, signal: &signal };
        let plan = ExperimentPlan { densities: vec![0.5], trials_per_density: 2 };
        let r = run_experiment(&input, &plan, &SolverOptions::default(), 0).unwrap();
        assert_eq!(r.skipped.len(), 2);
        assert!(r.skipped.iter().all(|s| s.sequence == "seq0"));
        assert_eq!(r.trials.len(), 2);
        assert!(r.skipped_csv().lines().count() == 3);
    }

    #[test]
    fn summaries() {
        let mk = |seq: &str, density: f64, trial: usize, f: f64| TrialResult {
            sequence: seq.into(),
            density,
            trial,
            seed: 0,
            sampled_frames: 1,
            sampled_nodes: 1,
            confusion: Confusion::default(),
            metrics: Metrics { precision: f, recall: f, f_measure: f },
        };
        let report = ExperimentReport {
            trials: vec![mk("a", 0.1, 0, 0.5), mk("a", 0.1, 1, 0.75), mk("a", 0.2, 0, 0.625), mk("b", 0.1, 0, 0.9)],
            skipped: vec![],
        };
        let s = report.summary();
        assert_eq!(s.len(), 3);
        assert_eq!(s[0].mean_f_measure, 0.625);
        assert_eq!(s[0].best_trial_f_measure, 0.75);
        let best = report.best();
        // 0.625 at both densities for "a": the smaller density wins
        assert_eq!(best[0].density, 0.1);
        assert_eq!(best[1].sequence, "b");
        let csv = report.best_csv();
        assert!(csv.ends_with("mean,,0.7625\n"), "{csv}");
        assert!(report.summary_csv().lines().nth(1).unwrap().ends_with(",1"));
        let svg = report.curve_svg();
        assert!(svg.starts_with("<svg") && svg.matches("<polyline").count() == 2);
        assert_eq!(report.mean_f_at("b", 0.1), Some(0.9));
    }
}
