//! Batch pipeline stages driven by one JSON configuration.
//!
//! Relative paths in a config file are resolved against the file's
//! directory. Stage outputs go to the work directory:
//!
//! | file | written by |
//! |------|-----------|
//! | `features.bin` | [`cmd_features`] |
//! | `skipped_masks.txt` | [`cmd_features`] |
//! | `graph.txt`, `graph_report.json` | [`cmd_graph`] |
//! | `results.csv`, `summary.csv`, `best.csv`, `skipped.csv`, `curve.svg` | [`cmd_experiment`] |

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{run_experiment, ExperimentInput, ExperimentPlan, ExperimentReport, NodeRecord, SequenceTruth};
use crate::features::{median_background, node_feature_rows, FeatureLayout, NodeFeatures, DEFAULT_WINDOW};
use crate::frame::FrameSequence;
use crate::graph::{build_knn_graph, FeatureMatrix, Graph, GraphOptions, KernelBandwidth};
use crate::io::{read_features, read_graph, read_labels, write_features, write_graph, write_recovered};
use crate::labeling::{build_graph_signal, load_ground_truth_dir, read_temporal_roi, GraphSignal, GroundTruthFrame, ThresholdRule};
use crate::mask::{load_masks, InstanceMask};
use crate::sobolev::{solve, RecoveredSignal, SolverMethod, SolverOptions};
use crate::verify::{run_all, SuiteResult, VerifyOptions};

/// Input locations of one video sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceSpec {
    pub name: String,
    /// Directory of frame images.
    pub frames: PathBuf,
    /// JSON mask index or directory of per-instance PNGs.
    pub masks: PathBuf,
    /// Directory of annotation images, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt: Option<PathBuf>,
    /// `first last` file restricting the annotated frames.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roi: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub sequences: Vec<SequenceSpec>,
    pub workdir: PathBuf,
    pub layout: FeatureLayout,
    pub graph: GraphOptions,
    pub solver: SolverOptions,
    pub plan: ExperimentPlan,
    pub rule: ThresholdRule,
    pub seed: u64,
    /// Every `background_stride`-th frame enters the median background.
    pub background_stride: usize,
    pub lk_window: usize,
    /// Also write `curve.svg`.
    pub svg: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sequences: Vec::new(),
            workdir: PathBuf::from("work"),
            layout: FeatureLayout::default(),
            graph: GraphOptions::default(),
            solver: SolverOptions::default(),
            plan: ExperimentPlan::default(),
            rule: ThresholdRule::default(),
            seed: 0,
            background_stride: 1,
            lk_window: DEFAULT_WINDOW,
            svg: true,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Reads a config file, resolving relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.workdir);
        for s in &mut self.sequences {
            fix(&mut s.frames);
            fix(&mut s.masks);
            if let Some(g) = &mut s.gt {
                fix(g);
            }
            if let Some(r) = &mut s.roi {
                fix(r);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sequences.is_empty() {
            return Err(Error::Config("no sequences configured".into()));
        }
        let mut names: Vec<&str> = self.sequences.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("sequence names must be unique".into()));
        }
        if self.background_stride == 0 {
            return Err(Error::Config("background_stride must be at least 1".into()));
        }
        if self.lk_window.is_multiple_of(2) {
            return Err(Error::Config("lk_window must be odd".into()));
        }
        if self.graph.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        self.layout.validate()?;
        self.rule.validate()?;
        self.solver.params().validate()
    }

    pub fn features_path(&self) -> PathBuf {
        self.workdir.join("features.bin")
    }

    pub fn graph_path(&self) -> PathBuf {
        self.workdir.join("graph.txt")
    }

    fn ensure_workdir(&self) -> Result<()> {
        std::fs::create_dir_all(&self.workdir).map_err(|e| Error::io(&self.workdir, e))
    }
}

/// One sequence with its frames, masks and annotations.
pub struct LoadedSequence {
    pub frames: FrameSequence,
    pub masks: Vec<InstanceMask>,
    pub gts: BTreeMap<usize, GroundTruthFrame>,
}

pub fn load_sequence(spec: &SequenceSpec, need_gt: bool) -> Result<LoadedSequence> {
    let frames = FrameSequence::load_dir(&spec.name, &spec.frames)?;
    let masks = load_masks(&spec.masks)?;
    let gts = match (&spec.gt, need_gt) {
        (Some(dir), true) => {
            let roi = spec.roi.as_deref().map(read_temporal_roi).transpose()?;
            load_ground_truth_dir(dir, roi)?
        }
        _ => BTreeMap::new(),
    };
    Ok(LoadedSequence { frames, masks, gts })
}

/// Node features of every sequence, with the mask behind each row.
pub struct Dataset {
    pub features: FeatureMatrix,
    pub skipped: Vec<String>,
    pub nodes: Vec<NodeRecord>,
    pub truths: Vec<SequenceTruth>,
}

pub fn build_dataset(cfg: &PipelineConfig, need_gt: bool) -> Result<Dataset> {
    cfg.validate()?;
    let mut all = NodeFeatures::default();
    let mut nodes = Vec::new();
    let mut truths = Vec::new();
    for (k, spec) in cfg.sequences.iter().enumerate() {
        let seq = load_sequence(spec, need_gt)?;
        let bg = median_background(&seq.frames, cfg.background_stride)?;
        let rows = node_feature_rows(&seq.frames, &seq.masks, &bg, &cfg.layout, cfg.lk_window)?;
        info!("{}: {} frames, {} masks, {} nodes", spec.name, seq.frames.len(), seq.masks.len(), rows.rows.len());
        nodes.extend(rows.mask_index.iter().map(|&m| NodeRecord { sequence: k, mask: seq.masks[m].clone() }));
        all.extend(rows, 0);
        truths.push(SequenceTruth { name: spec.name.clone(), gts: seq.gts });
    }
    let skipped = all.skipped.clone();
    Ok(Dataset { features: all.into_matrix()?, skipped, nodes, truths })
}

#[derive(Debug, Clone, Serialize)]
pub struct FeaturesSummary {
    pub path: PathBuf,
    pub rows: usize,
    pub cols: usize,
    pub skipped: Vec<String>,
}

pub fn cmd_features(cfg: &PipelineConfig) -> Result<FeaturesSummary> {
    let data = build_dataset(cfg, false)?;
    cfg.ensure_workdir()?;
    let path = cfg.features_path();
    write_features(&path, &data.features, Some(&cfg.layout))?;
    let skipped_path = cfg.workdir.join("skipped_masks.txt");
    let text: String = data.skipped.iter().map(|s| format!("{s}\n")).collect();
    std::fs::write(&skipped_path, text).map_err(|e| Error::io(&skipped_path, e))?;
    Ok(FeaturesSummary { path, rows: data.features.rows(), cols: data.features.cols(), skipped: data.skipped })
}

#[derive(Debug, Clone, Serialize)]
pub struct GraphSummary {
    pub path: PathBuf,
    pub nodes: usize,
    pub edges: usize,
    pub k: usize,
    pub bandwidth: KernelBandwidth,
    pub components_before: usize,
    pub bridges: Vec<(usize, usize, f64)>,
}

/// k-NN graph with `k` capped at `N − 1`.
pub fn build_graph(x: &FeatureMatrix, opts: &GraphOptions) -> Result<(Graph, GraphSummary)> {
    let k = opts.k.min(x.rows() - 1);
    if k < opts.k {
        info!("k = {} capped at N − 1 = {k}", opts.k);
    }
    let build = build_knn_graph(x, &GraphOptions { k, ..*opts })?;
    if !build.bridges.is_empty() {
        warn!("k-NN graph had {} components; added {} bridging edges", build.components_before, build.bridges.len());
    }
    let summary = GraphSummary {
        path: PathBuf::new(),
        nodes: build.graph.n_nodes(),
        edges: build.graph.n_edges(),
        k,
        bandwidth: build.bandwidth,
        components_before: build.components_before,
        bridges: build.bridges,
    };
    Ok((build.graph, summary))
}

pub fn cmd_graph(cfg: &PipelineConfig) -> Result<GraphSummary> {
    let file = read_features(&cfg.features_path())?;
    if let Some(layout) = &file.layout {
        if layout != &cfg.layout {
            return Err(Error::Config(format!(
                "feature file was written with layout {layout:?}, config has {:?}",
                cfg.layout
            )));
        }
    }
    let (graph, mut summary) = build_graph(&file.matrix, &cfg.graph)?;
    cfg.ensure_workdir()?;
    summary.path = cfg.graph_path();
    write_graph(&summary.path, &graph)?;
    let report = cfg.workdir.join("graph_report.json");
    let json = serde_json::to_string_pretty(&summary).expect("report serializes");
    std::fs::write(&report, json + "\n").map_err(|e| Error::io(&report, e))?;
    Ok(summary)
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub method: SolverMethod,
    pub recovered: RecoveredSignal,
}

/// Solves on a graph file with labels from a CSV. Node ids come from the
/// feature file when one is given.
pub fn cmd_solve(
    opts: &SolverOptions,
    graph: &Path,
    labels: &Path,
    features: Option<&Path>,
    out: &Path,
) -> Result<SolveOutcome> {
    let g = read_graph(graph)?;
    let ids = features.map(read_features).transpose()?.map(|f| f.matrix.node_ids().to_vec());
    if let Some(ids) = &ids {
        if ids.len() != g.n_nodes() {
            return Err(Error::Structural(format!("{} feature rows for a {}-node graph", ids.len(), g.n_nodes())));
        }
    }
    let y = read_labels(labels, g.n_nodes(), ids.as_deref())?;
    let l = g.laplacian();
    let method = opts.resolve(l.n());
    let recovered = solve(&l, &y, opts)?;
    write_recovered(out, &recovered, ids.as_deref())?;
    Ok(SolveOutcome { method, recovered })
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    pub graph: GraphSummary,
    pub nodes: usize,
    pub labeled: usize,
}

/// Features, graph and labels for every sequence, then the cross-validation
/// run; all outputs land in the work directory.
pub fn cmd_experiment(cfg: &PipelineConfig) -> Result<ExperimentOutcome> {
    cfg.plan.validate()?;
    let data = build_dataset(cfg, true)?;
    cfg.ensure_workdir()?;
    write_features(&cfg.features_path(), &data.features, Some(&cfg.layout))?;
    let (graph, mut graph_summary) = build_graph(&data.features, &cfg.graph)?;
    graph_summary.path = cfg.graph_path();
    write_graph(&graph_summary.path, &graph)?;

    let mut decisions = Vec::with_capacity(data.nodes.len());
    for (k, truth) in data.truths.iter().enumerate() {
        let masks: Vec<InstanceMask> =
            data.nodes.iter().filter(|n| n.sequence == k).map(|n| n.mask.clone()).collect();
        decisions.extend(build_graph_signal(&masks, &truth.gts, &cfg.rule)?.decisions);
    }
    // nodes are grouped by sequence in order, so decisions line up
    let signal = GraphSignal { decisions };
    let labeled = signal.labeled().count();
    if labeled == 0 {
        return Err(Error::Degenerate("no node has a ground-truth label".into()));
    }
    let l = graph.laplacian();
    let input = ExperimentInput { laplacian: &l, sequences: &data.truths, nodes: &data.nodes, signal: &signal };
    let report = run_experiment(&input, &cfg.plan, &cfg.solver, cfg.seed)?;
    report.write_all(&cfg.workdir, cfg.svg)?;
    Ok(ExperimentOutcome { report, graph: graph_summary, nodes: data.nodes.len(), labeled })
}

/// Runs the verification suites; a failing suite turns into a
/// verification error after the report is returned to `on_report`.
pub fn cmd_verify(opts: &VerifyOptions, on_report: impl FnOnce(&[SuiteResult])) -> Result<Vec<SuiteResult>> {
    let results = run_all(opts)?;
    on_report(&results);
    let failed: Vec<&str> = results.iter().filter(|r| !r.ok()).map(|r| r.name.as_str()).collect();
    if failed.is_empty() {
        Ok(results)
    } else {
        Err(Error::Verification(format!("failing suites: {}", failed.join(", "))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip() {
        let mut cfg = PipelineConfig::default();
        cfg.sequences.push(SequenceSpec {
            name: "a".into(),
            frames: "a/in".into(),
            masks: "a/m.json".into(),
            gt: None,
            roi: Some("a/roi.txt".into()),
        });
        cfg.solver.epsilon = 0.3;
        cfg.plan.densities = vec![0.1];
        let back = PipelineConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn defaults_and_partial_configs() {
        let cfg = PipelineConfig::from_json(r#"{"sequences": [{"name": "s", "frames": "f", "masks": "m"}]}"#).unwrap();
        assert_eq!(cfg.graph.k, 30);
        assert_eq!((cfg.solver.epsilon, cfg.solver.beta), (0.2, 1.0));
        assert_eq!(cfg.plan.trials_per_density, 5);
        assert_eq!(cfg.layout.total_dim(), 504);
        cfg.validate().unwrap();
        assert!(matches!(PipelineConfig::from_json(r#"{"bogus": 1}"#), Err(Error::Config(_))));
        assert!(PipelineConfig::default().validate().is_err());
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"sequences": [{"name": "s", "frames": "f", "masks": "/abs/m"}]}"#).unwrap();
        let cfg = PipelineConfig::load(&p).unwrap();
        assert_eq!(cfg.sequences[0].frames, dir.path().join("f"));
        assert_eq!(cfg.sequences[0].masks, PathBuf::from("/abs/m"));
        assert_eq!(cfg.workdir, dir.path().join("work"));
    }

    #[test]
    fn verify_reports_then_fails() {
        let opts = VerifyOptions { recovery_instances: 2, perturbation_instances: 2, inject_asymmetric_psi: true, seed: 0 };
        let mut seen = 0;
        let err = cmd_verify(&opts, |r| seen = r.len()).unwrap_err();
        assert_eq!(seen, 6);
        assert_eq!(err.exit_code(), 4);
    }
}
