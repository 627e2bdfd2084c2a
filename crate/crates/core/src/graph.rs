//! Instance graph construction.
//!
//! Nodes are rows of a [`FeatureMatrix`]. Each node is linked to its `k`
//! nearest neighbours under the Euclidean distance, the directed links are
//! symmetrized by union, and every surviving pair gets the Gaussian weight
//! `exp(-d² / σ²)` where σ is estimated from the edge lengths themselves.
//! The combinatorial Laplacian `L = D - W` is kept in compressed sparse rows.

use std::collections::{BTreeSet, VecDeque};

use log::{info, warn};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Neighbour count used when none is configured.
pub const DEFAULT_K: usize = 30;

/// `N × M` matrix of node features with one opaque id per row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    node_ids: Vec<String>,
}

impl FeatureMatrix {
    /// Builds a matrix from row-major data.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>, node_ids: Vec<String>) -> Result<Self> {
        if rows < 2 {
            return Err(Error::Structural(format!("feature matrix needs at least 2 rows, got {rows}")));
        }
        if cols < 1 {
            return Err(Error::Structural("feature matrix needs at least 1 column".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::Structural(format!(
                "feature data has {} values, expected {rows}×{cols}",
                data.len()
            )));
        }
        if node_ids.len() != rows {
            return Err(Error::Structural(format!(
                "{} node ids for {rows} rows",
                node_ids.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Degenerate(format!(
                "non-finite feature at row {}, column {}",
                pos / cols,
                pos % cols
            )));
        }
        let mut seen = std::collections::HashSet::with_capacity(rows);
        for id in &node_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::Structural(format!("duplicate node id {id:?}")));
            }
        }
        Ok(Self { rows, cols, data, node_ids })
    }

    /// Builds a matrix from rows, assigning ids `0..N`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Structural("ragged feature rows".into()));
        }
        let data = rows.iter().flatten().copied().collect();
        let ids = (0..rows.len()).map(|i| i.to_string()).collect();
        Self::new(rows.len(), cols, data, ids)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    fn distance(&self, i: usize, j: usize) -> f64 {
        squared_distance(self.row(i), self.row(j)).sqrt()
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Euclidean distance between two feature vectors.
pub fn pairwise_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Structural(format!(
            "distance between vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("non-finite entry in distance input".into()));
    }
    Ok(squared_distance(a, b).sqrt())
}

/// Undirected candidate edges with their feature-space lengths.
///
/// Each pair is stored once as `(i, j, d)` with `i < j`, sorted by `(i, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSet {
    n_nodes: usize,
    edges: Vec<(usize, usize, f64)>,
}

impl EdgeSet {
    /// Canonicalizes arbitrary pairs over `x`, computing their distances.
    pub fn from_pairs(x: &FeatureMatrix, pairs: &[(usize, usize)]) -> Result<Self> {
        let n = x.rows();
        let mut set = BTreeSet::new();
        for &(a, b) in pairs {
            if a >= n || b >= n {
                return Err(Error::Structural(format!("edge ({a},{b}) out of range for {n} nodes")));
            }
            if a == b {
                return Err(Error::Structural(format!("self-loop at node {a}")));
            }
            set.insert((a.min(b), a.max(b)));
        }
        let edges = set.into_iter().map(|(i, j)| (i, j, x.distance(i, j))).collect();
        Ok(Self { n_nodes: n, edges })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.edges.iter().copied()
    }

    /// Pairs without distances.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.edges.iter().map(|&(i, j, _)| (i, j)).collect()
    }
}

/// Links every node to its `k` nearest neighbours and symmetrizes by union.
///
/// Ties at the k-th distance go to the smaller node index.
pub fn knn_edges(x: &FeatureMatrix, k: usize) -> Result<EdgeSet> {
    let n = x.rows();
    if k == 0 || k >= n {
        return Err(Error::Parameter(format!("k must satisfy 1 <= k < N (k={k}, N={n})")));
    }
    let directed: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut cand: Vec<(f64, usize)> =
                (0..n).filter(|&j| j != i).map(|j| (x.distance(i, j), j)).collect();
            let by_dist = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            cand.select_nth_unstable_by(k - 1, by_dist);
            cand.truncate(k);
            cand.sort_by(by_dist);
            cand.into_iter().map(|(d, j)| (j, d)).collect()
        })
        .collect();

    let mut set = std::collections::BTreeMap::new();
    for (i, nbrs) in directed.iter().enumerate() {
        for &(j, d) in nbrs {
            set.insert((i.min(j), i.max(j)), d);
        }
    }
    let edges = set.into_iter().map(|((i, j), d)| (i, j, d)).collect();
    Ok(EdgeSet { n_nodes: n, edges })
}

/// Gaussian kernel bandwidth estimated from edge lengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelBandwidth {
    pub sigma: f64,
    pub edge_count: usize,
    pub node_count: usize,
}

/// `σ = Σ_{(i,j)∈E} d(i,j) / (|E| + N)` with each undirected pair counted once.
pub fn estimate_sigma(edges: &EdgeSet) -> Result<KernelBandwidth> {
    if edges.is_empty() {
        return Err(Error::Parameter("cannot estimate sigma from an empty edge set".into()));
    }
    let total: f64 = edges.iter().map(|(_, _, d)| d).sum();
    if total <= 0.0 {
        return Err(Error::Degenerate(
            "all edge distances are zero; Gaussian weights are undefined".into(),
        ));
    }
    Ok(KernelBandwidth {
        sigma: total / (edges.len() + edges.n_nodes()) as f64,
        edge_count: edges.len(),
        node_count: edges.n_nodes(),
    })
}

/// `exp(-d² / σ²)`.
pub fn gaussian_weight(distance: f64, sigma: f64) -> f64 {
    (-(distance * distance) / (sigma * sigma)).exp()
}

/// Weights every edge with the Gaussian kernel and assembles the graph.
pub fn gaussian_weights(edges: &EdgeSet, sigma: f64) -> Result<Graph> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Parameter(format!("sigma must be positive and finite, got {sigma}")));
    }
    let weighted = edges
        .iter()
        .map(|(i, j, d)| (i, j, kernel_edge_weight(i, j, d, sigma)))
        .collect();
    Graph::new(edges.n_nodes(), weighted)
}

fn kernel_edge_weight(i: usize, j: usize, d: f64, sigma: f64) -> f64 {
    if d == 0.0 {
        warn!("nodes {i} and {j} have identical features; edge weight set to 1");
    }
    let w = gaussian_weight(d, sigma);
    if w == 0.0 {
        warn!("edge ({i},{j}) weight underflows (d/σ = {:.1}); clamped to the smallest normal", d / sigma);
        f64::MIN_POSITIVE
    } else {
        w
    }
}

/// Undirected weighted graph without self-loops.
///
/// Edges are stored once with `i < j`; the adjacency is also kept as
/// symmetric compressed rows for traversal and products.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n_nodes: usize,
    edges: Vec<(usize, usize, f64)>,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    weights: Vec<f64>,
    degree: Vec<f64>,
}

impl Graph {
    /// Validates and builds a graph from undirected weighted edges.
    pub fn new(n_nodes: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::Structural("graph must have at least one node".into()));
        }
        let mut canon = Vec::with_capacity(edges.len());
        for (a, b, w) in edges {
            if a >= n_nodes || b >= n_nodes {
                return Err(Error::Structural(format!("edge ({a},{b}) out of range for {n_nodes} nodes")));
            }
            if a == b {
                return Err(Error::Structural(format!("self-loop at node {a}")));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::Structural(format!("edge ({a},{b}) has non-positive or non-finite weight {w}")));
            }
            canon.push((a.min(b), a.max(b), w));
        }
        canon.sort_by_key(|e| (e.0, e.1));
        if let Some(dup) = canon.windows(2).find(|p| (p[0].0, p[0].1) == (p[1].0, p[1].1)) {
            return Err(Error::Structural(format!("duplicate edge ({},{})", dup[0].0, dup[0].1)));
        }

        let mut counts = vec![0usize; n_nodes];
        for &(i, j, _) in &canon {
            counts[i] += 1;
            counts[j] += 1;
        }
        let mut offsets = vec![0usize; n_nodes + 1];
        for i in 0..n_nodes {
            offsets[i + 1] = offsets[i] + counts[i];
        }
        let mut fill = offsets.clone();
        let mut neighbors = vec![0usize; offsets[n_nodes]];
        let mut weights = vec![0.0; offsets[n_nodes]];
        for &(i, j, w) in &canon {
            neighbors[fill[i]] = j;
            weights[fill[i]] = w;
            fill[i] += 1;
            neighbors[fill[j]] = i;
            weights[fill[j]] = w;
            fill[j] += 1;
        }
        // rows are filled in increasing neighbour order except for the
        // lower-triangle part, so sort each row
        for i in 0..n_nodes {
            let range = offsets[i]..offsets[i + 1];
            let mut row: Vec<(usize, f64)> =
                neighbors[range.clone()].iter().copied().zip(weights[range.clone()].iter().copied()).collect();
            row.sort_by_key(|&(j, _)| j);
            for (slot, (j, w)) in range.zip(row) {
                neighbors[slot] = j;
                weights[slot] = w;
            }
        }
        let degree = (0..n_nodes).map(|i| weights[offsets[i]..offsets[i + 1]].iter().sum()).collect();
        Ok(Self { n_nodes, edges: canon, offsets, neighbors, weights, degree })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Undirected edges `(i, j, w)` with `i < j`, sorted.
    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn degree(&self, i: usize) -> f64 {
        self.degree[i]
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degree
    }

    /// Neighbours of `i` with edge weights, in increasing index order.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.neighbors[r.clone()].iter().copied().zip(self.weights[r].iter().copied())
    }

    /// Dense weight matrix `W`.
    pub fn adjacency_dense(&self) -> DMatrix<f64> {
        let mut w = DMatrix::zeros(self.n_nodes, self.n_nodes);
        for &(i, j, wij) in &self.edges {
            w[(i, j)] = wij;
            w[(j, i)] = wij;
        }
        w
    }

    pub fn laplacian(&self) -> Laplacian {
        build_laplacian(self)
    }
}

/// Combinatorial Laplacian `L = D - W` in compressed sparse rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian {
    n: usize,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    degree: Vec<f64>,
}

pub fn build_laplacian(g: &Graph) -> Laplacian {
    let n = g.n_nodes();
    let mut offsets = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(g.neighbors.len() + n);
    let mut vals = Vec::with_capacity(g.neighbors.len() + n);
    offsets.push(0);
    for i in 0..n {
        let mut diag_done = false;
        for (j, w) in g.neighbors(i) {
            if !diag_done && j > i {
                cols.push(i);
                vals.push(g.degree(i));
                diag_done = true;
            }
            cols.push(j);
            vals.push(-w);
        }
        if !diag_done {
            cols.push(i);
            vals.push(g.degree(i));
        }
        offsets.push(cols.len());
    }
    Laplacian { n, offsets, cols, vals, degree: g.degrees().to_vec() }
}

impl Laplacian {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degree
    }

    /// Row `i` as `(column, value)` pairs, including the diagonal.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    /// `out = (L + shift·I) x`.
    pub fn apply_shifted(&self, x: &[f64], shift: f64, out: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(out.len(), self.n);
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = shift * x[i];
            for (j, v) in self.row(i) {
                acc += v * x[j];
            }
            *o = acc;
        }
    }

    /// `L x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.apply_shifted(x, 0.0, &mut out);
        out
    }

    /// `xᵀ L x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.apply(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Largest absolute row sum relative to the largest degree.
    pub fn max_relative_row_sum(&self) -> f64 {
        let scale = self.degree.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        (0..self.n)
            .map(|i| self.row(i).map(|(_, v)| v).sum::<f64>().abs() / scale)
            .fold(0.0, f64::max)
    }
}

/// Reachability classes, each sorted, ordered by smallest member.
pub fn connected_components(g: &Graph) -> Vec<Vec<usize>> {
    let n = g.n_nodes();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for (v, _) in g.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    comp.push(v);
                    queue.push_back(v);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// What to do when the k-NN graph falls apart into several components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DisconnectedPolicy {
    /// Join components with minimum-distance bridging edges.
    #[default]
    Connect,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphOptions {
    pub k: usize,
    pub disconnected: DisconnectedPolicy,
}

impl Default for GraphOptions {
    fn default() -> Self {
        Self { k: DEFAULT_K, disconnected: DisconnectedPolicy::Connect }
    }
}

/// A built instance graph plus what happened while building it.
#[derive(Debug, Clone)]
pub struct GraphBuild {
    pub graph: Graph,
    pub bandwidth: KernelBandwidth,
    pub components_before: usize,
    /// Bridging edges `(i, j, d)` added by the connect policy.
    pub bridges: Vec<(usize, usize, f64)>,
}

/// k-NN edges, σ from those edges, Gaussian weights, then the
/// connectivity policy. Bridges reuse the same σ.
pub fn build_knn_graph(x: &FeatureMatrix, opts: &GraphOptions) -> Result<GraphBuild> {
    let edges = knn_edges(x, opts.k)?;
    let bandwidth = estimate_sigma(&edges)?;
    let graph = gaussian_weights(&edges, bandwidth.sigma)?;
    let comps = connected_components(&graph);
    let components_before = comps.len();
    if comps.len() == 1 {
        return Ok(GraphBuild { graph, bandwidth, components_before, bridges: Vec::new() });
    }
    match opts.disconnected {
        DisconnectedPolicy::Error => Err(Error::Degenerate(format!(
            "k-NN graph with k={} has {} connected components",
            opts.k,
            comps.len()
        ))),
        DisconnectedPolicy::Connect => {
            let bridges = bridge_components(x, &comps);
            for &(i, j, d) in &bridges {
                info!("connecting components with edge ({i},{j}), distance {d}");
            }
            let mut all: Vec<_> = edges
                .iter()
                .map(|(i, j, d)| (i, j, kernel_edge_weight(i, j, d, bandwidth.sigma)))
                .collect();
            all.extend(bridges.iter().map(|&(i, j, d)| (i, j, kernel_edge_weight(i, j, d, bandwidth.sigma))));
            let graph = Graph::new(x.rows(), all)?;
            debug_assert_eq!(connected_components(&graph).len(), 1);
            Ok(GraphBuild { graph, bandwidth, components_before, bridges })
        }
    }
}

/// Grows a connected mass from the first component, each step adding the
/// shortest edge from the mass to any remaining component.
fn bridge_components(x: &FeatureMatrix, comps: &[Vec<usize>]) -> Vec<(usize, usize, f64)> {
    let mut comp_of = vec![0usize; x.rows()];
    for (c, members) in comps.iter().enumerate() {
        for &v in members {
            comp_of[v] = c;
        }
    }
    let mut merged = vec![false; comps.len()];
    merged[0] = true;
    let mut mass: Vec<usize> = comps[0].clone();
    let mut bridges = Vec::with_capacity(comps.len() - 1);
    for _ in 1..comps.len() {
        let best = mass
            .par_iter()
            .map(|&i| {
                let mut best: Option<(f64, usize, usize)> = None;
                for j in 0..x.rows() {
                    if merged[comp_of[j]] {
                        continue;
                    }
                    let cand = (x.distance(i, j), i.min(j), i.max(j));
                    if best.is_none_or(|b| cmp_bridge(&cand, &b).is_lt()) {
                        best = Some(cand);
                    }
                }
                best
            })
            .flatten()
            .min_by(cmp_bridge)
            .expect("an unmerged component exists");
        let (d, i, j) = best;
        let other = if merged[comp_of[i]] { comp_of[j] } else { comp_of[i] };
        merged[other] = true;
        mass.extend_from_slice(&comps[other]);
        bridges.push((i, j, d));
    }
    bridges
}

fn cmp_bridge(a: &(f64, usize, usize), b: &(f64, usize, usize)) -> std::cmp::Ordering {
    a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn points_1d(xs: &[f64]) -> FeatureMatrix {
        FeatureMatrix::from_rows(&xs.iter().map(|&v| vec![v]).collect::<Vec<_>>()).unwrap()
    }

    fn unit_graph(n: usize, pairs: &[(usize, usize)]) -> Graph {
        Graph::new(n, pairs.iter().map(|&(i, j)| (i, j, 1.0)).collect()).unwrap()
    }

    #[test]
    fn distance_examples() {
        assert_eq!(pairwise_distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(pairwise_distance(&[1.5, -2.0], &[1.5, -2.0]).unwrap(), 0.0);
        assert_eq!(pairwise_distance(&[1.0, 2.0, 3.0], &[4.0, 6.0, 3.0]).unwrap(), 5.0);
        assert!(matches!(pairwise_distance(&[1.0], &[1.0, 2.0]), Err(Error::Structural(_))));
    }

    #[test]
    fn feature_matrix_validation() {
        assert!(FeatureMatrix::from_rows(&[vec![1.0]]).is_err());
        assert!(FeatureMatrix::from_rows(&[vec![1.0], vec![f64::NAN]]).is_err());
        let dup = FeatureMatrix::new(2, 1, vec![0.0, 1.0], vec!["a".into(), "a".into()]);
        assert!(matches!(dup, Err(Error::Structural(_))));
    }

    #[test]
    fn knn_collinear_points() {
        let x = points_1d(&[0.0, 1.0, 10.0]);
        let e = knn_edges(&x, 1).unwrap();
        assert_eq!(e.pairs(), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn knn_two_nodes() {
        let x = points_1d(&[0.0, 4.0]);
        assert_eq!(knn_edges(&x, 1).unwrap().pairs(), vec![(0, 1)]);
        assert!(matches!(knn_edges(&x, 2), Err(Error::Parameter(_))));
        assert!(matches!(knn_edges(&x, 0), Err(Error::Parameter(_))));
    }

    #[test]
    fn knn_tie_breaks_to_smaller_index() {
        // node 1 is equidistant from 0 and 2
        let x = points_1d(&[0.0, 1.0, 2.0]);
        let e = knn_edges(&x, 1).unwrap();
        assert_eq!(e.pairs(), vec![(0, 1), (1, 2)]);
        let x = points_1d(&[1.0, 0.0, 2.0]);
        let e = knn_edges(&x, 1).unwrap();
        // 0 -> 1 (tie with 2, smaller index), 1 -> 0, 2 -> 0
        assert_eq!(e.pairs(), vec![(0, 1), (0, 2)]);
    }

    #[test]
    fn default_k_is_thirty() {
        assert_eq!(DEFAULT_K, 30);
        assert_eq!(GraphOptions::default().k, 30);
    }

    #[test]
    fn sigma_examples() {
        let x = points_1d(&[0.0, 1.0, 2.0]);
        let e = EdgeSet::from_pairs(&x, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let bw = estimate_sigma(&e).unwrap();
        assert!((bw.sigma - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!((bw.edge_count, bw.node_count), (3, 3));

        let x = points_1d(&[0.0, 2.0]);
        let e = EdgeSet::from_pairs(&x, &[(0, 1)]).unwrap();
        assert!((estimate_sigma(&e).unwrap().sigma - 2.0 / 3.0).abs() < 1e-15);

        // equilateral triangle in the plane, all sides 2
        let x = FeatureMatrix::from_rows(&[vec![0.0, 0.0], vec![2.0, 0.0], vec![1.0, 3f64.sqrt()]]).unwrap();
        let e = EdgeSet::from_pairs(&x, &[(0, 1), (1, 2), (2, 0)]).unwrap();
        let expect = 2.0 * 3.0 / (3.0 + 3.0);
        assert!((estimate_sigma(&e).unwrap().sigma - expect).abs() < 1e-12);
    }

    #[test]
    fn sigma_degenerate_inputs() {
        let x = FeatureMatrix::new(2, 1, vec![1.0, 1.0], vec!["a".into(), "b".into()]).unwrap();
        let e = EdgeSet::from_pairs(&x, &[(0, 1)]).unwrap();
        assert!(matches!(estimate_sigma(&e), Err(Error::Degenerate(_))));
        let e = EdgeSet::from_pairs(&x, &[]).unwrap();
        assert!(matches!(estimate_sigma(&e), Err(Error::Parameter(_))));
    }

    #[test]
    fn gaussian_weight_examples() {
        assert!((gaussian_weight(0.7, 0.7) - (-1f64).exp()).abs() < 1e-15);
        assert!((gaussian_weight(1.0, 1.0) - 0.36788).abs() < 1e-5);
        assert_eq!(gaussian_weight(0.0, 0.3), 1.0);
        let w = gaussian_weight(2.0, 2.0 / 3.0);
        assert!((w - (-9f64).exp()).abs() < 1e-18);
        assert!((w - 1.234e-4).abs() < 1e-7);

        let x = points_1d(&[0.0, 2.0]);
        let e = EdgeSet::from_pairs(&x, &[(0, 1)]).unwrap();
        assert!(matches!(gaussian_weights(&e, 0.0), Err(Error::Parameter(_))));
        assert!(matches!(gaussian_weights(&e, -1.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn duplicate_features_get_unit_weight() {
        let x = points_1d(&[1.0, 1.0, 3.0]);
        let e = knn_edges(&x, 1).unwrap();
        let g = gaussian_weights(&e, 1.0).unwrap();
        assert_eq!(g.edges()[0], (0, 1, 1.0));
    }

    #[test]
    fn laplacian_of_paths() {
        let l = unit_graph(2, &[(0, 1)]).laplacian().to_dense();
        assert_eq!(l, DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
        let l = unit_graph(3, &[(1, 0), (1, 2)]).laplacian().to_dense();
        assert_eq!(
            l,
            DMatrix::from_row_slice(3, 3, &[1.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 1.0])
        );
    }

    #[test]
    fn triangle_spectrum() {
        let l = unit_graph(3, &[(0, 1), (1, 2), (0, 2)]).laplacian().to_dense();
        let mut ev: Vec<f64> = l.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        for (got, want) in ev.iter().zip([0.0, 3.0, 3.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn graph_rejects_bad_edges() {
        assert!(Graph::new(2, vec![(0, 0, 1.0)]).is_err());
        assert!(Graph::new(2, vec![(0, 1, 0.0)]).is_err());
        assert!(Graph::new(2, vec![(0, 1, f64::INFINITY)]).is_err());
        assert!(Graph::new(2, vec![(0, 2, 1.0)]).is_err());
        assert!(Graph::new(2, vec![(0, 1, 1.0), (1, 0, 2.0)]).is_err());
    }

    #[test]
    fn components() {
        assert_eq!(connected_components(&unit_graph(3, &[(0, 1), (1, 2)])), vec![vec![0, 1, 2]]);
        assert_eq!(
            connected_components(&unit_graph(4, &[(2, 3), (0, 1)])),
            vec![vec![0, 1], vec![2, 3]]
        );
        assert_eq!(connected_components(&unit_graph(3, &[(0, 2)])), vec![vec![0, 2], vec![1]]);
    }

    #[test]
    fn separated_clusters_split_and_reconnect() {
        let x = points_1d(&[0.0, 0.1, 0.2, 50.0, 50.1, 50.3]);
        let e = knn_edges(&x, 1).unwrap();
        let bw = estimate_sigma(&e).unwrap();
        let g = gaussian_weights(&e, bw.sigma).unwrap();
        assert_eq!(connected_components(&g), vec![vec![0, 1, 2], vec![3, 4, 5]]);

        let opts = GraphOptions { k: 1, disconnected: DisconnectedPolicy::Error };
        assert!(matches!(build_knn_graph(&x, &opts), Err(Error::Degenerate(_))));

        let opts = GraphOptions { k: 1, disconnected: DisconnectedPolicy::Connect };
        let b = build_knn_graph(&x, &opts).unwrap();
        assert_eq!(b.components_before, 2);
        assert_eq!(b.bridges.len(), 1);
        let (i, j, d) = b.bridges[0];
        assert_eq!((i, j), (2, 3));
        assert!((d - 49.8).abs() < 1e-12);
        assert_eq!(connected_components(&b.graph).len(), 1);
    }

    #[test]
    fn laplacian_apply_matches_dense() {
        let g = Graph::new(4, vec![(0, 1, 0.5), (1, 2, 2.0), (0, 3, 1.5), (2, 3, 0.25)]).unwrap();
        let l = g.laplacian();
        let x = [0.3, -1.0, 2.0, 0.7];
        let dense = l.to_dense() * nalgebra::DVector::from_column_slice(&x);
        for (a, b) in l.apply(&x).iter().zip(dense.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(l.max_relative_row_sum() < 1e-15);
        assert_eq!(g.degrees(), &[2.0, 2.5, 2.25, 1.75]);
    }
}
