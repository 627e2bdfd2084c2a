//! Semi-supervised recovery with a Sobolev regularizer.
//!
//! For each class column `y_q` with known values on the sampled set `S`,
//! the recovered signal is
//!
//! ```text
//! z_q = argmin zᵀ (L + εI)^β z   subject to   M z = y_q(S)
//! ```
//!
//! whose closed form is `Z = K Mᵀ (M K Mᵀ)⁻¹ Y(S)` with `K = ((L + εI)⁻¹)^β`.
//! `L + εI` is invertible for every `ε > 0`, so the problem is always
//! well posed once at least one node is sampled.
//!
//! Three realizations are offered:
//!
//! * [`solve_closed_form`]: dense Cholesky factorization, the reference;
//! * [`solve_iterative`]: the same formula with every `K e_s` obtained by
//!   conjugate gradients on the sparse operator, then a small Gram solve;
//! * [`solve_reduced`]: eliminates the sampled nodes and solves the
//!   unsampled block `A_UU z_U = -A_US y_S` directly, one CG solve per class.
//!
//! The module also exposes the degree-weighted inner product and norms, and
//! conditioning diagnostics for perturbed Laplacians.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cg::conjugate_gradient;
use crate::error::{Error, Result};
use crate::graph::{Graph, Laplacian};
use crate::sampling::SamplingSet;
use crate::spectral::{self, DEFAULT_DENSE_LIMIT};
use crate::svd::Svd;

pub const DEFAULT_EPSILON: f64 = 0.2;
pub const DEFAULT_BETA: f64 = 1.0;
/// Relative residual target for inner SPD solves.
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Class index of background in two-class problems.
pub const BACKGROUND: usize = 0;
pub const FOREGROUND: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SobolevParams {
    pub epsilon: f64,
    pub beta: f64,
}

impl Default for SobolevParams {
    fn default() -> Self {
        Self { epsilon: DEFAULT_EPSILON, beta: DEFAULT_BETA }
    }
}

impl SobolevParams {
    pub fn new(epsilon: f64, beta: f64) -> Result<Self> {
        let p = Self { epsilon, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Parameter(format!("epsilon must be nonnegative, got {}", self.epsilon)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Parameter(format!("beta must be positive, got {}", self.beta)));
        }
        Ok(())
    }

    /// `β` as a positive integer, if it is one.
    pub fn integer_beta(&self) -> Option<u32> {
        (self.beta.fract() == 0.0 && self.beta >= 1.0 && self.beta <= u32::MAX as f64).then_some(self.beta as u32)
    }

    fn require_solvable(&self) -> Result<()> {
        self.validate()?;
        if self.epsilon <= 0.0 {
            return Err(Error::Parameter(
                "solvers need epsilon > 0 so that L + εI is invertible".into(),
            ));
        }
        Ok(())
    }

    fn require_integer_beta(&self, path: &str) -> Result<u32> {
        self.integer_beta().ok_or_else(|| {
            Error::Parameter(format!("the {path} solver needs an integer beta, got {}", self.beta))
        })
    }
}

/// `N × Q` one-hot class indicators, known on `sampled` rows only.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMatrix {
    y: DMatrix<f64>,
    sampled: SamplingSet,
}

impl LabelMatrix {
    pub fn new(y: DMatrix<f64>, sampled: SamplingSet) -> Result<Self> {
        if y.ncols() < 2 {
            return Err(Error::Structural(format!("label matrix needs Q >= 2 classes, got {}", y.ncols())));
        }
        if y.nrows() != sampled.n_nodes() {
            return Err(Error::Structural(format!(
                "label matrix has {} rows, sampling set spans {} nodes",
                y.nrows(),
                sampled.n_nodes()
            )));
        }
        for &s in sampled.indices() {
            let row = y.row(s);
            let ones = row.iter().filter(|&&v| v == 1.0).count();
            if ones != 1 || row.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::Structural(format!("sampled row {s} is not a one-hot vector")));
            }
        }
        Ok(Self { y, sampled })
    }

    /// One-hot rows for `(node, class)` pairs; the pairs define the sampled set.
    pub fn from_classes(n_nodes: usize, n_classes: usize, known: &[(usize, usize)]) -> Result<Self> {
        let mut y = DMatrix::zeros(n_nodes, n_classes);
        for &(node, class) in known {
            if node >= n_nodes || class >= n_classes {
                return Err(Error::Structural(format!("label ({node}, {class}) out of range")));
            }
            y[(node, class)] = 1.0;
        }
        let sampled = SamplingSet::new(known.iter().map(|&(n, _)| n).collect(), n_nodes)?;
        Self::new(y, sampled)
    }

    pub fn n_nodes(&self) -> usize {
        self.y.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.y.ncols()
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn sampled(&self) -> &SamplingSet {
        &self.sampled
    }

    /// `Y(S)`, rows in sampling order.
    pub fn sampled_rows(&self) -> DMatrix<f64> {
        let idx = self.sampled.indices();
        DMatrix::from_fn(idx.len(), self.n_classes(), |r, c| self.y[(idx[r], c)])
    }
}

/// Recovered class scores and their argmax decisions.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredSignal {
    pub z: DMatrix<f64>,
    pub labels: Vec<usize>,
}

impl RecoveredSignal {
    fn from_scores(z: DMatrix<f64>) -> Self {
        let labels = classify(&z);
        Self { z, labels }
    }

    /// Largest `|Z(s,q) − Y(s,q)|` over sampled rows.
    pub fn interpolation_error(&self, labels: &LabelMatrix) -> f64 {
        let mut worst: f64 = 0.0;
        for &s in labels.sampled().indices() {
            for q in 0..labels.n_classes() {
                worst = worst.max((self.z[(s, q)] - labels.y()[(s, q)]).abs());
            }
        }
        worst
    }
}

/// Row-wise argmax; ties go to the lowest class index.
pub fn classify(z: &DMatrix<f64>) -> Vec<usize> {
    z.row_iter()
        .map(|row| {
            let mut best = 0;
            for q in 1..row.len() {
                if row[q] > row[best] {
                    best = q;
                }
            }
            best
        })
        .collect()
}

fn check_len(len: usize, n: usize) -> Result<()> {
    if len != n {
        return Err(Error::Structural(format!("vector of length {len} on a graph with {n} nodes")));
    }
    Ok(())
}

/// `⟨f, g⟩ = Σ_v f(v) g(v) D(v,v)` for real signals.
pub fn hilbert_inner(f: &[f64], g: &[f64], graph: &Graph) -> Result<f64> {
    degree_inner(f, g, graph.degrees())
}

fn degree_inner(f: &[f64], g: &[f64], degrees: &[f64]) -> Result<f64> {
    check_len(f.len(), degrees.len())?;
    check_len(g.len(), degrees.len())?;
    Ok(f.iter().zip(g).zip(degrees).map(|((a, b), d)| a * b * d).sum())
}

/// `‖(L + εI)^{β/2} f‖` in the degree-weighted norm, via the spectrum of `L`.
pub fn sobolev_norm(f: &[f64], l: &Laplacian, params: &SobolevParams) -> Result<f64> {
    params.validate()?;
    check_len(f.len(), l.n())?;
    let basis = spectral::eigendecompose(l)?;
    let u = basis.eigenvectors();
    let coeffs = u.tr_mul(&DVector::from_column_slice(f));
    let scaled = DVector::from_iterator(
        l.n(),
        coeffs.iter().zip(basis.eigenvalues().iter()).map(|(c, lam)| {
            let shifted = (lam + params.epsilon).max(0.0);
            let gain = if shifted == 0.0 { 0.0 } else { shifted.powf(params.beta / 2.0) };
            c * gain
        }),
    );
    let g = u * scaled;
    Ok(degree_inner(g.as_slice(), g.as_slice(), l.degrees())?.max(0.0).sqrt())
}

/// `fᵀ (L + εI)^β f`, the unweighted energy minimized by the solvers.
pub fn sobolev_energy(f: &[f64], l: &Laplacian, params: &SobolevParams) -> Result<f64> {
    params.validate()?;
    check_len(f.len(), l.n())?;
    let beta = params.require_integer_beta("energy")?;
    let half = beta / 2;
    let mut v = f.to_vec();
    for _ in 0..half {
        v = shifted_apply(l, params.epsilon, &v);
    }
    if beta % 2 == 0 {
        Ok(v.iter().map(|x| x * x).sum())
    } else {
        let av = shifted_apply(l, params.epsilon, &v);
        Ok(av.iter().zip(&v).map(|(a, b)| a * b).sum())
    }
}

fn shifted_apply(l: &Laplacian, eps: f64, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    l.apply_shifted(x, eps, &mut out);
    out
}

fn power_apply(l: &Laplacian, eps: f64, beta: u32, x: &[f64], out: &mut [f64]) {
    let mut cur = x.to_vec();
    for _ in 0..beta {
        l.apply_shifted(&cur, eps, out);
        cur.copy_from_slice(out);
    }
}

fn check_labels(l: &Laplacian, labels: &LabelMatrix) -> Result<()> {
    if labels.n_nodes() != l.n() {
        return Err(Error::Structural(format!(
            "labels for {} nodes on a graph with {} nodes",
            labels.n_nodes(),
            l.n()
        )));
    }
    Ok(())
}

/// Given `X = K Mᵀ` (`N × m`), returns `X (M X)⁻¹ Y(S)`.
fn interpolate_from_kernel_columns(x: DMatrix<f64>, labels: &LabelMatrix) -> Result<DMatrix<f64>> {
    let idx = labels.sampled().indices();
    let m = idx.len();
    let gram = DMatrix::from_fn(m, m, |r, c| 0.5 * (x[(idx[r], c)] + x[(idx[c], r)]));
    let chol = gram.cholesky().ok_or_else(|| {
        Error::Singular("sampled Gram block M K Mᵀ is not positive definite".into())
    })?;
    let coeffs = chol.solve(&labels.sampled_rows());
    Ok(x * coeffs)
}

/// Dense closed-form solution. Integer `β` uses repeated Cholesky solves;
/// fractional `β` goes through the eigendecomposition.
pub fn solve_closed_form(l: &Laplacian, labels: &LabelMatrix, params: &SobolevParams) -> Result<RecoveredSignal> {
    params.require_solvable()?;
    check_labels(l, labels)?;
    let n = l.n();
    if n > DEFAULT_DENSE_LIMIT {
        return Err(Error::Capability(format!(
            "closed-form solve on {n} nodes exceeds the dense limit of {DEFAULT_DENSE_LIMIT}; use the iterative or reduced path"
        )));
    }
    let selector = labels.sampled().decimation_matrix().transpose();
    let x = match params.integer_beta() {
        Some(beta) => {
            let mut a = l.to_dense();
            for i in 0..n {
                a[(i, i)] += params.epsilon;
            }
            let chol = a
                .cholesky()
                .ok_or_else(|| Error::Singular("L + εI is not positive definite".into()))?;
            let mut x = selector;
            for _ in 0..beta {
                chol.solve_mut(&mut x);
            }
            x
        }
        None => {
            let basis = spectral::eigendecompose(l)?;
            let u = basis.eigenvectors();
            let gains = DVector::from_iterator(
                n,
                basis.eigenvalues().iter().map(|lam| (lam.max(0.0) + params.epsilon).powf(-params.beta)),
            );
            let ut_m = u.tr_mul(&selector);
            u * DMatrix::from_diagonal(&gains) * ut_m
        }
    };
    Ok(RecoveredSignal::from_scores(interpolate_from_kernel_columns(x, labels)?))
}

/// Closed form with each column `K e_s` computed by conjugate gradients.
pub fn solve_iterative(
    l: &Laplacian,
    labels: &LabelMatrix,
    params: &SobolevParams,
    tol: f64,
    max_iter: usize,
) -> Result<RecoveredSignal> {
    params.require_solvable()?;
    check_labels(l, labels)?;
    let beta = params.require_integer_beta("iterative")?;
    let n = l.n();
    let eps = params.epsilon;
    let columns: Vec<Vec<f64>> = labels
        .sampled()
        .indices()
        .par_iter()
        .map(|&s| {
            let mut w = vec![0.0; n];
            w[s] = 1.0;
            for _ in 0..beta {
                w = conjugate_gradient(|v, out| l.apply_shifted(v, eps, out), &w, tol, max_iter)?.x;
            }
            Ok(w)
        })
        .collect::<Result<_>>()?;
    let m = columns.len();
    let x = DMatrix::from_fn(n, m, |r, c| columns[c][r]);
    Ok(RecoveredSignal::from_scores(interpolate_from_kernel_columns(x, labels)?))
}

/// Eliminates the sampled nodes: `z_S = y_S`, `A_UU z_U = −A_US y_S` with
/// `A = (L + εI)^β`, one CG solve per class.
pub fn solve_reduced(
    l: &Laplacian,
    labels: &LabelMatrix,
    params: &SobolevParams,
    tol: f64,
    max_iter: usize,
) -> Result<RecoveredSignal> {
    params.require_solvable()?;
    check_labels(l, labels)?;
    let beta = params.require_integer_beta("reduced")?;
    let n = l.n();
    let eps = params.epsilon;
    let sampled = labels.sampled().mask();
    let free = labels.sampled().complement();
    let q = labels.n_classes();

    let mut z = DMatrix::zeros(n, q);
    for &s in labels.sampled().indices() {
        for c in 0..q {
            z[(s, c)] = labels.y()[(s, c)];
        }
    }
    if free.is_empty() {
        return Ok(RecoveredSignal::from_scores(z));
    }

    let restricted_apply = |v: &[f64], out: &mut [f64]| {
        let mut full = vec![0.0; n];
        for (k, &i) in free.iter().enumerate() {
            full[i] = v[k];
        }
        let mut af = vec![0.0; n];
        power_apply(l, eps, beta, &full, &mut af);
        for (k, &i) in free.iter().enumerate() {
            out[k] = af[i];
        }
    };

    let solved: Vec<Vec<f64>> = (0..q)
        .into_par_iter()
        .map(|c| {
            let known: Vec<f64> = (0..n).map(|i| if sampled[i] { z[(i, c)] } else { 0.0 }).collect();
            if known.iter().all(|&v| v == 0.0) {
                return Ok(vec![0.0; free.len()]);
            }
            let mut ak = vec![0.0; n];
            power_apply(l, eps, beta, &known, &mut ak);
            let rhs: Vec<f64> = free.iter().map(|&i| -ak[i]).collect();
            Ok(conjugate_gradient(restricted_apply, &rhs, tol, max_iter)?.x)
        })
        .collect::<Result<_>>()?;
    for (c, col) in solved.iter().enumerate() {
        for (k, &i) in free.iter().enumerate() {
            z[(i, c)] = col[k];
        }
    }
    Ok(RecoveredSignal::from_scores(z))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMethod {
    Closed,
    Iterative,
    Reduced,
    /// Closed form up to [`AUTO_DENSE_LIMIT`] nodes, reduced beyond.
    #[default]
    Auto,
}

/// Node count up to which `Auto` picks the dense closed form.
pub const AUTO_DENSE_LIMIT: usize = 2000;

impl std::str::FromStr for SolverMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed" => Ok(Self::Closed),
            "iterative" => Ok(Self::Iterative),
            "reduced" => Ok(Self::Reduced),
            "auto" => Ok(Self::Auto),
            other => Err(Error::Parameter(format!("unknown solver method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub epsilon: f64,
    pub beta: f64,
    pub method: SolverMethod,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            beta: DEFAULT_BETA,
            method: SolverMethod::Auto,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

impl SolverOptions {
    pub fn params(&self) -> SobolevParams {
        SobolevParams { epsilon: self.epsilon, beta: self.beta }
    }

    /// The concrete method `Auto` resolves to for `n` nodes.
    pub fn resolve(&self, n: usize) -> SolverMethod {
        match self.method {
            SolverMethod::Auto if n <= AUTO_DENSE_LIMIT || self.params().integer_beta().is_none() => {
                SolverMethod::Closed
            }
            SolverMethod::Auto => SolverMethod::Reduced,
            m => m,
        }
    }
}

pub fn solve(l: &Laplacian, labels: &LabelMatrix, opts: &SolverOptions) -> Result<RecoveredSignal> {
    let params = opts.params();
    match opts.resolve(l.n()) {
        SolverMethod::Closed => solve_closed_form(l, labels, &params),
        SolverMethod::Iterative => solve_iterative(l, labels, &params, opts.tol, opts.max_iter),
        SolverMethod::Reduced | SolverMethod::Auto => solve_reduced(l, labels, &params, opts.tol, opts.max_iter),
    }
}

/// Conditioning of `L + Ψ` against its two-sided bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerturbationReport {
    pub sigma_max_l: f64,
    pub sigma_max_psi: f64,
    pub sigma_max_sum: f64,
    pub sigma_min_sum: f64,
    /// `σ_max(L+Ψ) / σ_min(L+Ψ)`, infinite when `L + Ψ` is singular.
    pub kappa: f64,
    /// `σ_max(L+Ψ) / σ_max(Ψ)`.
    pub lower_bound: f64,
    /// `(σ_max(L) + σ_max(Ψ)) / σ_min(L+Ψ)`.
    pub upper_bound: f64,
    /// `L + Ψ` has full rank.
    pub full_rank: bool,
    /// `lower ≤ κ ≤ upper` up to `1e-8` relative.
    pub bounds_hold: bool,
    pub weyl_ok: bool,
}

fn check_perturbation(l: &Laplacian, psi: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = l.n();
    if psi.nrows() != n || psi.ncols() != n {
        return Err(Error::Structural(format!(
            "perturbation is {}×{}, Laplacian is {n}×{n}",
            psi.nrows(),
            psi.ncols()
        )));
    }
    if n > DEFAULT_DENSE_LIMIT {
        return Err(Error::Capability(format!("dense perturbation analysis limited to {DEFAULT_DENSE_LIMIT} nodes")));
    }
    let scale = psi.amax().max(f64::MIN_POSITIVE);
    if (psi - psi.transpose()).amax() > 1e-12 * scale {
        return Err(Error::Structural("perturbation matrix is not symmetric".into()));
    }
    Ok(l.to_dense())
}

fn extreme_singular_values(m: &DMatrix<f64>) -> (f64, f64) {
    let d = Svd::new(m);
    (d.max(), d.min())
}

/// Condition number of `L + Ψ` with its lower and upper bounds.
pub fn condition_bounds(l: &Laplacian, psi: &DMatrix<f64>) -> Result<PerturbationReport> {
    let dense = check_perturbation(l, psi)?;
    let sum = &dense + psi;
    let (sigma_max_l, _) = extreme_singular_values(&dense);
    let (sigma_max_psi, _) = extreme_singular_values(psi);
    let (sigma_max_sum, sigma_min_sum) = extreme_singular_values(&sum);
    let full_rank = sigma_min_sum > 1e-14 * sigma_max_sum.max(f64::MIN_POSITIVE);
    let (kappa, upper_bound) = if full_rank {
        (sigma_max_sum / sigma_min_sum, (sigma_max_l + sigma_max_psi) / sigma_min_sum)
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    let lower_bound = sigma_max_sum / sigma_max_psi;
    let slack = 1e-8 * kappa;
    let bounds_hold = full_rank && lower_bound <= kappa + slack && kappa <= upper_bound + slack;
    let weyl_ok = weyl_check(l, psi)?.holds;
    Ok(PerturbationReport {
        sigma_max_l,
        sigma_max_psi,
        sigma_max_sum,
        sigma_min_sum,
        kappa,
        lower_bound,
        upper_bound,
        full_rank,
        bounds_hold,
        weyl_ok,
    })
}

/// Eigenvalues of `L`, `Ψ` and `L + Ψ`, all ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct WeylReport {
    pub lambda: Vec<f64>,
    pub psi: Vec<f64>,
    pub nu: Vec<f64>,
    /// `λ_i + ψ_1 ≤ ν_i ≤ λ_i + ψ_N` for every `i` (to `1e-10` of scale).
    pub holds: bool,
}

impl WeylReport {
    /// `(λ_i, ν_i, λ_i + ψ_1, λ_i + ψ_N)` per index.
    pub fn triples(&self) -> impl Iterator<Item = (f64, f64, f64, f64)> + '_ {
        let lo = self.psi[0];
        let hi = self.psi[self.psi.len() - 1];
        self.lambda.iter().zip(&self.nu).map(move |(&l, &v)| (l, v, l + lo, l + hi))
    }
}

/// Eigenvalue sandwich for a symmetric perturbation of the Laplacian.
pub fn weyl_check(l: &Laplacian, psi: &DMatrix<f64>) -> Result<WeylReport> {
    let dense = check_perturbation(l, psi)?;
    let sum = &dense + psi;
    let lambda = spectral::symmetric_eigenvalues(dense);
    let psi_ev = spectral::symmetric_eigenvalues(psi.clone());
    let nu = spectral::symmetric_eigenvalues(sum);
    let scale = lambda.iter().chain(&psi_ev).fold(1.0f64, |a, v| a.max(v.abs()));
    let tol = 1e-10 * scale;
    let lo = psi_ev[0];
    let hi = psi_ev[psi_ev.len() - 1];
    let holds = lambda.iter().zip(&nu).all(|(&lam, &v)| lam + lo - tol <= v && v <= lam + hi + tol);
    Ok(WeylReport { lambda, psi: psi_ev, nu, holds })
}
