//! Sampling sets and recovery of graph signals from their samples.
//!
//! Three recovery routes are provided:
//!
//! * exact recovery of a bandlimited signal, `ỹ = U_ρ (M U_ρ)† y(S)`, which
//!   requires `rank(M U_ρ) = ρ`;
//! * the same pseudo-inverse formula used as a plain least-squares fit when
//!   the rank condition is not known to hold;
//! * the regularized estimator
//!   `ỹ = (Mᵀ P⁻¹ M + η g(L))⁻¹ Mᵀ P⁻¹ y(S)` with a diagonal `P` and a
//!   polynomial filter `g`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cg::conjugate_gradient;
use crate::error::{Error, Result};
use crate::graph::Laplacian;
use crate::spectral::SpectralBasis;
use crate::svd::Svd;

/// Singular values at or below this are treated as zero when checking the
/// sampling rank.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Graphs up to this size use dense factorizations in `puy_recover`.
pub const PUY_DENSE_LIMIT: usize = 2000;

/// Ordered distinct node indices `s_1 … s_m` on a graph with `n_nodes`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplingSet {
    n_nodes: usize,
    indices: Vec<usize>,
}

impl SamplingSet {
    pub fn new(indices: Vec<usize>, n_nodes: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Parameter("sampling set must contain at least one node".into()));
        }
        if indices.len() > n_nodes {
            return Err(Error::Parameter(format!(
                "{} samples on a graph with {n_nodes} nodes",
                indices.len()
            )));
        }
        let mut seen = vec![false; n_nodes];
        for &i in &indices {
            if i >= n_nodes {
                return Err(Error::Structural(format!("sample index {i} out of range for {n_nodes} nodes")));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::Structural(format!("sample index {i} appears twice")));
            }
        }
        Ok(Self { n_nodes, indices })
    }

    /// Every node, in order.
    pub fn all(n_nodes: usize) -> Result<Self> {
        Self::new((0..n_nodes).collect(), n_nodes)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Membership mask over all nodes.
    pub fn mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.n_nodes];
        for &i in &self.indices {
            m[i] = true;
        }
        m
    }

    /// Unsampled nodes in increasing order.
    pub fn complement(&self) -> Vec<usize> {
        let mask = self.mask();
        (0..self.n_nodes).filter(|&i| !mask[i]).collect()
    }

    /// Same indices in increasing order.
    pub fn sorted(&self) -> Self {
        let mut indices = self.indices.clone();
        indices.sort_unstable();
        Self { n_nodes: self.n_nodes, indices }
    }

    /// The decimation matrix `M` (`m × N` row selector).
    pub fn decimation_matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.len(), self.n_nodes);
        for (r, &c) in self.indices.iter().enumerate() {
            m[(r, c)] = 1.0;
        }
        m
    }
}

/// `y(S) = M y`, in the order of `S`.
pub fn decimate(y: &[f64], s: &SamplingSet) -> Result<Vec<f64>> {
    if y.len() != s.n_nodes() {
        return Err(Error::Structural(format!(
            "signal of length {} for a sampling set over {} nodes",
            y.len(),
            s.n_nodes()
        )));
    }
    Ok(s.indices().iter().map(|&i| y[i]).collect())
}

/// `M U_ρ`.
fn sampled_band(basis: &SpectralBasis, s: &SamplingSet, rho: usize) -> Result<DMatrix<f64>> {
    if s.n_nodes() != basis.n() {
        return Err(Error::Structural(format!(
            "sampling set over {} nodes, basis over {}",
            s.n_nodes(),
            basis.n()
        )));
    }
    if rho == 0 || rho > basis.n() {
        return Err(Error::Parameter(format!("bandwidth must satisfy 1 <= rho <= N (rho={rho})")));
    }
    let u = basis.eigenvectors();
    Ok(DMatrix::from_fn(s.len(), rho, |r, c| u[(s.indices()[r], c)]))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankCheck {
    pub full_rank: bool,
    /// Smallest of the `ρ` singular values of `M U_ρ` (zero when `m < ρ`).
    pub sigma_min: f64,
}

/// Whether `rank(M U_ρ) = ρ`, judged by `σ_min(M U_ρ) > 1e-10`.
pub fn verify_sampling_rank(basis: &SpectralBasis, s: &SamplingSet, rho: usize) -> Result<RankCheck> {
    let mu = sampled_band(basis, s, rho)?;
    if s.len() < rho {
        return Ok(RankCheck { full_rank: false, sigma_min: 0.0 });
    }
    let sigma_min = Svd::new(&mu).min();
    Ok(RankCheck { full_rank: sigma_min > RANK_TOLERANCE, sigma_min })
}

fn check_samples(y_s: &[f64], s: &SamplingSet) -> Result<()> {
    if y_s.len() != s.len() {
        return Err(Error::Structural(format!("{} sampled values for {} sampled nodes", y_s.len(), s.len())));
    }
    Ok(())
}

/// `U_ρ (M U_ρ)† y(S)` with singular values below `1e-10 σ_max` dropped.
pub fn least_squares_recover(
    basis: &SpectralBasis,
    s: &SamplingSet,
    y_s: &[f64],
    rho: usize,
) -> Result<DVector<f64>> {
    check_samples(y_s, s)?;
    let mu = sampled_band(basis, s, rho)?;
    let svd = Svd::new(&mu);
    let coeffs = svd.solve(&DVector::from_column_slice(y_s), RANK_TOLERANCE * svd.max());
    Ok(basis.eigenvectors().columns(0, rho) * coeffs)
}

/// Perfect recovery of a signal with bandwidth `rho` from its samples.
pub fn chen_recover(basis: &SpectralBasis, s: &SamplingSet, y_s: &[f64], rho: usize) -> Result<DVector<f64>> {
    check_samples(y_s, s)?;
    let rank = verify_sampling_rank(basis, s, rho)?;
    if !rank.full_rank {
        return Err(Error::RecoveryImpossible(format!(
            "rank(M U_ρ) < ρ = {rho} for sampling set {:?} (σ_min = {:e})",
            s.indices(),
            rank.sigma_min
        )));
    }
    least_squares_recover(basis, s, y_s, rho)
}

/// Polynomial `g(λ) = c₀ + c₁λ + c₂λ² + …`, applied to the Laplacian as a
/// graph filter.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Parameter("polynomial needs finite coefficients".into()));
        }
        Ok(Self { coeffs })
    }

    /// `g(λ) = λ`.
    pub fn identity() -> Self {
        Self { coeffs: vec![0.0, 1.0] }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    fn derivative(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, c)| acc * x + k as f64 * c)
    }

    /// Checks `g ≥ 0` and `g' ≥ 0` on `[0, upper]` (on a fine grid unless
    /// every coefficient is nonnegative, which settles it).
    pub fn check_admissible(&self, upper: f64) -> Result<()> {
        if self.coeffs.iter().all(|&c| c >= 0.0) {
            return Ok(());
        }
        const GRID: usize = 1024;
        for k in 0..=GRID {
            let x = upper * k as f64 / GRID as f64;
            if self.eval(x) < -1e-12 || self.derivative(x) < -1e-12 {
                return Err(Error::Parameter(format!(
                    "filter polynomial {:?} is not nonnegative and nondecreasing on [0, {upper}] (fails at {x})",
                    self.coeffs
                )));
            }
        }
        Ok(())
    }

    /// `g(L) x` by Horner's rule.
    pub fn apply(&self, l: &Laplacian, x: &[f64]) -> Vec<f64> {
        let mut acc: Vec<f64> = x.iter().map(|v| v * self.coeffs[self.coeffs.len() - 1]).collect();
        for c in self.coeffs.iter().rev().skip(1) {
            let mut lx = l.apply(&acc);
            for (o, xi) in lx.iter_mut().zip(x) {
                *o += c * xi;
            }
            acc = lx;
        }
        acc
    }

    pub fn apply_dense(&self, l: &DMatrix<f64>) -> DMatrix<f64> {
        let n = l.nrows();
        let mut acc = DMatrix::identity(n, n) * self.coeffs[self.coeffs.len() - 1];
        for c in self.coeffs.iter().rev().skip(1) {
            acc = l * acc + DMatrix::identity(n, n) * *c;
        }
        acc
    }
}

/// Parameters of the regularized estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct PuyParams {
    pub eta: f64,
    pub filter: Polynomial,
    /// Diagonal of `P`, one weight per sample; `None` means `P = I`.
    pub p_diag: Option<Vec<f64>>,
    pub tol: f64,
    pub max_iter: usize,
}

impl PuyParams {
    pub fn new(eta: f64) -> Self {
        Self { eta, filter: Polynomial::identity(), p_diag: None, tol: 1e-10, max_iter: 100_000 }
    }

    fn validate(&self, l: &Laplacian, s: &SamplingSet) -> Result<Vec<f64>> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Parameter(format!("eta must be positive, got {}", self.eta)));
        }
        let p = match &self.p_diag {
            Some(p) if p.len() != s.len() => {
                return Err(Error::Structural(format!("P has {} weights for {} samples", p.len(), s.len())))
            }
            Some(p) if p.iter().any(|&v| !(v > 0.0 && v.is_finite())) => {
                return Err(Error::Parameter("P weights must be positive".into()))
            }
            Some(p) => p.clone(),
            None => vec![1.0; s.len()],
        };
        // λ_N ≤ 2·max degree
        let bound = 2.0 * l.degrees().iter().cloned().fold(0.0, f64::max);
        self.filter.check_admissible(bound)?;
        Ok(p)
    }
}

/// `‖P^{-1/2}(M z − y(S))‖² + η zᵀ g(L) z`.
pub fn puy_objective(l: &Laplacian, s: &SamplingSet, y_s: &[f64], params: &PuyParams, z: &[f64]) -> f64 {
    let p = params.p_diag.clone().unwrap_or_else(|| vec![1.0; s.len()]);
    let data: f64 = s
        .indices()
        .iter()
        .zip(y_s)
        .zip(&p)
        .map(|((&i, y), w)| (z[i] - y).powi(2) / w)
        .sum();
    let gz = params.filter.apply(l, z);
    data + params.eta * gz.iter().zip(z).map(|(a, b)| a * b).sum::<f64>()
}

/// Solves `(Mᵀ P⁻¹ M + η g(L)) ỹ = Mᵀ P⁻¹ y(S)`.
pub fn puy_recover(l: &Laplacian, s: &SamplingSet, y_s: &[f64], params: &PuyParams) -> Result<Vec<f64>> {
    check_samples(y_s, s)?;
    if s.n_nodes() != l.n() {
        return Err(Error::Structural(format!(
            "sampling set over {} nodes, Laplacian over {}",
            s.n_nodes(),
            l.n()
        )));
    }
    let p = params.validate(l, s)?;
    let n = l.n();
    let mut rhs = vec![0.0; n];
    let mut data_diag = vec![0.0; n];
    for ((&i, y), w) in s.indices().iter().zip(y_s).zip(&p) {
        rhs[i] = y / w;
        data_diag[i] = 1.0 / w;
    }

    if n <= PUY_DENSE_LIMIT {
        let mut a = params.filter.apply_dense(&l.to_dense()) * params.eta;
        for i in 0..n {
            a[(i, i)] += data_diag[i];
        }
        let a = (&a + a.transpose()) * 0.5;
        let chol = a.cholesky().ok_or_else(|| {
            Error::Singular("Mᵀ P⁻¹ M + η g(L) is not positive definite for this sampling set".into())
        })?;
        Ok(chol.solve(&DVector::from_vec(rhs)).iter().copied().collect())
    } else {
        let apply = |x: &[f64], out: &mut [f64]| {
            let gx = params.filter.apply(l, x);
            for i in 0..n {
                out[i] = data_diag[i] * x[i] + params.eta * gx[i];
            }
        };
        Ok(conjugate_gradient(apply, &rhs, params.tol, params.max_iter)?.x)
    }
}

/// Recovery route with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum RecoveryOperator {
    ChenExact { rho: usize },
    LeastSquares { rho: usize },
    PuyRegularized(PuyParams),
}

impl RecoveryOperator {
    /// `basis` is required by the spectral kinds and ignored otherwise.
    pub fn recover(
        &self,
        l: &Laplacian,
        basis: Option<&SpectralBasis>,
        s: &SamplingSet,
        y_s: &[f64],
    ) -> Result<Vec<f64>> {
        let need_basis = || {
            basis.ok_or_else(|| Error::Parameter("spectral recovery needs an eigendecomposition".into()))
        };
        match self {
            RecoveryOperator::ChenExact { rho } => {
                Ok(chen_recover(need_basis()?, s, y_s, *rho)?.iter().copied().collect())
            }
            RecoveryOperator::LeastSquares { rho } => {
                Ok(least_squares_recover(need_basis()?, s, y_s, *rho)?.iter().copied().collect())
            }
            RecoveryOperator::PuyRegularized(p) => puy_recover(l, s, y_s, p),
        }
    }
}

/// `⌈density·N⌉` nodes drawn uniformly without replacement, sorted.
pub fn sample_uniform(n: usize, density: f64, seed: u64) -> Result<SamplingSet> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::Parameter(format!("density must lie in (0, 1], got {density}")));
    }
    let m = sample_count(n, density);
    if m == 0 {
        return Err(Error::Parameter(format!("density {density} selects no nodes out of {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, n, m).into_vec();
    idx.sort_unstable();
    SamplingSet::new(idx, n)
}

/// `⌈density·n⌉`, ignoring representation error in the product.
pub(crate) fn sample_count(n: usize, density: f64) -> usize {
    ((density * n as f64) - 1e-9).ceil().max(0.0) as usize
}
