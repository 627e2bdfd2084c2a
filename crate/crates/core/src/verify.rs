//! Randomized checks of the recovery, conditioning and eigenvalue results on
//! generated graphs, plus the labeling and metric contracts.
//!
//! Each suite returns a [`SuiteResult`]; [`run_all`] runs them in a fixed
//! order from one seed.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::frame::PixelSet;
use crate::graph::{Graph, Laplacian};
use crate::labeling::{decide_label, f_measure, pixel_confusion, Confusion, GroundTruthFrame, Label, ThresholdRule};
use crate::mask::InstanceMask;
use crate::sampling::{chen_recover, verify_sampling_rank, SamplingSet};
use crate::sobolev::{
    condition_bounds, solve_closed_form, solve_iterative, sobolev_energy, weyl_check, LabelMatrix, SobolevParams,
};
use crate::spectral::eigendecompose;

/// Sampling sets whose smallest singular value falls below this are
/// redrawn: they are full rank but amplify rounding past the recovery
/// tolerance.
pub const WELL_POSED_SIGMA: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub passed: usize,
    pub total: usize,
    /// The first few failing instances.
    pub failures: Vec<String>,
    pub elapsed: Duration,
}

impl SuiteResult {
    pub fn ok(&self) -> bool {
        self.passed == self.total
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: {}/{} ({:.2}s)",
            if self.ok() { "PASS" } else { "FAIL" },
            self.name,
            self.passed,
            self.total,
            self.elapsed.as_secs_f64()
        )
    }
}

struct Tally {
    name: String,
    passed: usize,
    total: usize,
    failures: Vec<String>,
    start: Instant,
}

impl Tally {
    fn new(name: &str) -> Self {
        Self { name: name.into(), passed: 0, total: 0, failures: Vec::new(), start: Instant::now() }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.total += 1;
        if ok {
            self.passed += 1;
        } else if self.failures.len() < 5 {
            self.failures.push(what());
        }
    }

    fn finish(self) -> SuiteResult {
        SuiteResult {
            name: self.name,
            passed: self.passed,
            total: self.total,
            failures: self.failures,
            elapsed: self.start.elapsed(),
        }
    }
}

/// A random spanning tree plus extra edges with probability `p`, weights
/// uniform in `[0.1, 2)`.
pub fn random_connected_graph(n: usize, p: f64, rng: &mut impl Rng) -> Graph {
    let mut edges = Vec::new();
    let mut present = vec![false; n * n];
    for i in 1..n {
        let j = rng.random_range(0..i);
        present[j * n + i] = true;
        edges.push((j, i, rng.random_range(0.1..2.0)));
    }
    for i in 0..n {
        for j in i + 1..n {
            if !present[i * n + j] && rng.random_bool(p) {
                edges.push((i, j, rng.random_range(0.1..2.0)));
            }
        }
    }
    Graph::new(n, edges).expect("generated graph is valid")
}

/// A random symmetric positive definite matrix `B Bᵀ / n + δ I`.
pub fn random_spd(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let delta = rng.random_range(0.01..1.0);
    &b * b.transpose() / n as f64 + DMatrix::identity(n, n) * delta
}

fn random_subset(n: usize, m: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut idx = rand::seq::index::sample(rng, n, m).into_vec();
    idx.sort_unstable();
    idx
}

/// Exact recovery of bandlimited signals from rank-valid sampling sets.
pub fn recovery_suite(instances: usize, seed: u64) -> Result<SuiteResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new("bandlimited recovery");
    for k in 0..instances {
        let n = rng.random_range(3..=30);
        let g = random_connected_graph(n, rng.random_range(0.05..0.5), &mut rng);
        let basis = eigendecompose(&g.laplacian())?;
        let rho = rng.random_range(1..=n);
        let coeffs = DVector::from_fn(rho, |_, _| rng.random_range(-1.0..1.0));
        let y = basis.leading(rho) * coeffs;
        let mut s = None;
        for _ in 0..50 {
            let m = (rho + rng.random_range(0..=3)).min(n);
            let cand = SamplingSet::new(random_subset(n, m, &mut rng), n)?;
            let rank = verify_sampling_rank(&basis, &cand, rho)?;
            if rank.full_rank && rank.sigma_min >= WELL_POSED_SIGMA {
                s = Some(cand);
                break;
            }
        }
        let s = match s {
            Some(s) => s,
            None => SamplingSet::all(n)?,
        };
        let y_s: Vec<f64> = s.indices().iter().map(|&i| y[i]).collect();
        let rec = chen_recover(&basis, &s, &y_s, rho)?;
        let err = (&rec - &y).norm() / y.norm().max(f64::MIN_POSITIVE);
        t.check(err <= 1e-8, || format!("instance {k}: N={n} ρ={rho} m={} relative error {err:e}", s.len()));
    }
    Ok(t.finish())
}

/// Instance family for the conditioning and eigenvalue suites.
fn perturbation_instances(count: usize, seed: u64) -> Vec<(Laplacian, DMatrix<f64>, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.random_range(2..=20);
            let l = random_connected_graph(n, rng.random_range(0.1..0.6), &mut rng).laplacian();
            let psi = if rng.random_bool(0.3) {
                DMatrix::from_diagonal(&DVector::from_fn(n, |_, _| rng.random_range(0.01..2.0)))
            } else {
                random_spd(n, &mut rng)
            };
            let eps = rng.random_range(0.01..2.0);
            (l, psi, eps)
        })
        .collect()
}

/// `lower ≤ κ(L+Ψ) ≤ upper`, with equality of both bounds for `Ψ = εI`.
pub fn condition_suite(instances: usize, seed: u64) -> Result<SuiteResult> {
    let mut t = Tally::new("condition number bounds");
    for (k, (l, psi, eps)) in perturbation_instances(instances, seed).into_iter().enumerate() {
        let r = condition_bounds(&l, &psi)?;
        t.check(r.bounds_hold, || {
            format!("instance {k}: lower {} κ {} upper {}", r.lower_bound, r.kappa, r.upper_bound)
        });
        let n = l.n();
        let r = condition_bounds(&l, &(DMatrix::identity(n, n) * eps))?;
        let tol = 1e-8 * r.kappa;
        t.check((r.lower_bound - r.kappa).abs() <= tol && (r.upper_bound - r.kappa).abs() <= tol, || {
            format!("instance {k}, Ψ=εI: lower {} κ {} upper {}", r.lower_bound, r.kappa, r.upper_bound)
        });
    }
    Ok(t.finish())
}

/// `λ_i + ψ_1 ≤ ν_i ≤ λ_i + ψ_N`, and `ν_i = λ_i + ε` for `Ψ = εI`.
///
/// With `inject_asymmetric`, the first instance's `Ψ` is made asymmetric;
/// the check must then fail.
pub fn weyl_suite(instances: usize, seed: u64, inject_asymmetric: bool) -> Result<SuiteResult> {
    let mut t = Tally::new("eigenvalue sandwich");
    for (k, (l, mut psi, eps)) in perturbation_instances(instances, seed).into_iter().enumerate() {
        if inject_asymmetric && k == 0 {
            let last = psi.ncols() - 1;
            psi[(0, last)] += 1.0;
        }
        match weyl_check(&l, &psi) {
            Ok(r) => t.check(r.holds, || format!("instance {k}: sandwich violated")),
            Err(e) => t.check(false, || format!("instance {k}: {e}")),
        }
        let n = l.n();
        let r = weyl_check(&l, &(DMatrix::identity(n, n) * eps))?;
        let exact = r.lambda.iter().zip(&r.nu).all(|(&lam, &nu)| (nu - lam - eps).abs() <= 1e-8 * nu.abs().max(1.0));
        t.check(exact, || format!("instance {k}: Ψ=εI shift not exact"));
    }
    Ok(t.finish())
}

fn random_labels(n: usize, rng: &mut impl Rng) -> Result<LabelMatrix> {
    let m = rng.random_range(1..=n);
    let known: Vec<(usize, usize)> = random_subset(n, m, rng).into_iter().map(|i| (i, rng.random_range(0..2))).collect();
    LabelMatrix::from_classes(n, 2, &known)
}

/// The two-node worked example, closed form against the Krylov path, and
/// minimal energy among interpolants.
pub fn solver_suite(seed: u64) -> Result<SuiteResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new("sobolev solver");
    let params = SobolevParams::default();

    let p2 = Graph::new(2, vec![(0, 1, 1.0)])?.laplacian();
    let z = solve_closed_form(&p2, &LabelMatrix::from_classes(2, 2, &[(0, 0)])?, &params)?.z;
    t.check((z[(0, 0)] - 1.0).abs() <= 1e-9 && (z[(1, 0)] - 5.0 / 6.0).abs() <= 1e-9, || {
        format!("two-node example gave ({}, {})", z[(0, 0)], z[(1, 0)])
    });

    for k in 0..20 {
        let n = rng.random_range(2..=50);
        let l = random_connected_graph(n, rng.random_range(0.05..0.4), &mut rng).laplacian();
        let labels = random_labels(n, &mut rng)?;
        let a = solve_closed_form(&l, &labels, &params)?.z;
        let b = solve_iterative(&l, &labels, &params, 1e-10, 10_000)?.z;
        let diff = (&a - &b).amax();
        t.check(diff <= 1e-6, || format!("graph {k}: N={n} closed vs iterative differ by {diff:e}"));
    }

    for k in 0..20 {
        let n = rng.random_range(2..=30);
        let l = random_connected_graph(n, rng.random_range(0.05..0.5), &mut rng).laplacian();
        let labels = random_labels(n, &mut rng)?;
        let z = solve_closed_form(&l, &labels, &params)?.z;
        let sampled = labels.sampled().mask();
        let mut beaten = false;
        for _ in 0..100 {
            for q in 0..2 {
                let col: Vec<f64> = (0..n)
                    .map(|i| if sampled[i] { labels.y()[(i, q)] } else { z[(i, q)] + rng.random_range(-1.0..1.0) })
                    .collect();
                let best: Vec<f64> = z.column(q).iter().copied().collect();
                // z matches y on S only to rounding, so ties are not losses
                let e_best = sobolev_energy(&best, &l, &params)?;
                if sobolev_energy(&col, &l, &params)? < e_best - 1e-12 * e_best.max(1.0) {
                    beaten = true;
                }
            }
        }
        t.check(!beaten, || format!("instance {k}: a random interpolant has lower energy"));
    }
    Ok(t.finish())
}

/// `decide_label` on a 101×101 grid against an integer restatement.
pub fn labeling_suite() -> SuiteResult {
    let mut t = Tally::new("label decision table");
    let rule = ThresholdRule::default();
    for empty in [false, true] {
        for i in 0..=100u32 {
            for j in 0..=100u32 {
                let (xi, mu) = (i as f64 / 100.0, j as f64 / 100.0);
                let expect_fg = !empty && i > 0 && j > 0 && (j > 25 || (i > 45 && j > 5) || (i > 90 && j > 2));
                let got = decide_label(xi, mu, empty, &rule);
                t.check((got == Label::Foreground) == expect_fg, || format!("ξ={xi} μ={mu} empty={empty}: {got:?}"));
            }
        }
    }
    t.finish()
}

/// Exact metric values, symmetry and additivity over frames.
pub fn metrics_suite(seed: u64) -> Result<SuiteResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new("precision/recall/F");
    let m = f_measure(2, 1, 1);
    t.check(m.f_measure == 2.0 / 3.0, || format!("f(2,1,1) = {}", m.f_measure));
    for _ in 0..200 {
        let (tp, fp, fn_) = (rng.random_range(0..50), rng.random_range(0..50), rng.random_range(0..50));
        let a = f_measure(tp, fp, fn_);
        let b = f_measure(tp, fn_, fp);
        t.check(a.f_measure == b.f_measure && a.f_measure <= (a.precision + a.recall) / 2.0 + 1e-15, || {
            format!("f({tp},{fp},{fn_}) asymmetric or above the arithmetic mean")
        });
    }
    for k in 0..20 {
        let (w, h) = (16, 12);
        let frames = rng.random_range(1..8);
        let mut total = Confusion::default();
        let mut union_pred = Vec::new();
        let mut union_gt = Vec::new();
        for f in 0..frames {
            let gt_px = random_pixels(w, h, &mut rng);
            let gt = GroundTruthFrame::new(f, gt_px.clone(), PixelSet::empty(w, h))?;
            let masks: Vec<(InstanceMask, Label)> = (0..rng.random_range(1..4))
                .filter_map(|q| {
                    let px = random_pixels(w, h, &mut rng);
                    let label = if rng.random_bool(0.5) { Label::Foreground } else { Label::Background };
                    InstanceMask::new(format!("i{q}"), f, px).ok().map(|m| (m, label))
                })
                .collect();
            total += pixel_confusion(masks.iter().map(|(m, l)| (m, *l)), &gt)?;
            // the same counts over all frames stacked as one tall frame
            let offset = f * w * h;
            for (m, l) in &masks {
                if *l == Label::Foreground {
                    union_pred.extend(m.pixels().indices().iter().map(|&i| i as usize + offset));
                }
            }
            union_gt.extend(gt_px.indices().iter().map(|&i| i as usize + offset));
        }
        union_pred.sort_unstable();
        union_pred.dedup();
        let tp = union_pred.iter().filter(|i| union_gt.binary_search(i).is_ok()).count() as u64;
        let stacked = Confusion { tp, fp: union_pred.len() as u64 - tp, fn_: union_gt.len() as u64 - tp };
        t.check(stacked == total, || format!("case {k}: per-frame sum {total:?} != stacked {stacked:?}"));
    }
    Ok(t.finish())
}

fn random_pixels(w: usize, h: usize, rng: &mut impl Rng) -> PixelSet {
    let (r0, c0) = (rng.random_range(0..h), rng.random_range(0..w));
    let (r1, c1) = (rng.random_range(r0..h), rng.random_range(c0..w));
    PixelSet::from_coords(w, h, (r0..=r1).flat_map(|r| (c0..=c1).map(move |c| (r, c)))).expect("in bounds")
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub seed: u64,
    pub recovery_instances: usize,
    pub perturbation_instances: usize,
    pub inject_asymmetric_psi: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { seed: 0, recovery_instances: 100, perturbation_instances: 200, inject_asymmetric_psi: false }
    }
}

pub fn run_all(opts: &VerifyOptions) -> Result<Vec<SuiteResult>> {
    let s = opts.seed;
    Ok(vec![
        recovery_suite(opts.recovery_instances, s)?,
        condition_suite(opts.perturbation_instances, s.wrapping_add(1))?,
        weyl_suite(opts.perturbation_instances, s.wrapping_add(1), opts.inject_asymmetric_psi)?,
        solver_suite(s.wrapping_add(2))?,
        labeling_suite(),
        metrics_suite(s.wrapping_add(3))?,
    ])
}
