//! One-sided Jacobi singular value decomposition.
//!
//! The bidiagonal SVD in nalgebra can return factors that do not
//! recompose the input when many singular values coincide, which is the
//! normal case for row subsets of orthonormal eigenvector blocks. Jacobi
//! rotations keep full relative accuracy there.

use nalgebra::{DMatrix, DVector};

const MAX_SWEEPS: usize = 80;

/// `A = U diag(s) Vᵀ` with `s` sorted in decreasing order.
#[derive(Debug, Clone)]
pub(crate) struct Svd {
    /// `m × r` with `r = min(m, n)`.
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    /// `n × r`.
    pub v: DMatrix<f64>,
}

impl Svd {
    pub fn new(a: &DMatrix<f64>) -> Self {
        if a.nrows() < a.ncols() {
            let t = Self::new(&a.transpose());
            return Svd { u: t.v, s: t.s, v: t.u };
        }
        let (m, n) = a.shape();
        let mut u = a.clone();
        let mut v = DMatrix::<f64>::identity(n, n);
        let (data, vdata) = (u.as_mut_slice(), v.as_mut_slice());
        for _ in 0..MAX_SWEEPS {
            let mut rotated = false;
            for p in 0..n {
                for q in p + 1..n {
                    let (cp, cq) = column_pair(data, m, p, q);
                    let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                    for (x, y) in cp.iter().zip(cq.iter()) {
                        alpha += x * x;
                        beta += y * y;
                        gamma += x * y;
                    }
                    if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                        continue;
                    }
                    rotated = true;
                    let zeta = (beta - alpha) / (2.0 * gamma);
                    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    rotate(cp, cq, c, s);
                    let (vp, vq) = column_pair(vdata, n, p, q);
                    rotate(vp, vq, c, s);
                }
            }
            if !rotated {
                break;
            }
        }
        let mut order: Vec<(usize, f64)> = (0..n).map(|j| (j, u.column(j).norm())).collect();
        order.sort_by(|a, b| b.1.total_cmp(&a.1));
        let s = DVector::from_iterator(n, order.iter().map(|&(_, s)| s));
        let u = DMatrix::from_fn(m, n, |i, k| {
            let (j, sj) = order[k];
            if sj > 0.0 {
                u[(i, j)] / sj
            } else {
                0.0
            }
        });
        let v = DMatrix::from_fn(n, n, |i, k| v[(i, order[k].0)]);
        Svd { u, s, v }
    }

    pub fn min(&self) -> f64 {
        self.s.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.s.iter().copied().fold(0.0, f64::max)
    }

    /// Minimum-norm least-squares solution, dropping singular values at or
    /// below `cutoff`.
    pub fn solve(&self, b: &DVector<f64>, cutoff: f64) -> DVector<f64> {
        let mut x = DVector::zeros(self.v.nrows());
        for k in 0..self.s.len() {
            if self.s[k] > cutoff {
                let coef = self.u.column(k).dot(b) / self.s[k];
                x.axpy(coef, &self.v.column(k), 1.0);
            }
        }
        x
    }
}

/// Columns `p < q` of a column-major buffer with `rows` rows.
fn column_pair(data: &mut [f64], rows: usize, p: usize, q: usize) -> (&mut [f64], &mut [f64]) {
    let (head, tail) = data.split_at_mut(q * rows);
    (&mut head[p * rows..(p + 1) * rows], &mut tail[..rows])
}

fn rotate(xs: &mut [f64], ys: &mut [f64], c: f64, s: f64) {
    for (x, y) in xs.iter_mut().zip(ys.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}
