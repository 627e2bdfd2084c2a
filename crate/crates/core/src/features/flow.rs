//! Single-scale Lucas–Kanade optical flow.
//!
//! Intensities stay on the 0–255 scale. Spatial gradients are central
//! differences (one-sided at the border) of the mean of the two frames, the
//! temporal derivative is `curr − prev`, and the 2×2 normal equations are
//! accumulated over a square window truncated at the image border. Pixels
//! whose normal matrix has determinant below [`DEGENERATE_DET`] get zero
//! flow.

use crate::error::{Error, Result};
use crate::frame::{same_dims, GrayFrame};

pub const DEFAULT_WINDOW: usize = 5;
pub const DEGENERATE_DET: f64 = 1e-6;

/// Per-pixel flow of the current frame relative to the previous one.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub width: usize,
    pub height: usize,
    pub vx: Vec<f64>,
    pub vy: Vec<f64>,
}

impl FlowField {
    pub fn at(&self, row: usize, col: usize) -> (f64, f64) {
        let i = row * self.width + col;
        (self.vx[i], self.vy[i])
    }
}

/// Summed-area table with a zero border row and column.
struct Integral {
    w: usize,
    data: Vec<f64>,
}

impl Integral {
    fn new(values: &[f64], w: usize, h: usize) -> Self {
        let iw = w + 1;
        let mut data = vec![0.0; iw * (h + 1)];
        for r in 0..h {
            let mut row_sum = 0.0;
            for c in 0..w {
                row_sum += values[r * w + c];
                data[(r + 1) * iw + c + 1] = data[r * iw + c + 1] + row_sum;
            }
        }
        Self { w: iw, data }
    }

    /// Sum over rows `r0..r1` and columns `c0..c1` (exclusive ends).
    fn sum(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> f64 {
        self.data[r1 * self.w + c1] - self.data[r0 * self.w + c1] - self.data[r1 * self.w + c0]
            + self.data[r0 * self.w + c0]
    }
}

pub fn lucas_kanade(prev: &GrayFrame, curr: &GrayFrame, window: usize) -> Result<FlowField> {
    same_dims(prev, curr)?;
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::Parameter(format!("Lucas–Kanade window must be odd, got {window}")));
    }
    let (h, w) = prev.dims();
    let mean: Vec<f64> =
        prev.data().iter().zip(curr.data()).map(|(&a, &b)| (a as f64 + b as f64) / 2.0).collect();
    let at = |r: usize, c: usize| mean[r * w + c];

    let mut ixx = vec![0.0; w * h];
    let mut ixy = vec![0.0; w * h];
    let mut iyy = vec![0.0; w * h];
    let mut ixt = vec![0.0; w * h];
    let mut iyt = vec![0.0; w * h];
    for r in 0..h {
        for c in 0..w {
            let (cl, cr) = (c.saturating_sub(1), (c + 1).min(w - 1));
            let (ru, rd) = (r.saturating_sub(1), (r + 1).min(h - 1));
            let gx = if cr > cl { (at(r, cr) - at(r, cl)) / (cr - cl) as f64 } else { 0.0 };
            let gy = if rd > ru { (at(rd, c) - at(ru, c)) / (rd - ru) as f64 } else { 0.0 };
            let i = r * w + c;
            let gt = curr.data()[i] as f64 - prev.data()[i] as f64;
            ixx[i] = gx * gx;
            ixy[i] = gx * gy;
            iyy[i] = gy * gy;
            ixt[i] = gx * gt;
            iyt[i] = gy * gt;
        }
    }
    let sums = [&ixx, &ixy, &iyy, &ixt, &iyt].map(|v| Integral::new(v, w, h));

    let half = window / 2;
    let mut vx = vec![0.0; w * h];
    let mut vy = vec![0.0; w * h];
    for r in 0..h {
        let (r0, r1) = (r.saturating_sub(half), (r + half + 1).min(h));
        for c in 0..w {
            let (c0, c1) = (c.saturating_sub(half), (c + half + 1).min(w));
            let [sxx, sxy, syy, sxt, syt] = [0, 1, 2, 3, 4].map(|k| sums[k].sum(r0, r1, c0, c1));
            let det = sxx * syy - sxy * sxy;
            if det < DEGENERATE_DET {
                continue;
            }
            let i = r * w + c;
            vx[i] = (-syy * sxt + sxy * syt) / det;
            vy[i] = (sxy * sxt - sxx * syt) / det;
        }
    }
    Ok(FlowField { width: w, height: h, vx, vy })
}
