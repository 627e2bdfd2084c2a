//! Uniform local binary patterns, 8 neighbours at radius 1.
//!
//! A neighbour contributes a 1 bit when it is strictly brighter than the
//! centre. The 58 codes with at most two circular 0/1 transitions get their
//! own bins in increasing code order; every other code shares bin 58.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::frame::{GrayFrame, PixelSet};

pub const LBP_BINS: usize = 59;

/// Circular neighbour order starting at the top-left corner.
const OFFSETS: [(isize, isize); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1)];

fn transitions(code: u8) -> u32 {
    (code ^ code.rotate_right(1)).count_ones()
}

fn bin_table() -> &'static [u8; 256] {
    static TABLE: OnceLock<[u8; 256]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [58u8; 256];
        let mut next = 0u8;
        for code in 0..=255u8 {
            if transitions(code) <= 2 {
                t[code as usize] = next;
                next += 1;
            }
        }
        debug_assert_eq!(next, 58);
        t
    })
}

/// LBP code at a pixel, borders clamped.
pub fn lbp_code(img: &GrayFrame, row: usize, col: usize) -> u8 {
    let centre = img.get(row, col);
    let mut code = 0u8;
    for (bit, (dr, dc)) in OFFSETS.iter().enumerate() {
        if img.get_clamped(row as isize + dr, col as isize + dc) > centre {
            code |= 1 << bit;
        }
    }
    code
}

pub fn lbp_bin(code: u8) -> usize {
    bin_table()[code as usize] as usize
}

/// L1-normalized uniform-LBP histogram over the region's pixels.
pub fn lbp_histogram(img: &GrayFrame, region: &PixelSet) -> Result<Vec<f64>> {
    if region.is_empty() {
        return Err(Error::Structural("LBP histogram over an empty region".into()));
    }
    let mut hist = vec![0.0; LBP_BINS];
    for (r, c) in region.coords() {
        hist[lbp_bin(lbp_code(img, r, c))] += 1.0;
    }
    super::histogram::normalize(&mut hist);
    Ok(hist)
}

/// LBP histogram over every pixel of the image.
pub fn lbp_histogram_full(img: &GrayFrame) -> Vec<f64> {
    lbp_histogram(img, &PixelSet::from_frame(img, |_| true)).expect("images are nonempty")
}
