use crate::error::{Error, Result};
use crate::frame::{GrayFrame, PixelSet};

/// Equal-width intensity histogram over `[0, 255]`, L1-normalized.
pub fn intensity_histogram(img: &GrayFrame, region: &PixelSet, bins: usize) -> Result<Vec<f64>> {
    if bins == 0 {
        return Err(Error::Parameter("histogram needs at least one bin".into()));
    }
    if region.is_empty() {
        return Err(Error::Structural("intensity histogram over an empty region".into()));
    }
    let mut hist = vec![0.0; bins];
    for &p in region.indices() {
        let v = img.data()[p as usize] as usize;
        hist[v * bins / 256] += 1.0;
    }
    normalize(&mut hist);
    Ok(hist)
}

/// Histogram of real values over `[-range, range]`, out-of-range values
/// clamped into the end bins, L1-normalized.
pub fn value_histogram(values: &[f64], bins: usize, range: f64) -> Result<Vec<f64>> {
    if bins == 0 || !(range > 0.0) {
        return Err(Error::Parameter("value histogram needs bins >= 1 and a positive range".into()));
    }
    if values.is_empty() {
        return Err(Error::Structural("value histogram over no values".into()));
    }
    let mut hist = vec![0.0; bins];
    for &v in values {
        let t = ((v + range) / (2.0 * range) * bins as f64).floor();
        let b = if t.is_nan() { bins / 2 } else { t.clamp(0.0, (bins - 1) as f64) as usize };
        hist[b] += 1.0;
    }
    normalize(&mut hist);
    Ok(hist)
}

pub(crate) fn normalize(hist: &mut [f64]) {
    let total: f64 = hist.iter().sum();
    if total > 0.0 {
        hist.iter_mut().for_each(|h| *h /= total);
    }
}

/// Minimum, maximum, mean, population standard deviation, mean absolute
/// deviation about the mean, and range.
pub fn flow_statistics(values: &[f64]) -> Result<[f64; 6]> {
    if values.is_empty() {
        return Err(Error::Structural("statistics of an empty sample".into()));
    }
    let n = values.len() as f64;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let mad = values.iter().map(|v| (v - mean).abs()).sum::<f64>() / n;
    Ok([min, max, mean, var.sqrt(), mad, max - min])
}
