use crate::error::{Error, Result};
use crate::frame::{FrameSequence, GrayFrame};

/// Static background estimated by a per-pixel temporal median.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackgroundModel {
    pub image: GrayFrame,
    pub frames_used: usize,
    pub stride: usize,
}

/// Median over frames `0, stride, 2·stride, …`. With an even number of
/// samples the lower of the two middle values is taken.
pub fn median_background(seq: &FrameSequence, stride: usize) -> Result<BackgroundModel> {
    median_of_frames(seq.frames(), stride)
}

pub fn median_of_frames(frames: &[GrayFrame], stride: usize) -> Result<BackgroundModel> {
    if stride == 0 {
        return Err(Error::Parameter("median stride must be at least 1".into()));
    }
    let sampled: Vec<&GrayFrame> = frames.iter().step_by(stride).collect();
    let first = sampled.first().ok_or_else(|| Error::Structural("no frames to build a background from".into()))?;
    for f in &sampled {
        crate::frame::same_dims(first, f)?;
    }
    let n = sampled.len();
    let mid = (n - 1) / 2;
    let mut counts = [0u32; 256];
    let data = (0..first.data().len())
        .map(|p| {
            counts.fill(0);
            for f in &sampled {
                counts[f.data()[p] as usize] += 1;
            }
            let mut seen = 0usize;
            for (v, &c) in counts.iter().enumerate() {
                seen += c as usize;
                if seen > mid {
                    return v as u8;
                }
            }
            unreachable!("counts sum to the sample size")
        })
        .collect();
    Ok(BackgroundModel {
        image: GrayFrame::new(first.width(), first.height(), data)?,
        frames_used: n,
        stride,
    })
}
