//! 8-bit grayscale frames, pixel sets, and frame directory loading.

use std::path::{Path, PathBuf};

use image::DynamicImage;

use crate::error::{Error, Result};

/// Row-major 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayFrame {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayFrame {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Structural("image dimensions must be nonzero".into()));
        }
        if data.len() != width * height {
            return Err(Error::Structural(format!(
                "{} pixels for a {width}×{height} image",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self { width, height, data: vec![value; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> u8) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.width + col]
    }

    /// Pixel with coordinates clamped into the image.
    pub fn get_clamped(&self, row: isize, col: isize) -> u8 {
        let r = row.clamp(0, self.height as isize - 1) as usize;
        let c = col.clamp(0, self.width as isize - 1) as usize;
        self.data[r * self.width + c]
    }

    pub fn set(&mut self, row: usize, col: usize, v: u8) {
        self.data[row * self.width + col] = v;
    }

    /// `|self − other|` pixelwise.
    pub fn abs_diff(&self, other: &GrayFrame) -> Result<GrayFrame> {
        same_dims(self, other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a.abs_diff(*b)).collect();
        Ok(GrayFrame { width: self.width, height: self.height, data })
    }

    /// Sub-image covering `bbox`.
    pub fn crop(&self, bbox: &BoundingBox) -> GrayFrame {
        let w = bbox.col_max - bbox.col_min + 1;
        let h = bbox.row_max - bbox.row_min + 1;
        GrayFrame::from_fn(w, h, |r, c| self.get(bbox.row_min + r, bbox.col_min + c))
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let img = image::GrayImage::from_raw(self.width as u32, self.height as u32, self.data.clone())
            .expect("buffer matches dimensions");
        img.save(path).map_err(|source| Error::Image { path: path.to_path_buf(), source })
    }
}

pub(crate) fn same_dims(a: &GrayFrame, b: &GrayFrame) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::Structural(format!(
            "image dimensions differ: {}×{} vs {}×{}",
            a.height, a.width, b.height, b.width
        )));
    }
    Ok(())
}

/// ITU-R BT.601 luma, rounded.
pub fn luma601(r: u8, g: u8, b: u8) -> u8 {
    (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64).round().clamp(0.0, 255.0) as u8
}

/// Loads an image file as grayscale; color input goes through BT.601 luma.
pub fn load_gray(path: &Path) -> Result<GrayFrame> {
    let img = image::open(path).map_err(|source| Error::Image { path: path.to_path_buf(), source })?;
    Ok(to_gray(img))
}

fn to_gray(img: DynamicImage) -> GrayFrame {
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(g) => GrayFrame { width: w, height: h, data: g.into_raw() },
        DynamicImage::ImageLumaA8(_) | DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA16(_) => {
            GrayFrame { width: w, height: h, data: img.to_luma8().into_raw() }
        }
        other => {
            let rgb = other.to_rgb8();
            let data = rgb.pixels().map(|p| luma601(p[0], p[1], p[2])).collect();
            GrayFrame { width: w, height: h, data }
        }
    }
}

/// Tight axis-aligned hull of a pixel set, inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundingBox {
    pub row_min: usize,
    pub row_max: usize,
    pub col_min: usize,
    pub col_max: usize,
}

/// Sorted distinct linear pixel indices within a `width × height` frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelSet {
    width: usize,
    height: usize,
    indices: Vec<u32>,
}

impl PixelSet {
    pub fn empty(width: usize, height: usize) -> Self {
        Self { width, height, indices: Vec::new() }
    }

    pub fn from_coords(width: usize, height: usize, coords: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut indices = Vec::new();
        for (r, c) in coords {
            if r >= height || c >= width {
                return Err(Error::Structural(format!("pixel ({r},{c}) outside {height}×{width} frame")));
            }
            indices.push((r * width + c) as u32);
        }
        indices.sort_unstable();
        indices.dedup();
        Ok(Self { width, height, indices })
    }

    /// Pixels whose value satisfies `pred`.
    pub fn from_frame(frame: &GrayFrame, pred: impl Fn(u8) -> bool) -> Self {
        let indices = frame
            .data()
            .iter()
            .enumerate()
            .filter(|(_, &v)| pred(v))
            .map(|(i, _)| i as u32)
            .collect();
        Self { width: frame.width(), height: frame.height(), indices }
    }

    pub(crate) fn from_sorted(width: usize, height: usize, indices: Vec<u32>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        Self { width, height, indices }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn coords(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.indices.iter().map(|&i| (i as usize / self.width, i as usize % self.width))
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        self.indices.binary_search(&((row * self.width + col) as u32)).is_ok()
    }

    pub fn bounding_box(&self) -> Option<BoundingBox> {
        let mut it = self.coords();
        let (r0, c0) = it.next()?;
        let mut b = BoundingBox { row_min: r0, row_max: r0, col_min: c0, col_max: c0 };
        for (r, c) in it {
            b.row_min = b.row_min.min(r);
            b.row_max = b.row_max.max(r);
            b.col_min = b.col_min.min(c);
            b.col_max = b.col_max.max(c);
        }
        Some(b)
    }

    /// `|self ∩ other|`.
    pub fn intersection_len(&self, other: &PixelSet) -> usize {
        let (mut i, mut j, mut n) = (0, 0, 0);
        let (a, b) = (&self.indices, &other.indices);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }

    pub fn union_len(&self, other: &PixelSet) -> usize {
        self.len() + other.len() - self.intersection_len(other)
    }

    /// Pixels of `self` not in `other`.
    pub fn difference(&self, other: &PixelSet) -> PixelSet {
        let indices = self.indices.iter().copied().filter(|i| other.indices.binary_search(i).is_err()).collect();
        PixelSet { width: self.width, height: self.height, indices }
    }

    /// The same pixel set moved by `(drow, dcol)` inside a frame of the
    /// given size.
    pub fn translated(&self, drow: isize, dcol: isize, width: usize, height: usize) -> Result<PixelSet> {
        let moved = self.coords().map(|(r, c)| ((r as isize + drow) as usize, (c as isize + dcol) as usize));
        PixelSet::from_coords(width, height, moved)
    }
}

/// Frame files in a directory, ordered by file name.
///
/// The frame number is the trailing run of digits in the file stem
/// (`in000123.jpg` → 123); files without digits are numbered by position.
pub fn list_frames(dir: &Path) -> Result<Vec<(usize, PathBuf)>> {
    let rd = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files: Vec<PathBuf> = Vec::new();
    for entry in rd {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if matches!(ext.as_deref(), Some("png" | "pgm" | "pnm" | "jpg" | "jpeg")) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files
        .into_iter()
        .enumerate()
        .map(|(pos, p)| (trailing_number(&p).unwrap_or(pos), p))
        .collect())
}

pub(crate) fn trailing_number(path: &Path) -> Option<usize> {
    let stem = path.file_stem()?.to_str()?;
    let digits: String = stem.chars().rev().take_while(char::is_ascii_digit).collect();
    if digits.is_empty() {
        return None;
    }
    digits.chars().rev().collect::<String>().parse().ok()
}

/// Ordered grayscale frames of one video.
#[derive(Debug, Clone)]
pub struct FrameSequence {
    sequence_id: String,
    frame_numbers: Vec<usize>,
    frames: Vec<GrayFrame>,
}

impl FrameSequence {
    pub fn new(sequence_id: impl Into<String>, frame_numbers: Vec<usize>, frames: Vec<GrayFrame>) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::Structural("a frame sequence needs at least 2 frames".into()));
        }
        if frame_numbers.len() != frames.len() {
            return Err(Error::Structural("one frame number per frame is required".into()));
        }
        if frame_numbers.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Structural("frame numbers must be strictly increasing".into()));
        }
        for f in &frames[1..] {
            same_dims(&frames[0], f)?;
        }
        Ok(Self { sequence_id: sequence_id.into(), frame_numbers, frames })
    }

    /// Frames numbered `0..len`.
    pub fn from_frames(sequence_id: impl Into<String>, frames: Vec<GrayFrame>) -> Result<Self> {
        let numbers = (0..frames.len()).collect();
        Self::new(sequence_id, numbers, frames)
    }

    pub fn load_dir(sequence_id: impl Into<String>, dir: &Path) -> Result<Self> {
        let listed = list_frames(dir)?;
        let mut numbers = Vec::with_capacity(listed.len());
        let mut frames = Vec::with_capacity(listed.len());
        for (n, p) in listed {
            numbers.push(n);
            frames.push(load_gray(&p)?);
        }
        Self::new(sequence_id, numbers, frames)
    }

    pub fn id(&self) -> &str {
        &self.sequence_id
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[GrayFrame] {
        &self.frames
    }

    pub fn frame_numbers(&self) -> &[usize] {
        &self.frame_numbers
    }

    /// `(height, width)`.
    pub fn dims(&self) -> (usize, usize) {
        self.frames[0].dims()
    }

    /// Position of frame number `n` in the sequence.
    pub fn position(&self, n: usize) -> Option<usize> {
        self.frame_numbers.binary_search(&n).ok()
    }
}
