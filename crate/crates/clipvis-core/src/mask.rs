//! Instance masks and the soft-IoU family of overlap measures.
//!
//! Masks are dense row-major grids of `f64` in `[0, 1]`. The same soft-IoU
//! definition serves three roles: a differentiable per-frame loss term, the
//! per-frame agreement inside clip match scores, and (restricted to binary
//! masks) the classic set IoU. All pixel reductions run in row-major order
//! into a single accumulator so results are bit-reproducible.

use crate::linker::ClipInstanceTrack;
use thiserror::Error;

/// Binarization threshold applied everywhere a soft mask is hardened;
/// values equal to the threshold map to foreground.
pub const BINARY_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum MaskError {
    #[error("mask dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("mask sequence length mismatch: {0} vs {1} frames")]
    LengthMismatch(usize, usize),
    #[error("mask must be at least 1x1, got {0}x{1}")]
    EmptyGrid(usize, usize),
    #[error("mask value {value} outside [0, 1] at pixel index {index}")]
    ValueOutOfRange { value: f64, index: usize },
    #[error("mask value count {got} does not match {width}x{height}")]
    BadValueCount {
        got: usize,
        width: usize,
        height: usize,
    },
    #[error("gradient undefined at empty masks")]
    GradientUndefined,
    #[error("instance count mismatch: {0} predicted vs {1} ground-truth tracks")]
    InstanceCountMismatch(usize, usize),
    #[error("track frame intervals differ: [{0}, {1}] vs [{2}, {3}]")]
    IntervalMismatch(usize, usize, usize, usize),
}

/// Dense soft mask over a `width x height` pixel grid, row-major, each value
/// in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskGrid {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl MaskGrid {
    /// Builds a mask from row-major values, validating the range invariant.
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self, MaskError> {
        if width == 0 || height == 0 {
            return Err(MaskError::EmptyGrid(width, height));
        }
        if values.len() != width * height {
            return Err(MaskError::BadValueCount {
                got: values.len(),
                width,
                height,
            });
        }
        for (index, &value) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(MaskError::ValueOutOfRange { value, index });
            }
        }
        Ok(MaskGrid {
            width,
            height,
            values,
        })
    }

    /// All-zero mask.
    pub fn zeros(width: usize, height: usize) -> Self {
        MaskGrid::new(width, height, vec![0.0; width * height])
            .expect("zero grid dimensions must be nonzero")
    }

    /// Builds a mask by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self, MaskError> {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        MaskGrid::new(width, height, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Value at column `x`, row `y`.
    pub fn get(&self, x: usize, y: usize) -> f64 {
        debug_assert!(x < self.width && y < self.height);
        self.values[y * self.width + x]
    }

    /// Row-major values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// True when the pixel counts as foreground after thresholding.
    pub fn is_foreground(&self, x: usize, y: usize) -> bool {
        self.get(x, y) >= BINARY_THRESHOLD
    }

    /// Hardens the mask: values `>= 0.5` map to `1.0`, the rest to `0.0`.
    pub fn binarized(&self) -> MaskGrid {
        let values = self
            .values
            .iter()
            .map(|&v| if v >= BINARY_THRESHOLD { 1.0 } else { 0.0 })
            .collect();
        MaskGrid {
            width: self.width,
            height: self.height,
            values,
        }
    }

    /// True when every value is exactly 0.0 or 1.0.
    pub fn is_binary(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// Number of foreground pixels after thresholding.
    pub fn foreground_area(&self) -> usize {
        self.values
            .iter()
            .filter(|&&v| v >= BINARY_THRESHOLD)
            .count()
    }

    fn same_shape(&self, other: &MaskGrid) -> Result<(), MaskError> {
        if self.width != other.width || self.height != other.height {
            return Err(MaskError::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }
}

/// Per-pixel gradient of a scalar with respect to a mask; same layout as
/// [`MaskGrid`] but values are unbounded.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientGrid {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl GradientGrid {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        debug_assert!(x < self.width && y < self.height);
        self.values[y * self.width + x]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Ordered run of same-sized masks over a contiguous frame interval.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSequence {
    frames: Vec<MaskGrid>,
}

impl MaskSequence {
    /// Builds a sequence, validating that all frames share one grid shape.
    pub fn new(frames: Vec<MaskGrid>) -> Result<Self, MaskError> {
        if let Some(first) = frames.first() {
            for frame in &frames[1..] {
                first.same_shape(frame)?;
            }
        }
        Ok(MaskSequence { frames })
    }

    /// Sequence of `len` all-zero frames.
    pub fn zeros(len: usize, width: usize, height: usize) -> Self {
        MaskSequence {
            frames: (0..len).map(|_| MaskGrid::zeros(width, height)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame(&self, index: usize) -> &MaskGrid {
        &self.frames[index]
    }

    pub fn frames(&self) -> &[MaskGrid] {
        &self.frames
    }

    pub fn iter(&self) -> std::slice::Iter<'_, MaskGrid> {
        self.frames.iter()
    }
}

/// Video-level descriptor shared by generators, files, and the CLI:
/// `num_frames` frames of `width x height` pixels and `categories` classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VideoSpec {
    pub num_frames: usize,
    pub width: usize,
    pub height: usize,
    pub categories: usize,
}

/// Soft intersection-over-union of two same-sized masks:
///
/// ```text
/// sIoU(a, b) = sum_p a(p) b(p) / sum_p [a(p) + b(p) - a(p) b(p)]
/// ```
///
/// For binary masks this is exactly `|intersection| / |union|`. Two empty
/// masks score `1.0`: agreement that the object is absent counts as perfect
/// overlap, which keeps clip match scores meaningful across occlusions.
pub fn soft_iou(a: &MaskGrid, b: &MaskGrid) -> Result<f64, MaskError> {
    a.same_shape(b)?;
    let mut numerator = 0.0;
    let mut denominator = 0.0;
    for (av, bv) in a.values.iter().zip(&b.values) {
        numerator += av * bv;
        denominator += av + bv - av * bv;
    }
    if denominator == 0.0 {
        return Ok(1.0);
    }
    Ok(numerator / denominator)
}

/// Per-pixel gradient of `soft_iou(a, b)` with respect to the first mask:
///
/// ```text
/// d sIoU / d a(p) = [b(p) * D - N * (1 - b(p))] / D^2
/// ```
///
/// where `N` and `D` are the soft-IoU numerator and denominator. Undefined
/// when both masks are empty (`D = 0`).
pub fn soft_iou_grad(a: &MaskGrid, b: &MaskGrid) -> Result<GradientGrid, MaskError> {
    a.same_shape(b)?;
    let mut numerator = 0.0;
    let mut denominator = 0.0;
    for (av, bv) in a.values.iter().zip(&b.values) {
        numerator += av * bv;
        denominator += av + bv - av * bv;
    }
    if denominator == 0.0 {
        return Err(MaskError::GradientUndefined);
    }
    let values = b
        .values
        .iter()
        .map(|&bv| (bv * denominator - numerator * (1.0 - bv)) / (denominator * denominator))
        .collect();
    Ok(GradientGrid {
        width: a.width,
        height: a.height,
        values,
    })
}

/// Video-level IoU of two binarized mask sequences, pooled over frames:
///
/// ```text
/// IoU = sum_t |pred_t ∩ gt_t| / sum_t |pred_t ∪ gt_t|
/// ```
///
/// Pixel membership uses the 0.5 threshold; this is not the mean of
/// per-frame IoUs, so a single bad frame is weighted by its pixel count.
/// Two sequences with empty union everywhere score `1.0`.
pub fn video_iou(pred: &MaskSequence, gt: &MaskSequence) -> Result<f64, MaskError> {
    if pred.len() != gt.len() {
        return Err(MaskError::LengthMismatch(pred.len(), gt.len()));
    }
    let mut intersection = 0u64;
    let mut union = 0u64;
    for (p, g) in pred.iter().zip(gt.iter()) {
        p.same_shape(g)?;
        for (pv, gv) in p.values.iter().zip(&g.values) {
            let pf = *pv >= BINARY_THRESHOLD;
            let gf = *gv >= BINARY_THRESHOLD;
            intersection += u64::from(pf && gf);
            union += u64::from(pf || gf);
        }
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(intersection as f64 / union as f64)
}

/// Mask propagation loss over paired predicted and ground-truth clip tracks:
/// the sum over instances and clip frames of `1 - sIoU`. Unnormalized, so
/// longer clips and more instances accumulate more loss. Pairs are matched
/// by list position and must cover identical frame intervals.
pub fn prop_loss(
    pred_tracks: &[ClipInstanceTrack],
    gt_tracks: &[ClipInstanceTrack],
) -> Result<f64, MaskError> {
    if pred_tracks.len() != gt_tracks.len() {
        return Err(MaskError::InstanceCountMismatch(
            pred_tracks.len(),
            gt_tracks.len(),
        ));
    }
    let mut loss = 0.0;
    for (pred, gt) in pred_tracks.iter().zip(gt_tracks) {
        if pred.start_frame() != gt.start_frame() || pred.end_frame() != gt.end_frame() {
            return Err(MaskError::IntervalMismatch(
                pred.start_frame(),
                pred.end_frame(),
                gt.start_frame(),
                gt.end_frame(),
            ));
        }
        for (p, g) in pred.masks().iter().zip(gt.masks().iter()) {
            loss += 1.0 - soft_iou(p, g)?;
        }
    }
    Ok(loss)
}
