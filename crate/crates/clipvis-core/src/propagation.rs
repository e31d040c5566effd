//! Forward mask-propagation branch at toy scale.
//!
//! Given per-frame feature tensors for a clip centered at frame `t`, the
//! branch warps each instance's masked features from `t` to every other clip
//! frame and decodes them into soft masks:
//!
//! 1. `f_t ⊙ M_t^i` isolates instance features at the center frame,
//! 2. a residual block on `f_t - f_{t+δ}` predicts per-tap sampling offsets,
//! 3. a deformable convolution warps the instance features with them,
//! 4. warped features plus `f_{t+δ}` pass a 1x1 head to per-instance logits,
//! 5. a pixelwise softmax across instances, gated by a sigmoid attention map
//!    of `f_{t+δ}`, yields the propagated masks.
//!
//! Everything is plain `f64` arithmetic in fixed iteration order, so outputs
//! are deterministic for given inputs and parameters. There is no training:
//! parameters come from a file or from the seeded initializer.

use crate::linker::{clip_span, ClipInstanceTrack, LinkError};
use crate::mask::{MaskError, MaskGrid, MaskSequence};
use crate::rng::Rng64;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PropagationError {
    #[error("feature tensor must be at least 1x1x1, got {channels}x{width}x{height}")]
    EmptyTensor {
        channels: usize,
        width: usize,
        height: usize,
    },
    #[error("feature value count {got} does not match {channels}x{width}x{height}")]
    BadValueCount {
        got: usize,
        channels: usize,
        width: usize,
        height: usize,
    },
    #[error("feature shape mismatch: {0}x{1}x{2} vs {3}x{4}x{5} (channels x width x height)")]
    FeatureShapeMismatch(usize, usize, usize, usize, usize, usize),
    #[error("mask {mask_width}x{mask_height} does not match feature grid {width}x{height}")]
    MaskShapeMismatch {
        width: usize,
        height: usize,
        mask_width: usize,
        mask_height: usize,
    },
    #[error("kernel size must be odd and nonzero, got {0}")]
    BadKernelSize(usize),
    #[error("dilation must be at least 1")]
    BadDilation,
    #[error("weight count {got} does not match {out}x{inp}x{k}x{k}")]
    BadWeightCount {
        got: usize,
        out: usize,
        inp: usize,
        k: usize,
    },
    #[error("bias count {got} does not match {out} output channels")]
    BadBiasCount { got: usize, out: usize },
    #[error("convolution expects {expected} input channels, got {got}")]
    WrongInputChannels { expected: usize, got: usize },
    #[error("offset field for a {k}x{k} kernel needs {expected} planes, got {got}")]
    WrongOffsetPlanes {
        k: usize,
        expected: usize,
        got: usize,
    },
    #[error("offset field grid {0}x{1} does not match source grid {2}x{3}")]
    OffsetGridMismatch(usize, usize, usize, usize),
    #[error("offset value count {got} does not match {planes} planes of {width}x{height}")]
    BadOffsetCount {
        got: usize,
        planes: usize,
        width: usize,
        height: usize,
    },
    #[error("residual skip projection required: block maps {inp} -> {out} channels")]
    MissingSkipProjection { inp: usize, out: usize },
    #[error("parameter chain broken at {stage}: expects {expected} channels, got {got}")]
    ChainMismatch {
        stage: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("cannot propagate an empty instance list")]
    EmptyInstances,
    #[error("clip of {expected} frames got {got} feature tensors")]
    FrameCountMismatch { expected: usize, got: usize },
    #[error("{masks} instance masks but {scores} class score vectors")]
    ScoreCountMismatch { masks: usize, scores: usize },
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error(transparent)]
    Link(#[from] LinkError),
}

/// Dense feature map: `channels` planes of `width x height` values, stored
/// channel-major then row-major (`index = (c * height + y) * width + x`).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    channels: usize,
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl FeatureTensor {
    pub fn new(
        channels: usize,
        width: usize,
        height: usize,
        values: Vec<f64>,
    ) -> Result<Self, PropagationError> {
        if channels == 0 || width == 0 || height == 0 {
            return Err(PropagationError::EmptyTensor {
                channels,
                width,
                height,
            });
        }
        if values.len() != channels * width * height {
            return Err(PropagationError::BadValueCount {
                got: values.len(),
                channels,
                width,
                height,
            });
        }
        Ok(FeatureTensor {
            channels,
            width,
            height,
            values,
        })
    }

    pub fn zeros(channels: usize, width: usize, height: usize) -> Self {
        FeatureTensor::new(
            channels,
            width,
            height,
            vec![0.0; channels * width * height],
        )
        .expect("zero tensor dimensions must be nonzero")
    }

    pub fn from_fn(
        channels: usize,
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self, PropagationError> {
        let mut values = Vec::with_capacity(channels * width * height);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    values.push(f(c, x, y));
                }
            }
        }
        FeatureTensor::new(channels, width, height, values)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, c: usize, x: usize, y: usize) -> f64 {
        debug_assert!(c < self.channels && x < self.width && y < self.height);
        self.values[(c * self.height + y) * self.width + x]
    }

    fn same_shape(&self, other: &FeatureTensor) -> Result<(), PropagationError> {
        if self.channels != other.channels
            || self.width != other.width
            || self.height != other.height
        {
            return Err(PropagationError::FeatureShapeMismatch(
                self.channels,
                self.width,
                self.height,
                other.channels,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }

    /// Elementwise sum; shapes must match.
    pub fn add(&self, other: &FeatureTensor) -> Result<FeatureTensor, PropagationError> {
        self.same_shape(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        Ok(FeatureTensor { values, ..*self })
    }

    /// Elementwise difference; shapes must match.
    pub fn sub(&self, other: &FeatureTensor) -> Result<FeatureTensor, PropagationError> {
        self.same_shape(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(FeatureTensor { values, ..*self })
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> FeatureTensor {
        FeatureTensor {
            channels: self.channels,
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Bilinear sample of channel `c` at fractional position `(px, py)`;
    /// positions outside the grid read as zero. Integer positions inside the
    /// grid reproduce the stored value exactly.
    pub fn sample_bilinear(&self, c: usize, px: f64, py: f64) -> f64 {
        let x0 = px.floor();
        let y0 = py.floor();
        let wx = px - x0;
        let wy = py - y0;
        let x0 = x0 as i64;
        let y0 = y0 as i64;
        let mut acc = 0.0;
        for (corner_x, weight_x) in [(x0, 1.0 - wx), (x0 + 1, wx)] {
            for (corner_y, weight_y) in [(y0, 1.0 - wy), (y0 + 1, wy)] {
                let w = weight_x * weight_y;
                if w == 0.0 {
                    continue;
                }
                if corner_x >= 0
                    && corner_y >= 0
                    && (corner_x as usize) < self.width
                    && (corner_y as usize) < self.height
                {
                    acc += w * self.get(c, corner_x as usize, corner_y as usize);
                }
            }
        }
        acc
    }
}

/// Weights of one 2-D convolution: `out x in x k x k` kernel (row-major in
/// that order), one bias per output channel, `k` odd, unit stride, zero
/// "same" padding, and an integer dilation applied to every tap.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    out_channels: usize,
    in_channels: usize,
    kernel_size: usize,
    dilation: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl ConvParams {
    pub fn new(
        out_channels: usize,
        in_channels: usize,
        kernel_size: usize,
        dilation: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self, PropagationError> {
        if kernel_size == 0 || kernel_size.is_multiple_of(2) {
            return Err(PropagationError::BadKernelSize(kernel_size));
        }
        if dilation == 0 {
            return Err(PropagationError::BadDilation);
        }
        let expected = out_channels * in_channels * kernel_size * kernel_size;
        if weights.len() != expected {
            return Err(PropagationError::BadWeightCount {
                got: weights.len(),
                out: out_channels,
                inp: in_channels,
                k: kernel_size,
            });
        }
        if bias.len() != out_channels {
            return Err(PropagationError::BadBiasCount {
                got: bias.len(),
                out: out_channels,
            });
        }
        Ok(ConvParams {
            out_channels,
            in_channels,
            kernel_size,
            dilation,
            weights,
            bias,
        })
    }

    /// All-zero kernel and bias.
    pub fn zeros(
        out_channels: usize,
        in_channels: usize,
        kernel_size: usize,
        dilation: usize,
    ) -> Result<Self, PropagationError> {
        ConvParams::new(
            out_channels,
            in_channels,
            kernel_size,
            dilation,
            vec![0.0; out_channels * in_channels * kernel_size * kernel_size],
            vec![0.0; out_channels],
        )
    }

    /// Kronecker delta kernel: weight 1 at the center tap of each channel's
    /// own plane, zero elsewhere. With zero offsets this is the identity map.
    pub fn delta(
        channels: usize,
        kernel_size: usize,
        dilation: usize,
    ) -> Result<Self, PropagationError> {
        let mut params = ConvParams::zeros(channels, channels, kernel_size, dilation)?;
        let center = kernel_size / 2;
        for c in 0..channels {
            let idx = ((c * channels + c) * kernel_size + center) * kernel_size + center;
            params.weights[idx] = 1.0;
        }
        Ok(params)
    }

    /// Random init: weights uniform in `[-s, s]` with `s = (in * k * k)^-1/2`
    /// (fan-in scaling), biases zero. Draws come from `rng` in weight order.
    pub fn seeded(
        out_channels: usize,
        in_channels: usize,
        kernel_size: usize,
        dilation: usize,
        rng: &mut Rng64,
    ) -> Result<Self, PropagationError> {
        let fan_in = (in_channels * kernel_size * kernel_size) as f64;
        let scale = 1.0 / fan_in.sqrt();
        let count = out_channels * in_channels * kernel_size * kernel_size;
        let weights = (0..count).map(|_| rng.next_in(-scale, scale)).collect();
        ConvParams::new(
            out_channels,
            in_channels,
            kernel_size,
            dilation,
            weights,
            vec![0.0; out_channels],
        )
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel_size
    }

    pub fn dilation(&self) -> usize {
        self.dilation
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    fn weight(&self, o: usize, c: usize, ky: usize, kx: usize) -> f64 {
        self.weights[((o * self.in_channels + c) * self.kernel_size + ky) * self.kernel_size + kx]
    }
}

/// Standard dilated convolution, unit stride, zero-padded to preserve the
/// spatial size.
pub fn conv2d(
    input: &FeatureTensor,
    params: &ConvParams,
) -> Result<FeatureTensor, PropagationError> {
    if params.in_channels != input.channels {
        return Err(PropagationError::WrongInputChannels {
            expected: params.in_channels,
            got: input.channels,
        });
    }
    let k = params.kernel_size;
    let r = (k / 2) as i64;
    let d = params.dilation as i64;
    let mut values = Vec::with_capacity(params.out_channels * input.height * input.width);
    for o in 0..params.out_channels {
        for y in 0..input.height {
            for x in 0..input.width {
                let mut acc = params.bias[o];
                for c in 0..input.channels {
                    for ky in 0..k {
                        for kx in 0..k {
                            let sy = y as i64 + d * (ky as i64 - r);
                            let sx = x as i64 + d * (kx as i64 - r);
                            if sx >= 0
                                && sy >= 0
                                && (sx as usize) < input.width
                                && (sy as usize) < input.height
                            {
                                acc += params.weight(o, c, ky, kx)
                                    * input.get(c, sx as usize, sy as usize);
                            }
                        }
                    }
                }
                values.push(acc);
            }
        }
    }
    FeatureTensor::new(params.out_channels, input.width, input.height, values)
}

/// Per-location sampling offsets for a deformable `k x k` kernel: `2k²`
/// planes over the output grid, plane `2j` holding the x displacement and
/// plane `2j + 1` the y displacement of tap `j = ky * k + kx`. Positive x
/// points toward larger column indices, positive y toward larger rows.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetField {
    kernel_size: usize,
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl OffsetField {
    pub fn new(
        kernel_size: usize,
        width: usize,
        height: usize,
        values: Vec<f64>,
    ) -> Result<Self, PropagationError> {
        if kernel_size == 0 || kernel_size.is_multiple_of(2) {
            return Err(PropagationError::BadKernelSize(kernel_size));
        }
        let planes = 2 * kernel_size * kernel_size;
        if values.len() != planes * width * height {
            return Err(PropagationError::BadOffsetCount {
                got: values.len(),
                planes,
                width,
                height,
            });
        }
        Ok(OffsetField {
            kernel_size,
            width,
            height,
            values,
        })
    }

    /// Zero displacement everywhere: the deformable kernel degenerates to
    /// its dilated counterpart.
    pub fn zeros(
        kernel_size: usize,
        width: usize,
        height: usize,
    ) -> Result<Self, PropagationError> {
        let planes = 2 * kernel_size * kernel_size;
        OffsetField::new(
            kernel_size,
            width,
            height,
            vec![0.0; planes * width * height],
        )
    }

    /// Same `(dx, dy)` displacement at every tap and location.
    pub fn constant(
        kernel_size: usize,
        width: usize,
        height: usize,
        dx: f64,
        dy: f64,
    ) -> Result<Self, PropagationError> {
        let mut field = OffsetField::zeros(kernel_size, width, height)?;
        let taps = kernel_size * kernel_size;
        for tap in 0..taps {
            for y in 0..height {
                for x in 0..width {
                    *field.at_mut(2 * tap, x, y) = dx;
                    *field.at_mut(2 * tap + 1, x, y) = dy;
                }
            }
        }
        Ok(field)
    }

    /// Reinterprets a `2k²`-channel tensor as an offset field.
    pub fn from_tensor(
        tensor: &FeatureTensor,
        kernel_size: usize,
    ) -> Result<Self, PropagationError> {
        let planes = 2 * kernel_size * kernel_size;
        if tensor.channels != planes {
            return Err(PropagationError::WrongOffsetPlanes {
                k: kernel_size,
                expected: planes,
                got: tensor.channels,
            });
        }
        OffsetField::new(
            kernel_size,
            tensor.width,
            tensor.height,
            tensor.values.clone(),
        )
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel_size
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn plane(&self, p: usize, x: usize, y: usize) -> f64 {
        self.values[(p * self.height + y) * self.width + x]
    }

    fn at_mut(&mut self, p: usize, x: usize, y: usize) -> &mut f64 {
        &mut self.values[(p * self.height + y) * self.width + x]
    }

    /// X displacement of tap `j = ky * k + kx` at output location `(x, y)`.
    pub fn dx(&self, tap: usize, x: usize, y: usize) -> f64 {
        self.plane(2 * tap, x, y)
    }

    /// Y displacement of tap `j` at output location `(x, y)`.
    pub fn dy(&self, tap: usize, x: usize, y: usize) -> f64 {
        self.plane(2 * tap + 1, x, y)
    }
}

/// Deformable convolution: every kernel tap samples the source bilinearly at
/// its dilated grid position displaced by the learned per-location offset.
/// Zero offsets reduce this to [`conv2d`].
pub fn deformable_conv(
    src: &FeatureTensor,
    offsets: &OffsetField,
    kernel: &ConvParams,
) -> Result<FeatureTensor, PropagationError> {
    if kernel.in_channels != src.channels {
        return Err(PropagationError::WrongInputChannels {
            expected: kernel.in_channels,
            got: src.channels,
        });
    }
    if offsets.kernel_size != kernel.kernel_size {
        return Err(PropagationError::WrongOffsetPlanes {
            k: kernel.kernel_size,
            expected: 2 * kernel.kernel_size * kernel.kernel_size,
            got: 2 * offsets.kernel_size * offsets.kernel_size,
        });
    }
    if offsets.width != src.width || offsets.height != src.height {
        return Err(PropagationError::OffsetGridMismatch(
            offsets.width,
            offsets.height,
            src.width,
            src.height,
        ));
    }
    let k = kernel.kernel_size;
    let r = (k / 2) as f64;
    let d = kernel.dilation as f64;
    let mut values = Vec::with_capacity(kernel.out_channels * src.height * src.width);
    for o in 0..kernel.out_channels {
        for y in 0..src.height {
            for x in 0..src.width {
                let mut acc = kernel.bias[o];
                for c in 0..src.channels {
                    for ky in 0..k {
                        for kx in 0..k {
                            let tap = ky * k + kx;
                            let px = x as f64 + d * (kx as f64 - r) + offsets.dx(tap, x, y);
                            let py = y as f64 + d * (ky as f64 - r) + offsets.dy(tap, x, y);
                            acc += kernel.weight(o, c, ky, kx) * src.sample_bilinear(c, px, py);
                        }
                    }
                }
                values.push(acc);
            }
        }
    }
    FeatureTensor::new(kernel.out_channels, src.width, src.height, values)
}

/// Full parameter set of the propagation branch. Channel counts must chain:
/// the residual block maps feature channels to its own width (with a 1x1
/// skip projection whenever the two differ), the offset head projects the
/// block output to `2k²` planes for the `k x k` deformable kernel, the
/// deformable kernel preserves the feature channel count, and the two heads
/// map features to a single plane each.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationParams {
    pub residual_conv1: ConvParams,
    pub residual_conv2: ConvParams,
    /// 1x1 projection applied to the block input before the skip sum;
    /// required exactly when the block changes the channel count.
    pub residual_skip: Option<ConvParams>,
    pub offset_head: ConvParams,
    pub deform_kernel: ConvParams,
    pub seg_head: ConvParams,
    pub attn_head: ConvParams,
}

/// Shape hyperparameters for building [`PropagationParams`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PropagationConfig {
    /// Channels of the per-frame feature tensors.
    pub feature_channels: usize,
    /// Width of the offset-predicting residual block (128 at full scale).
    pub residual_channels: usize,
    /// Deformable kernel size `k` (odd).
    pub kernel_size: usize,
    /// Dilation of the deformable kernel.
    pub dilation: usize,
}

impl PropagationConfig {
    /// Toy-scale defaults for `channels` feature channels: an 8-wide
    /// residual block and a 3x3 deformable kernel with dilation 3.
    pub fn toy(channels: usize) -> Self {
        PropagationConfig {
            feature_channels: channels,
            residual_channels: 8,
            kernel_size: 3,
            dilation: 3,
        }
    }
}

impl PropagationParams {
    /// Validates the channel chain described on the type.
    pub fn validate(&self) -> Result<(), PropagationError> {
        let feature_channels = self.residual_conv1.in_channels;
        let block_out = self.residual_conv2.out_channels;
        if self.residual_conv2.in_channels != self.residual_conv1.out_channels {
            return Err(PropagationError::ChainMismatch {
                stage: "residual_conv2",
                expected: self.residual_conv1.out_channels,
                got: self.residual_conv2.in_channels,
            });
        }
        match &self.residual_skip {
            None => {
                if block_out != feature_channels {
                    return Err(PropagationError::MissingSkipProjection {
                        inp: feature_channels,
                        out: block_out,
                    });
                }
            }
            Some(skip) => {
                if skip.in_channels != feature_channels {
                    return Err(PropagationError::ChainMismatch {
                        stage: "residual_skip input",
                        expected: feature_channels,
                        got: skip.in_channels,
                    });
                }
                if skip.out_channels != block_out {
                    return Err(PropagationError::ChainMismatch {
                        stage: "residual_skip output",
                        expected: block_out,
                        got: skip.out_channels,
                    });
                }
            }
        }
        if self.offset_head.in_channels != block_out {
            return Err(PropagationError::ChainMismatch {
                stage: "offset_head",
                expected: block_out,
                got: self.offset_head.in_channels,
            });
        }
        let k = self.deform_kernel.kernel_size;
        if self.offset_head.out_channels != 2 * k * k {
            return Err(PropagationError::WrongOffsetPlanes {
                k,
                expected: 2 * k * k,
                got: self.offset_head.out_channels,
            });
        }
        if self.deform_kernel.in_channels != feature_channels {
            return Err(PropagationError::ChainMismatch {
                stage: "deform_kernel input",
                expected: feature_channels,
                got: self.deform_kernel.in_channels,
            });
        }
        if self.deform_kernel.out_channels != feature_channels {
            return Err(PropagationError::ChainMismatch {
                stage: "deform_kernel output",
                expected: feature_channels,
                got: self.deform_kernel.out_channels,
            });
        }
        if self.seg_head.in_channels != feature_channels || self.seg_head.out_channels != 1 {
            return Err(PropagationError::ChainMismatch {
                stage: "seg_head",
                expected: feature_channels,
                got: self.seg_head.in_channels,
            });
        }
        if self.attn_head.in_channels != feature_channels || self.attn_head.out_channels != 1 {
            return Err(PropagationError::ChainMismatch {
                stage: "attn_head",
                expected: feature_channels,
                got: self.attn_head.in_channels,
            });
        }
        Ok(())
    }

    /// Seeded-random parameters: each convolution drawn by [`ConvParams::seeded`]
    /// from one SplitMix64 stream, consumed in the fixed field order
    /// `residual_conv1, residual_conv2, residual_skip (when needed),
    /// offset_head, deform_kernel, seg_head, attn_head`. The same seed and
    /// config always produce identical parameters.
    pub fn seeded(config: &PropagationConfig, seed: u64) -> Result<Self, PropagationError> {
        let c = config.feature_channels;
        let r = config.residual_channels;
        let k = config.kernel_size;
        if c == 0 || r == 0 {
            return Err(PropagationError::EmptyTensor {
                channels: c.max(r),
                width: 1,
                height: 1,
            });
        }
        let mut rng = Rng64::new(seed);
        let residual_conv1 = ConvParams::seeded(r, c, 3, 1, &mut rng)?;
        let residual_conv2 = ConvParams::seeded(r, r, 3, 1, &mut rng)?;
        let residual_skip = if r != c {
            Some(ConvParams::seeded(r, c, 1, 1, &mut rng)?)
        } else {
            None
        };
        let offset_head = ConvParams::seeded(2 * k * k, r, 1, 1, &mut rng)?;
        let deform_kernel = ConvParams::seeded(c, c, k, config.dilation, &mut rng)?;
        let seg_head = ConvParams::seeded(1, c, 1, 1, &mut rng)?;
        let attn_head = ConvParams::seeded(1, c, 3, 1, &mut rng)?;
        let params = PropagationParams {
            residual_conv1,
            residual_conv2,
            residual_skip,
            offset_head,
            deform_kernel,
            seg_head,
            attn_head,
        };
        params.validate()?;
        Ok(params)
    }

    /// All-zero parameters (useful as a fixed point: zero offsets, uniform
    /// softmax, attention 1/2 everywhere).
    pub fn zeros(config: &PropagationConfig) -> Result<Self, PropagationError> {
        let c = config.feature_channels;
        let r = config.residual_channels;
        let k = config.kernel_size;
        let params = PropagationParams {
            residual_conv1: ConvParams::zeros(r, c, 3, 1)?,
            residual_conv2: ConvParams::zeros(r, r, 3, 1)?,
            residual_skip: if r != c {
                Some(ConvParams::zeros(r, c, 1, 1)?)
            } else {
                None
            },
            offset_head: ConvParams::zeros(2 * k * k, r, 1, 1)?,
            deform_kernel: ConvParams::zeros(c, c, k, config.dilation)?,
            seg_head: ConvParams::zeros(1, c, 1, 1)?,
            attn_head: ConvParams::zeros(1, c, 3, 1)?,
        };
        params.validate()?;
        Ok(params)
    }
}

/// Isolates one instance: multiplies every feature channel by the instance
/// mask. Mask and feature grids must agree.
pub fn instance_features(
    features: &FeatureTensor,
    mask: &MaskGrid,
) -> Result<FeatureTensor, PropagationError> {
    if mask.width() != features.width || mask.height() != features.height {
        return Err(PropagationError::MaskShapeMismatch {
            width: features.width,
            height: features.height,
            mask_width: mask.width(),
            mask_height: mask.height(),
        });
    }
    let mut values = Vec::with_capacity(features.values.len());
    for c in 0..features.channels {
        for y in 0..features.height {
            for x in 0..features.width {
                values.push(features.get(c, x, y) * mask.get(x, y));
            }
        }
    }
    FeatureTensor::new(features.channels, features.width, features.height, values)
}

/// Predicts deformable sampling offsets from a pair of frames: a residual
/// block (`conv -> relu -> conv`, plus the identity or a 1x1 projection of
/// the input) over the feature difference `f_t - f_next`, projected to `2k²`
/// offset planes.
pub fn predict_offsets(
    f_t: &FeatureTensor,
    f_next: &FeatureTensor,
    params: &PropagationParams,
) -> Result<OffsetField, PropagationError> {
    params.validate()?;
    let diff = f_t.sub(f_next)?;
    let hidden = conv2d(&diff, &params.residual_conv1)?.map(|v| v.max(0.0));
    let block = conv2d(&hidden, &params.residual_conv2)?;
    let skip = match &params.residual_skip {
        Some(proj) => conv2d(&diff, proj)?,
        None => diff,
    };
    let out = block.add(&skip)?;
    let planes = conv2d(&out, &params.offset_head)?;
    OffsetField::from_tensor(&planes, params.deform_kernel.kernel_size())
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Decodes propagated per-instance features into soft masks at the target
/// frame: per-instance logits from a pointwise head on `g_i + f_next`, a
/// pixelwise softmax across instances, and a sigmoid attention gate computed
/// from `f_next`. Output values lie in `(0, 1)` and, per pixel, the masks
/// sum to the attention value.
pub fn segment_propagated(
    propagated: &[FeatureTensor],
    f_next: &FeatureTensor,
    params: &PropagationParams,
) -> Result<Vec<MaskGrid>, PropagationError> {
    if propagated.is_empty() {
        return Err(PropagationError::EmptyInstances);
    }
    params.validate()?;
    let mut logits = Vec::with_capacity(propagated.len());
    for g in propagated {
        g.same_shape(f_next)?;
        let phi = g.add(f_next)?;
        logits.push(conv2d(&phi, &params.seg_head)?);
    }
    let attention = conv2d(f_next, &params.attn_head)?.map(sigmoid);

    let (width, height) = (f_next.width, f_next.height);
    let mut masks = vec![Vec::with_capacity(width * height); propagated.len()];
    for y in 0..height {
        for x in 0..width {
            let mut max_logit = f64::NEG_INFINITY;
            for l in &logits {
                max_logit = max_logit.max(l.get(0, x, y));
            }
            let mut total = 0.0;
            let exps: Vec<f64> = logits
                .iter()
                .map(|l| (l.get(0, x, y) - max_logit).exp())
                .collect();
            for e in &exps {
                total += e;
            }
            let gate = attention.get(0, x, y);
            for (mask, e) in masks.iter_mut().zip(&exps) {
                mask.push(e / total * gate);
            }
        }
    }
    masks
        .into_iter()
        .map(|values| MaskGrid::new(width, height, values).map_err(PropagationError::from))
        .collect()
}

/// Clip window: a 1-based center frame, the half-window `T`, and the video
/// length that truncates the span at the boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClipWindow {
    pub center_frame: usize,
    pub half_window: usize,
    pub video_len: usize,
}

impl ClipWindow {
    /// Covered frame interval, 1-based inclusive.
    pub fn span(&self) -> (usize, usize) {
        clip_span(self.center_frame, self.half_window, self.video_len)
    }

    /// Number of covered frames.
    pub fn len(&self) -> usize {
        let (start, end) = self.span();
        end - start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Runs the full propagation branch for one clip: for every non-center frame
/// the center-frame instances are warped and re-decoded; the center frame
/// keeps its input masks unchanged. `frame_features` must cover exactly the
/// clip span in frame order, and each instance needs one class score vector
/// for the produced [`ClipInstanceTrack`]s. An empty instance list yields no
/// tracks.
pub fn propagate_clip(
    frame_features: &[FeatureTensor],
    masks_at_center: &[MaskGrid],
    class_scores: &[Vec<f64>],
    window: ClipWindow,
    params: &PropagationParams,
) -> Result<Vec<ClipInstanceTrack>, PropagationError> {
    let (start, _end) = window.span();
    if frame_features.len() != window.len() {
        return Err(PropagationError::FrameCountMismatch {
            expected: window.len(),
            got: frame_features.len(),
        });
    }
    if class_scores.len() != masks_at_center.len() {
        return Err(PropagationError::ScoreCountMismatch {
            masks: masks_at_center.len(),
            scores: class_scores.len(),
        });
    }
    if masks_at_center.is_empty() {
        return Ok(Vec::new());
    }
    params.validate()?;
    let center_idx = window.center_frame - start;
    let f_center = &frame_features[center_idx];

    let isolated: Vec<FeatureTensor> = masks_at_center
        .iter()
        .map(|mask| instance_features(f_center, mask))
        .collect::<Result<_, _>>()?;

    let mut per_instance: Vec<Vec<MaskGrid>> =
        vec![Vec::with_capacity(frame_features.len()); masks_at_center.len()];
    for (idx, f_target) in frame_features.iter().enumerate() {
        if idx == center_idx {
            for (frames, mask) in per_instance.iter_mut().zip(masks_at_center) {
                frames.push(mask.clone());
            }
            continue;
        }
        let offsets = predict_offsets(f_center, f_target, params)?;
        let propagated: Vec<FeatureTensor> = isolated
            .iter()
            .map(|g| deformable_conv(g, &offsets, &params.deform_kernel))
            .collect::<Result<_, _>>()?;
        let masks = segment_propagated(&propagated, f_target, params)?;
        for (frames, mask) in per_instance.iter_mut().zip(masks) {
            frames.push(mask);
        }
    }

    per_instance
        .into_iter()
        .zip(class_scores)
        .enumerate()
        .map(|(index, (frames, scores))| {
            ClipInstanceTrack::new(
                window.center_frame,
                window.half_window,
                window.video_len,
                MaskSequence::new(frames)?,
                scores.clone(),
                index,
            )
            .map_err(PropagationError::from)
        })
        .collect()
}
