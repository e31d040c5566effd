//! Numeric input files for the propagation command: convolution parameters,
//! per-frame feature tensors, and center-frame instance masks.
//!
//! Parameter files list every convolution of the propagation branch as a
//! named tensor with explicit shape and row-major values:
//!
//! ```text
//! params v1
//! tensors 7
//! tensor residual_conv1 8 4 3 1      # name out_channels in_channels kernel dilation
//! weights <out*in*k*k floats>
//! bias <out floats>
//! ...
//! ```
//!
//! The component names are fixed (`residual_conv1`, `residual_conv2`,
//! optional `residual_skip`, `offset_head`, `deform_kernel`, `seg_head`,
//! `attn_head`); shape consistency between them is checked by the
//! propagation branch itself.
//!
//! Feature files carry one tensor per video frame, one channel plane per
//! line; mask files carry the detections of a single center frame:
//!
//! ```text
//! features v1                    maskfile v1
//! video <L> <W> <H>              grid <W> <H> categories <K>
//! channels <C>                   center <t>
//! frame 1 channel 1 values ...   instances <N>
//! frame 1 channel 2 values ...   instance
//! ...                            scores <K floats>
//!                                rle <runs...>
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use clipvis_core::{ConvParams, FeatureTensor, MaskGrid, PropagationParams};

use crate::rle;
use crate::textio::{
    atomic_write, expect_header, fmt_f64, parse_all, parse_token, tokens, FileError, LineReader,
};
use crate::trackfile::parse_count_line;

pub const PARAMS_HEADER: &str = "params v1";
pub const FEATURES_HEADER: &str = "features v1";
pub const MASKS_HEADER: &str = "maskfile v1";

const REQUIRED_TENSORS: [&str; 6] = [
    "residual_conv1",
    "residual_conv2",
    "offset_head",
    "deform_kernel",
    "seg_head",
    "attn_head",
];

/// Per-frame features for a whole video.
#[derive(Debug, Clone)]
pub struct FeatureFile {
    pub num_frames: usize,
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub frames: Vec<FeatureTensor>,
}

/// Detections at one frame: binary masks plus class score vectors.
#[derive(Debug, Clone)]
pub struct MaskFile {
    pub width: usize,
    pub height: usize,
    pub categories: usize,
    pub center_frame: usize,
    pub masks: Vec<MaskGrid>,
    pub scores: Vec<Vec<f64>>,
}

fn push_values_line(out: &mut String, prefix: &str, values: &[f64]) {
    out.push_str(prefix);
    for &v in values {
        out.push_str(&format!(" {}", fmt_f64(v)));
    }
    out.push('\n');
}

/// Writes a parameter file atomically to `path`.
pub fn write_params(path: &Path, params: &PropagationParams) -> Result<(), FileError> {
    let mut components: Vec<(&str, &ConvParams)> = vec![
        ("residual_conv1", &params.residual_conv1),
        ("residual_conv2", &params.residual_conv2),
    ];
    if let Some(skip) = &params.residual_skip {
        components.push(("residual_skip", skip));
    }
    components.extend([
        ("offset_head", &params.offset_head),
        ("deform_kernel", &params.deform_kernel),
        ("seg_head", &params.seg_head),
        ("attn_head", &params.attn_head),
    ]);

    let mut out = String::new();
    out.push_str(PARAMS_HEADER);
    out.push('\n');
    out.push_str(&format!("tensors {}\n", components.len()));
    for (name, conv) in components {
        out.push_str(&format!(
            "tensor {name} {} {} {} {}\n",
            conv.out_channels(),
            conv.in_channels(),
            conv.kernel_size(),
            conv.dilation()
        ));
        push_values_line(&mut out, "weights", conv.weights());
        push_values_line(&mut out, "bias", conv.bias());
    }
    atomic_write(path, out.as_bytes())
}

fn parse_values_line(
    reader: &mut LineReader,
    keyword: &str,
    expected: usize,
    record: &str,
) -> Result<Vec<f64>, FileError> {
    let (line, text) = reader.require_line(&format!("'{keyword}' line"))?;
    let toks = tokens(&text);
    if toks.first() != Some(&keyword) {
        return Err(reader.error(line, format!("{record}: expected '{keyword} <values...>'")));
    }
    let values: Vec<f64> = parse_all(reader, line, &toks[1..], "value")?;
    if values.len() != expected {
        return Err(reader.error(
            line,
            format!(
                "{record}: expected {expected} {keyword} values, found {}",
                values.len()
            ),
        ));
    }
    Ok(values)
}

/// Parses a parameter file into the propagation branch's convolutions.
pub fn read_params(path: &Path) -> Result<PropagationParams, FileError> {
    let mut reader = LineReader::open(path, false)?;
    expect_header(&mut reader, PARAMS_HEADER)?;
    let count = parse_count_line(&mut reader, "tensors")?;

    let mut by_name: BTreeMap<String, ConvParams> = BTreeMap::new();
    for _ in 0..count {
        let (line, text) = reader.require_line("'tensor' record")?;
        let toks = tokens(&text);
        if toks.len() != 6 || toks[0] != "tensor" {
            return Err(reader.error(
                line,
                "expected 'tensor <name> <out_channels> <in_channels> <kernel> <dilation>'",
            ));
        }
        let name = toks[1].to_owned();
        let known = REQUIRED_TENSORS.contains(&name.as_str()) || name == "residual_skip";
        if !known {
            return Err(reader.error(line, format!("unknown tensor '{name}'")));
        }
        if by_name.contains_key(&name) {
            return Err(reader.error(line, format!("duplicate tensor '{name}'")));
        }
        let out_channels: usize = parse_token(&reader, line, toks[2], "output channels")?;
        let in_channels: usize = parse_token(&reader, line, toks[3], "input channels")?;
        let kernel: usize = parse_token(&reader, line, toks[4], "kernel size")?;
        let dilation: usize = parse_token(&reader, line, toks[5], "dilation")?;
        let weights = parse_values_line(
            &mut reader,
            "weights",
            out_channels * in_channels * kernel * kernel,
            &name,
        )?;
        let bias = parse_values_line(&mut reader, "bias", out_channels, &name)?;
        let conv = ConvParams::new(out_channels, in_channels, kernel, dilation, weights, bias)
            .map_err(|e| reader.error(line, format!("tensor '{name}': {e}")))?;
        by_name.insert(name, conv);
    }
    if let Some((line, _)) = reader.next_line() {
        return Err(reader.error(line, format!("unexpected data after {count} tensors")));
    }

    let residual_skip = by_name.remove("residual_skip");
    let mut take = |name: &str| {
        by_name.remove(name).ok_or_else(|| {
            reader.error(1, format!("parameter file is missing the '{name}' tensor"))
        })
    };
    let params = PropagationParams {
        residual_conv1: take("residual_conv1")?,
        residual_conv2: take("residual_conv2")?,
        residual_skip,
        offset_head: take("offset_head")?,
        deform_kernel: take("deform_kernel")?,
        seg_head: take("seg_head")?,
        attn_head: take("attn_head")?,
    };
    params
        .validate()
        .map_err(|e| reader.error(1, format!("inconsistent parameters: {e}")))?;
    Ok(params)
}

/// Writes per-frame features atomically to `path`.
pub fn write_features(path: &Path, frames: &[FeatureTensor]) -> Result<(), FileError> {
    let first = frames
        .first()
        .expect("a feature file needs at least one frame");
    let (channels, width, height) = (first.channels(), first.width(), first.height());
    let mut out = String::new();
    out.push_str(FEATURES_HEADER);
    out.push('\n');
    out.push_str(&format!("video {} {} {}\n", frames.len(), width, height));
    out.push_str(&format!("channels {channels}\n"));
    for (index, frame) in frames.iter().enumerate() {
        assert_eq!(
            (frame.channels(), frame.width(), frame.height()),
            (channels, width, height),
            "feature frames must share one shape"
        );
        let plane = width * height;
        for channel in 0..channels {
            let values = &frame.values()[channel * plane..(channel + 1) * plane];
            push_values_line(
                &mut out,
                &format!("frame {} channel {} values", index + 1, channel + 1),
                values,
            );
        }
    }
    atomic_write(path, out.as_bytes())
}

/// Parses a feature file.
pub fn read_features(path: &Path) -> Result<FeatureFile, FileError> {
    let mut reader = LineReader::open(path, false)?;
    expect_header(&mut reader, FEATURES_HEADER)?;

    let (line, text) = reader.require_line("'video' line")?;
    let toks = tokens(&text);
    if toks.len() != 4 || toks[0] != "video" {
        return Err(reader.error(line, "expected 'video <frames> <width> <height>'"));
    }
    let num_frames: usize = parse_token(&reader, line, toks[1], "frame count")?;
    let width: usize = parse_token(&reader, line, toks[2], "width")?;
    let height: usize = parse_token(&reader, line, toks[3], "height")?;
    let channels = parse_count_line(&mut reader, "channels")?;
    if num_frames == 0 || width == 0 || height == 0 || channels == 0 {
        return Err(reader.error(line, "feature dimensions must all be positive"));
    }

    let plane = width * height;
    let mut frames = Vec::with_capacity(num_frames);
    for frame_no in 1..=num_frames {
        let mut values = Vec::with_capacity(channels * plane);
        for channel_no in 1..=channels {
            let (line, text) =
                reader.require_line(&format!("frame {frame_no} channel {channel_no}"))?;
            let toks = tokens(&text);
            let header_ok = toks.len() >= 5
                && toks[0] == "frame"
                && toks[2] == "channel"
                && toks[4] == "values";
            if !header_ok {
                return Err(
                    reader.error(line, "expected 'frame <t> channel <c> values <floats...>'")
                );
            }
            let frame: usize = parse_token(&reader, line, toks[1], "frame number")?;
            let channel: usize = parse_token(&reader, line, toks[3], "channel number")?;
            if (frame, channel) != (frame_no, channel_no) {
                return Err(reader.error(
                    line,
                    format!(
                        "expected frame {frame_no} channel {channel_no}, found frame {frame} channel {channel}"
                    ),
                ));
            }
            let plane_values: Vec<f64> = parse_all(&reader, line, &toks[5..], "feature value")?;
            if plane_values.len() != plane {
                return Err(reader.error(
                    line,
                    format!(
                        "expected {plane} values for a {width}x{height} plane, found {}",
                        plane_values.len()
                    ),
                ));
            }
            values.extend(plane_values);
        }
        let tensor = FeatureTensor::new(channels, width, height, values)
            .expect("collected planes match the declared shape");
        frames.push(tensor);
    }
    if let Some((line, _)) = reader.next_line() {
        return Err(reader.error(line, format!("unexpected data after {num_frames} frames")));
    }
    Ok(FeatureFile {
        num_frames,
        width,
        height,
        channels,
        frames,
    })
}

/// Writes center-frame detections atomically to `path`.
pub fn write_masks(
    path: &Path,
    categories: usize,
    center_frame: usize,
    masks: &[MaskGrid],
    scores: &[Vec<f64>],
) -> Result<(), FileError> {
    assert_eq!(masks.len(), scores.len(), "one score vector per mask");
    let first = masks
        .first()
        .expect("a mask file needs at least one instance");
    let mut out = String::new();
    out.push_str(MASKS_HEADER);
    out.push('\n');
    out.push_str(&format!(
        "grid {} {} categories {categories}\n",
        first.width(),
        first.height()
    ));
    out.push_str(&format!("center {center_frame}\n"));
    out.push_str(&format!("instances {}\n", masks.len()));
    for (mask, score) in masks.iter().zip(scores) {
        out.push_str("instance\n");
        push_values_line(&mut out, "scores", score);
        out.push_str("rle");
        for run in rle::encode(mask) {
            out.push_str(&format!(" {run}"));
        }
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

/// Parses a center-frame detection file.
pub fn read_masks(path: &Path) -> Result<MaskFile, FileError> {
    let mut reader = LineReader::open(path, false)?;
    expect_header(&mut reader, MASKS_HEADER)?;

    let (line, text) = reader.require_line("'grid' line")?;
    let toks = tokens(&text);
    if toks.len() != 5 || toks[0] != "grid" || toks[3] != "categories" {
        return Err(reader.error(line, "expected 'grid <width> <height> categories <count>'"));
    }
    let width: usize = parse_token(&reader, line, toks[1], "width")?;
    let height: usize = parse_token(&reader, line, toks[2], "height")?;
    let categories: usize = parse_token(&reader, line, toks[4], "category count")?;
    if width == 0 || height == 0 || categories == 0 {
        return Err(reader.error(line, "grid dimensions must all be positive"));
    }
    let center_frame = parse_count_line(&mut reader, "center")?;
    let count = parse_count_line(&mut reader, "instances")?;

    let mut masks = Vec::with_capacity(count);
    let mut scores = Vec::with_capacity(count);
    for ordinal in 1..=count {
        let record = format!("instance {ordinal}");
        let (line, text) = reader.require_line(&format!("'{record}' record"))?;
        if text.trim() != "instance" {
            return Err(reader.error(
                line,
                format!("expected 'instance', found '{}'", text.trim()),
            ));
        }
        let score = parse_values_line(&mut reader, "scores", categories, &record)?;
        let (line, text) = reader.require_line(&format!("{record} mask"))?;
        let toks = tokens(&text);
        if toks.first() != Some(&"rle") {
            return Err(reader.error(line, format!("{record}: expected 'rle <runs...>'")));
        }
        let runs: Vec<u64> = parse_all(&reader, line, &toks[1..], "run length")?;
        let mask = rle::decode(width, height, &runs)
            .map_err(|e| reader.error(line, format!("{record}: {e}")))?;
        masks.push(mask);
        scores.push(score);
    }
    if let Some((line, _)) = reader.next_line() {
        return Err(reader.error(line, format!("unexpected data after {count} instances")));
    }
    Ok(MaskFile {
        width,
        height,
        categories,
        center_frame,
        masks,
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use clipvis_core::PropagationConfig;

    #[test]
    fn params_round_trip_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("params.txt");
        let config = PropagationConfig::toy(4);
        let params = PropagationParams::seeded(&config, 11).unwrap();
        write_params(&path, &params).unwrap();
        let parsed = read_params(&path).unwrap();
        assert_eq!(parsed, params);
    }

    #[test]
    fn params_without_skip_projection_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("params.txt");
        // residual_channels == feature_channels drops the skip projection.
        let config = PropagationConfig {
            feature_channels: 3,
            residual_channels: 3,
            kernel_size: 3,
            dilation: 2,
        };
        let params = PropagationParams::seeded(&config, 5).unwrap();
        assert!(params.residual_skip.is_none());
        write_params(&path, &params).unwrap();
        assert_eq!(read_params(&path).unwrap(), params);
    }

    #[test]
    fn missing_tensor_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("params.txt");
        std::fs::write(
            &path,
            "params v1\ntensors 1\ntensor seg_head 1 1 1 1\nweights 1\nbias 0\n",
        )
        .unwrap();
        let err = read_params(&path).unwrap_err().to_string();
        assert!(err.contains("missing the 'residual_conv1' tensor"), "{err}");
    }

    #[test]
    fn weight_count_mismatch_names_the_tensor() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("params.txt");
        std::fs::write(
            &path,
            "params v1\ntensors 1\ntensor seg_head 1 2 1 1\nweights 1\nbias 0\n",
        )
        .unwrap();
        let err = read_params(&path).unwrap_err().to_string();
        assert!(
            err.contains("seg_head: expected 2 weights values, found 1"),
            "{err}"
        );
    }

    #[test]
    fn features_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.txt");
        let frames: Vec<FeatureTensor> = (0..3)
            .map(|t| {
                FeatureTensor::from_fn(2, 3, 2, |c, x, y| {
                    (t * 100 + c * 10 + y * 3 + x) as f64 / 7.0
                })
                .unwrap()
            })
            .collect();
        write_features(&path, &frames).unwrap();
        let parsed = read_features(&path).unwrap();
        assert_eq!(parsed.frames, frames);
        assert_eq!((parsed.num_frames, parsed.channels), (3, 2));
    }

    #[test]
    fn feature_plane_length_is_checked() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.txt");
        std::fs::write(
            &path,
            "features v1\nvideo 1 2 2\nchannels 1\nframe 1 channel 1 values 0 1 2\n",
        )
        .unwrap();
        let err = read_features(&path).unwrap_err().to_string();
        assert!(
            err.contains("expected 4 values for a 2x2 plane, found 3"),
            "{err}"
        );
    }

    #[test]
    fn masks_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("masks.txt");
        let masks = vec![
            MaskGrid::from_fn(4, 2, |x, _| f64::from(u8::from(x < 2))).unwrap(),
            MaskGrid::from_fn(4, 2, |x, _| f64::from(u8::from(x >= 3))).unwrap(),
        ];
        let scores = vec![vec![1.0, 0.0], vec![0.25, 0.75]];
        write_masks(&path, 2, 5, &masks, &scores).unwrap();
        let parsed = read_masks(&path).unwrap();
        assert_eq!(parsed.masks, masks);
        assert_eq!(parsed.scores, scores);
        assert_eq!(parsed.center_frame, 5);
        assert_eq!(parsed.categories, 2);
    }
}
