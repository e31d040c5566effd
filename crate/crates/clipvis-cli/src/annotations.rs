//! Ground-truth and prediction interchange formats. Both files carry one or
//! more videos, each with its own spec and full-length per-instance masks:
//!
//! ```text
//! gtfile v1                        resultfile v1
//! videos <count>                   videos <count>
//! video <L> <W> <H> <K>            video <L> <W> <H> <K>
//! instances <count>                instances <count>
//! instance <category>              instance <id> <category> <confidence>
//! frame 1 rle <runs...>            frame 1 rle <runs...>
//! ...                              ...
//! ```
//!
//! Every instance spans all `L` frames of its video (empty frames are a
//! single zero run). Masks are binarized on write.

use std::path::Path;

use clipvis_core::{
    GroundTruthSet, GtInstance, MaskSequence, PredictionSet, VideoGroundTruth, VideoInstance,
    VideoSpec,
};

use crate::textio::{
    atomic_write, expect_header, fmt_f64, parse_token, tokens, FileError, LineReader,
};
use crate::trackfile::{parse_count_line, parse_frame_line, parse_video_line};

pub const GT_HEADER: &str = "gtfile v1";
pub const RESULT_HEADER: &str = "resultfile v1";

/// Parsed ground-truth file: one spec per video, aligned with the set.
#[derive(Debug, Clone)]
pub struct GtFile {
    pub specs: Vec<VideoSpec>,
    pub set: GroundTruthSet,
}

/// Parsed prediction file: one spec per video, aligned with the set.
#[derive(Debug, Clone)]
pub struct ResultFile {
    pub specs: Vec<VideoSpec>,
    pub set: PredictionSet,
}

fn push_masks(out: &mut String, masks: &MaskSequence) {
    for (offset, mask) in masks.iter().enumerate() {
        out.push_str(&format!("frame {}", offset + 1));
        out.push_str(" rle");
        for run in crate::rle::encode(mask) {
            out.push_str(&format!(" {run}"));
        }
        out.push('\n');
    }
}

fn push_video_header(out: &mut String, spec: &VideoSpec, instances: usize) {
    out.push_str(&format!(
        "video {} {} {} {}\n",
        spec.num_frames, spec.width, spec.height, spec.categories
    ));
    out.push_str(&format!("instances {instances}\n"));
}

/// Writes a ground-truth set atomically to `path`.
pub fn write_gt(path: &Path, specs: &[VideoSpec], set: &GroundTruthSet) -> Result<(), FileError> {
    assert_eq!(
        specs.len(),
        set.videos.len(),
        "one spec per ground-truth video"
    );
    let mut out = String::new();
    out.push_str(GT_HEADER);
    out.push('\n');
    out.push_str(&format!("videos {}\n", specs.len()));
    for (spec, video) in specs.iter().zip(&set.videos) {
        push_video_header(&mut out, spec, video.instances.len());
        for instance in &video.instances {
            out.push_str(&format!("instance {}\n", instance.category));
            push_masks(&mut out, &instance.masks);
        }
    }
    atomic_write(path, out.as_bytes())
}

/// Writes a prediction set atomically to `path`.
pub fn write_results(
    path: &Path,
    specs: &[VideoSpec],
    set: &PredictionSet,
) -> Result<(), FileError> {
    assert_eq!(
        specs.len(),
        set.videos.len(),
        "one spec per predicted video"
    );
    let mut out = String::new();
    out.push_str(RESULT_HEADER);
    out.push('\n');
    out.push_str(&format!("videos {}\n", specs.len()));
    for (spec, video) in specs.iter().zip(&set.videos) {
        push_video_header(&mut out, spec, video.len());
        for instance in video {
            out.push_str(&format!(
                "instance {} {} {}\n",
                instance.id,
                instance.category,
                fmt_f64(instance.confidence)
            ));
            push_masks(&mut out, &instance.masks);
        }
    }
    atomic_write(path, out.as_bytes())
}

fn parse_category(
    reader: &LineReader,
    line: usize,
    token: &str,
    spec: &VideoSpec,
    record: &str,
) -> Result<usize, FileError> {
    let category: usize = parse_token(reader, line, token, "category")?;
    if category == 0 || category > spec.categories {
        return Err(reader.error(
            line,
            format!(
                "{record}: category {category} outside 1..={}",
                spec.categories
            ),
        ));
    }
    Ok(category)
}

fn parse_instance_masks(
    reader: &mut LineReader,
    spec: &VideoSpec,
    record: &str,
) -> Result<MaskSequence, FileError> {
    let mut frames = Vec::with_capacity(spec.num_frames);
    for frame in 1..=spec.num_frames {
        frames.push(parse_frame_line(reader, frame, spec, record)?);
    }
    Ok(MaskSequence::new(frames).expect("decoded frames share the video grid shape"))
}

/// Parses a ground-truth file.
pub fn read_gt(path: &Path) -> Result<GtFile, FileError> {
    let mut reader = LineReader::open(path, false)?;
    expect_header(&mut reader, GT_HEADER)?;
    let video_count = parse_count_line(&mut reader, "videos")?;
    let mut specs = Vec::with_capacity(video_count);
    let mut videos = Vec::with_capacity(video_count);
    for _ in 0..video_count {
        let spec = parse_video_line(&mut reader)?;
        let instance_count = parse_count_line(&mut reader, "instances")?;
        let mut instances = Vec::with_capacity(instance_count);
        for ordinal in 1..=instance_count {
            let record = format!("instance {ordinal}");
            let (line, text) = reader.require_line(&format!("'{record}' record"))?;
            let toks = tokens(&text);
            if toks.len() != 2 || toks[0] != "instance" {
                return Err(reader.error(line, "expected 'instance <category>'"));
            }
            let category = parse_category(&reader, line, toks[1], &spec, &record)?;
            let masks = parse_instance_masks(&mut reader, &spec, &record)?;
            instances.push(GtInstance { category, masks });
        }
        specs.push(spec);
        videos.push(VideoGroundTruth { instances });
    }
    if let Some((line, _)) = reader.next_line() {
        return Err(reader.error(line, format!("unexpected data after {video_count} videos")));
    }
    Ok(GtFile {
        specs,
        set: GroundTruthSet { videos },
    })
}

/// Parses a prediction file.
pub fn read_results(path: &Path) -> Result<ResultFile, FileError> {
    let mut reader = LineReader::open(path, false)?;
    expect_header(&mut reader, RESULT_HEADER)?;
    let video_count = parse_count_line(&mut reader, "videos")?;
    let mut specs = Vec::with_capacity(video_count);
    let mut videos = Vec::with_capacity(video_count);
    for _ in 0..video_count {
        let spec = parse_video_line(&mut reader)?;
        let instance_count = parse_count_line(&mut reader, "instances")?;
        let mut instances = Vec::with_capacity(instance_count);
        for ordinal in 1..=instance_count {
            let record = format!("instance {ordinal}");
            let (line, text) = reader.require_line(&format!("'{record}' record"))?;
            let toks = tokens(&text);
            if toks.len() != 4 || toks[0] != "instance" {
                return Err(reader.error(line, "expected 'instance <id> <category> <confidence>'"));
            }
            let id: usize = parse_token(&reader, line, toks[1], "instance id")?;
            let category = parse_category(&reader, line, toks[2], &spec, &record)?;
            let confidence: f64 = parse_token(&reader, line, toks[3], "confidence")?;
            if !(0.0..=1.0).contains(&confidence) {
                return Err(reader.error(
                    line,
                    format!("{record}: confidence {confidence} outside [0, 1]"),
                ));
            }
            let masks = parse_instance_masks(&mut reader, &spec, &record)?;
            instances.push(VideoInstance {
                id,
                category,
                confidence,
                masks,
            });
        }
        specs.push(spec);
        videos.push(instances);
    }
    if let Some((line, _)) = reader.next_line() {
        return Err(reader.error(line, format!("unexpected data after {video_count} videos")));
    }
    Ok(ResultFile {
        specs,
        set: PredictionSet { videos },
    })
}
