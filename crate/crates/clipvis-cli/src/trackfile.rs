//! Clip-track interchange format.
//!
//! ```text
//! trackfile v1
//! video <frames> <width> <height> <categories>
//! half_window <T>
//! tracks <count>
//! track <center_frame> <instance_index>
//! scores <s_1> ... <s_categories>
//! frame <t> rle <runs...>        # one line per frame of the clip span
//! ```
//!
//! Frame lines run in ascending frame order over the clip span implied by
//! the center frame, `half_window`, and the video length. Masks are stored
//! binarized; see [`crate::rle`] for the run-length contract.

use std::path::Path;

use clipvis_core::{clip_span, ClipInstanceTrack, MaskGrid, MaskSequence, VideoSpec};

use crate::rle;
use crate::textio::{
    atomic_write, expect_header, fmt_f64, parse_all, parse_token, tokens, FileError, LineReader,
};

pub const HEADER: &str = "trackfile v1";

/// A parsed track file: the video it describes, the clip half-window used
/// to produce the tracks, and the tracks themselves.
#[derive(Debug, Clone)]
pub struct TrackFile {
    pub video: VideoSpec,
    pub half_window: usize,
    pub tracks: Vec<ClipInstanceTrack>,
}

/// Reads `video <L> <W> <H> <K>` and validates positivity.
pub(crate) fn parse_video_line(reader: &mut LineReader) -> Result<VideoSpec, FileError> {
    let (line, text) = reader.require_line("'video' line")?;
    let toks = tokens(&text);
    if toks.len() != 5 || toks[0] != "video" {
        return Err(reader.error(
            line,
            "expected 'video <frames> <width> <height> <categories>'",
        ));
    }
    let num_frames = parse_token(reader, line, toks[1], "frame count")?;
    let width = parse_token(reader, line, toks[2], "width")?;
    let height = parse_token(reader, line, toks[3], "height")?;
    let categories = parse_token(reader, line, toks[4], "category count")?;
    let spec = VideoSpec {
        num_frames,
        width,
        height,
        categories,
    };
    if num_frames == 0 || width == 0 || height == 0 || categories == 0 {
        return Err(reader.error(line, "video dimensions must all be positive"));
    }
    Ok(spec)
}

/// Reads a one-keyword counter line such as `tracks 12`.
pub(crate) fn parse_count_line(reader: &mut LineReader, keyword: &str) -> Result<usize, FileError> {
    let (line, text) = reader.require_line(&format!("'{keyword}' line"))?;
    let toks = tokens(&text);
    if toks.len() != 2 || toks[0] != keyword {
        return Err(reader.error(line, format!("expected '{keyword} <count>'")));
    }
    parse_token(reader, line, toks[1], keyword)
}

/// Reads `frame <t> rle <runs...>` for an expected frame number, decoding
/// the mask and naming `record` in any failure.
pub(crate) fn parse_frame_line(
    reader: &mut LineReader,
    expected_frame: usize,
    spec: &VideoSpec,
    record: &str,
) -> Result<MaskGrid, FileError> {
    let (line, text) = reader.require_line(&format!("{record} frame {expected_frame}"))?;
    let toks = tokens(&text);
    if toks.len() < 3 || toks[0] != "frame" || toks[2] != "rle" {
        return Err(reader.error(
            line,
            format!("{record}: expected 'frame <t> rle <runs...>'"),
        ));
    }
    let frame: usize = parse_token(reader, line, toks[1], "frame number")?;
    if frame != expected_frame {
        return Err(reader.error(
            line,
            format!("{record}: expected frame {expected_frame}, found {frame}"),
        ));
    }
    let runs: Vec<u64> = parse_all(reader, line, &toks[3..], "run length")?;
    rle::decode(spec.width, spec.height, &runs)
        .map_err(|e| reader.error(line, format!("{record} frame {frame}: {e}")))
}

fn push_frame_lines(out: &mut String, start_frame: usize, masks: &MaskSequence) {
    for (offset, mask) in masks.iter().enumerate() {
        let runs = rle::encode(mask);
        out.push_str(&format!("frame {}", start_frame + offset));
        out.push_str(" rle");
        for run in runs {
            out.push_str(&format!(" {run}"));
        }
        out.push('\n');
    }
}

/// Serializes tracks and writes them atomically to `path`.
pub fn write(
    path: &Path,
    video: VideoSpec,
    half_window: usize,
    tracks: &[ClipInstanceTrack],
) -> Result<(), FileError> {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    out.push_str(&format!(
        "video {} {} {} {}\n",
        video.num_frames, video.width, video.height, video.categories
    ));
    out.push_str(&format!("half_window {half_window}\n"));
    out.push_str(&format!("tracks {}\n", tracks.len()));
    for track in tracks {
        out.push_str(&format!(
            "track {} {}\n",
            track.center_frame(),
            track.instance_index()
        ));
        out.push_str("scores");
        for &s in track.class_scores() {
            out.push_str(&format!(" {}", fmt_f64(s)));
        }
        out.push('\n');
        push_frame_lines(&mut out, track.start_frame(), track.masks());
    }
    atomic_write(path, out.as_bytes())
}

/// Parses a track file, reconstructing each [`ClipInstanceTrack`].
pub fn read(path: &Path) -> Result<TrackFile, FileError> {
    let mut reader = LineReader::open(path, false)?;
    expect_header(&mut reader, HEADER)?;
    let video = parse_video_line(&mut reader)?;
    let half_window = parse_count_line(&mut reader, "half_window")?;
    let count = parse_count_line(&mut reader, "tracks")?;

    let mut tracks = Vec::with_capacity(count);
    for ordinal in 1..=count {
        let record = format!("track {ordinal}");
        let (line, text) = reader.require_line(&format!("'{record}' record"))?;
        let toks = tokens(&text);
        if toks.len() != 3 || toks[0] != "track" {
            return Err(reader.error(line, "expected 'track <center_frame> <instance_index>'"));
        }
        let center: usize = parse_token(&reader, line, toks[1], "center frame")?;
        let instance_index: usize = parse_token(&reader, line, toks[2], "instance index")?;
        if center == 0 || center > video.num_frames {
            return Err(reader.error(
                line,
                format!(
                    "{record}: center frame {center} outside video 1..={}",
                    video.num_frames
                ),
            ));
        }

        let (scores_line, text) = reader.require_line("'scores' line")?;
        let toks = tokens(&text);
        if toks.first() != Some(&"scores") {
            return Err(reader.error(scores_line, "expected 'scores <s_1> ...'"));
        }
        let scores: Vec<f64> = parse_all(&reader, scores_line, &toks[1..], "class score")?;
        if scores.len() != video.categories {
            return Err(reader.error(
                scores_line,
                format!(
                    "{record}: expected {} class scores, found {}",
                    video.categories,
                    scores.len()
                ),
            ));
        }

        let (start, end) = clip_span(center, half_window, video.num_frames);
        let mut frames = Vec::with_capacity(end - start + 1);
        for frame in start..=end {
            frames.push(parse_frame_line(&mut reader, frame, &video, &record)?);
        }
        let masks = MaskSequence::new(frames).expect("decoded frames share the video grid shape");
        let track = ClipInstanceTrack::new(
            center,
            half_window,
            video.num_frames,
            masks,
            scores,
            instance_index,
        )
        .map_err(|e| reader.error(line, format!("{record}: {e}")))?;
        tracks.push(track);
    }
    if let Some((line, _)) = reader.next_line() {
        return Err(reader.error(line, format!("unexpected data after {count} tracks")));
    }
    Ok(TrackFile {
        video,
        half_window,
        tracks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_track(center: usize, index: usize) -> ClipInstanceTrack {
        let video_len = 5;
        let (start, end) = clip_span(center, 1, video_len);
        let frames = (start..=end)
            .map(|t| MaskGrid::from_fn(3, 2, |x, _| f64::from(u8::from(x == t % 3))).unwrap())
            .collect();
        ClipInstanceTrack::new(
            center,
            1,
            video_len,
            MaskSequence::new(frames).unwrap(),
            vec![0.25, 0.75],
            index,
        )
        .unwrap()
    }

    fn spec() -> VideoSpec {
        VideoSpec {
            num_frames: 5,
            width: 3,
            height: 2,
            categories: 2,
        }
    }

    #[test]
    fn round_trips_tracks() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tracks.txt");
        let tracks = vec![sample_track(1, 0), sample_track(3, 1)];
        write(&path, spec(), 1, &tracks).unwrap();
        let parsed = read(&path).unwrap();
        assert_eq!(parsed.video, spec());
        assert_eq!(parsed.half_window, 1);
        assert_eq!(parsed.tracks, tracks);
    }

    #[test]
    fn checksum_failure_names_the_record() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tracks.txt");
        std::fs::write(
            &path,
            "trackfile v1\nvideo 5 3 2 2\nhalf_window 0\ntracks 1\n\
             track 2 0\nscores 1 0\nframe 2 rle 5\n",
        )
        .unwrap();
        let err = read(&path).unwrap_err().to_string();
        assert!(err.contains(":7:"), "{err}");
        assert!(
            err.contains("track 1 frame 2: run lengths sum to 5, expected 6"),
            "{err}"
        );
    }

    #[test]
    fn frame_lines_must_cover_the_span_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tracks.txt");
        std::fs::write(
            &path,
            "trackfile v1\nvideo 5 3 2 2\nhalf_window 1\ntracks 1\n\
             track 2 0\nscores 1 0\nframe 1 rle 6\nframe 3 rle 6\nframe 2 rle 6\n",
        )
        .unwrap();
        let err = read(&path).unwrap_err().to_string();
        assert!(err.contains("expected frame 2, found 3"), "{err}");
    }

    #[test]
    fn rejects_wrong_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tracks.txt");
        std::fs::write(&path, "trackfile v2\n").unwrap();
        let err = read(&path).unwrap_err().to_string();
        assert!(
            err.contains("expected header 'trackfile v1', found 'trackfile v2'"),
            "{err}"
        );
    }

    #[test]
    fn trailing_garbage_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tracks.txt");
        write(&path, spec(), 1, &[sample_track(1, 0)]).unwrap();
        let mut text = std::fs::read_to_string(&path).unwrap();
        text.push_str("track 9 9\n");
        std::fs::write(&path, text).unwrap();
        let err = read(&path).unwrap_err().to_string();
        assert!(err.contains("unexpected data after 1 tracks"), "{err}");
    }
}
