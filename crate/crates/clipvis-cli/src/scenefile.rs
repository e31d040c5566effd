//! Scene description files: a line-oriented format with `#` comments that
//! declares the video, the moving objects, optional occluders, and an
//! optional detector-noise model.
//!
//! ```text
//! # two shapes crossing behind a pillar
//! scene v1
//! video 24 32 18 3
//! seed 7
//! object 1 rect 4 3 pos 6.5 9 vel 0.5 0
//! object 2 disk 2.5 pos 26 9 vel -0.75 0
//! occluder frames 8 11 region 14 0 5 18
//! detector miss 0.1 jitter 1 score_noise 0.05
//! miss_interval 1 5 7
//! ```
//!
//! `seed`, `occluder`, `detector`, and `miss_interval` lines are optional;
//! `miss_interval <object> <first> <last>` suppresses detections of the
//! 1-based object over a frame interval. All diagnostics carry `path:line:`.

use std::path::Path;

use clipvis_core::{
    DetectorModel, ForcedMiss, ObjectSpec, Occluder, SceneConfig, ShapeSpec, VideoSpec,
};

use crate::textio::{expect_header, parse_token, tokens, FileError, LineReader};

pub const HEADER: &str = "scene v1";

/// A parsed scene file: the geometry plus the detector-noise model that the
/// track simulator should apply.
#[derive(Debug, Clone)]
pub struct SceneFile {
    pub scene: SceneConfig,
    pub detector: DetectorModel,
}

fn parse_object(reader: &LineReader, line: usize, toks: &[&str]) -> Result<ObjectSpec, FileError> {
    // object <category> rect <w> <h> pos <x> <y> vel <vx> <vy>
    // object <category> disk <r>     pos <x> <y> vel <vx> <vy>
    let bad = |msg: &str| reader.error(line, format!("object: {msg}"));
    if toks.len() < 3 {
        return Err(bad("expected 'object <category> rect|disk ...'"));
    }
    let category: usize = parse_token(reader, line, toks[1], "category")?;
    let (shape, rest) = match toks[2] {
        "rect" => {
            if toks.len() != 11 {
                return Err(bad("expected 'rect <w> <h> pos <x> <y> vel <vx> <vy>'"));
            }
            let width = parse_token(reader, line, toks[3], "rect width")?;
            let height = parse_token(reader, line, toks[4], "rect height")?;
            (ShapeSpec::Rect { width, height }, &toks[5..])
        }
        "disk" => {
            if toks.len() != 10 {
                return Err(bad("expected 'disk <r> pos <x> <y> vel <vx> <vy>'"));
            }
            let radius = parse_token(reader, line, toks[3], "disk radius")?;
            (ShapeSpec::Disk { radius }, &toks[4..])
        }
        other => {
            return Err(bad(&format!(
                "unknown shape '{other}' (expected rect or disk)"
            )))
        }
    };
    if rest[0] != "pos" || rest[3] != "vel" {
        return Err(bad("expected 'pos <x> <y> vel <vx> <vy>'"));
    }
    Ok(ObjectSpec {
        category,
        shape,
        x0: parse_token(reader, line, rest[1], "x position")?,
        y0: parse_token(reader, line, rest[2], "y position")?,
        vx: parse_token(reader, line, rest[4], "x velocity")?,
        vy: parse_token(reader, line, rest[5], "y velocity")?,
    })
}

fn parse_occluder(reader: &LineReader, line: usize, toks: &[&str]) -> Result<Occluder, FileError> {
    // occluder frames <first> <last> region <x> <y> <w> <h>
    if toks.len() != 9 || toks[1] != "frames" || toks[4] != "region" {
        return Err(reader.error(
            line,
            "expected 'occluder frames <first> <last> region <x> <y> <w> <h>'",
        ));
    }
    Ok(Occluder {
        first_frame: parse_token(reader, line, toks[2], "first frame")?,
        last_frame: parse_token(reader, line, toks[3], "last frame")?,
        x: parse_token(reader, line, toks[5], "region x")?,
        y: parse_token(reader, line, toks[6], "region y")?,
        width: parse_token(reader, line, toks[7], "region width")?,
        height: parse_token(reader, line, toks[8], "region height")?,
    })
}

fn parse_detector(
    reader: &LineReader,
    line: usize,
    toks: &[&str],
) -> Result<(f64, usize, f64), FileError> {
    // detector miss <p> jitter <j> score_noise <s>
    if toks.len() != 7 || toks[1] != "miss" || toks[3] != "jitter" || toks[5] != "score_noise" {
        return Err(reader.error(
            line,
            "expected 'detector miss <p> jitter <j> score_noise <s>'",
        ));
    }
    Ok((
        parse_token(reader, line, toks[2], "miss probability")?,
        parse_token(reader, line, toks[4], "boundary jitter")?,
        parse_token(reader, line, toks[6], "score noise")?,
    ))
}

/// Parses a scene file. The returned scene still goes through the
/// generator's own semantic validation (shape areas, on-screen checks).
pub fn read(path: &Path) -> Result<SceneFile, FileError> {
    let mut reader = LineReader::open(path, true)?;
    expect_header(&mut reader, HEADER)?;

    let mut video: Option<VideoSpec> = None;
    let mut seed: Option<u64> = None;
    let mut objects = Vec::new();
    let mut occluders = Vec::new();
    let mut detector: Option<(f64, usize, f64)> = None;
    let mut misses: Vec<(usize, ForcedMiss)> = Vec::new();

    while let Some((line, text)) = reader.next_line() {
        let toks = tokens(&text);
        match toks[0] {
            "video" => {
                if video.is_some() {
                    return Err(reader.error(line, "duplicate 'video' directive"));
                }
                if toks.len() != 5 {
                    return Err(reader.error(
                        line,
                        "expected 'video <frames> <width> <height> <categories>'",
                    ));
                }
                video = Some(VideoSpec {
                    num_frames: parse_token(&reader, line, toks[1], "frame count")?,
                    width: parse_token(&reader, line, toks[2], "width")?,
                    height: parse_token(&reader, line, toks[3], "height")?,
                    categories: parse_token(&reader, line, toks[4], "category count")?,
                });
            }
            "seed" => {
                if seed.is_some() {
                    return Err(reader.error(line, "duplicate 'seed' directive"));
                }
                if toks.len() != 2 {
                    return Err(reader.error(line, "expected 'seed <value>'"));
                }
                seed = Some(parse_token(&reader, line, toks[1], "seed")?);
            }
            "object" => objects.push(parse_object(&reader, line, &toks)?),
            "occluder" => occluders.push(parse_occluder(&reader, line, &toks)?),
            "detector" => {
                if detector.is_some() {
                    return Err(reader.error(line, "duplicate 'detector' directive"));
                }
                detector = Some(parse_detector(&reader, line, &toks)?);
            }
            "miss_interval" => {
                if toks.len() != 4 {
                    return Err(
                        reader.error(line, "expected 'miss_interval <object> <first> <last>'")
                    );
                }
                let object: usize = parse_token(&reader, line, toks[1], "object number")?;
                if object == 0 {
                    return Err(reader.error(line, "miss_interval: objects are numbered from 1"));
                }
                misses.push((
                    line,
                    ForcedMiss {
                        object: object - 1,
                        first_frame: parse_token(&reader, line, toks[2], "first frame")?,
                        last_frame: parse_token(&reader, line, toks[3], "last frame")?,
                    },
                ));
            }
            other => {
                return Err(reader.error(line, format!("unknown directive '{other}'")));
            }
        }
    }

    let video = video.ok_or_else(|| {
        reader.error(
            1,
            "missing 'video <frames> <width> <height> <categories>' directive",
        )
    })?;
    for &(line, miss) in &misses {
        if miss.object >= objects.len() {
            return Err(reader.error(
                line,
                format!(
                    "miss_interval: object {} does not exist ({} objects declared)",
                    miss.object + 1,
                    objects.len()
                ),
            ));
        }
    }
    let (miss_probability, boundary_jitter, score_noise) = detector.unwrap_or((0.0, 0, 0.0));
    Ok(SceneFile {
        scene: SceneConfig {
            video,
            objects,
            occluders,
            seed: seed.unwrap_or(0),
        },
        detector: DetectorModel {
            miss_probability,
            boundary_jitter,
            score_noise,
            forced_miss_intervals: misses.into_iter().map(|(_, m)| m).collect(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(contents: &str) -> Result<SceneFile, FileError> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scene.cfg");
        std::fs::write(&path, contents).unwrap();
        read(&path)
    }

    #[test]
    fn parses_a_full_scene() {
        let parsed = parse(
            "# demo\nscene v1\nvideo 24 32 18 3\nseed 7\n\
             object 1 rect 4 3 pos 6.5 9 vel 0.5 0\n\
             object 2 disk 2.5 pos 26 9 vel -0.75 0\n\
             occluder frames 8 11 region 14 0 5 18\n\
             detector miss 0.1 jitter 1 score_noise 0.05\n\
             miss_interval 1 5 7\n",
        )
        .unwrap();
        assert_eq!(parsed.scene.video.num_frames, 24);
        assert_eq!(parsed.scene.seed, 7);
        assert_eq!(parsed.scene.objects.len(), 2);
        assert_eq!(
            parsed.scene.objects[1].shape,
            ShapeSpec::Disk { radius: 2.5 }
        );
        assert_eq!(parsed.scene.occluders.len(), 1);
        assert_eq!(parsed.detector.miss_probability, 0.1);
        assert_eq!(parsed.detector.boundary_jitter, 1);
        assert_eq!(
            parsed.detector.forced_miss_intervals,
            vec![ForcedMiss {
                object: 0,
                first_frame: 5,
                last_frame: 7
            }]
        );
    }

    #[test]
    fn defaults_are_noiseless_and_seed_zero() {
        let parsed = parse("scene v1\nvideo 3 4 4 1\nobject 1 rect 2 2 pos 2 2 vel 0 0\n").unwrap();
        assert_eq!(parsed.scene.seed, 0);
        assert_eq!(parsed.detector, DetectorModel::default());
    }

    #[test]
    fn unknown_directive_is_a_line_numbered_error() {
        let err = parse("scene v1\nvideo 3 4 4 1\nobjct 1\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains(":3: unknown directive 'objct'"), "{err}");
    }

    #[test]
    fn malformed_numbers_name_the_field() {
        let err = parse("scene v1\nvideo 3 4 4 one\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains(":2: invalid category count 'one'"), "{err}");
    }

    #[test]
    fn miss_interval_must_reference_a_declared_object() {
        let err = parse(
            "scene v1\nvideo 3 4 4 1\nobject 1 rect 2 2 pos 2 2 vel 0 0\nmiss_interval 2 1 2\n",
        )
        .unwrap_err()
        .to_string();
        assert!(
            err.contains(":4: miss_interval: object 2 does not exist"),
            "{err}"
        );
    }

    #[test]
    fn missing_video_is_rejected() {
        let err = parse("scene v1\nseed 3\n").unwrap_err().to_string();
        assert!(err.contains("missing 'video"), "{err}");
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let parsed = parse(
            "\n# leading comment\nscene v1\n\n# spec\nvideo 3 4 4 1\n\nobject 1 disk 1 pos 2 2 vel 0 0\n",
        )
        .unwrap();
        assert_eq!(parsed.scene.objects.len(), 1);
    }
}
