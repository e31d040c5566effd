//! Implementations of the CLI subcommands, decoupled from argument parsing
//! so they can be driven directly from tests. Each returns the text meant
//! for stdout (plus any warnings for stderr) or a single-line error.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clipvis_core::{
    assemble_video, assign_ids, evaluate, generate_scene, occlusion_sweep, propagate_clip,
    simulate_clip_tracks, ClipWindow, GroundTruthSet, PredictionSet, PropagationConfig,
    PropagationMode, PropagationParams, VideoSpec,
};

use crate::{annotations, pgm, report, scenefile, tensorfile, textio, trackfile};

/// What a subcommand wants printed: `stdout` verbatim (already
/// newline-terminated) and one stderr line per warning.
#[derive(Debug, Default, PartialEq, Eq)]
pub struct Outcome {
    pub stdout: String,
    pub warnings: Vec<String>,
}

impl Outcome {
    fn text(stdout: String) -> Self {
        Outcome {
            stdout,
            warnings: Vec::new(),
        }
    }
}

/// `synth`: generate a scene's ground truth and simulated clip tracks.
pub fn synth(
    config: &Path,
    out_dir: &Path,
    seed: Option<u64>,
    half_window: usize,
    mode: PropagationMode,
) -> Result<Outcome> {
    let mut parsed = scenefile::read(config)?;
    if let Some(seed) = seed {
        parsed.scene.seed = seed;
    }
    let generated = generate_scene(&parsed.scene).context("invalid scene")?;
    let tracks = simulate_clip_tracks(
        &generated.ground_truth,
        &generated.visibility,
        &parsed.detector,
        half_window,
        parsed.scene.video.categories,
        mode,
        parsed.scene.seed,
    )
    .context("simulating tracks")?;

    fs::create_dir_all(out_dir)
        .map_err(|e| textio::FileError::io(out_dir, e))
        .context("creating output directory")?;
    let gt_path = out_dir.join("gt.txt");
    let tracks_path = out_dir.join("tracks.txt");
    annotations::write_gt(
        &gt_path,
        &[parsed.scene.video],
        &GroundTruthSet {
            videos: vec![generated.ground_truth],
        },
    )?;
    trackfile::write(&tracks_path, parsed.scene.video, half_window, &tracks)?;
    Ok(Outcome::text(format!(
        "wrote {} ({} instances) and {} ({} tracks)\n",
        gt_path.display(),
        parsed.scene.objects.len(),
        tracks_path.display(),
        tracks.len()
    )))
}

/// `propagate`: warp center-frame masks across a clip and write the
/// resulting track.
pub fn propagate(
    features: &Path,
    masks: &Path,
    params_path: Option<&Path>,
    seed: Option<u64>,
    half_window: usize,
    out: &Path,
) -> Result<Outcome> {
    let features = tensorfile::read_features(features)?;
    let detections = tensorfile::read_masks(masks)?;
    if (detections.width, detections.height) != (features.width, features.height) {
        bail!(
            "masks {}x{} do not match features {}x{}",
            detections.width,
            detections.height,
            features.width,
            features.height
        );
    }
    if detections.center_frame == 0 || detections.center_frame > features.num_frames {
        bail!(
            "center frame {} outside video 1..={}",
            detections.center_frame,
            features.num_frames
        );
    }

    let params = match (params_path, seed) {
        (Some(_), Some(_)) => bail!("pass either --params or --seed, not both"),
        (Some(path), None) => tensorfile::read_params(path)?,
        (None, seed) => {
            let config = PropagationConfig::toy(features.channels);
            PropagationParams::seeded(&config, seed.unwrap_or(0))
                .context("building seeded parameters")?
        }
    };

    let window = ClipWindow {
        center_frame: detections.center_frame,
        half_window,
        video_len: features.num_frames,
    };
    let (start, end) = window.span();
    let tracks = propagate_clip(
        &features.frames[start - 1..end],
        &detections.masks,
        &detections.scores,
        window,
        &params,
    )
    .context("propagating masks")?;

    let video = VideoSpec {
        num_frames: features.num_frames,
        width: features.width,
        height: features.height,
        categories: detections.categories,
    };
    trackfile::write(out, video, half_window, &tracks)?;
    Ok(Outcome::text(format!(
        "wrote {} ({} tracks spanning frames {start}..={end})\n",
        out.display(),
        tracks.len()
    )))
}

/// `link`: assign video-level identities to clip tracks and write the
/// assembled instances.
pub fn link(tracks: &Path, threshold: f64, out: &Path) -> Result<Outcome> {
    let parsed = trackfile::read(tracks)?;
    let state = assign_ids(&parsed.tracks, threshold, parsed.video.num_frames)
        .context("assigning identities")?;
    let instances = assemble_video(&parsed.tracks, &state, parsed.video.num_frames)
        .context("assembling instances")?;
    annotations::write_results(
        out,
        &[parsed.video],
        &PredictionSet {
            videos: vec![instances],
        },
    )?;
    Ok(Outcome::text(format!(
        "linked {} tracks into {} instances; wrote {}\n",
        parsed.tracks.len(),
        state.id_count(),
        out.display()
    )))
}

/// `eval`: score predictions against ground truth; prints the headline
/// numbers and optionally writes the full key-value report.
pub fn eval(results: &Path, gt: &Path, out: Option<&Path>) -> Result<Outcome> {
    let results = annotations::read_results(results)?;
    let gt = annotations::read_gt(gt)?;
    let report_values = evaluate(&results.set, &gt.set).context("evaluating")?;
    if let Some(path) = out {
        textio::atomic_write(path, report::render(&report_values).as_bytes())?;
    }
    Ok(Outcome::text(report::summary_lines(&report_values)))
}

/// `render`: draw each frame of each predicted video as a graymap image.
pub fn render(results: &Path, out_dir: &Path, ascii: bool) -> Result<Outcome> {
    let parsed = annotations::read_results(results)?;
    fs::create_dir_all(out_dir)
        .map_err(|e| textio::FileError::io(out_dir, e))
        .context("creating output directory")?;

    let mut warnings = Vec::new();
    let mut files = 0usize;
    for (index, (spec, instances)) in parsed.specs.iter().zip(&parsed.set.videos).enumerate() {
        let video_no = index + 1;
        if instances.len() > pgm::PALETTE.len() {
            warnings.push(format!(
                "video {video_no}: {} instances exceed the {}-level palette; gray levels repeat",
                instances.len(),
                pgm::PALETTE.len()
            ));
        }
        for frame in 1..=spec.num_frames {
            let pixels = pgm::compose_frame(spec, instances, frame);
            let bytes = if ascii {
                pgm::encode_p2(spec.width, spec.height, &pixels)
            } else {
                pgm::encode_p5(spec.width, spec.height, &pixels)
            };
            let path = out_dir.join(format!("video{video_no}_frame{frame:06}.pgm"));
            textio::atomic_write(&path, &bytes)?;
            files += 1;
        }
    }
    Ok(Outcome {
        stdout: format!("wrote {files} frames to {}\n", out_dir.display()),
        warnings,
    })
}

/// `sweep`: tabulate identity linking over half-window x gap combinations.
pub fn sweep(
    config: &Path,
    max_half_window: usize,
    max_gap: usize,
    gap_start: usize,
    threshold: f64,
    mode: PropagationMode,
    out: Option<&Path>,
) -> Result<Outcome> {
    if max_half_window == 0 || max_gap == 0 {
        bail!("sweep ranges start at 1; pass positive maxima");
    }
    let parsed = scenefile::read(config)?;
    let t_values: Vec<usize> = (1..=max_half_window).collect();
    let gap_values: Vec<usize> = (1..=max_gap).collect();
    let cells = occlusion_sweep(
        &t_values,
        &gap_values,
        &parsed.scene,
        gap_start,
        threshold,
        mode,
    )
    .context("sweeping")?;

    let mut stdout = format!("gaps 1..={max_gap} starting at frame {gap_start}\n");
    let mut file_text = String::from("sweep v1\n");
    file_text.push_str(&format!("half_windows {max_half_window}\n"));
    file_text.push_str(&format!("gaps {max_gap}\n"));
    for &t in &t_values {
        let row: String = cells
            .iter()
            .filter(|cell| cell.half_window == t)
            .map(|cell| if cell.linked { 'Y' } else { '-' })
            .collect();
        stdout.push_str(&format!("half_window {t}: {row}\n"));
    }
    for cell in &cells {
        file_text.push_str(&format!(
            "cell {} {} {}\n",
            cell.half_window,
            cell.gap,
            u8::from(cell.linked)
        ));
    }
    if let Some(path) = out {
        textio::atomic_write(path, file_text.as_bytes())?;
    }
    Ok(Outcome::text(stdout))
}
