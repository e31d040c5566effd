//! Deterministic synthetic videos with known ground truth.
//!
//! Scenes are parametric: objects are axis-aligned rectangles or disks on
//! linear trajectories, optionally hidden by scheduled occluder regions.
//! Rasterization is by pixel-center inclusion, so ground truth is exact and
//! hand-checkable. A simulated detector turns ground truth into clip-level
//! tracks, with optional misses, boundary jitter, and score noise drawn from
//! the seeded generator in a fixed order; the same seed always reproduces
//! the same tracks bit for bit.

use crate::linker::{assign_ids, clip_span, ClipInstanceTrack, LinkError};
use crate::mask::{MaskError, MaskGrid, MaskSequence, VideoSpec};
use crate::metrics::{GtInstance, VideoGroundTruth};
use crate::rng::Rng64;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("degenerate shape: {0}")]
    DegenerateShape(String),
    #[error("object category {category} outside 1..={categories}")]
    BadCategory { category: usize, categories: usize },
    #[error("occluder frames [{first}, {last}] invalid for a {video_len}-frame video")]
    BadOccluderFrames {
        first: usize,
        last: usize,
        video_len: usize,
    },
    #[error(
        "occluder region {x}+{width} x {y}+{height} exceeds the {grid_width}x{grid_height} grid"
    )]
    BadOccluderRegion {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
        grid_width: usize,
        grid_height: usize,
    },
    #[error("forced miss names object {object} but the scene has {objects} objects")]
    BadForcedMissObject { object: usize, objects: usize },
    #[error("forced miss frames [{first}, {last}] invalid for a {video_len}-frame video")]
    BadForcedMissFrames {
        first: usize,
        last: usize,
        video_len: usize,
    },
    #[error("miss probability {0} outside [0, 1]")]
    BadMissProbability(f64),
    #[error("score noise {0} must be nonnegative")]
    BadScoreNoise(f64),
    #[error("visibility table shape does not match {objects} objects x {frames} frames")]
    VisibilityShape { objects: usize, frames: usize },
    #[error("occlusion sweep needs exactly one object, got {0}")]
    SweepNeedsOneObject(usize),
    #[error("gap [{start}, {end}] leaves no detection on both sides of a {video_len}-frame video")]
    GapOutOfRange {
        start: usize,
        end: usize,
        video_len: usize,
    },
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Mask(#[from] MaskError),
}

/// Object footprint, placed at the trajectory position each frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShapeSpec {
    /// Axis-aligned `width x height` rectangle centered on the trajectory; a
    /// pixel is covered when its center lies in the half-open box
    /// `[cx - w/2, cx + w/2) x [cy - h/2, cy + h/2)`.
    Rect { width: f64, height: f64 },
    /// Disk of radius `r`; a pixel is covered when its center is within `r`
    /// of the disk center (inclusive).
    Disk { radius: f64 },
}

/// One object: category, footprint, and linear motion
/// `center(t) = (x0 + vx (t-1), y0 + vy (t-1))` in pixel units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectSpec {
    pub category: usize,
    pub shape: ShapeSpec,
    pub x0: f64,
    pub y0: f64,
    pub vx: f64,
    pub vy: f64,
}

/// Pixel-aligned rectangle that hides everything beneath it during
/// `[first_frame, last_frame]` (1-based, inclusive).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Occluder {
    pub first_frame: usize,
    pub last_frame: usize,
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Occluder {
    fn active(&self, frame: usize) -> bool {
        (self.first_frame..=self.last_frame).contains(&frame)
    }

    fn covers(&self, px: usize, py: usize) -> bool {
        (self.x..self.x + self.width).contains(&px) && (self.y..self.y + self.height).contains(&py)
    }
}

/// Complete scene description; with a fixed seed the entire synthetic
/// pipeline downstream of it is reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub video: VideoSpec,
    pub objects: Vec<ObjectSpec>,
    pub occluders: Vec<Occluder>,
    pub seed: u64,
}

/// Frames during which one object's detections are suppressed, regardless of
/// the miss probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForcedMiss {
    /// Zero-based object index into the scene's object list.
    pub object: usize,
    pub first_frame: usize,
    pub last_frame: usize,
}

impl ForcedMiss {
    fn covers(&self, frame: usize) -> bool {
        (self.first_frame..=self.last_frame).contains(&frame)
    }
}

/// Detector imperfections applied when simulating clip tracks.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectorModel {
    /// Chance of missing a visible object at a frame.
    pub miss_probability: f64,
    /// Maximum magnitude of per-frame mask erosion/dilation, in pixels.
    pub boundary_jitter: usize,
    /// Standard deviation of the class score perturbation.
    pub score_noise: f64,
    /// Scheduled detection gaps, e.g. to study occlusion handling.
    pub forced_miss_intervals: Vec<ForcedMiss>,
}

/// How simulated tracks fill frames away from their center detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropagationMode {
    /// Every clip frame carries the object's ground-truth mask: propagation
    /// is assumed to succeed wherever the object appears, and frames where
    /// it is absent stay empty on both sides (which still counts as match
    /// agreement).
    Perfect,
    /// Frames where the object was not detected (hidden or missed) carry
    /// empty masks even if the object is present in the ground truth.
    Strict,
}

/// Ground truth plus the per-object, per-frame visibility table
/// (`visibility[object][frame - 1]`).
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedScene {
    pub ground_truth: VideoGroundTruth,
    pub visibility: Vec<Vec<bool>>,
}

fn validate_shape(shape: &ShapeSpec) -> Result<(), SynthError> {
    match *shape {
        ShapeSpec::Rect { width, height } => {
            // `<=` plus an explicit NaN check mirrors the old `!(v > 0.0)`.
            if width <= 0.0 || width.is_nan() || height <= 0.0 || height.is_nan() {
                return Err(SynthError::DegenerateShape(format!(
                    "rectangle {width} x {height} has no area"
                )));
            }
        }
        ShapeSpec::Disk { radius } => {
            if radius <= 0.0 || radius.is_nan() {
                return Err(SynthError::DegenerateShape(format!(
                    "disk of radius {radius} has no area"
                )));
            }
        }
    }
    Ok(())
}

fn rasterize(shape: &ShapeSpec, cx: f64, cy: f64, width: usize, height: usize) -> MaskGrid {
    MaskGrid::from_fn(width, height, |px, py| {
        let x = px as f64 + 0.5;
        let y = py as f64 + 0.5;
        let inside = match *shape {
            ShapeSpec::Rect {
                width: w,
                height: h,
            } => x >= cx - w / 2.0 && x < cx + w / 2.0 && y >= cy - h / 2.0 && y < cy + h / 2.0,
            ShapeSpec::Disk { radius } => {
                let dx = x - cx;
                let dy = y - cy;
                dx * dx + dy * dy <= radius * radius
            }
        };
        if inside {
            1.0
        } else {
            0.0
        }
    })
    .expect("scene grids are nonzero")
}

/// Renders every object's per-frame ground-truth mask and visibility.
/// Occluders delete covered pixels from every object; an object is visible
/// at a frame when at least one pixel survives.
pub fn generate_scene(config: &SceneConfig) -> Result<GeneratedScene, SynthError> {
    let VideoSpec {
        num_frames,
        width,
        height,
        categories,
    } = config.video;
    for object in &config.objects {
        validate_shape(&object.shape)?;
        if object.category == 0 || object.category > categories {
            return Err(SynthError::BadCategory {
                category: object.category,
                categories,
            });
        }
    }
    for occluder in &config.occluders {
        if occluder.first_frame == 0
            || occluder.first_frame > occluder.last_frame
            || occluder.last_frame > num_frames
        {
            return Err(SynthError::BadOccluderFrames {
                first: occluder.first_frame,
                last: occluder.last_frame,
                video_len: num_frames,
            });
        }
        if occluder.x + occluder.width > width || occluder.y + occluder.height > height {
            return Err(SynthError::BadOccluderRegion {
                x: occluder.x,
                y: occluder.y,
                width: occluder.width,
                height: occluder.height,
                grid_width: width,
                grid_height: height,
            });
        }
    }

    let mut instances = Vec::with_capacity(config.objects.len());
    let mut visibility = Vec::with_capacity(config.objects.len());
    for object in &config.objects {
        let mut frames = Vec::with_capacity(num_frames);
        let mut visible = Vec::with_capacity(num_frames);
        for t in 1..=num_frames {
            let cx = object.x0 + object.vx * (t - 1) as f64;
            let cy = object.y0 + object.vy * (t - 1) as f64;
            let raster = rasterize(&object.shape, cx, cy, width, height);
            let active: Vec<&Occluder> = config.occluders.iter().filter(|o| o.active(t)).collect();
            let mask = MaskGrid::from_fn(width, height, |px, py| {
                if raster.get(px, py) == 1.0 && !active.iter().any(|o| o.covers(px, py)) {
                    1.0
                } else {
                    0.0
                }
            })?;
            visible.push(mask.foreground_area() > 0);
            frames.push(mask);
        }
        visibility.push(visible);
        instances.push(GtInstance {
            category: object.category,
            masks: MaskSequence::new(frames)?,
        });
    }
    Ok(GeneratedScene {
        ground_truth: VideoGroundTruth { instances },
        visibility,
    })
}

/// Morphological dilation with the 4-connected cross element.
fn dilate(mask: &MaskGrid) -> MaskGrid {
    MaskGrid::from_fn(mask.width(), mask.height(), |x, y| {
        let on = mask.get(x, y) == 1.0
            || (x > 0 && mask.get(x - 1, y) == 1.0)
            || (x + 1 < mask.width() && mask.get(x + 1, y) == 1.0)
            || (y > 0 && mask.get(x, y - 1) == 1.0)
            || (y + 1 < mask.height() && mask.get(x, y + 1) == 1.0);
        if on {
            1.0
        } else {
            0.0
        }
    })
    .expect("dilate preserves dimensions")
}

/// Morphological erosion with the 4-connected cross element; out-of-bounds
/// neighbors count as background, so border pixels erode.
fn erode(mask: &MaskGrid) -> MaskGrid {
    MaskGrid::from_fn(mask.width(), mask.height(), |x, y| {
        let on = mask.get(x, y) == 1.0
            && x > 0
            && mask.get(x - 1, y) == 1.0
            && x + 1 < mask.width()
            && mask.get(x + 1, y) == 1.0
            && y > 0
            && mask.get(x, y - 1) == 1.0
            && y + 1 < mask.height()
            && mask.get(x, y + 1) == 1.0;
        if on {
            1.0
        } else {
            0.0
        }
    })
    .expect("erode preserves dimensions")
}

fn validate_model(
    model: &DetectorModel,
    objects: usize,
    video_len: usize,
) -> Result<(), SynthError> {
    if !(0.0..=1.0).contains(&model.miss_probability) {
        return Err(SynthError::BadMissProbability(model.miss_probability));
    }
    if model.score_noise < 0.0 || model.score_noise.is_nan() {
        return Err(SynthError::BadScoreNoise(model.score_noise));
    }
    for miss in &model.forced_miss_intervals {
        if miss.object >= objects {
            return Err(SynthError::BadForcedMissObject {
                object: miss.object,
                objects,
            });
        }
        if miss.first_frame == 0
            || miss.first_frame > miss.last_frame
            || miss.last_frame > video_len
        {
            return Err(SynthError::BadForcedMissFrames {
                first: miss.first_frame,
                last: miss.last_frame,
                video_len,
            });
        }
    }
    Ok(())
}

/// Simulates the clip-track output of a detector with propagation.
///
/// For every frame `t` (ascending) and every object (in scene order) that is
/// visible, not inside a forced-miss interval, and not randomly missed, one
/// track centered at `t` is emitted covering the clip span. Frame masks
/// follow `mode`; jitter erodes or dilates each frame mask by a uniform draw
/// in `[-j, +j]`; class scores start one-hot at the object's category and
/// take Gaussian noise clamped to `[0, 1]`.
///
/// Randomness comes from a single SplitMix64 stream seeded with `seed`,
/// consumed in two documented phases: first one miss draw per visible,
/// unforced `(frame, object)` pair when `miss_probability > 0`, then per
/// emitted track (frame order, then object order) one jitter draw per clip
/// frame when `boundary_jitter > 0` followed by one noise draw per category
/// when `score_noise > 0`.
pub fn simulate_clip_tracks(
    ground_truth: &VideoGroundTruth,
    visibility: &[Vec<bool>],
    model: &DetectorModel,
    half_window: usize,
    categories: usize,
    mode: PropagationMode,
    seed: u64,
) -> Result<Vec<ClipInstanceTrack>, SynthError> {
    let objects = ground_truth.instances.len();
    if objects == 0 {
        return Ok(Vec::new());
    }
    let video_len = ground_truth.instances[0].masks.len();
    if visibility.len() != objects || visibility.iter().any(|v| v.len() != video_len) {
        return Err(SynthError::VisibilityShape {
            objects,
            frames: video_len,
        });
    }
    validate_model(model, objects, video_len)?;

    let mut rng = Rng64::new(seed);

    // Phase 1: the detection table.
    let mut detected = vec![vec![false; video_len]; objects];
    for t in 1..=video_len {
        for (i, row) in detected.iter_mut().enumerate() {
            if !visibility[i][t - 1] {
                continue;
            }
            if model
                .forced_miss_intervals
                .iter()
                .any(|m| m.object == i && m.covers(t))
            {
                continue;
            }
            row[t - 1] = !(model.miss_probability > 0.0 && rng.next_bool(model.miss_probability));
        }
    }

    // Phase 2: one track per detection.
    let mut tracks = Vec::new();
    for t in 1..=video_len {
        let mut emitted_at_t = 0usize;
        for (i, instance) in ground_truth.instances.iter().enumerate() {
            if !detected[i][t - 1] {
                continue;
            }
            let (start, end) = clip_span(t, half_window, video_len);
            let mut frames = Vec::with_capacity(end - start + 1);
            for f in start..=end {
                let gt_mask = instance.masks.frame(f - 1);
                let mut mask = match mode {
                    PropagationMode::Perfect => gt_mask.clone(),
                    PropagationMode::Strict => {
                        if detected[i][f - 1] {
                            gt_mask.clone()
                        } else {
                            MaskGrid::zeros(gt_mask.width(), gt_mask.height())
                        }
                    }
                };
                if model.boundary_jitter > 0 {
                    let j = model.boundary_jitter as i64;
                    let amount = rng.next_below((2 * j + 1) as u64) as i64 - j;
                    for _ in 0..amount.abs() {
                        mask = if amount > 0 {
                            dilate(&mask)
                        } else {
                            erode(&mask)
                        };
                    }
                }
                frames.push(mask);
            }
            let mut scores = vec![0.0; categories];
            scores[instance.category - 1] = 1.0;
            if model.score_noise > 0.0 {
                for s in &mut scores {
                    *s = (*s + rng.next_gaussian() * model.score_noise).clamp(0.0, 1.0);
                }
            }
            tracks.push(ClipInstanceTrack::new(
                t,
                half_window,
                video_len,
                MaskSequence::new(frames)?,
                scores,
                emitted_at_t,
            )?);
            emitted_at_t += 1;
        }
    }
    Ok(tracks)
}

/// One cell of an occlusion sweep: was one identity assigned across the
/// detection gap of `gap` frames with clip half-window `half_window`?
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepCell {
    pub half_window: usize,
    pub gap: usize,
    pub linked: bool,
}

/// Closed-form overlap law: clips centered on the last detection before a
/// `gap`-frame detection hole and the first one after it are `gap + 1`
/// frames apart, so they share a frame (and the identity can bridge) exactly
/// when `gap + 1 <= 2 * half_window`, i.e. `gap <= 2T - 1`.
pub fn window_bridges_gap(half_window: usize, gap: usize) -> bool {
    gap < 2 * half_window
}

/// Sweeps clip half-windows against detection-gap lengths on a single-object
/// scene: for each `(T, g)` cell the object's detections are suppressed for
/// `g` frames starting at `gap_start`, tracks are simulated noiselessly,
/// identities are assigned at `link_threshold`, and the cell records whether
/// a single identity spans both sides of the gap.
pub fn occlusion_sweep(
    t_values: &[usize],
    gap_values: &[usize],
    scene: &SceneConfig,
    gap_start: usize,
    link_threshold: f64,
    mode: PropagationMode,
) -> Result<Vec<SweepCell>, SynthError> {
    if scene.objects.len() != 1 {
        return Err(SynthError::SweepNeedsOneObject(scene.objects.len()));
    }
    let video_len = scene.video.num_frames;
    for &gap in gap_values {
        let end = gap_start + gap - 1;
        if gap_start < 2 || gap == 0 || end + 1 > video_len {
            return Err(SynthError::GapOutOfRange {
                start: gap_start,
                end,
                video_len,
            });
        }
    }
    let generated = generate_scene(scene)?;

    let mut cells = Vec::with_capacity(t_values.len() * gap_values.len());
    for &half_window in t_values {
        for &gap in gap_values {
            let gap_end = gap_start + gap - 1;
            let model = DetectorModel {
                forced_miss_intervals: vec![ForcedMiss {
                    object: 0,
                    first_frame: gap_start,
                    last_frame: gap_end,
                }],
                ..DetectorModel::default()
            };
            let tracks = simulate_clip_tracks(
                &generated.ground_truth,
                &generated.visibility,
                &model,
                half_window,
                scene.video.categories,
                mode,
                scene.seed,
            )?;
            let state = assign_ids(&tracks, link_threshold, video_len)?;
            let linked = (1..=state.id_count()).any(|id| {
                let centers = state
                    .processed()
                    .iter()
                    .filter(|(_, a)| *a == id)
                    .map(|(t, _)| t.center_frame());
                let (mut before, mut after) = (false, false);
                for center in centers {
                    before |= center < gap_start;
                    after |= center > gap_end;
                }
                before && after
            });
            cells.push(SweepCell {
                half_window,
                gap,
                linked,
            });
        }
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simple_scene() -> SceneConfig {
        SceneConfig {
            video: VideoSpec {
                num_frames: 10,
                width: 12,
                height: 9,
                categories: 2,
            },
            objects: vec![ObjectSpec {
                category: 1,
                shape: ShapeSpec::Rect {
                    width: 2.0,
                    height: 2.0,
                },
                x0: 3.0,
                y0: 3.0,
                vx: 0.0,
                vy: 0.0,
            }],
            occluders: vec![],
            seed: 7,
        }
    }

    // ===== generate_scene =====

    #[test]
    fn static_rectangle_rasterizes_to_four_pixels() {
        let scene = generate_scene(&simple_scene()).unwrap();
        let masks = &scene.ground_truth.instances[0].masks;
        for t in 0..10 {
            let frame = masks.frame(t);
            assert_eq!(frame.foreground_area(), 4);
            // Centered at (3, 3): pixels (2..4) x (2..4).
            for (x, y) in [(2, 2), (3, 2), (2, 3), (3, 3)] {
                assert_eq!(frame.get(x, y), 1.0);
            }
        }
        assert!(scene.visibility[0].iter().all(|&v| v));
    }

    #[test]
    fn moving_rectangle_shifts_one_pixel_per_frame() {
        let mut config = simple_scene();
        config.objects[0].x0 = 2.5;
        config.objects[0].vx = 1.0;
        let scene = generate_scene(&config).unwrap();
        let masks = &scene.ground_truth.instances[0].masks;
        for t in 0..4 {
            let frame = masks.frame(t);
            // Center 2.5 + t covers columns [1.5 + t, 3.5 + t): pixels 1+t, 2+t.
            assert_eq!(frame.get(1 + t, 2), 1.0);
            assert_eq!(frame.get(2 + t, 2), 1.0);
            assert_eq!(frame.foreground_area(), 4);
        }
    }

    #[test]
    fn disk_rasterizes_to_discrete_disk() {
        let config = SceneConfig {
            video: VideoSpec {
                num_frames: 1,
                width: 9,
                height: 9,
                categories: 1,
            },
            objects: vec![ObjectSpec {
                category: 1,
                shape: ShapeSpec::Disk { radius: 2.0 },
                x0: 4.5,
                y0: 4.5,
                vx: 0.0,
                vy: 0.0,
            }],
            occluders: vec![],
            seed: 0,
        };
        let scene = generate_scene(&config).unwrap();
        // Pixel centers within distance 2 of (4.5, 4.5): the 13-pixel cross.
        assert_eq!(
            scene.ground_truth.instances[0]
                .masks
                .frame(0)
                .foreground_area(),
            13
        );
    }

    #[test]
    fn occluder_empties_covered_frames() {
        let mut config = simple_scene();
        config.occluders.push(Occluder {
            first_frame: 5,
            last_frame: 7,
            x: 0,
            y: 0,
            width: 12,
            height: 9,
        });
        let scene = generate_scene(&config).unwrap();
        let masks = &scene.ground_truth.instances[0].masks;
        for t in 1..=10usize {
            let hidden = (5..=7).contains(&t);
            assert_eq!(scene.visibility[0][t - 1], !hidden);
            assert_eq!(
                masks.frame(t - 1).foreground_area(),
                if hidden { 0 } else { 4 }
            );
        }
    }

    #[test]
    fn partial_occluder_keeps_object_visible() {
        let mut config = simple_scene();
        // Covers only column 2, half of the 2x2 object.
        config.occluders.push(Occluder {
            first_frame: 1,
            last_frame: 10,
            x: 2,
            y: 0,
            width: 1,
            height: 9,
        });
        let scene = generate_scene(&config).unwrap();
        assert!(scene.visibility[0].iter().all(|&v| v));
        assert_eq!(
            scene.ground_truth.instances[0]
                .masks
                .frame(0)
                .foreground_area(),
            2
        );
    }

    #[test]
    fn degenerate_shapes_are_rejected() {
        let mut config = simple_scene();
        config.objects[0].shape = ShapeSpec::Rect {
            width: 0.0,
            height: 2.0,
        };
        assert!(matches!(
            generate_scene(&config).unwrap_err(),
            SynthError::DegenerateShape(_)
        ));
        config.objects[0].shape = ShapeSpec::Disk { radius: -1.0 };
        assert!(matches!(
            generate_scene(&config).unwrap_err(),
            SynthError::DegenerateShape(_)
        ));
    }

    #[test]
    fn category_outside_range_is_rejected() {
        let mut config = simple_scene();
        config.objects[0].category = 3;
        assert_eq!(
            generate_scene(&config).unwrap_err(),
            SynthError::BadCategory {
                category: 3,
                categories: 2
            }
        );
    }

    // ===== simulate_clip_tracks =====

    fn noiseless(scene: &SceneConfig, half_window: usize) -> Vec<ClipInstanceTrack> {
        let generated = generate_scene(scene).unwrap();
        simulate_clip_tracks(
            &generated.ground_truth,
            &generated.visibility,
            &DetectorModel::default(),
            half_window,
            scene.video.categories,
            PropagationMode::Perfect,
            scene.seed,
        )
        .unwrap()
    }

    #[test]
    fn noiseless_tracks_copy_ground_truth() {
        let config = simple_scene();
        let generated = generate_scene(&config).unwrap();
        let tracks = noiseless(&config, 2);
        assert_eq!(tracks.len(), 10);
        for track in &tracks {
            assert_eq!(track.class_scores(), &[1.0, 0.0]);
            for f in track.start_frame()..=track.end_frame() {
                assert_eq!(
                    track.mask_at(f).unwrap(),
                    generated.ground_truth.instances[0].masks.frame(f - 1)
                );
            }
        }
    }

    #[test]
    fn certain_miss_probability_silences_the_detector() {
        let config = simple_scene();
        let generated = generate_scene(&config).unwrap();
        let model = DetectorModel {
            miss_probability: 1.0,
            ..DetectorModel::default()
        };
        let tracks = simulate_clip_tracks(
            &generated.ground_truth,
            &generated.visibility,
            &model,
            2,
            2,
            PropagationMode::Perfect,
            1,
        )
        .unwrap();
        assert!(tracks.is_empty());
    }

    #[test]
    fn forced_miss_cuts_detections_but_perfect_masks_remain() {
        let config = simple_scene();
        let generated = generate_scene(&config).unwrap();
        let model = DetectorModel {
            forced_miss_intervals: vec![ForcedMiss {
                object: 0,
                first_frame: 5,
                last_frame: 7,
            }],
            ..DetectorModel::default()
        };
        let tracks = simulate_clip_tracks(
            &generated.ground_truth,
            &generated.visibility,
            &model,
            2,
            2,
            PropagationMode::Perfect,
            1,
        )
        .unwrap();
        let centers: Vec<usize> = tracks.iter().map(|t| t.center_frame()).collect();
        assert_eq!(centers, vec![1, 2, 3, 4, 8, 9, 10]);
        // Perfect mode: the track centered at 4 still carries the ground
        // truth inside the gap.
        let bridge = tracks.iter().find(|t| t.center_frame() == 4).unwrap();
        assert_eq!(bridge.mask_at(6).unwrap().foreground_area(), 4);
    }

    #[test]
    fn strict_mode_zeroes_undetected_frames() {
        let config = simple_scene();
        let generated = generate_scene(&config).unwrap();
        let model = DetectorModel {
            forced_miss_intervals: vec![ForcedMiss {
                object: 0,
                first_frame: 5,
                last_frame: 7,
            }],
            ..DetectorModel::default()
        };
        let tracks = simulate_clip_tracks(
            &generated.ground_truth,
            &generated.visibility,
            &model,
            2,
            2,
            PropagationMode::Strict,
            1,
        )
        .unwrap();
        let bridge = tracks.iter().find(|t| t.center_frame() == 4).unwrap();
        assert_eq!(bridge.mask_at(6).unwrap().foreground_area(), 0);
        assert_eq!(bridge.mask_at(4).unwrap().foreground_area(), 4);
    }

    #[test]
    fn gap_of_three_bridges_with_half_window_two() {
        // Detections at 4 and 8 have spans [2,6] and [6,10]: they share
        // frame 6 and the object is linked across the gap.
        let mut config = simple_scene();
        config.video.num_frames = 11;
        let generated = generate_scene(&config).unwrap();
        let model = DetectorModel {
            forced_miss_intervals: vec![ForcedMiss {
                object: 0,
                first_frame: 5,
                last_frame: 7,
            }],
            ..DetectorModel::default()
        };
        let tracks = simulate_clip_tracks(
            &generated.ground_truth,
            &generated.visibility,
            &model,
            2,
            2,
            PropagationMode::Perfect,
            1,
        )
        .unwrap();
        let state = assign_ids(&tracks, 0.5, 11).unwrap();
        assert_eq!(state.id_count(), 1);
    }

    #[test]
    fn jitter_perturbs_masks_but_keeps_them_binary() {
        let config = simple_scene();
        let generated = generate_scene(&config).unwrap();
        let model = DetectorModel {
            boundary_jitter: 1,
            ..DetectorModel::default()
        };
        let tracks = simulate_clip_tracks(
            &generated.ground_truth,
            &generated.visibility,
            &model,
            2,
            2,
            PropagationMode::Perfect,
            123,
        )
        .unwrap();
        let mut any_differs = false;
        for track in &tracks {
            for f in track.start_frame()..=track.end_frame() {
                let mask = track.mask_at(f).unwrap();
                assert!(mask.is_binary());
                if mask != generated.ground_truth.instances[0].masks.frame(f - 1) {
                    any_differs = true;
                }
            }
        }
        assert!(any_differs, "seeded jitter should touch at least one frame");
    }

    #[test]
    fn score_noise_stays_in_range() {
        let config = simple_scene();
        let generated = generate_scene(&config).unwrap();
        let model = DetectorModel {
            score_noise: 0.3,
            ..DetectorModel::default()
        };
        let tracks = simulate_clip_tracks(
            &generated.ground_truth,
            &generated.visibility,
            &model,
            2,
            2,
            PropagationMode::Perfect,
            9,
        )
        .unwrap();
        let mut any_perturbed = false;
        for track in &tracks {
            for &s in track.class_scores() {
                assert!((0.0..=1.0).contains(&s));
            }
            if track.class_scores() != [1.0, 0.0] {
                any_perturbed = true;
            }
        }
        assert!(any_perturbed);
    }

    #[test]
    fn same_seed_reproduces_tracks_exactly() {
        let config = simple_scene();
        let generated = generate_scene(&config).unwrap();
        let model = DetectorModel {
            miss_probability: 0.2,
            boundary_jitter: 1,
            score_noise: 0.1,
            ..DetectorModel::default()
        };
        let run = || {
            simulate_clip_tracks(
                &generated.ground_truth,
                &generated.visibility,
                &model,
                3,
                2,
                PropagationMode::Perfect,
                77,
            )
            .unwrap()
        };
        assert_eq!(run(), run());
    }

    // ===== occlusion_sweep =====

    fn sweep_scene(video_len: usize) -> SceneConfig {
        SceneConfig {
            video: VideoSpec {
                num_frames: video_len,
                width: 12,
                height: 9,
                categories: 1,
            },
            objects: vec![ObjectSpec {
                category: 1,
                shape: ShapeSpec::Rect {
                    width: 3.0,
                    height: 3.0,
                },
                x0: 4.0,
                y0: 4.0,
                vx: 0.0,
                vy: 0.0,
            }],
            occluders: vec![],
            seed: 5,
        }
    }

    #[test]
    fn sweep_matches_overlap_law_spot_checks() {
        let scene = sweep_scene(32);
        let cells = occlusion_sweep(
            &[0, 3],
            &[2, 5, 6, 7],
            &scene,
            13,
            0.5,
            PropagationMode::Perfect,
        )
        .unwrap();
        for cell in cells {
            let expected = window_bridges_gap(cell.half_window, cell.gap);
            assert_eq!(
                cell.linked, expected,
                "T={} g={}",
                cell.half_window, cell.gap
            );
        }
        // The law itself: T = 3 bridges gaps up to 5 = 2T - 1 only.
        assert!(window_bridges_gap(3, 5));
        assert!(!window_bridges_gap(3, 6));
        assert!(!window_bridges_gap(0, 1));
    }

    #[test]
    fn sweep_validates_gap_placement() {
        let scene = sweep_scene(12);
        let err =
            occlusion_sweep(&[2], &[8], &scene, 10, 0.5, PropagationMode::Perfect).unwrap_err();
        assert_eq!(
            err,
            SynthError::GapOutOfRange {
                start: 10,
                end: 17,
                video_len: 12
            }
        );
    }
}
