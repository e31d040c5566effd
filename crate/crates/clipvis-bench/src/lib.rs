//! Fixture builders shared by the pipeline benchmarks: deterministic masks,
//! feature tensors, a ready-to-run propagation clip, and a fully tracked
//! synthetic scene.

use clipvis_core::{
    generate_scene, simulate_clip_tracks, ClipInstanceTrack, ClipWindow, DetectorModel,
    FeatureTensor, MaskGrid, MaskSequence, ObjectSpec, PropagationConfig, PropagationMode,
    PropagationParams, Rng64, SceneConfig, ShapeSpec, VideoGroundTruth, VideoSpec,
};

/// Dense soft mask with values drawn uniformly from `[0, 1)`.
pub fn soft_mask(seed: u64, width: usize, height: usize) -> MaskGrid {
    let mut rng = Rng64::new(seed);
    MaskGrid::from_fn(width, height, |_, _| rng.next_f64()).expect("nonzero dims")
}

/// Binary vertical stripes of the given period, a worst-ish case for the
/// run-length codec.
pub fn striped_mask(width: usize, height: usize, period: usize) -> MaskGrid {
    MaskGrid::from_fn(width, height, |x, _| {
        if (x / period).is_multiple_of(2) {
            1.0
        } else {
            0.0
        }
    })
    .expect("nonzero dims")
}

/// Binary mask sequence with a fresh density per frame.
pub fn mask_sequence(seed: u64, frames: usize, width: usize, height: usize) -> MaskSequence {
    let mut rng = Rng64::new(seed);
    let grids = (0..frames)
        .map(|_| {
            let density = rng.next_f64();
            MaskGrid::from_fn(width, height, |_, _| {
                if rng.next_bool(density) {
                    1.0
                } else {
                    0.0
                }
            })
            .expect("nonzero dims")
        })
        .collect();
    MaskSequence::new(grids).expect("same shapes")
}

/// Feature tensor with values drawn uniformly from `[-1, 1)`.
pub fn feature_tensor(seed: u64, channels: usize, width: usize, height: usize) -> FeatureTensor {
    let mut rng = Rng64::new(seed);
    FeatureTensor::from_fn(channels, width, height, |_, _, _| rng.next_in(-1.0, 1.0))
        .expect("nonzero dims")
}

/// A small clip ready for the full propagation branch: per-frame features,
/// two center-frame instances with class scores, and seeded parameters.
pub fn toy_clip() -> (
    Vec<FeatureTensor>,
    Vec<MaskGrid>,
    Vec<Vec<f64>>,
    ClipWindow,
    PropagationParams,
) {
    let window = ClipWindow {
        center_frame: 3,
        half_window: 2,
        video_len: 24,
    };
    let features: Vec<FeatureTensor> = (0..window.len())
        .map(|i| feature_tensor(100 + i as u64, 8, 24, 16))
        .collect();
    let masks = vec![
        MaskGrid::from_fn(24, 16, |x, y| if x < 8 && y < 8 { 1.0 } else { 0.0 })
            .expect("nonzero dims"),
        MaskGrid::from_fn(24, 16, |x, y| if x >= 14 && y >= 6 { 1.0 } else { 0.0 })
            .expect("nonzero dims"),
    ];
    let scores = vec![vec![0.9, 0.1], vec![0.2, 0.8]];
    let params = PropagationParams::seeded(&PropagationConfig::toy(8), 7).expect("valid config");
    (features, masks, scores, window, params)
}

/// Seventy-two clip tracks (three objects, 24 frames) from a clean synthetic
/// scene, plus the matching ground truth.
pub fn tracked_scene() -> (Vec<ClipInstanceTrack>, VideoGroundTruth) {
    let rect = |width, height| ShapeSpec::Rect { width, height };
    let scene = SceneConfig {
        video: VideoSpec {
            num_frames: 24,
            width: 32,
            height: 18,
            categories: 3,
        },
        objects: vec![
            ObjectSpec {
                category: 1,
                shape: rect(4.0, 4.0),
                x0: 6.0,
                y0: 3.0,
                vx: 0.5,
                vy: 0.0,
            },
            ObjectSpec {
                category: 2,
                shape: rect(4.0, 4.0),
                x0: 16.0,
                y0: 9.0,
                vx: 0.0,
                vy: 0.0,
            },
            ObjectSpec {
                category: 3,
                shape: rect(4.0, 4.0),
                x0: 26.0,
                y0: 15.0,
                vx: -0.5,
                vy: 0.0,
            },
        ],
        occluders: Vec::new(),
        seed: 11,
    };
    let generated = generate_scene(&scene).expect("valid scene");
    let tracks = simulate_clip_tracks(
        &generated.ground_truth,
        &generated.visibility,
        &DetectorModel::default(),
        6,
        3,
        PropagationMode::Perfect,
        scene.seed,
    )
    .expect("valid detector model");
    (tracks, generated.ground_truth)
}
