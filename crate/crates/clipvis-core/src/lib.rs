//! Clip-level mask propagation for video instance segmentation, at toy
//! scale and in plain `f64`.
//!
//! The pipeline mirrors a clip-and-stitch tracker:
//!
//! * [`mask`]: soft masks, the soft-IoU overlap family, the pooled video
//!   IoU, and the propagation loss.
//! * [`propagation`]: the forward propagation branch that warps instance
//!   features across a clip with a deformable convolution and decodes them
//!   into per-frame masks.
//! * [`linker`]: clip-track match scores, greedy video-level identity
//!   assignment, and assembly of per-identity video masks.
//! * [`metrics`]: video-IoU detection metrics (mAP, AP75, AR@1, AR@10).
//! * [`synth`]: deterministic synthetic scenes and a simulated detector for
//!   end-to-end experiments.
//! * [`rng`]: the portable seeded generator behind every randomized path.
//!
//! Everything is deterministic: fixed iteration orders, explicit seeds, and
//! no platform entropy.

pub mod linker;
pub mod mask;
pub mod metrics;
pub mod propagation;
pub mod rng;
pub mod synth;

pub use linker::{
    assemble_video, assign_ids, clip_span, id_score, match_score, overlap_interval, score_sequence,
    ClipInstanceTrack, IdAssignmentState, LinkError, VideoInstance,
};
pub use mask::{
    prop_loss, soft_iou, soft_iou_grad, video_iou, GradientGrid, MaskError, MaskGrid, MaskSequence,
    VideoSpec, BINARY_THRESHOLD,
};
pub use metrics::{
    average_precision, evaluate, iou_thresholds, match_at_threshold, CategoryReport, EvalReport,
    GroundTruthSet, GtInstance, MetricsError, PredictionSet, ThresholdReport, VideoGroundTruth,
};
pub use propagation::{
    conv2d, deformable_conv, instance_features, predict_offsets, propagate_clip,
    segment_propagated, ClipWindow, ConvParams, FeatureTensor, OffsetField, PropagationConfig,
    PropagationError, PropagationParams,
};
pub use rng::Rng64;
pub use synth::{
    generate_scene, occlusion_sweep, simulate_clip_tracks, window_bridges_gap, DetectorModel,
    ForcedMiss, GeneratedScene, ObjectSpec, Occluder, PropagationMode, SceneConfig, ShapeSpec,
    SweepCell, SynthError,
};
