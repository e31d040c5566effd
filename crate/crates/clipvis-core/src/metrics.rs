//! Video-level detection metrics over mask tracks.
//!
//! Predictions and ground truth are compared by video IoU (pixel counts
//! pooled over frames, see [`crate::mask::video_iou`]). Within each category
//! and IoU threshold, predictions are ranked by confidence and greedily
//! matched to the best still-unmatched ground-truth instance of the same
//! video. Average precision integrates the enveloped precision-recall curve;
//! headline numbers average over the ten thresholds 0.50:0.05:0.95 and then
//! over categories that have at least one ground-truth instance.

use crate::linker::VideoInstance;
use crate::mask::{video_iou, MaskError, MaskSequence};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("video-set mismatch: {0} predicted videos vs {1} ground-truth videos")]
    VideoCountMismatch(usize, usize),
    #[error(transparent)]
    Mask(#[from] MaskError),
}

/// One annotated instance: its category and a mask for every video frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GtInstance {
    pub category: usize,
    pub masks: MaskSequence,
}

/// Ground truth for one video.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VideoGroundTruth {
    pub instances: Vec<GtInstance>,
}

/// Ground truth for an evaluation run; videos pair with [`PredictionSet`]
/// videos by position.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruthSet {
    pub videos: Vec<VideoGroundTruth>,
}

/// Predicted instances per video, aligned with a [`GroundTruthSet`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictionSet {
    pub videos: Vec<Vec<VideoInstance>>,
}

/// The ten evaluation thresholds 0.50, 0.55, ..., 0.95.
pub fn iou_thresholds() -> [f64; 10] {
    std::array::from_fn(|i| (50 + 5 * i) as f64 / 100.0)
}

/// Per-category average precision, averaged over the ten thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryReport {
    pub category: usize,
    pub ap: f64,
}

/// Mean average precision over categories at one threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdReport {
    pub threshold: f64,
    pub mean_ap: f64,
}

/// Evaluation summary. All values are fractions in `[0, 1]`; presentation
/// layers conventionally report them scaled by 100.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub mean_ap: f64,
    pub ap75: f64,
    pub ar1: f64,
    pub ar10: f64,
    pub per_category: Vec<CategoryReport>,
    pub per_threshold: Vec<ThresholdReport>,
}

/// A prediction's place in the global confidence ranking for one category:
/// which video it belongs to plus its IoU against every same-category
/// ground-truth instance of that video.
struct RankedPrediction {
    video: usize,
    ious: Vec<f64>,
}

/// Ground-truth bookkeeping and ranked predictions for one category.
struct CategoryPairs {
    /// Per video, the number of ground-truth instances of the category.
    gt_counts: Vec<usize>,
    /// Predictions sorted by descending confidence; ties keep input order
    /// (videos in order, then each video's instance list order).
    ranked: Vec<RankedPrediction>,
}

impl CategoryPairs {
    fn build(
        predictions: &PredictionSet,
        ground_truth: &GroundTruthSet,
        category: usize,
    ) -> Result<Self, MetricsError> {
        let mut gt_counts = Vec::with_capacity(ground_truth.videos.len());
        let mut gt_masks: Vec<Vec<&MaskSequence>> = Vec::with_capacity(ground_truth.videos.len());
        for video in &ground_truth.videos {
            let masks: Vec<&MaskSequence> = video
                .instances
                .iter()
                .filter(|gt| gt.category == category)
                .map(|gt| &gt.masks)
                .collect();
            gt_counts.push(masks.len());
            gt_masks.push(masks);
        }

        let mut entries: Vec<(f64, RankedPrediction)> = Vec::new();
        for (video_idx, video) in predictions.videos.iter().enumerate() {
            for pred in video.iter().filter(|p| p.category == category) {
                let ious = gt_masks[video_idx]
                    .iter()
                    .map(|gt| video_iou(&pred.masks, gt))
                    .collect::<Result<Vec<f64>, MaskError>>()?;
                entries.push((
                    pred.confidence,
                    RankedPrediction {
                        video: video_idx,
                        ious,
                    },
                ));
            }
        }
        entries.sort_by(|a, b| b.0.total_cmp(&a.0));
        Ok(CategoryPairs {
            gt_counts,
            ranked: entries.into_iter().map(|(_, p)| p).collect(),
        })
    }

    fn num_gt(&self) -> usize {
        self.gt_counts.iter().sum()
    }

    /// Greedy matching at one threshold: in rank order, each prediction
    /// takes the unmatched same-video ground truth with the highest IoU at
    /// or above the threshold (earliest index on ties); everything else is a
    /// false positive.
    fn match_flags(&self, threshold: f64) -> Vec<bool> {
        let mut taken: Vec<Vec<bool>> = self.gt_counts.iter().map(|&n| vec![false; n]).collect();
        let mut flags = Vec::with_capacity(self.ranked.len());
        for pred in &self.ranked {
            let mut best: Option<(f64, usize)> = None;
            for (gt_idx, &iou) in pred.ious.iter().enumerate() {
                if taken[pred.video][gt_idx] || iou < threshold {
                    continue;
                }
                if best.is_none_or(|(best_iou, _)| iou > best_iou) {
                    best = Some((iou, gt_idx));
                }
            }
            match best {
                Some((_, gt_idx)) => {
                    taken[pred.video][gt_idx] = true;
                    flags.push(true);
                }
                None => flags.push(false),
            }
        }
        flags
    }
}

/// Greedy confidence-ranked matching of one category at one IoU threshold.
/// Returns the true/false-positive flag per prediction in rank order and the
/// number of ground-truth instances of the category.
pub fn match_at_threshold(
    predictions: &PredictionSet,
    ground_truth: &GroundTruthSet,
    category: usize,
    threshold: f64,
) -> Result<(Vec<bool>, usize), MetricsError> {
    if predictions.videos.len() != ground_truth.videos.len() {
        return Err(MetricsError::VideoCountMismatch(
            predictions.videos.len(),
            ground_truth.videos.len(),
        ));
    }
    let pairs = CategoryPairs::build(predictions, ground_truth, category)?;
    Ok((pairs.match_flags(threshold), pairs.num_gt()))
}

/// All-point-interpolated average precision from ranked match flags.
///
/// Precision at each rank is replaced by its envelope (the maximum precision
/// at any equal-or-later rank) and summed at the true-positive ranks, each
/// contributing a `1 / num_gt` recall step. Returns `None` when there is
/// nothing to score (no ground truth and no predictions); a category with no
/// ground truth but spurious predictions scores `0.0`.
pub fn average_precision(flags: &[bool], num_gt: usize) -> Option<f64> {
    if num_gt == 0 {
        return if flags.is_empty() { None } else { Some(0.0) };
    }
    let mut precisions = Vec::with_capacity(flags.len());
    let mut true_positives = 0usize;
    for (rank, &is_tp) in flags.iter().enumerate() {
        if is_tp {
            true_positives += 1;
        }
        precisions.push(true_positives as f64 / (rank + 1) as f64);
    }
    // Envelope: running maximum from the right.
    let mut best = 0.0f64;
    for p in precisions.iter_mut().rev() {
        best = best.max(*p);
        *p = best;
    }
    let mut ap = 0.0;
    for (rank, &is_tp) in flags.iter().enumerate() {
        if is_tp {
            ap += precisions[rank] / num_gt as f64;
        }
    }
    Some(ap)
}

/// Keeps each video's `k` highest-confidence predictions across categories
/// (ties keep input order), for the recall limits AR@1 and AR@10.
fn cap_predictions(predictions: &PredictionSet, k: usize) -> PredictionSet {
    let videos = predictions
        .videos
        .iter()
        .map(|video| {
            let mut order: Vec<usize> = (0..video.len()).collect();
            order.sort_by(|&a, &b| video[b].confidence.total_cmp(&video[a].confidence));
            order.truncate(k);
            order.sort_unstable(); // restore input order among the survivors
            order.iter().map(|&i| video[i].clone()).collect()
        })
        .collect();
    PredictionSet { videos }
}

/// Full evaluation: mean AP over thresholds and categories, AP at threshold
/// 0.75, and recall under the 1- and 10-prediction budgets. Categories
/// without ground truth are excluded from every mean; with no annotated
/// category at all, every metric is `0.0`.
pub fn evaluate(
    predictions: &PredictionSet,
    ground_truth: &GroundTruthSet,
) -> Result<EvalReport, MetricsError> {
    if predictions.videos.len() != ground_truth.videos.len() {
        return Err(MetricsError::VideoCountMismatch(
            predictions.videos.len(),
            ground_truth.videos.len(),
        ));
    }
    let categories: BTreeSet<usize> = ground_truth
        .videos
        .iter()
        .flat_map(|v| v.instances.iter().map(|gt| gt.category))
        .collect();
    let thresholds = iou_thresholds();

    if categories.is_empty() {
        return Ok(EvalReport {
            mean_ap: 0.0,
            ap75: 0.0,
            ar1: 0.0,
            ar10: 0.0,
            per_category: Vec::new(),
            per_threshold: thresholds
                .iter()
                .map(|&t| ThresholdReport {
                    threshold: t,
                    mean_ap: 0.0,
                })
                .collect(),
        });
    }

    let capped1 = cap_predictions(predictions, 1);
    let capped10 = cap_predictions(predictions, 10);

    let mut mean_ap = 0.0;
    let mut ap75 = 0.0;
    let mut ar1 = 0.0;
    let mut ar10 = 0.0;
    let mut per_category = Vec::with_capacity(categories.len());
    let mut threshold_sums = [0.0f64; 10];

    for &category in &categories {
        let pairs = CategoryPairs::build(predictions, ground_truth, category)?;
        let num_gt = pairs.num_gt();
        debug_assert!(num_gt > 0, "categories are drawn from ground truth");

        let mut category_ap = 0.0;
        for (i, &threshold) in thresholds.iter().enumerate() {
            let flags = pairs.match_flags(threshold);
            let ap =
                average_precision(&flags, num_gt).expect("num_gt > 0 always yields a defined AP");
            category_ap += ap;
            threshold_sums[i] += ap;
            if threshold == 0.75 {
                ap75 += ap;
            }
        }
        category_ap /= thresholds.len() as f64;
        per_category.push(CategoryReport {
            category,
            ap: category_ap,
        });
        mean_ap += category_ap;

        for (capped, target) in [(&capped1, &mut ar1), (&capped10, &mut ar10)] {
            let pairs = CategoryPairs::build(capped, ground_truth, category)?;
            let mut recall_sum = 0.0;
            for &threshold in &thresholds {
                let tp = pairs.match_flags(threshold).iter().filter(|&&f| f).count();
                recall_sum += tp as f64 / num_gt as f64;
            }
            *target += recall_sum / thresholds.len() as f64;
        }
    }

    let n = categories.len() as f64;
    Ok(EvalReport {
        mean_ap: mean_ap / n,
        ap75: ap75 / n,
        ar1: ar1 / n,
        ar10: ar10 / n,
        per_category,
        per_threshold: thresholds
            .iter()
            .zip(threshold_sums)
            .map(|(&threshold, sum)| ThresholdReport {
                threshold,
                mean_ap: sum / n,
            })
            .collect(),
    })
}
