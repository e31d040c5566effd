//! Clip-track matching and video-level instance identity.
//!
//! A clip-level track is one instance's masks over a window of `2T + 1`
//! frames centered on a detection frame (truncated at video boundaries).
//! Overlapping tracks are compared by the mean per-frame soft IoU over their
//! shared frames, and identities are assigned greedily in frame order:
//! tracks at frame 1 seed the identity set, every later track either joins
//! the best-scoring existing identity or founds a new one. Assembling the
//! per-identity masks frame by frame yields video-level instances.

use crate::mask::{soft_iou, MaskError, MaskGrid, MaskSequence};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LinkError {
    #[error("track center {center} outside video of {video_len} frames")]
    BadCenter { center: usize, video_len: usize },
    #[error(
        "track centered at {center} with half-window {half_window} must carry \
         {expected} masks for a {video_len}-frame video, got {got}"
    )]
    SpanMismatch {
        center: usize,
        half_window: usize,
        video_len: usize,
        expected: usize,
        got: usize,
    },
    #[error("class score {value} outside [0, 1]")]
    ScoreOutOfRange { value: f64 },
    #[error("class score vector must be nonempty")]
    EmptyScores,
    #[error("class score vectors disagree in length: {0} vs {1}")]
    ScoreLengthMismatch(usize, usize),
    #[error("tracks do not overlap")]
    NoOverlap,
    #[error("identity {0} does not exist in the assignment state")]
    UnknownId(usize),
    #[error("no processed track with identity {0} overlaps the candidate")]
    NoOverlappingTrack(usize),
    #[error("duplicate track key (center {0}, instance {1})")]
    DuplicateKey(usize, usize),
    #[error("track (center {0}, instance {1}) has no assigned identity")]
    Unassigned(usize, usize),
    #[error("cannot score an empty member list")]
    EmptyMembers,
    #[error(transparent)]
    Mask(#[from] MaskError),
}

/// Frame interval `[max(1, center - T), min(video_len, center + T)]` covered
/// by a clip centered at `center`, 1-based inclusive.
pub fn clip_span(center: usize, half_window: usize, video_len: usize) -> (usize, usize) {
    let start = center.saturating_sub(half_window).max(1);
    let end = (center + half_window).min(video_len);
    (start, end)
}

/// Shared frames of two clips, or `None` when the centers are at least
/// `2T + 1` frames apart. Boundary truncation never empties an overlap that
/// the center distance allows.
pub fn overlap_interval(
    t: usize,
    t_prime: usize,
    half_window: usize,
    video_len: usize,
) -> Option<(usize, usize)> {
    let (a_start, a_end) = clip_span(t, half_window, video_len);
    let (b_start, b_end) = clip_span(t_prime, half_window, video_len);
    let start = a_start.max(b_start);
    let end = a_end.min(b_end);
    (start <= end).then_some((start, end))
}

/// One instance's masks over a clip window, plus its per-category detection
/// scores. `center_frame` is 1-based; `instance_index` is the detection's
/// position within its own clip and pairs with `center_frame` as a key.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipInstanceTrack {
    center_frame: usize,
    half_window: usize,
    instance_index: usize,
    masks: MaskSequence,
    class_scores: Vec<f64>,
}

impl ClipInstanceTrack {
    /// Builds a track, validating that `masks` covers exactly the clip span
    /// implied by `center_frame`, `half_window`, and `video_len`.
    pub fn new(
        center_frame: usize,
        half_window: usize,
        video_len: usize,
        masks: MaskSequence,
        class_scores: Vec<f64>,
        instance_index: usize,
    ) -> Result<Self, LinkError> {
        if center_frame == 0 || center_frame > video_len {
            return Err(LinkError::BadCenter {
                center: center_frame,
                video_len,
            });
        }
        let (start, end) = clip_span(center_frame, half_window, video_len);
        let expected = end - start + 1;
        if masks.len() != expected {
            return Err(LinkError::SpanMismatch {
                center: center_frame,
                half_window,
                video_len,
                expected,
                got: masks.len(),
            });
        }
        if class_scores.is_empty() {
            return Err(LinkError::EmptyScores);
        }
        if let Some(&value) = class_scores.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(LinkError::ScoreOutOfRange { value });
        }
        Ok(ClipInstanceTrack {
            center_frame,
            half_window,
            instance_index,
            masks,
            class_scores,
        })
    }

    pub fn center_frame(&self) -> usize {
        self.center_frame
    }

    pub fn half_window(&self) -> usize {
        self.half_window
    }

    pub fn instance_index(&self) -> usize {
        self.instance_index
    }

    pub fn masks(&self) -> &MaskSequence {
        &self.masks
    }

    pub fn class_scores(&self) -> &[f64] {
        &self.class_scores
    }

    /// First frame covered; independent of video length because only the
    /// lower bound clamps at 1.
    pub fn start_frame(&self) -> usize {
        self.center_frame.saturating_sub(self.half_window).max(1)
    }

    /// Last frame covered.
    pub fn end_frame(&self) -> usize {
        self.start_frame() + self.masks.len() - 1
    }

    /// Mask at a global 1-based frame index, if covered.
    pub fn mask_at(&self, frame: usize) -> Option<&MaskGrid> {
        (self.start_frame()..=self.end_frame())
            .contains(&frame)
            .then(|| self.masks.frame(frame - self.start_frame()))
    }

    fn overlap(&self, other: &ClipInstanceTrack) -> Option<(usize, usize)> {
        let start = self.start_frame().max(other.start_frame());
        let end = self.end_frame().min(other.end_frame());
        (start <= end).then_some((start, end))
    }

    fn key(&self) -> (usize, usize) {
        (self.center_frame, self.instance_index)
    }
}

/// Mean per-frame soft IoU over the frames both tracks cover. Errors when
/// the tracks share no frames. Frames where both masks are empty score 1.0
/// (agreement on absence), so an object that hides and reappears inside both
/// windows still matches strongly.
pub fn match_score(a: &ClipInstanceTrack, b: &ClipInstanceTrack) -> Result<f64, LinkError> {
    let (start, end) = a.overlap(b).ok_or(LinkError::NoOverlap)?;
    let mut sum = 0.0;
    for frame in start..=end {
        let ma = a.mask_at(frame).expect("frame inside own span");
        let mb = b.mask_at(frame).expect("frame inside own span");
        sum += soft_iou(ma, mb)?;
    }
    Ok(sum / (end - start + 1) as f64)
}

/// Identity bookkeeping produced by [`assign_ids`]: the number of identities
/// minted so far, the `(center_frame, instance_index) -> identity` map, and
/// the processed tracks retained for scoring later candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct IdAssignmentState {
    id_count: usize,
    assignments: BTreeMap<(usize, usize), usize>,
    processed: Vec<(ClipInstanceTrack, usize)>,
}

impl IdAssignmentState {
    fn new() -> Self {
        IdAssignmentState {
            id_count: 0,
            assignments: BTreeMap::new(),
            processed: Vec::new(),
        }
    }

    /// Identities are contiguous `1..=id_count()`.
    pub fn id_count(&self) -> usize {
        self.id_count
    }

    /// Identity assigned to the track keyed by `(center_frame, instance_index)`.
    pub fn assignment(&self, center_frame: usize, instance_index: usize) -> Option<usize> {
        self.assignments
            .get(&(center_frame, instance_index))
            .copied()
    }

    /// All assignments in key order.
    pub fn assignments(&self) -> impl Iterator<Item = ((usize, usize), usize)> + '_ {
        self.assignments.iter().map(|(&k, &v)| (k, v))
    }

    /// Tracks in processing order with their assigned identities.
    pub fn processed(&self) -> &[(ClipInstanceTrack, usize)] {
        &self.processed
    }

    fn mint(&mut self) -> usize {
        self.id_count += 1;
        self.id_count
    }

    fn record(&mut self, track: &ClipInstanceTrack, id: usize) {
        self.assignments.insert(track.key(), id);
        self.processed.push((track.clone(), id));
    }

    /// Mean match score between `candidate` and the overlapping processed
    /// tracks assigned identity `id`, or `None` when no processed track with
    /// that identity overlaps the candidate.
    fn score_against(
        &self,
        candidate: &ClipInstanceTrack,
        id: usize,
    ) -> Result<Option<f64>, LinkError> {
        let mut sum = 0.0;
        let mut count = 0usize;
        for (track, assigned) in &self.processed {
            if *assigned == id && candidate.overlap(track).is_some() {
                sum += match_score(candidate, track)?;
                count += 1;
            }
        }
        Ok((count > 0).then(|| sum / count as f64))
    }
}

/// Mean match score between `candidate` and the overlapping processed tracks
/// carrying identity `id`. Errors when the identity does not exist or no
/// track with that identity overlaps the candidate.
pub fn id_score(
    candidate: &ClipInstanceTrack,
    id: usize,
    state: &IdAssignmentState,
) -> Result<f64, LinkError> {
    if id == 0 || id > state.id_count {
        return Err(LinkError::UnknownId(id));
    }
    state
        .score_against(candidate, id)?
        .ok_or(LinkError::NoOverlappingTrack(id))
}

/// Assigns video-level identities to clip tracks.
///
/// Tracks are processed by ascending `(center_frame, instance_index)`
/// regardless of input order. Frame-1 tracks seed the identity set with
/// fresh identities `1..=N_1`. Every later track takes the identity with the
/// highest id score when that score strictly exceeds `threshold` (ties break
/// to the smallest identity); otherwise it founds identity `id_count + 1`.
pub fn assign_ids(
    tracks: &[ClipInstanceTrack],
    threshold: f64,
    video_len: usize,
) -> Result<IdAssignmentState, LinkError> {
    for track in tracks {
        if track.center_frame > video_len || track.end_frame() > video_len {
            return Err(LinkError::BadCenter {
                center: track.center_frame,
                video_len,
            });
        }
    }
    let mut order: Vec<&ClipInstanceTrack> = tracks.iter().collect();
    order.sort_by_key(|t| t.key());
    for pair in order.windows(2) {
        if pair[0].key() == pair[1].key() {
            let (center, index) = pair[0].key();
            return Err(LinkError::DuplicateKey(center, index));
        }
    }

    let mut state = IdAssignmentState::new();
    for track in order {
        let id = if track.center_frame == 1 {
            state.mint()
        } else {
            let mut best: Option<(f64, usize)> = None;
            for id in 1..=state.id_count {
                if let Some(q) = state.score_against(track, id)? {
                    // Strict improvement keeps the smallest identity on ties.
                    if best.is_none_or(|(bq, _)| q > bq) {
                        best = Some((q, id));
                    }
                }
            }
            match best {
                Some((q, id)) if q > threshold => id,
                _ => state.mint(),
            }
        };
        state.record(track, id);
    }
    Ok(state)
}

/// One video-level instance: an identity's mask for every frame of the
/// video, with the category and confidence pooled from its member tracks.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoInstance {
    pub id: usize,
    pub category: usize,
    pub confidence: f64,
    pub masks: MaskSequence,
}

/// Category and confidence for a set of member tracks: class score vectors
/// are averaged elementwise, the category is the 1-based argmax (ties break
/// to the smallest index), and the confidence is the winning mean score.
pub fn score_sequence<'a>(
    members: impl IntoIterator<Item = &'a ClipInstanceTrack>,
) -> Result<(usize, f64), LinkError> {
    let mut mean: Vec<f64> = Vec::new();
    let mut count = 0usize;
    for track in members {
        if count == 0 {
            mean = track.class_scores.clone();
        } else {
            if track.class_scores.len() != mean.len() {
                return Err(LinkError::ScoreLengthMismatch(
                    mean.len(),
                    track.class_scores.len(),
                ));
            }
            for (m, s) in mean.iter_mut().zip(&track.class_scores) {
                *m += s;
            }
        }
        count += 1;
    }
    if count == 0 {
        return Err(LinkError::EmptyMembers);
    }
    for m in &mut mean {
        *m /= count as f64;
    }
    let mut best = 0usize;
    for (i, &v) in mean.iter().enumerate() {
        if v > mean[best] {
            best = i;
        }
    }
    Ok((best + 1, mean[best]))
}

/// Stitches per-identity video masks from assigned clip tracks.
///
/// For every identity and frame, the mask comes from the member track whose
/// center is nearest the frame; ties prefer the smaller center, then the
/// smaller instance index. Frames no member covers get an all-zero mask.
/// Returns instances ordered by identity; an empty track list yields an
/// empty result.
pub fn assemble_video(
    tracks: &[ClipInstanceTrack],
    state: &IdAssignmentState,
    video_len: usize,
) -> Result<Vec<VideoInstance>, LinkError> {
    if tracks.is_empty() {
        return Ok(Vec::new());
    }
    let mut members: BTreeMap<usize, Vec<&ClipInstanceTrack>> = BTreeMap::new();
    for track in tracks {
        let id = state
            .assignment(track.center_frame, track.instance_index)
            .ok_or(LinkError::Unassigned(
                track.center_frame,
                track.instance_index,
            ))?;
        members.entry(id).or_default().push(track);
    }
    let shape = tracks[0].masks.frame(0);
    let (width, height) = (shape.width(), shape.height());

    let mut instances = Vec::with_capacity(members.len());
    for (id, mut group) in members {
        group.sort_by_key(|t| t.key());
        let mut frames = Vec::with_capacity(video_len);
        for frame in 1..=video_len {
            let winner = group
                .iter()
                .filter(|t| t.mask_at(frame).is_some())
                .min_by_key(|t| {
                    let distance = t.center_frame.abs_diff(frame);
                    (distance, t.center_frame, t.instance_index)
                });
            frames.push(match winner {
                Some(track) => track.mask_at(frame).expect("winner covers frame").clone(),
                None => MaskGrid::zeros(width, height),
            });
        }
        let (category, confidence) = score_sequence(group.iter().copied())?;
        instances.push(VideoInstance {
            id,
            category,
            confidence,
            masks: MaskSequence::new(frames)?,
        });
    }
    Ok(instances)
}
