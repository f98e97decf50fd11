//! Temporal consistency cue: tracklet boxes with no matching detection in
//! their frame become hypotheses for missed objects.
//!
//! Also hosts the baseline tracker used by the synthetic harness, a greedy
//! IoU-association tracker with constant-velocity coasting. Real runs are
//! expected to ingest tracklets from an external multi-object tracker; the
//! tracklet file must include the tracker's predicted boxes on frames
//! without an associated detection, since those are exactly the boxes the
//! cue inspects.

use std::fmt;
use std::str::FromStr;

use crate::geometry::{iou, BBox, ScoredBox};
use crate::assignment::match_boxes;

/// Overlap required to consider a tracklet or hypothesis explained by a
/// detection. Shared by both cues and by ground-truth labeling.
pub const MATCH_IOU: f64 = 0.5;

/// Which consistency signal produced a hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Cue {
    Temporal,
    Stereo,
}

impl Cue {
    pub fn as_str(&self) -> &'static str {
        match self {
            Cue::Temporal => "temporal",
            Cue::Stereo => "stereo",
        }
    }
}

impl fmt::Display for Cue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Cue {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "temporal" => Ok(Cue::Temporal),
            "stereo" => Ok(Cue::Stereo),
            other => Err(format!("unknown cue {other:?}, expected temporal or stereo")),
        }
    }
}

/// A candidate missed object proposed by one cue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hypothesis {
    /// Proposed object location, copied verbatim from the source box.
    pub bbox: BBox,
    /// Confidence inherited from the source: tracklet confidence for the
    /// temporal cue, right-detection confidence for the stereo cue.
    pub confidence: f64,
    pub cue: Cue,
    pub frame: usize,
    /// Frames since the source track was born, coasted frames included.
    /// Always 0 for stereo hypotheses.
    pub track_length: u64,
    /// Track id (temporal) or right-detection index (stereo).
    pub source_id: u64,
}

/// One tracklet box on one frame, as read from a tracklet file or emitted
/// by the baseline tracker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackletBox {
    pub track_id: u64,
    pub bbox: BBox,
    pub confidence: f64,
    pub frame: usize,
    /// Frames since this track first appeared, inclusive of the current one.
    pub track_length: u64,
}

/// Propose hypotheses for one frame: every tracklet box left unmatched
/// after one-to-one matching against the detections of that frame.
///
/// Detections below `conf_threshold` are discarded before matching, which
/// mirrors operating the detector at that threshold. Matching requires at
/// least [`MATCH_IOU`] overlap; an unmatched tracklet box is emitted
/// verbatim with its confidence and accumulated track length.
pub fn generate_temporal_hypotheses(
    tracklets: &[TrackletBox],
    detections: &[ScoredBox],
    conf_threshold: f64,
) -> Vec<Hypothesis> {
    let kept: Vec<&ScoredBox> = detections
        .iter()
        .filter(|d| d.confidence >= conf_threshold)
        .collect();
    let t_boxes: Vec<BBox> = tracklets.iter().map(|t| t.bbox).collect();
    let d_boxes: Vec<BBox> = kept.iter().map(|d| d.bbox).collect();
    let matched = match_boxes(&t_boxes, &d_boxes, MATCH_IOU);
    matched
        .unmatched_a
        .into_iter()
        .map(|i| {
            let t = &tracklets[i];
            Hypothesis {
                bbox: t.bbox,
                confidence: t.confidence,
                cue: Cue::Temporal,
                frame: t.frame,
                track_length: t.track_length,
                source_id: t.track_id,
            }
        })
        .collect()
}

/// Baseline tracker parameters.
#[derive(Debug, Clone, Copy)]
pub struct TrackerConfig {
    /// Minimum IoU between a predicted track box and a detection for
    /// greedy association.
    pub iou_gate: f64,
    /// Frames a track may survive without a detection before termination.
    pub max_coast: usize,
    /// Per-coasted-frame multiplier on the last associated confidence.
    pub coast_decay: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            iou_gate: 0.3,
            max_coast: 5,
            coast_decay: 0.9,
        }
    }
}

#[derive(Debug, Clone)]
struct ActiveTrack {
    id: u64,
    bbox: BBox,
    velocity: (f64, f64),
    last_det_confidence: f64,
    coasted: usize,
    birth_frame: usize,
}

/// Greedy IoU-association tracker with constant-velocity coasting.
///
/// Feed frames in order through [`BaselineTracker::step`], including frames
/// with no detections so unmatched tracks coast. Detections are associated
/// to the track whose extrapolated box they overlap most, highest IoU
/// first; leftovers start new tracks. An unmatched track keeps moving at
/// its last observed center velocity for up to `max_coast` frames, its
/// confidence decaying geometrically, then terminates.
#[derive(Debug)]
pub struct BaselineTracker {
    config: TrackerConfig,
    tracks: Vec<ActiveTrack>,
    next_id: u64,
}

impl BaselineTracker {
    pub fn new(config: TrackerConfig) -> Self {
        BaselineTracker {
            config,
            tracks: Vec::new(),
            next_id: 0,
        }
    }

    /// Advance one frame and return the live tracklet boxes for it.
    pub fn step(&mut self, frame: usize, detections: &[ScoredBox]) -> Vec<TrackletBox> {
        let predicted: Vec<BBox> = self
            .tracks
            .iter()
            .map(|t| t.bbox.shifted_x(t.velocity.0).shifted_y(t.velocity.1))
            .collect();

        // Greedy association, highest IoU first; ties fall back to track
        // and detection order so runs are reproducible.
        let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
        for (ti, pbox) in predicted.iter().enumerate() {
            for (di, det) in detections.iter().enumerate() {
                let ov = iou(pbox, &det.bbox);
                if ov >= self.config.iou_gate {
                    candidates.push((ov, ti, di));
                }
            }
        }
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut det_of_track: Vec<Option<usize>> = vec![None; self.tracks.len()];
        let mut det_taken = vec![false; detections.len()];
        for (_, ti, di) in candidates {
            if det_of_track[ti].is_none() && !det_taken[di] {
                det_of_track[ti] = Some(di);
                det_taken[di] = true;
            }
        }

        let mut survivors: Vec<ActiveTrack> = Vec::new();
        for (ti, mut track) in std::mem::take(&mut self.tracks).into_iter().enumerate() {
            match det_of_track[ti] {
                Some(di) => {
                    let det = &detections[di];
                    track.velocity = (
                        det.bbox.center_x() - track.bbox.center_x(),
                        det.bbox.center_y() - track.bbox.center_y(),
                    );
                    track.bbox = det.bbox;
                    track.last_det_confidence = det.confidence;
                    track.coasted = 0;
                    survivors.push(track);
                }
                None => {
                    track.coasted += 1;
                    if track.coasted <= self.config.max_coast {
                        track.bbox = predicted[ti];
                        survivors.push(track);
                    }
                }
            }
        }
        for (di, det) in detections.iter().enumerate() {
            if !det_taken[di] {
                survivors.push(ActiveTrack {
                    id: self.next_id,
                    bbox: det.bbox,
                    velocity: (0.0, 0.0),
                    last_det_confidence: det.confidence,
                    coasted: 0,
                    birth_frame: frame,
                });
                self.next_id += 1;
            }
        }
        self.tracks = survivors;

        self.tracks
            .iter()
            .map(|t| TrackletBox {
                track_id: t.id,
                bbox: t.bbox,
                confidence: t.last_det_confidence
                    * self.config.coast_decay.powi(t.coasted as i32),
                frame,
                track_length: (frame - t.birth_frame + 1) as u64,
            })
            .collect()
    }
}

/// Run the baseline tracker over a whole sequence of per-frame detections.
pub fn track_sequence(
    detections_by_frame: &[Vec<ScoredBox>],
    config: TrackerConfig,
) -> Vec<TrackletBox> {
    let mut tracker = BaselineTracker::new(config);
    detections_by_frame
        .iter()
        .enumerate()
        .flat_map(|(frame, dets)| tracker.step(frame, dets))
        .collect()
}
