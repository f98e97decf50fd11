//! Ranking metrics and cross-cue accounting: precision-recall curves,
//! average precision, the all-hypotheses naive baseline, detector F1
//! with and without mined corrections, and fusion of the two cues.
//!
//! Average precision is the area under the exact step PR curve: the
//! ranked sweep advances one distinct score at a time, so tied scores
//! form a single step and the result does not depend on tie order.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::assignment::match_boxes;
use crate::formats::GroundTruthObject;
use crate::geometry::{iou, nms, BBox, ScoredBox};

/// Overlap at which two boxes count as the same error, used both for
/// cross-cue fusion and for deduplicating corrected detection sets.
pub const FUSE_IOU: f64 = 0.7;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("average precision is undefined without positive items")]
    NoPositives,
    #[error("ranked items carry a non-finite score")]
    NonFiniteScore,
    #[error("{items} positive items exceed the declared {relevant} relevant objects")]
    RelevantTooSmall { items: usize, relevant: usize },
}

/// One scored, labeled item of a ranking. Provenance fields break score
/// ties deterministically and identify the item in reports.
#[derive(Debug, Clone, PartialEq)]
pub struct RankItem {
    pub score: f64,
    pub positive: bool,
    pub sequence: String,
    pub frame: usize,
    pub bbox: BBox,
}

fn rank_order(a: &RankItem, b: &RankItem) -> std::cmp::Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.sequence.cmp(&b.sequence))
        .then(a.frame.cmp(&b.frame))
        .then_with(|| {
            let (ka, kb) = (a.bbox.sort_key(), b.bbox.sort_key());
            ka.iter()
                .zip(kb.iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
}

/// One step of the PR curve, taken at a distinct score threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
    pub threshold: f64,
}

/// Area under the step PR curve of the ranked items, with recall
/// measured against the positive items themselves.
pub fn average_precision(items: &[RankItem]) -> Result<(f64, Vec<PrPoint>), EvalError> {
    let relevant = items.iter().filter(|i| i.positive).count();
    average_precision_with_relevant(items, relevant)
}

/// Area under the step PR curve with an explicit relevant-set size, for
/// detector-vs-ground-truth evaluation where undetected objects count
/// against recall even though no ranked item represents them.
pub fn average_precision_with_relevant(
    items: &[RankItem],
    relevant: usize,
) -> Result<(f64, Vec<PrPoint>), EvalError> {
    if items.iter().any(|i| !i.score.is_finite()) {
        return Err(EvalError::NonFiniteScore);
    }
    let positives = items.iter().filter(|i| i.positive).count();
    if relevant == 0 {
        return Err(EvalError::NoPositives);
    }
    if positives > relevant {
        return Err(EvalError::RelevantTooSmall {
            items: positives,
            relevant,
        });
    }

    let mut order: Vec<&RankItem> = items.iter().collect();
    order.sort_by(|a, b| rank_order(a, b));

    let mut pr_points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (k, item) in order.iter().enumerate() {
        if item.positive {
            tp += 1;
        } else {
            fp += 1;
        }
        let group_ends = order
            .get(k + 1)
            .is_none_or(|next| next.score < item.score);
        if group_ends {
            let recall = tp as f64 / relevant as f64;
            let precision = tp as f64 / (tp + fp) as f64;
            ap += (recall - prev_recall) * precision;
            prev_recall = recall;
            pr_points.push(PrPoint {
                recall,
                precision,
                threshold: item.score,
            });
        }
    }
    Ok((ap, pr_points))
}

/// Score every item 1.0 and rank. The curve collapses to a single step,
/// so the returned AP equals precision at full recall.
pub fn naive_baseline(items: &[RankItem]) -> Result<(f64, PrPoint), EvalError> {
    let flat: Vec<RankItem> = items
        .iter()
        .map(|i| RankItem {
            score: 1.0,
            ..i.clone()
        })
        .collect();
    let (ap, points) = average_precision(&flat)?;
    Ok((ap, points[0]))
}

/// True/false positive and false negative tallies; the arithmetic is the
/// same whether the items are ranked hypotheses or detection boxes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counts {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

impl Counts {
    pub fn f1(&self) -> f64 {
        let denominator =
            2 * self.true_positives + self.false_positives + self.false_negatives;
        if denominator == 0 {
            return 1.0;
        }
        2.0 * self.true_positives as f64 / denominator as f64
    }

    fn absorb(&mut self, other: Counts) {
        self.true_positives += other.true_positives;
        self.false_positives += other.false_positives;
        self.false_negatives += other.false_negatives;
    }
}

/// Confusion counts of the ranking thresholded at `threshold`
/// (inclusive).
pub fn classification_counts(items: &[RankItem], threshold: f64) -> Counts {
    let mut counts = Counts::default();
    for item in items {
        match (item.positive, item.score >= threshold) {
            (true, true) => counts.true_positives += 1,
            (false, true) => counts.false_positives += 1,
            (true, false) => counts.false_negatives += 1,
            (false, false) => {}
        }
    }
    counts
}

/// Everything the eval stage reports for one ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub ap: f64,
    pub pr_points: Vec<PrPoint>,
    /// Confusion counts at `threshold`.
    pub counts: Counts,
    pub threshold: f64,
    /// Per-cue error totals and cross-cue matched pairs, present when
    /// two cues were fused: (temporal, stereo, intersection).
    pub cue_overlap: Option<(usize, usize, usize)>,
}

pub fn evaluate(items: &[RankItem], threshold: f64) -> Result<EvalReport, EvalError> {
    let (ap, pr_points) = average_precision(items)?;
    Ok(EvalReport {
        ap,
        pr_points,
        counts: classification_counts(items, threshold),
        threshold,
        cue_overlap: None,
    })
}

/// Detection-vs-ground-truth counts for one frame. Matching is
/// one-to-one at `min_iou`; an unmatched detection whose only overlap is
/// ignore-flagged ground truth is dropped from the false positives, and
/// ignore-flagged objects are never false negatives.
fn detection_counts(
    detections: &[ScoredBox],
    ground_truth: &[GroundTruthObject],
    min_iou: f64,
) -> Counts {
    let active: Vec<BBox> = ground_truth
        .iter()
        .filter(|g| !g.is_ignore)
        .map(|g| g.bbox)
        .collect();
    let ignored: Vec<BBox> = ground_truth
        .iter()
        .filter(|g| g.is_ignore)
        .map(|g| g.bbox)
        .collect();
    let det_boxes: Vec<BBox> = detections.iter().map(|d| d.bbox).collect();
    let result = match_boxes(&det_boxes, &active, min_iou);
    let false_positives = result
        .unmatched_a
        .iter()
        .filter(|&&i| {
            let b = &det_boxes[i];
            let touches_active = active.iter().any(|g| iou(b, g) > 0.0);
            let touches_ignored = ignored.iter().any(|g| iou(b, g) > 0.0);
            touches_active || !touches_ignored
        })
        .count();
    Counts {
        true_positives: result.pairs.len(),
        false_positives,
        false_negatives: result.unmatched_b.len(),
    }
}

/// Detector F1 before and after merging predicted errors into the
/// detection set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectionOutcome {
    pub f1_before: f64,
    pub f1_after: f64,
    pub counts_before: Counts,
    pub counts_after: Counts,
}

/// Compare detector F1 against ground truth with and without the
/// predicted errors merged in. The corrected set per frame is the
/// concatenation deduplicated by NMS at [`FUSE_IOU`], so an error box
/// duplicating a detection cannot double-count.
pub fn f1_with_corrections(
    detections: &BTreeMap<usize, Vec<ScoredBox>>,
    predicted_errors: &BTreeMap<usize, Vec<ScoredBox>>,
    ground_truth: &BTreeMap<usize, Vec<GroundTruthObject>>,
    min_iou: f64,
) -> CorrectionOutcome {
    let frames: BTreeSet<usize> = detections
        .keys()
        .chain(predicted_errors.keys())
        .chain(ground_truth.keys())
        .copied()
        .collect();
    let no_boxes = Vec::new();
    let no_objects = Vec::new();
    let mut counts_before = Counts::default();
    let mut counts_after = Counts::default();
    for frame in frames {
        let dets = detections.get(&frame).unwrap_or(&no_boxes);
        let gt = ground_truth.get(&frame).unwrap_or(&no_objects);
        counts_before.absorb(detection_counts(dets, gt, min_iou));

        let mut corrected: Vec<ScoredBox> = dets.clone();
        corrected.extend(predicted_errors.get(&frame).unwrap_or(&no_boxes).iter());
        let deduped = nms(&corrected, FUSE_IOU);
        counts_after.absorb(detection_counts(&deduped, gt, min_iou));
    }
    CorrectionOutcome {
        f1_before: counts_before.f1(),
        f1_after: counts_after.f1(),
        counts_before,
        counts_after,
    }
}

/// Build ranked items from detections judged against ground truth, for
/// reporting base detector quality with the same AP machinery. Returns
/// the items and the relevant-object count to pass to
/// [`average_precision_with_relevant`]. Detections whose only overlap is
/// ignore-flagged ground truth are skipped.
pub fn rank_detections(
    sequence: &str,
    detections: &BTreeMap<usize, Vec<ScoredBox>>,
    ground_truth: &BTreeMap<usize, Vec<GroundTruthObject>>,
    min_iou: f64,
) -> (Vec<RankItem>, usize) {
    let frames: BTreeSet<usize> = detections
        .keys()
        .chain(ground_truth.keys())
        .copied()
        .collect();
    let no_boxes = Vec::new();
    let no_objects = Vec::new();
    let mut items = Vec::new();
    let mut relevant = 0usize;
    for frame in frames {
        let dets = detections.get(&frame).unwrap_or(&no_boxes);
        let gt = ground_truth.get(&frame).unwrap_or(&no_objects);
        let active: Vec<BBox> = gt.iter().filter(|g| !g.is_ignore).map(|g| g.bbox).collect();
        let ignored: Vec<BBox> = gt.iter().filter(|g| g.is_ignore).map(|g| g.bbox).collect();
        relevant += active.len();
        let det_boxes: Vec<BBox> = dets.iter().map(|d| d.bbox).collect();
        let result = match_boxes(&det_boxes, &active, min_iou);
        let matched: BTreeSet<usize> = result.pairs.iter().map(|&(i, _, _)| i).collect();
        for (i, det) in dets.iter().enumerate() {
            let positive = matched.contains(&i);
            if !positive {
                let touches_active = active.iter().any(|g| iou(&det.bbox, g) > 0.0);
                let touches_ignored = ignored.iter().any(|g| iou(&det.bbox, g) > 0.0);
                if touches_ignored && !touches_active {
                    continue;
                }
            }
            items.push(RankItem {
                score: det.confidence,
                positive,
                sequence: sequence.to_owned(),
                frame,
                bbox: det.bbox,
            });
        }
    }
    (items, relevant)
}

/// How the two cues' error sets relate. Matching is one-to-one per
/// frame at [`FUSE_IOU`], so `unique_temporal + intersection` equals
/// `total_temporal` exactly, and likewise for stereo.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FuseStats {
    pub total_temporal: usize,
    pub total_stereo: usize,
    pub unique_temporal: usize,
    pub unique_stereo: usize,
    /// Cross-cue matched pairs: errors found by both cues.
    pub intersection: usize,
}

/// Concatenate the two cues' errors and suppress duplicates per frame at
/// [`FUSE_IOU`], reporting overlap statistics alongside the fused list.
pub fn fuse_cues(
    temporal: &[ScoredBox],
    stereo: &[ScoredBox],
) -> (Vec<ScoredBox>, FuseStats) {
    let mut frames: BTreeMap<usize, (Vec<ScoredBox>, Vec<ScoredBox>)> = BTreeMap::new();
    for b in temporal {
        frames.entry(b.frame).or_default().0.push(*b);
    }
    for b in stereo {
        frames.entry(b.frame).or_default().1.push(*b);
    }

    let mut stats = FuseStats {
        total_temporal: temporal.len(),
        total_stereo: stereo.len(),
        ..FuseStats::default()
    };
    let mut fused = Vec::new();
    for (_, (t, s)) in frames {
        let t_boxes: Vec<BBox> = t.iter().map(|b| b.bbox).collect();
        let s_boxes: Vec<BBox> = s.iter().map(|b| b.bbox).collect();
        let pairs = match_boxes(&t_boxes, &s_boxes, FUSE_IOU).pairs.len();
        stats.intersection += pairs;
        stats.unique_temporal += t.len() - pairs;
        stats.unique_stereo += s.len() - pairs;

        let mut combined = t;
        combined.extend(s);
        fused.extend(nms(&combined, FUSE_IOU));
    }
    (fused, stats)
}
