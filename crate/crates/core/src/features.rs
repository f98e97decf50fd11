//! Fixed 12-component feature vector describing a hypothesis by its
//! geometry and its relationship to nearby detections and sibling cue
//! sources.
//!
//! The component order is frozen; serialization headers, training and
//! prediction all validate against [`FEATURE_NAMES`]. Position and size
//! are normalized so vectors are comparable across image resolutions; the
//! track length component is 0 for stereo hypotheses, which carry no
//! track.

use crate::geometry::{iou, normalize, BBox, GeometryError, ScoredBox};
use crate::stereo::median;
use crate::temporal::Hypothesis;

pub const FEATURE_COUNT: usize = 12;

/// Frozen feature order: any file or model using a different order or
/// count is rejected at load time.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "x",
    "y",
    "w",
    "h",
    "r",
    "det_cnt",
    "med_det_ov",
    "med_det_cnf",
    "hyp_cnt",
    "med_hyp_ov",
    "med_hyp_cnf",
    "n",
];

/// Feature values in [`FEATURE_NAMES`] order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; FEATURE_COUNT]);

impl FeatureVector {
    pub fn values(&self) -> &[f64; FEATURE_COUNT] {
        &self.0
    }
}

/// A sibling cue source near the hypothesis: another tracklet box for the
/// temporal cue, another shifted right detection for the stereo cue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CohortBox {
    pub bbox: BBox,
    pub confidence: f64,
}

/// Count and medians over the members of `boxes` that overlap `anchor`
/// with strictly positive IoU. Empty overlap sets yield zero medians.
fn overlap_stats<'a, I>(anchor: &BBox, boxes: I) -> (usize, f64, f64)
where
    I: Iterator<Item = (&'a BBox, f64)>,
{
    let mut overlaps = Vec::new();
    let mut confidences = Vec::new();
    for (b, conf) in boxes {
        let ov = iou(anchor, b);
        if ov > 0.0 {
            overlaps.push(ov);
            confidences.push(conf);
        }
    }
    let count = overlaps.len();
    (
        count,
        median(overlaps).unwrap_or(0.0),
        median(confidences).unwrap_or(0.0),
    )
}

/// Featurize one hypothesis.
///
/// `detections` are the frame's detections at the operating threshold;
/// `cohort` are the frame's other cue sources, excluding the hypothesis's
/// own source box. Fails only when the hypothesis box lies fully outside
/// the image, in which case it describes nothing observable and should be
/// dropped by the caller.
pub fn featurize(
    hypothesis: &Hypothesis,
    detections: &[ScoredBox],
    cohort: &[CohortBox],
    image_width: f64,
    image_height: f64,
) -> Result<FeatureVector, GeometryError> {
    let norm = normalize(&hypothesis.bbox, image_width, image_height)?;
    let (det_cnt, med_det_ov, med_det_cnf) = overlap_stats(
        &hypothesis.bbox,
        detections.iter().map(|d| (&d.bbox, d.confidence)),
    );
    let (hyp_cnt, med_hyp_ov, med_hyp_cnf) = overlap_stats(
        &hypothesis.bbox,
        cohort.iter().map(|c| (&c.bbox, c.confidence)),
    );
    Ok(FeatureVector([
        norm.x,
        norm.y,
        norm.w,
        norm.h,
        hypothesis.confidence,
        det_cnt as f64,
        med_det_ov,
        med_det_cnf,
        hyp_cnt as f64,
        med_hyp_ov,
        med_hyp_cnf,
        hypothesis.track_length as f64,
    ]))
}
