//! Stereo consistency cue: right-camera detections are shifted into the
//! left image by the median disparity under their box; shifted boxes with
//! no matching left detection become hypotheses.
//!
//! The disparity map is referenced to the right image, so a right box
//! indexes it directly and the left position of a point at disparity `d`
//! is `right_x + d`. The cue is one-directional (it mines left-frame
//! misses); mining the right frame is done by swapping the inputs and
//! supplying a left-referenced map.

use thiserror::Error;

use crate::assignment::match_boxes;
use crate::geometry::{BBox, ScoredBox};
use crate::temporal::{Cue, Hypothesis, MATCH_IOU};

/// Fraction of a region's pixels that must carry valid disparity before
/// the region's median is trusted.
pub const MIN_VALID_FRACTION: f64 = 0.25;

#[derive(Debug, Error, PartialEq)]
pub enum StereoError {
    #[error("disparity buffer length {got} does not match {width}x{height}")]
    BufferMismatch {
        width: usize,
        height: usize,
        got: usize,
    },
    #[error("disparity map dimensions must be positive, got {0}x{1}")]
    EmptyDims(usize, usize),
    #[error("disparity {value} at pixel ({x}, {y}) is not finite and nonnegative")]
    BadDisparity { x: usize, y: usize, value: f64 },
    #[error("region ({x1}, {y1}, {x2}, {y2}) lies fully outside the {width}x{height} disparity map")]
    RegionOutside {
        x1: f64,
        y1: f64,
        x2: f64,
        y2: f64,
        width: usize,
        height: usize,
    },
}

/// Dense per-pixel disparity with an invalid mask, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl DisparityMap {
    /// Build a map from parallel value and validity buffers. Valid pixels
    /// must hold finite nonnegative disparities; values at invalid pixels
    /// are discarded and stored as 0.
    pub fn from_parts(
        width: usize,
        height: usize,
        values: Vec<f64>,
        valid: Vec<bool>,
    ) -> Result<Self, StereoError> {
        if width == 0 || height == 0 {
            return Err(StereoError::EmptyDims(width, height));
        }
        let expected = width * height;
        if values.len() != expected || valid.len() != expected {
            return Err(StereoError::BufferMismatch {
                width,
                height,
                got: values.len().min(valid.len()),
            });
        }
        let mut values = values;
        for (i, v) in values.iter_mut().enumerate() {
            if !valid[i] {
                *v = 0.0;
            } else if !v.is_finite() || *v < 0.0 {
                return Err(StereoError::BadDisparity {
                    x: i % width,
                    y: i / width,
                    value: *v,
                });
            }
        }
        Ok(DisparityMap {
            width,
            height,
            values,
            valid,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Disparity at a pixel, `None` when invalid or out of range.
    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        if x >= self.width || y >= self.height {
            return None;
        }
        let i = y * self.width + x;
        self.valid[i].then(|| self.values[i])
    }
}

/// Integer pixel columns or rows covered by the real interval `[lo, hi)`,
/// clipped to `[0, max)`. A box covers every pixel its interior touches,
/// so the span runs from `floor(lo)` to `ceil(hi)`.
pub fn pixel_span(lo: f64, hi: f64, max: usize) -> std::ops::Range<usize> {
    let start = lo.floor().max(0.0) as usize;
    let end = (hi.ceil().max(0.0) as usize).min(max);
    start..end.max(start)
}

/// Median of the valid disparities under `region`.
///
/// The region is clipped to the map; a region fully outside is an error.
/// Returns `None` when fewer than `min_valid_fraction` of the covered
/// pixels are valid. Even-sized value sets take the mean of the two
/// middle values.
pub fn median_disparity(
    map: &DisparityMap,
    region: &BBox,
    min_valid_fraction: f64,
) -> Result<Option<f64>, StereoError> {
    let xs = pixel_span(region.x1, region.x2, map.width);
    let ys = pixel_span(region.y1, region.y2, map.height);
    let total = xs.len() * ys.len();
    if total == 0 {
        return Err(StereoError::RegionOutside {
            x1: region.x1,
            y1: region.y1,
            x2: region.x2,
            y2: region.y2,
            width: map.width,
            height: map.height,
        });
    }
    let mut vals: Vec<f64> = Vec::new();
    for y in ys {
        for x in xs.clone() {
            if let Some(d) = map.get(x, y) {
                vals.push(d);
            }
        }
    }
    if (vals.len() as f64) < min_valid_fraction * total as f64 {
        return Ok(None);
    }
    Ok(median(vals))
}

/// Median with the even-count convention used throughout the pipeline:
/// the mean of the two middle values. `None` for an empty input.
pub(crate) fn median(mut vals: Vec<f64>) -> Option<f64> {
    if vals.is_empty() {
        return None;
    }
    vals.sort_by(f64::total_cmp);
    let n = vals.len();
    Some(if n % 2 == 1 {
        vals[n / 2]
    } else {
        (vals[n / 2 - 1] + vals[n / 2]) / 2.0
    })
}

/// A right-camera detection carried into the left image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftedBox {
    /// Index of the originating detection in the input list.
    pub source_index: usize,
    /// The detection with its box translated by the median disparity.
    pub det: ScoredBox,
}

/// Result of shifting one frame's right detections.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftOutcome {
    pub shifted: Vec<ShiftedBox>,
    /// Detections dropped for lack of disparity support (too few valid
    /// pixels, or a box fully outside the map).
    pub dropped: usize,
}

/// Translate right-camera detections into the left image.
///
/// Each detection at or above `conf_threshold` moves by `+median` of the
/// disparity under its box; width, height and vertical extent are
/// untouched. Detections whose region has no trustworthy median are
/// dropped and counted rather than guessed at.
pub fn shift_detections(
    right_detections: &[ScoredBox],
    map: &DisparityMap,
    conf_threshold: f64,
    min_valid_fraction: f64,
) -> ShiftOutcome {
    let mut shifted = Vec::new();
    let mut dropped = 0usize;
    for (i, det) in right_detections.iter().enumerate() {
        if det.confidence < conf_threshold {
            continue;
        }
        match median_disparity(map, &det.bbox, min_valid_fraction) {
            Ok(Some(d)) => shifted.push(ShiftedBox {
                source_index: i,
                det: ScoredBox {
                    bbox: det.bbox.shifted_x(d),
                    ..*det
                },
            }),
            Ok(None) | Err(_) => dropped += 1,
        }
    }
    ShiftOutcome { shifted, dropped }
}

/// Propose hypotheses for one frame: every shifted right detection left
/// unmatched after one-to-one matching against the left detections.
///
/// Left detections below `conf_threshold` are discarded before matching.
/// A hypothesis inherits the originating right detection's confidence;
/// its track length is 0, since no track is involved.
pub fn generate_stereo_hypotheses(
    shifted: &[ShiftedBox],
    left_detections: &[ScoredBox],
    conf_threshold: f64,
) -> Vec<Hypothesis> {
    let kept: Vec<&ScoredBox> = left_detections
        .iter()
        .filter(|d| d.confidence >= conf_threshold)
        .collect();
    let s_boxes: Vec<BBox> = shifted.iter().map(|s| s.det.bbox).collect();
    let d_boxes: Vec<BBox> = kept.iter().map(|d| d.bbox).collect();
    let matched = match_boxes(&s_boxes, &d_boxes, MATCH_IOU);
    matched
        .unmatched_a
        .into_iter()
        .map(|i| {
            let s = &shifted[i];
            Hypothesis {
                bbox: s.det.bbox,
                confidence: s.det.confidence,
                cue: Cue::Stereo,
                frame: s.det.frame,
                track_length: 0,
                source_id: s.source_index as u64,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Category;
    use proptest::prelude::*;

    fn bx(x1: f64, y1: f64, x2: f64, y2: f64) -> BBox {
        BBox::new(x1, y1, x2, y2).unwrap()
    }

    fn det(b: BBox, conf: f64) -> ScoredBox {
        ScoredBox::new(b, conf, Category::Car, 0).unwrap()
    }

    /// Map where every pixel is valid and holds `d`.
    fn uniform(width: usize, height: usize, d: f64) -> DisparityMap {
        DisparityMap::from_parts(width, height, vec![d; width * height], vec![true; width * height])
            .unwrap()
    }

    /// 1-row map from explicit per-pixel values, `None` meaning invalid.
    fn row_map(cells: &[Option<f64>]) -> DisparityMap {
        let values: Vec<f64> = cells.iter().map(|c| c.unwrap_or(0.0)).collect();
        let valid: Vec<bool> = cells.iter().map(Option::is_some).collect();
        DisparityMap::from_parts(cells.len(), 1, values, valid).unwrap()
    }

    #[test]
    fn median_odd_count() {
        let map = row_map(&[Some(10.0), Some(12.0), Some(14.0)]);
        let m = median_disparity(&map, &bx(0.0, 0.0, 3.0, 1.0), MIN_VALID_FRACTION).unwrap();
        assert_eq!(m, Some(12.0));
    }

    #[test]
    fn median_skips_invalid_pixels() {
        let map = row_map(&[None, Some(12.0), Some(14.0), Some(16.0)]);
        let m = median_disparity(&map, &bx(0.0, 0.0, 4.0, 1.0), MIN_VALID_FRACTION).unwrap();
        assert_eq!(m, Some(14.0));
    }

    #[test]
    fn median_even_count_takes_middle_mean() {
        let map = row_map(&[Some(10.0), Some(20.0)]);
        let m = median_disparity(&map, &bx(0.0, 0.0, 2.0, 1.0), MIN_VALID_FRACTION).unwrap();
        assert_eq!(m, Some(15.0));
    }

    #[test]
    fn median_absent_when_region_mostly_invalid() {
        let mut cells = vec![None; 10];
        cells[0] = Some(8.0);
        let map = row_map(&cells);
        let m = median_disparity(&map, &bx(0.0, 0.0, 10.0, 1.0), MIN_VALID_FRACTION).unwrap();
        assert_eq!(m, None);
    }

    #[test]
    fn median_valid_fraction_boundary_inclusive() {
        // exactly 1 of 4 pixels valid meets a 0.25 requirement
        let map = row_map(&[Some(8.0), None, None, None]);
        let m = median_disparity(&map, &bx(0.0, 0.0, 4.0, 1.0), 0.25).unwrap();
        assert_eq!(m, Some(8.0));
    }

    #[test]
    fn median_region_outside_is_error() {
        let map = uniform(4, 4, 1.0);
        let err = median_disparity(&map, &bx(10.0, 0.0, 12.0, 1.0), 0.25).unwrap_err();
        assert!(matches!(err, StereoError::RegionOutside { .. }));
    }

    #[test]
    fn median_clips_overhanging_region() {
        let map = row_map(&[Some(3.0), Some(5.0), Some(7.0)]);
        let m = median_disparity(&map, &bx(-5.0, 0.0, 1.0, 1.0), MIN_VALID_FRACTION).unwrap();
        assert_eq!(m, Some(3.0));
    }

    #[test]
    fn pixel_span_covers_touched_pixels() {
        assert_eq!(pixel_span(1.2, 3.7, 10), 1..4);
        assert_eq!(pixel_span(2.0, 4.0, 10), 2..4);
        assert_eq!(pixel_span(-2.5, 1.5, 10), 0..2);
        assert_eq!(pixel_span(8.0, 12.0, 10), 8..10);
        assert!(pixel_span(10.0, 12.0, 10).is_empty());
        assert!(pixel_span(-5.0, -1.0, 10).is_empty());
    }

    #[test]
    fn shift_moves_box_by_median() {
        let map = uniform(200, 120, 20.0);
        let out = shift_detections(&[det(bx(100.0, 50.0, 150.0, 100.0), 0.9)], &map, 0.5, 0.25);
        assert_eq!(out.dropped, 0);
        assert_eq!(out.shifted.len(), 1);
        assert_eq!(out.shifted[0].det.bbox, bx(120.0, 50.0, 170.0, 100.0));
        assert_eq!(out.shifted[0].source_index, 0);
        assert_eq!(out.shifted[0].det.confidence, 0.9);
    }

    #[test]
    fn zero_disparity_is_identity_shift() {
        let map = uniform(200, 120, 0.0);
        let b = bx(40.0, 10.0, 90.0, 60.0);
        let out = shift_detections(&[det(b, 0.8)], &map, 0.5, 0.25);
        assert_eq!(out.shifted[0].det.bbox, b);
    }

    #[test]
    fn shift_drops_unsupported_regions() {
        // left half valid, right half invalid
        let (w, h) = (100usize, 50usize);
        let valid: Vec<bool> = (0..w * h).map(|i| i % w < 50).collect();
        let map = DisparityMap::from_parts(w, h, vec![4.0; w * h], valid).unwrap();
        let inside = det(bx(0.0, 0.0, 40.0, 40.0), 0.9);
        let unsupported = det(bx(60.0, 0.0, 99.0, 40.0), 0.9);
        let outside = det(bx(150.0, 0.0, 180.0, 40.0), 0.9);
        let out = shift_detections(&[inside, unsupported, outside], &map, 0.5, 0.25);
        assert_eq!(out.shifted.len(), 1);
        assert_eq!(out.shifted[0].source_index, 0);
        assert_eq!(out.dropped, 2);
    }

    #[test]
    fn shift_honors_confidence_threshold() {
        let map = uniform(100, 100, 2.0);
        let out = shift_detections(
            &[det(bx(0.0, 0.0, 10.0, 10.0), 0.3), det(bx(0.0, 0.0, 10.0, 10.0), 0.5)],
            &map,
            0.5,
            0.25,
        );
        assert_eq!(out.shifted.len(), 1);
        assert_eq!(out.shifted[0].source_index, 1);
        assert_eq!(out.dropped, 0);
    }

    #[test]
    fn matching_left_detection_silences_hypothesis() {
        let map = uniform(300, 150, 25.0);
        let right = det(bx(100.0, 40.0, 160.0, 100.0), 0.9);
        let out = shift_detections(&[right], &map, 0.5, 0.25);
        let left_match = det(bx(125.0, 40.0, 185.0, 100.0), 0.85);
        assert!(generate_stereo_hypotheses(&out.shifted, &[left_match], 0.5).is_empty());
        let hyps = generate_stereo_hypotheses(&out.shifted, &[], 0.5);
        assert_eq!(hyps.len(), 1);
        assert_eq!(hyps[0].bbox, bx(125.0, 40.0, 185.0, 100.0));
        assert_eq!(hyps[0].confidence, 0.9);
        assert_eq!(hyps[0].cue, Cue::Stereo);
        assert_eq!(hyps[0].track_length, 0);
    }

    #[test]
    fn left_only_detection_yields_nothing() {
        let left = det(bx(10.0, 10.0, 60.0, 60.0), 0.9);
        assert!(generate_stereo_hypotheses(&[], &[left], 0.5).is_empty());
    }

    #[test]
    fn identical_sets_zero_disparity_yield_nothing() {
        let map = uniform(200, 100, 0.0);
        let boxes = [bx(10.0, 10.0, 60.0, 60.0), bx(100.0, 20.0, 150.0, 80.0)];
        let rights: Vec<ScoredBox> = boxes.iter().map(|&b| det(b, 0.9)).collect();
        let lefts = rights.clone();
        let out = shift_detections(&rights, &map, 0.5, 0.25);
        assert!(generate_stereo_hypotheses(&out.shifted, &lefts, 0.5).is_empty());
    }

    proptest! {
        #[test]
        fn median_invariant_to_pixel_order(
            mut cells in prop::collection::vec(
                prop::option::of(0.0..64.0f64), 4..40),
            seed in 0u64..1000,
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let region = bx(0.0, 0.0, cells.len() as f64, 1.0);
            let before = median_disparity(&row_map(&cells), &region, 0.0).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            cells.shuffle(&mut rng);
            let after = median_disparity(&row_map(&cells), &region, 0.0).unwrap();
            prop_assert_eq!(before, after);
        }

        #[test]
        fn shift_preserves_size_and_vertical_extent(
            x1s in 0..2400u32, y1s in 0..1280u32,
            ws in 64..800u32, hs in 64..640u32,
            ds in 0..16384u32,
        ) {
            // coordinates on a 1/16 grid and disparity on the 1/256 grid
            // the disparity file format quantizes to, so every sum below
            // is exact and the assertions can use plain equality
            let (x1, y1) = (x1s as f64 / 16.0, y1s as f64 / 16.0);
            let (w, h) = (ws as f64 / 16.0, hs as f64 / 16.0);
            let d = ds as f64 / 256.0;
            let b = bx(x1, y1, x1 + w, y1 + h);
            let map = uniform(256, 128, d);
            let out = shift_detections(&[det(b, 0.9)], &map, 0.5, 0.25);
            let s = out.shifted[0].det.bbox;
            prop_assert_eq!(s.width(), b.width());
            prop_assert_eq!(s.height(), b.height());
            prop_assert_eq!(s.y1, b.y1);
            prop_assert_eq!(s.y2, b.y2);
            prop_assert_eq!(s.x1 - b.x1, d);
        }

        #[test]
        fn shift_commutes_with_x_reflection(
            x1 in -100.0..100.0f64, w in 1.0..50.0f64, d in 0.0..64.0f64,
        ) {
            // reflecting the world about x = 0 flips the shift direction:
            // mining the mirrored pair right-to-left equals mirroring the
            // result of the original left-to-right shift
            let b = bx(x1, 0.0, x1 + w, 10.0);
            let reflect = |v: &BBox| bx(-v.x2, v.y1, -v.x1, v.y2);
            let shifted_then_reflected = reflect(&b.shifted_x(d));
            let reflected_then_shifted = reflect(&b).shifted_x(-d);
            prop_assert_eq!(shifted_then_reflected, reflected_then_shifted);
        }
    }
}
