//! KITTI tracking label ingestion.
//!
//! Consumes the first ten whitespace-separated fields of each line (frame,
//! track id, type, truncated, occluded, alpha, left, top, right, bottom)
//! and ignores the 3D fields and optional score that may follow. The
//! ignore flag is derived on parse: DontCare regions and objects shorter
//! than the minimum height are excluded from all accounting downstream.

use std::collections::BTreeMap;

use crate::geometry::{BBox, Category};

use super::{data_lines, field, split_fields, FormatError};

/// Height below which ground truth is treated as an ignore region.
pub const DEFAULT_MIN_HEIGHT: f64 = 25.0;

/// One ground-truth object on one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruthObject {
    pub bbox: BBox,
    pub category: Category,
    pub track_id: i64,
    /// Excluded from positives and negatives alike when set.
    pub is_ignore: bool,
}

/// Parse KITTI tracking labels into per-frame object lists.
///
/// Objects shorter than `min_height` px and DontCare regions come back
/// ignore-flagged. With `collapse_classes` set, Van and Truck map to Car.
pub fn parse_kitti_labels(
    text: &str,
    min_height: f64,
    collapse_classes: bool,
) -> Result<BTreeMap<usize, Vec<GroundTruthObject>>, FormatError> {
    let mut frames: BTreeMap<usize, Vec<GroundTruthObject>> = BTreeMap::new();
    for (line, raw) in data_lines(text) {
        let f = split_fields(raw, line, 10)?;
        let frame: usize = field(f[0], line, "frame index")?;
        let track_id: i64 = field(f[1], line, "track id")?;
        let category: Category = f[2]
            .parse()
            .map_err(|e| FormatError::malformed(line, format!("{e}")))?;
        let _truncated: f64 = field(f[3], line, "truncated flag")?;
        let _occluded: f64 = field(f[4], line, "occluded flag")?;
        let _alpha: f64 = field(f[5], line, "alpha angle")?;
        let x1: f64 = field(f[6], line, "left coordinate")?;
        let y1: f64 = field(f[7], line, "top coordinate")?;
        let x2: f64 = field(f[8], line, "right coordinate")?;
        let y2: f64 = field(f[9], line, "bottom coordinate")?;
        let bbox = BBox::new(x1, y1, x2, y2)
            .map_err(|e| FormatError::malformed(line, format!("{e}")))?;
        let is_ignore = category == Category::DontCare || bbox.height() < min_height;
        let category = if collapse_classes {
            category.collapsed()
        } else {
            category
        };
        frames.entry(frame).or_default().push(GroundTruthObject {
            bbox,
            category,
            track_id,
            is_ignore,
        });
    }
    Ok(frames)
}

/// Serialize per-frame ground truth back to KITTI tracking label lines.
///
/// The fields this pipeline does not consume (truncation, occlusion,
/// alpha, 3D pose) are written as zeros; re-parsing with the same
/// `min_height` reproduces the input objects exactly.
pub fn write_kitti_labels(frames: &BTreeMap<usize, Vec<GroundTruthObject>>) -> String {
    let mut out = String::new();
    for (frame, objects) in frames {
        for o in objects {
            out.push_str(&format!(
                "{frame} {} {} 0 0 0 {} {} {} {} 0 0 0 0 0 0 0\n",
                o.track_id, o.category, o.bbox.x1, o.bbox.y1, o.bbox.x2, o.bbox.y2
            ));
        }
    }
    out
}
