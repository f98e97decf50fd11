//! Detection interchange: `frame category confidence x1 y1 x2 y2`, one
//! detection per line, whitespace separated.

use std::collections::BTreeMap;

use crate::geometry::{BBox, Category, ScoredBox};

use super::{data_lines, field, split_fields, FormatError};

/// Parse detections into per-frame lists, preserving line order within a
/// frame. Confidences outside [0, 1] and degenerate boxes are rejected.
pub fn parse_detections(text: &str) -> Result<BTreeMap<usize, Vec<ScoredBox>>, FormatError> {
    let mut frames: BTreeMap<usize, Vec<ScoredBox>> = BTreeMap::new();
    for (line, raw) in data_lines(text) {
        let f = split_fields(raw, line, 7)?;
        let frame: usize = field(f[0], line, "frame index")?;
        let category: Category = f[1]
            .parse()
            .map_err(|e| FormatError::malformed(line, format!("{e}")))?;
        let confidence: f64 = field(f[2], line, "confidence")?;
        let x1: f64 = field(f[3], line, "x1")?;
        let y1: f64 = field(f[4], line, "y1")?;
        let x2: f64 = field(f[5], line, "x2")?;
        let y2: f64 = field(f[6], line, "y2")?;
        let bbox = BBox::new(x1, y1, x2, y2)
            .map_err(|e| FormatError::malformed(line, format!("{e}")))?;
        let det = ScoredBox::new(bbox, confidence, category, frame)
            .map_err(|e| FormatError::malformed(line, format!("{e}")))?;
        frames.entry(frame).or_default().push(det);
    }
    Ok(frames)
}

/// Serialize per-frame detections, frames ascending, line order preserved
/// within each frame.
pub fn write_detections(frames: &BTreeMap<usize, Vec<ScoredBox>>) -> String {
    let mut out = String::new();
    for dets in frames.values() {
        for d in dets {
            out.push_str(&format!(
                "{} {} {} {} {} {} {}\n",
                d.frame, d.category, d.confidence, d.bbox.x1, d.bbox.y1, d.bbox.x2, d.bbox.y2
            ));
        }
    }
    out
}
