//! Tracklet interchange: `frame track_id confidence x1 y1 x2 y2`.
//!
//! The file must contain one box per live track per frame, including the
//! tracker's predicted boxes on frames without an associated detection;
//! those predicted boxes are the ones the temporal cue inspects. Track
//! length is reconstructed from the file as frames elapsed since the
//! track's first appearance, inclusive.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};

use crate::geometry::BBox;
use crate::temporal::TrackletBox;

use super::{data_lines, field, split_fields, FormatError};

/// Parse tracklets into per-frame lists, preserving line order within a
/// frame. A `(frame, track_id)` pair may appear only once.
pub fn parse_tracklets(text: &str) -> Result<BTreeMap<usize, Vec<TrackletBox>>, FormatError> {
    struct RawRow {
        track_id: u64,
        confidence: f64,
        bbox: BBox,
    }
    let mut rows: BTreeMap<usize, Vec<RawRow>> = BTreeMap::new();
    let mut seen: BTreeSet<(usize, u64)> = BTreeSet::new();
    let mut first_frame: BTreeMap<u64, usize> = BTreeMap::new();
    for (line, raw) in data_lines(text) {
        let f = split_fields(raw, line, 7)?;
        let frame: usize = field(f[0], line, "frame index")?;
        let track_id: u64 = field(f[1], line, "track id")?;
        let confidence: f64 = field(f[2], line, "confidence")?;
        if !(0.0..=1.0).contains(&confidence) {
            return Err(FormatError::malformed(
                line,
                format!("confidence {confidence} outside [0, 1]"),
            ));
        }
        let x1: f64 = field(f[3], line, "x1")?;
        let y1: f64 = field(f[4], line, "y1")?;
        let x2: f64 = field(f[5], line, "x2")?;
        let y2: f64 = field(f[6], line, "y2")?;
        let bbox = BBox::new(x1, y1, x2, y2)
            .map_err(|e| FormatError::malformed(line, format!("{e}")))?;
        if !seen.insert((frame, track_id)) {
            return Err(FormatError::malformed(
                line,
                format!("duplicate box for track {track_id} on frame {frame}"),
            ));
        }
        match first_frame.entry(track_id) {
            Entry::Vacant(e) => {
                e.insert(frame);
            }
            Entry::Occupied(mut e) => {
                if frame < *e.get() {
                    e.insert(frame);
                }
            }
        }
        rows.entry(frame).or_default().push(RawRow {
            track_id,
            confidence,
            bbox,
        });
    }
    Ok(rows
        .into_iter()
        .map(|(frame, rows)| {
            let boxes = rows
                .into_iter()
                .map(|r| TrackletBox {
                    track_id: r.track_id,
                    bbox: r.bbox,
                    confidence: r.confidence,
                    frame,
                    track_length: (frame - first_frame[&r.track_id] + 1) as u64,
                })
                .collect();
            (frame, boxes)
        })
        .collect())
}

/// Serialize tracklet boxes, frames ascending, line order preserved
/// within each frame.
pub fn write_tracklets(frames: &BTreeMap<usize, Vec<TrackletBox>>) -> String {
    let mut out = String::new();
    for (frame, boxes) in frames {
        for t in boxes {
            out.push_str(&format!(
                "{frame} {} {} {} {} {} {}\n",
                t.track_id, t.confidence, t.bbox.x1, t.bbox.y1, t.bbox.x2, t.bbox.y2
            ));
        }
    }
    out
}

/// Group a flat tracker output stream by frame for serialization.
pub fn group_by_frame(boxes: Vec<TrackletBox>) -> BTreeMap<usize, Vec<TrackletBox>> {
    let mut frames: BTreeMap<usize, Vec<TrackletBox>> = BTreeMap::new();
    for b in boxes {
        frames.entry(b.frame).or_default().push(b);
    }
    frames
}
