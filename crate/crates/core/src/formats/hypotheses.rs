//! Hypothesis/feature table: CSV with a frozen header.
//!
//! The first twelve columns are the feature vector in [`FEATURE_NAMES`]
//! order, followed by provenance (cue, frame, box corners) and the two
//! columns later pipeline stages fill in: `label` (ground-truth verdict)
//! and `score` (classifier probability). Both may be empty. Every consumer
//! validates the header before touching a row, so a reordered or foreign
//! table is rejected up front.

use crate::classifier::Label;
use crate::features::{FeatureVector, FEATURE_COUNT, FEATURE_NAMES};
use crate::geometry::BBox;
use crate::temporal::{Cue, Hypothesis};

use super::{field, FormatError};

/// One row of the hypothesis table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisRow {
    pub features: FeatureVector,
    pub cue: Cue,
    pub frame: usize,
    pub bbox: BBox,
    pub label: Option<Label>,
    pub score: Option<f64>,
}

impl HypothesisRow {
    /// Row for a freshly proposed hypothesis: confidence and track length
    /// are known at proposal time, the remaining features are zero until
    /// the featurize stage recomputes the full vector.
    pub fn skeleton(h: &Hypothesis) -> Self {
        let mut features = [0.0; FEATURE_COUNT];
        features[4] = h.confidence;
        features[11] = h.track_length as f64;
        HypothesisRow {
            features: FeatureVector(features),
            cue: h.cue,
            frame: h.frame,
            bbox: h.bbox,
            label: None,
            score: None,
        }
    }

    /// Reconstruct the hypothesis a row describes. The source id is not
    /// serialized and comes back as 0; stages that need the source box
    /// identify it by verbatim box and confidence equality instead.
    pub fn hypothesis(&self) -> Hypothesis {
        Hypothesis {
            bbox: self.bbox,
            confidence: self.features.0[4],
            cue: self.cue,
            frame: self.frame,
            track_length: self.features.0[11] as u64,
            source_id: 0,
        }
    }
}

fn header() -> String {
    let mut cols: Vec<&str> = FEATURE_NAMES.to_vec();
    cols.extend_from_slice(&["cue", "frame", "x1", "y1", "x2", "y2", "label", "score"]);
    cols.join(",")
}

const N_COLUMNS: usize = FEATURE_COUNT + 8;

/// Bounds checks for the feature components whose ranges are fixed by
/// construction: normalized position in [-0.5, 0.5], sizes in [0, 1],
/// overlap/confidence medians in [0, 1], counts nonnegative.
fn validate_features(f: &[f64; FEATURE_COUNT], line: usize) -> Result<(), FormatError> {
    let checks: [(usize, f64, f64); 12] = [
        (0, -0.5, 0.5),
        (1, -0.5, 0.5),
        (2, 0.0, 1.0),
        (3, 0.0, 1.0),
        (4, 0.0, 1.0),
        (5, 0.0, f64::INFINITY),
        (6, 0.0, 1.0),
        (7, 0.0, 1.0),
        (8, 0.0, f64::INFINITY),
        (9, 0.0, 1.0),
        (10, 0.0, 1.0),
        (11, 0.0, f64::INFINITY),
    ];
    for (i, lo, hi) in checks {
        let v = f[i];
        if !v.is_finite() || !(lo..=hi).contains(&v) {
            return Err(FormatError::malformed(
                line,
                format!("feature {} = {v} outside [{lo}, {hi}]", FEATURE_NAMES[i]),
            ));
        }
    }
    Ok(())
}

/// Parse a hypothesis table, validating the frozen header first.
pub fn parse_hypotheses(text: &str) -> Result<Vec<HypothesisRow>, FormatError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines
        .next()
        .ok_or_else(|| FormatError::Structure("empty hypothesis table, header expected".into()))?;
    let expected = header();
    if first.trim_end() != expected {
        return Err(FormatError::Structure(format!(
            "hypothesis table header mismatch: expected {expected:?}, got {:?}",
            first.trim_end()
        )));
    }
    let mut rows = Vec::new();
    for (line, raw) in lines {
        if raw.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = raw.split(',').collect();
        if cells.len() != N_COLUMNS {
            return Err(FormatError::malformed(
                line,
                format!("expected {N_COLUMNS} cells, got {}", cells.len()),
            ));
        }
        let mut features = [0.0f64; FEATURE_COUNT];
        for (i, slot) in features.iter_mut().enumerate() {
            *slot = field(cells[i], line, FEATURE_NAMES[i])?;
        }
        validate_features(&features, line)?;
        let cue: Cue = cells[FEATURE_COUNT]
            .parse()
            .map_err(|e| FormatError::malformed(line, e))?;
        let frame: usize = field(cells[FEATURE_COUNT + 1], line, "frame index")?;
        let x1: f64 = field(cells[FEATURE_COUNT + 2], line, "x1")?;
        let y1: f64 = field(cells[FEATURE_COUNT + 3], line, "y1")?;
        let x2: f64 = field(cells[FEATURE_COUNT + 4], line, "x2")?;
        let y2: f64 = field(cells[FEATURE_COUNT + 5], line, "y2")?;
        let bbox = BBox::new(x1, y1, x2, y2)
            .map_err(|e| FormatError::malformed(line, format!("{e}")))?;
        let label = match cells[FEATURE_COUNT + 6] {
            "" => None,
            s => Some(
                s.parse::<Label>()
                    .map_err(|e| FormatError::malformed(line, e))?,
            ),
        };
        let score = match cells[FEATURE_COUNT + 7] {
            "" => None,
            s => {
                let v: f64 = field(s, line, "score")?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(FormatError::malformed(
                        line,
                        format!("score {v} outside [0, 1]"),
                    ));
                }
                Some(v)
            }
        };
        rows.push(HypothesisRow {
            features: FeatureVector(features),
            cue,
            frame,
            bbox,
            label,
            score,
        });
    }
    Ok(rows)
}

/// Serialize a hypothesis table with the frozen header.
pub fn write_hypotheses(rows: &[HypothesisRow]) -> String {
    let mut out = header();
    out.push('\n');
    for r in rows {
        let mut cells: Vec<String> = r.features.0.iter().map(f64::to_string).collect();
        cells.push(r.cue.to_string());
        cells.push(r.frame.to_string());
        for c in [r.bbox.x1, r.bbox.y1, r.bbox.x2, r.bbox.y2] {
            cells.push(c.to_string());
        }
        cells.push(r.label.map(|l| l.as_str().to_string()).unwrap_or_default());
        cells.push(r.score.map(|s| s.to_string()).unwrap_or_default());
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
