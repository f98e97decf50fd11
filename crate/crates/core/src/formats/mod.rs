//! On-disk interchange formats.
//!
//! Every artifact the pipeline exchanges is a small text or PGM file, so
//! external detectors, trackers and disparity methods integrate by writing
//! these formats rather than linking against this crate:
//!
//! * ground truth: KITTI tracking label lines ([`labels`])
//! * detections: `frame category confidence x1 y1 x2 y2` ([`detections`])
//! * tracklets: `frame track_id confidence x1 y1 x2 y2` ([`tracklets`])
//! * disparity: 16-bit binary PGM, 1/256 px fixed point ([`disparity`])
//! * ego poses: `frame,x_m,y_m` CSV ([`poses`])
//! * hypotheses and features: fixed-header CSV ([`hypotheses`])
//! * trained forests: versioned text document ([`model`])
//!
//! Parsers reject malformed input with the offending line number instead
//! of skipping; parse → write → parse is the identity for every format.

pub mod detections;
pub mod disparity;
pub mod hypotheses;
pub mod labels;
pub mod model;
pub mod poses;
pub mod sequence;
pub mod tracklets;

pub use detections::{parse_detections, write_detections};
pub use disparity::{parse_disparity, write_disparity};
pub use hypotheses::{parse_hypotheses, write_hypotheses, HypothesisRow};
pub use labels::{parse_kitti_labels, write_kitti_labels, GroundTruthObject};
pub use model::{parse_model, write_model};
pub use poses::{parse_poses, write_poses, PoseRecord};
pub use sequence::{load_sequence, SequenceData, SequenceMeta};
pub use tracklets::{parse_tracklets, write_tracklets};

use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("{0}")]
    Structure(String),
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: Box<FormatError>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl FormatError {
    pub fn malformed(line: usize, msg: impl Into<String>) -> Self {
        FormatError::Malformed {
            line,
            msg: msg.into(),
        }
    }

    /// Wrap an error with the file it came from.
    pub fn in_file(self, path: impl Into<String>) -> Self {
        FormatError::File {
            path: path.into(),
            source: Box::new(self),
        }
    }
}

/// Parse one whitespace- or comma-separated field, naming the field and
/// line on failure.
pub(crate) fn field<T: FromStr>(raw: &str, line: usize, what: &str) -> Result<T, FormatError> {
    raw.parse().map_err(|_| {
        FormatError::malformed(line, format!("expected {what}, got {raw:?}"))
    })
}

/// Split a line into whitespace-separated fields, requiring at least
/// `min` of them.
pub(crate) fn split_fields(
    text: &str,
    line: usize,
    min: usize,
) -> Result<Vec<&str>, FormatError> {
    let fields: Vec<&str> = text.split_whitespace().collect();
    if fields.len() < min {
        return Err(FormatError::malformed(
            line,
            format!("expected at least {min} fields, got {}", fields.len()),
        ));
    }
    Ok(fields)
}

/// Numbered non-empty lines of a text document (1-based, as editors count).
pub(crate) fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty())
}
