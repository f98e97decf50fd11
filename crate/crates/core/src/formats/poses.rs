//! Ego pose interchange: headerless CSV `frame,x_m,y_m`, planar position
//! in meters. Frames without a pose are simply absent and drop out of the
//! geo analysis.

use std::collections::BTreeSet;

use super::{data_lines, field, FormatError};

/// Planar ego position on one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseRecord {
    pub frame: usize,
    pub x_m: f64,
    pub y_m: f64,
}

/// Parse poses, sorted by frame. Each frame may carry at most one pose.
pub fn parse_poses(text: &str) -> Result<Vec<PoseRecord>, FormatError> {
    let mut records = Vec::new();
    let mut seen: BTreeSet<usize> = BTreeSet::new();
    for (line, raw) in data_lines(text) {
        let cells: Vec<&str> = raw.trim().split(',').collect();
        if cells.len() != 3 {
            return Err(FormatError::malformed(
                line,
                format!("expected frame,x_m,y_m with 3 cells, got {}", cells.len()),
            ));
        }
        let frame: usize = field(cells[0], line, "frame index")?;
        let x_m: f64 = field(cells[1], line, "x position in meters")?;
        let y_m: f64 = field(cells[2], line, "y position in meters")?;
        if !x_m.is_finite() || !y_m.is_finite() {
            return Err(FormatError::malformed(line, "pose coordinates must be finite"));
        }
        if !seen.insert(frame) {
            return Err(FormatError::malformed(
                line,
                format!("duplicate pose for frame {frame}"),
            ));
        }
        records.push(PoseRecord { frame, x_m, y_m });
    }
    records.sort_by_key(|r| r.frame);
    Ok(records)
}

/// Serialize poses, frames ascending.
pub fn write_poses(records: &[PoseRecord]) -> String {
    let mut sorted: Vec<&PoseRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.frame);
    let mut out = String::new();
    for r in sorted {
        out.push_str(&format!("{},{},{}\n", r.frame, r.x_m, r.y_m));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_example_line() {
        let records = parse_poses("0,5.0,-3.25\n").unwrap();
        assert_eq!(
            records,
            vec![PoseRecord {
                frame: 0,
                x_m: 5.0,
                y_m: -3.25
            }]
        );
    }

    #[test]
    fn duplicate_frame_rejected() {
        let err = parse_poses("0,1.0,1.0\n0,2.0,2.0\n").unwrap_err();
        assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn non_numeric_rejected() {
        assert!(parse_poses("0,east,1.0\n").is_err());
        assert!(parse_poses("0,1.0\n").is_err());
        assert!(parse_poses("0,1.0,NaN\n").is_err());
    }

    #[test]
    fn sorts_by_frame() {
        let records = parse_poses("5,1.0,1.0\n2,0.5,0.5\n").unwrap();
        assert_eq!(records[0].frame, 2);
        assert_eq!(records[1].frame, 5);
    }

    proptest! {
        #[test]
        fn round_trips(
            raw in prop::collection::btree_map(
                0usize..200,
                (-1e4..1e4f64, -1e4..1e4f64),
                0..50,
            )
        ) {
            let records: Vec<PoseRecord> = raw
                .into_iter()
                .map(|(frame, (x_m, y_m))| PoseRecord { frame, x_m, y_m })
                .collect();
            let parsed = parse_poses(&write_poses(&records)).unwrap();
            prop_assert_eq!(parsed, records);
        }
    }
}
