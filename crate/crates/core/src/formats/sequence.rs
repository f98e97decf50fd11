//! Sequence directory layout.
//!
//! A sequence is a directory holding everything recorded for one drive,
//! one artifact per file, named by convention:
//!
//! ```text
//! seq0000/
//!   meta.txt            image size and frame count (required)
//!   gt.txt              ground truth, KITTI tracking label lines
//!   det_left.txt        left-camera detections
//!   det_right.txt       right-camera detections
//!   tracklets.txt       tracker output on the left camera
//!   poses.csv           ego poses in world meters
//!   disparity/
//!     frame_000000.pgm  one right-referenced disparity map per frame
//! ```
//!
//! Only `meta.txt` is mandatory; each stage checks for the inputs it
//! needs. Disparity maps are not loaded eagerly, fetch them per frame
//! via [`disparity_path`].

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::{
    data_lines, field, parse_detections, parse_kitti_labels, parse_poses, parse_tracklets,
    FormatError, GroundTruthObject, PoseRecord,
};
use crate::geometry::ScoredBox;
use crate::temporal::TrackletBox;

pub const META_FILE: &str = "meta.txt";
pub const GT_FILE: &str = "gt.txt";
pub const DET_LEFT_FILE: &str = "det_left.txt";
pub const DET_RIGHT_FILE: &str = "det_right.txt";
pub const TRACKLETS_FILE: &str = "tracklets.txt";
pub const POSES_FILE: &str = "poses.csv";
pub const DISPARITY_DIR: &str = "disparity";

/// Where the disparity map for one frame lives under a sequence root.
pub fn disparity_path(root: &Path, frame: usize) -> PathBuf {
    root.join(DISPARITY_DIR).join(format!("frame_{frame:06}.pgm"))
}

/// Contents of `meta.txt`: one `key value` line per field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SequenceMeta {
    pub image_width: usize,
    pub image_height: usize,
    pub frames: usize,
}

pub fn parse_meta(text: &str) -> Result<SequenceMeta, FormatError> {
    let mut image_width = None;
    let mut image_height = None;
    let mut frames = None;
    for (ln, line) in data_lines(text) {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [key, value] = fields[..] else {
            return Err(FormatError::malformed(
                ln,
                format!("expected \"key value\", got {line:?}"),
            ));
        };
        let slot = match key {
            "image_width" => &mut image_width,
            "image_height" => &mut image_height,
            "frames" => &mut frames,
            other => {
                return Err(FormatError::malformed(
                    ln,
                    format!("unknown meta key {other:?}"),
                ))
            }
        };
        if slot.replace(field::<usize>(value, ln, "a non-negative integer")?).is_some() {
            return Err(FormatError::malformed(
                ln,
                format!("duplicate meta key {key:?}"),
            ));
        }
    }
    let require = |slot: Option<usize>, key: &str| {
        slot.ok_or_else(|| FormatError::Structure(format!("meta.txt is missing {key:?}")))
    };
    let meta = SequenceMeta {
        image_width: require(image_width, "image_width")?,
        image_height: require(image_height, "image_height")?,
        frames: require(frames, "frames")?,
    };
    if meta.image_width == 0 || meta.image_height == 0 {
        return Err(FormatError::Structure(
            "image dimensions must be positive".into(),
        ));
    }
    Ok(meta)
}

pub fn write_meta(meta: &SequenceMeta) -> String {
    format!(
        "image_width {}\nimage_height {}\nframes {}\n",
        meta.image_width, meta.image_height, meta.frames
    )
}

/// Everything a sequence directory held, minus per-frame disparity maps.
#[derive(Debug, Clone)]
pub struct SequenceData {
    pub meta: SequenceMeta,
    pub ground_truth: Option<BTreeMap<usize, Vec<GroundTruthObject>>>,
    pub detections_left: Option<BTreeMap<usize, Vec<ScoredBox>>>,
    pub detections_right: Option<BTreeMap<usize, Vec<ScoredBox>>>,
    pub tracklets: Option<BTreeMap<usize, Vec<TrackletBox>>>,
    pub poses: Option<Vec<PoseRecord>>,
}

fn load_optional<T>(
    path: &Path,
    parse: impl FnOnce(&str) -> Result<T, FormatError>,
) -> Result<Option<T>, FormatError> {
    let in_file = |e: FormatError| e.in_file(path.display().to_string());
    match fs::read_to_string(path) {
        Ok(text) => parse(&text).map(Some).map_err(in_file),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(in_file(FormatError::from(e))),
    }
}

/// Load a sequence directory. `min_height` and `collapse_classes` apply
/// to the ground-truth file, matching [`parse_kitti_labels`].
pub fn load_sequence(
    root: &Path,
    min_height: f64,
    collapse_classes: bool,
) -> Result<SequenceData, FormatError> {
    let meta_path = root.join(META_FILE);
    let meta = load_optional(&meta_path, parse_meta)?.ok_or_else(|| {
        FormatError::Structure(format!("missing {}", meta_path.display()))
    })?;
    Ok(SequenceData {
        meta,
        ground_truth: load_optional(&root.join(GT_FILE), |t| {
            parse_kitti_labels(t, min_height, collapse_classes)
        })?,
        detections_left: load_optional(&root.join(DET_LEFT_FILE), parse_detections)?,
        detections_right: load_optional(&root.join(DET_RIGHT_FILE), parse_detections)?,
        tracklets: load_optional(&root.join(TRACKLETS_FILE), parse_tracklets)?,
        poses: load_optional(&root.join(POSES_FILE), parse_poses)?,
    })
}
