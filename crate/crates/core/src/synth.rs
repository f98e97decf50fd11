//! Synthetic driving sequences with known ground truth and planted
//! detector failures.
//!
//! Objects are rectangles moving at constant velocity in front of a
//! rectified stereo pair; nothing is rasterized except the disparity
//! map, since the pipeline consumes only boxes and disparity. The
//! simulated detector drops each box with a configured miss probability
//! (the misses the pipeline must find, recorded in an oracle list) and
//! emits two kinds of false positives (the artifacts the classifier must
//! reject): ghost boxes in the empty sky band and loose duplicates of
//! detected objects. One undersized object per sequence exercises the
//! ignore path end to end.
//!
//! All geometry lands on the 1/256 px grid the disparity format stores,
//! so with coordinate jitter disabled the planted maps reproduce left
//! boxes from right boxes exactly.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::classifier::{Label, LabeledHypothesis};
use crate::formats::sequence::{
    disparity_path, write_meta, SequenceMeta, DET_LEFT_FILE, DET_RIGHT_FILE, DISPARITY_DIR,
    GT_FILE, META_FILE, POSES_FILE, TRACKLETS_FILE,
};
use crate::formats::{
    data_lines, field, write_detections, write_disparity, write_kitti_labels, write_poses,
    write_tracklets, FormatError, GroundTruthObject, PoseRecord,
};
use crate::geometry::{iou, BBox, Category, ScoredBox};
use crate::stereo::{pixel_span, DisparityMap};
use crate::temporal::{track_sequence, TrackerConfig};

/// File holding the planted misses of one sequence, CSV
/// `frame,track_id,x1,y1,x2,y2`.
pub const ORACLE_FILE: &str = "oracle.csv";

/// Pairwise ground-truth boxes stay below this IoU, so a detection or
/// duplicate near one object can never match a neighbor at the 0.5
/// matching threshold.
const MAX_GT_OVERLAP: f64 = 0.1;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Knobs of the synthetic world.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_sequences: usize,
    pub frames_per_sequence: usize,
    pub image_width: usize,
    pub image_height: usize,
    pub min_objects: usize,
    pub max_objects: usize,
    /// Velocity bounds, px/frame per axis.
    pub max_velocity_x: f64,
    pub max_velocity_y: f64,
    /// Depth range in meters; disparity follows d = focal_baseline / Z.
    pub min_depth_m: f64,
    pub max_depth_m: f64,
    /// Product of focal length (px) and stereo baseline (m).
    pub focal_baseline: f64,
    /// Probability that the detector drops an object in one camera.
    pub miss_prob: f64,
    /// Per-object per-frame probability of one false-positive detection.
    pub fp_rate: f64,
    /// Half-width of the confidence band around 0.85 for real detections.
    pub conf_noise: f64,
    /// Coordinate jitter half-width applied to each detected box edge.
    pub jitter_px: f64,
    /// Fraction of disparity pixels marked invalid.
    pub speckle_fraction: f64,
    /// Disparity of everything that is not an object.
    pub background_disparity: f64,
    /// Draw right-camera misses independently of left-camera misses
    /// instead of mirroring them.
    pub independent_stereo: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 42,
            n_sequences: 20,
            frames_per_sequence: 100,
            image_width: 512,
            image_height: 256,
            min_objects: 4,
            max_objects: 7,
            max_velocity_x: 0.75,
            max_velocity_y: 0.25,
            min_depth_m: 10.0,
            max_depth_m: 50.0,
            focal_baseline: 400.0,
            miss_prob: 0.2,
            fp_rate: 0.05,
            conf_noise: 0.1,
            jitter_px: 2.0,
            speckle_fraction: 0.05,
            background_disparity: 1.5,
            independent_stereo: true,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: String| Err(SynthError::BadConfig(msg));
        if self.image_width == 0 || self.image_height == 0 {
            return bad("image dimensions must be positive".into());
        }
        if self.image_width < 256 || self.image_height < 128 {
            return bad("image must be at least 256x128 to fit objects and sky".into());
        }
        if self.min_objects == 0 || self.min_objects > self.max_objects {
            return bad(format!(
                "object count range {}..={} is empty or zero",
                self.min_objects, self.max_objects
            ));
        }
        if self.frames_per_sequence == 0 || self.n_sequences == 0 {
            return bad("need at least one sequence and one frame".into());
        }
        for (name, p) in [
            ("miss_prob", self.miss_prob),
            ("fp_rate", self.fp_rate),
            ("speckle_fraction", self.speckle_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be in [0, 1], got {p}"));
            }
        }
        if self.speckle_fraction > 0.5 {
            return bad("speckle_fraction above 0.5 starves the median filter".into());
        }
        if !(0.0..=5.0).contains(&self.jitter_px) {
            return bad(format!("jitter_px must be in [0, 5], got {}", self.jitter_px));
        }
        if !(0.0..=0.2).contains(&self.conf_noise) {
            return bad(format!("conf_noise must be in [0, 0.2], got {}", self.conf_noise));
        }
        if !(self.max_velocity_x.is_finite() && (0.0..=2.0).contains(&self.max_velocity_x))
            || !(self.max_velocity_y.is_finite() && (0.0..=1.0).contains(&self.max_velocity_y))
        {
            return bad("velocity bounds must be within 2.0 px/frame horizontal, 1.0 vertical".into());
        }
        if !(self.min_depth_m > 0.0 && self.min_depth_m < self.max_depth_m) {
            return bad("depth range must be positive and nonempty".into());
        }
        if self.focal_baseline <= 0.0 || !self.focal_baseline.is_finite() {
            return bad("focal_baseline must be positive".into());
        }
        let d_max = self.focal_baseline / self.min_depth_m;
        if d_max >= self.image_width as f64 / 2.0 {
            return bad("nearest depth yields disparities wider than half the image".into());
        }
        if self.background_disparity <= 0.0
            || self.background_disparity >= self.focal_baseline / self.max_depth_m
        {
            return bad("background disparity must sit behind the farthest object".into());
        }
        let max_drift = self.max_velocity_x * (self.frames_per_sequence - 1) as f64;
        if d_max + max_drift + 80.0 > self.image_width as f64 {
            return bad("frames, velocity and disparity leave no room for object spawns".into());
        }
        Ok(())
    }
}

/// One planted detector miss: the left-camera ground-truth box the
/// simulated detector dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleMiss {
    pub frame: usize,
    pub track_id: u64,
    pub bbox: BBox,
}

pub fn parse_oracle(text: &str) -> Result<Vec<OracleMiss>, FormatError> {
    let mut misses = Vec::new();
    for (ln, line) in data_lines(text) {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != 6 {
            return Err(FormatError::malformed(
                ln,
                format!("expected 6 comma-separated cells, got {}", cells.len()),
            ));
        }
        let frame = field(cells[0], ln, "a frame index")?;
        let track_id = field(cells[1], ln, "a track id")?;
        let coords: Vec<f64> = cells[2..]
            .iter()
            .map(|c| field(c, ln, "a coordinate"))
            .collect::<Result<_, _>>()?;
        let bbox = BBox::new(coords[0], coords[1], coords[2], coords[3])
            .map_err(|e| FormatError::malformed(ln, e.to_string()))?;
        misses.push(OracleMiss { frame, track_id, bbox });
    }
    Ok(misses)
}

pub fn write_oracle(misses: &[OracleMiss]) -> String {
    let mut out = String::new();
    for m in misses {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            m.frame, m.track_id, m.bbox.x1, m.bbox.y1, m.bbox.x2, m.bbox.y2
        ));
    }
    out
}

/// Splitmix-style per-sequence seed derivation, so sequences are
/// independent and can be generated in any order.
fn sequence_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed
        .wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform draw from the 1/256 px grid points inside [lo, hi]. Empty
/// ranges (no grid point between the bounds) return None.
fn grid_between(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Option<f64> {
    let lo_i = (lo * 256.0).ceil() as i64;
    let hi_i = (hi * 256.0).floor() as i64;
    if hi_i < lo_i {
        return None;
    }
    Some(rng.random_range(lo_i..=hi_i) as f64 / 256.0)
}

struct ObjectTrack {
    track_id: u64,
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    vx: f64,
    vy: f64,
    disparity: f64,
    is_runt: bool,
}

impl ObjectTrack {
    fn left_bbox(&self, frame: usize) -> BBox {
        let x = self.x0 + self.vx * frame as f64;
        let y = self.y0 + self.vy * frame as f64;
        BBox::new(x, y, x + self.w, y + self.h).expect("positive object size")
    }

    fn right_bbox(&self, frame: usize) -> BBox {
        self.left_bbox(frame).shifted_x(-self.disparity)
    }
}

/// Top of the band where objects may appear; everything above is sky
/// reserved for ghost false positives.
const SKY_BAND: f64 = 32.0;
const OBJECT_TOP: f64 = 40.0;

fn sample_track(
    rng: &mut ChaCha8Rng,
    cfg: &SynthConfig,
    accepted: &[ObjectTrack],
    track_id: u64,
    is_runt: bool,
) -> Option<ObjectTrack> {
    let frames = cfg.frames_per_sequence;
    let d_lo = cfg.focal_baseline / cfg.max_depth_m;
    let d_hi = cfg.focal_baseline / cfg.min_depth_m;
    'attempt: for _ in 0..50 {
        let (w, h) = if is_runt {
            (grid_between(rng, 14.0, 24.0)?, grid_between(rng, 12.0, 20.0)?)
        } else {
            (grid_between(rng, 30.0, 80.0)?, grid_between(rng, 26.0, 64.0)?)
        };
        let vx = grid_between(rng, -cfg.max_velocity_x, cfg.max_velocity_x)?;
        let vy = grid_between(rng, -cfg.max_velocity_y, cfg.max_velocity_y)?;
        let disparity = grid_between(rng, d_lo, d_hi)?;

        let drift_x = vx * (frames - 1) as f64;
        let drift_y = vy * (frames - 1) as f64;
        // keep the left box inside the image and the right box inside
        // the left image edge for every frame
        let x_lo = disparity + (-drift_x).max(0.0);
        let x_hi = cfg.image_width as f64 - w - drift_x.max(0.0);
        let y_lo = OBJECT_TOP + (-drift_y).max(0.0);
        let y_hi = cfg.image_height as f64 - h - drift_y.max(0.0);
        let x0 = match grid_between(rng, x_lo, x_hi) {
            Some(v) => v,
            None => continue,
        };
        let y0 = match grid_between(rng, y_lo, y_hi) {
            Some(v) => v,
            None => continue,
        };

        let candidate = ObjectTrack {
            track_id,
            x0,
            y0,
            w,
            h,
            vx,
            vy,
            disparity,
            is_runt,
        };
        for f in 0..frames {
            let b = candidate.left_bbox(f);
            if accepted
                .iter()
                .any(|o| iou(&b, &o.left_bbox(f)) > MAX_GT_OVERLAP)
            {
                continue 'attempt;
            }
        }
        return Some(candidate);
    }
    None
}

fn jitter_box(rng: &mut ChaCha8Rng, b: &BBox, half_width: f64) -> BBox {
    if half_width == 0.0 {
        return *b;
    }
    let mut wiggle = |v: f64| v + grid_between(rng, -half_width, half_width).unwrap();
    let (x1, y1, x2, y2) = (wiggle(b.x1), wiggle(b.y1), wiggle(b.x2), wiggle(b.y2));
    BBox::new(x1, y1, x2, y2).expect("jitter is capped well below the minimum box size")
}

/// Loose duplicate of a detected object: every edge off by 5 to 9 px.
fn loose_duplicate(rng: &mut ChaCha8Rng, b: &BBox) -> BBox {
    let mut wiggle = |v: f64| {
        let magnitude = grid_between(rng, 5.0, 9.0).unwrap();
        if rng.random_bool(0.5) {
            v + magnitude
        } else {
            v - magnitude
        }
    };
    let (x1, y1, x2, y2) = (wiggle(b.x1), wiggle(b.y1), wiggle(b.x2), wiggle(b.y2));
    BBox::new(x1, y1, x2, y2).expect("duplicates derive from full-size objects")
}

fn ghost_box(rng: &mut ChaCha8Rng, cfg: &SynthConfig) -> BBox {
    let w = grid_between(rng, 16.0, 40.0).unwrap();
    let h = grid_between(rng, 10.0, 22.0).unwrap();
    let x = grid_between(rng, 0.0, cfg.image_width as f64 - w).unwrap();
    let y = grid_between(rng, 2.0, SKY_BAND - h).unwrap();
    BBox::new(x, y, x + w, y + h).expect("sky band fits ghost sizes")
}

fn real_confidence(rng: &mut ChaCha8Rng, cfg: &SynthConfig) -> f64 {
    grid_between(rng, 0.85 - cfg.conf_noise, 0.85 + cfg.conf_noise)
        .unwrap()
        .clamp(1.0 / 256.0, 1.0)
}

fn fp_confidence(rng: &mut ChaCha8Rng) -> f64 {
    grid_between(rng, 0.55, 0.85).unwrap()
}

fn paint_disparity(
    rng: &mut ChaCha8Rng,
    cfg: &SynthConfig,
    objects: &[ObjectTrack],
    frame: usize,
) -> DisparityMap {
    let (w, h) = (cfg.image_width, cfg.image_height);
    let mut values = vec![cfg.background_disparity; w * h];

    // far to near, so the nearest object wins contested pixels
    let mut order: Vec<&ObjectTrack> = objects.iter().collect();
    order.sort_by(|a, b| a.disparity.total_cmp(&b.disparity));
    for obj in order {
        let b = obj.right_bbox(frame);
        let xs = pixel_span(b.x1, b.x2, w);
        let ys = pixel_span(b.y1, b.y2, h);
        for y in ys {
            for x in xs.clone() {
                values[y * w + x] = obj.disparity;
            }
        }
    }

    let valid: Vec<bool> = (0..w * h)
        .map(|_| !rng.random_bool(cfg.speckle_fraction))
        .collect();
    DisparityMap::from_parts(w, h, values, valid).expect("planted disparities are finite")
}

/// All in-memory artifacts of one generated sequence.
struct SequenceArtifacts {
    ground_truth: BTreeMap<usize, Vec<GroundTruthObject>>,
    detections_left: BTreeMap<usize, Vec<ScoredBox>>,
    detections_right: BTreeMap<usize, Vec<ScoredBox>>,
    disparity: Vec<DisparityMap>,
    poses: Vec<PoseRecord>,
    oracle: Vec<OracleMiss>,
}

fn generate_sequence(cfg: &SynthConfig, seq_seed: u64) -> SequenceArtifacts {
    let mut rng = ChaCha8Rng::seed_from_u64(seq_seed);

    let n_objects = rng.random_range(cfg.min_objects..=cfg.max_objects);
    let mut objects: Vec<ObjectTrack> = Vec::new();
    for i in 0..n_objects {
        if let Some(track) = sample_track(&mut rng, cfg, &objects, i as u64, false) {
            objects.push(track);
        }
    }
    let runt_id = objects.len() as u64;
    if let Some(runt) = sample_track(&mut rng, cfg, &objects, runt_id, true) {
        objects.push(runt);
    }

    let speed = grid_between(&mut rng, 0.8, 1.2).unwrap();
    let heading: f64 = rng.random_range(0.0..std::f64::consts::TAU);

    let mut artifacts = SequenceArtifacts {
        ground_truth: BTreeMap::new(),
        detections_left: BTreeMap::new(),
        detections_right: BTreeMap::new(),
        disparity: Vec::new(),
        poses: Vec::new(),
        oracle: Vec::new(),
    };

    for frame in 0..cfg.frames_per_sequence {
        let gt_boxes: Vec<BBox> = objects.iter().map(|o| o.left_bbox(frame)).collect();
        let right_gt_boxes: Vec<BBox> = objects.iter().map(|o| o.right_bbox(frame)).collect();
        let gt_row: Vec<GroundTruthObject> = objects
            .iter()
            .zip(&gt_boxes)
            .map(|(o, b)| GroundTruthObject {
                bbox: *b,
                category: Category::Car,
                track_id: o.track_id as i64,
                is_ignore: o.is_runt,
            })
            .collect();

        let mut left = Vec::new();
        let mut right = Vec::new();
        for (i, obj) in objects.iter().enumerate() {
            let missed_left = rng.random_bool(cfg.miss_prob);
            let missed_right = if cfg.independent_stereo {
                rng.random_bool(cfg.miss_prob)
            } else {
                missed_left
            };
            if missed_left {
                if !obj.is_runt {
                    artifacts.oracle.push(OracleMiss {
                        frame,
                        track_id: obj.track_id,
                        bbox: gt_boxes[i],
                    });
                }
            } else {
                let b = jitter_box(&mut rng, &gt_boxes[i], cfg.jitter_px);
                let c = real_confidence(&mut rng, cfg);
                left.push(ScoredBox::new(b, c, Category::Car, frame).unwrap());
            }
            if !missed_right {
                let b = jitter_box(&mut rng, &right_gt_boxes[i], cfg.jitter_px);
                let c = real_confidence(&mut rng, cfg);
                right.push(ScoredBox::new(b, c, Category::Car, frame).unwrap());
            }

            // false positives, drawn per camera
            for (camera, camera_boxes, missed) in [
                (&mut left, &gt_boxes, missed_left),
                (&mut right, &right_gt_boxes, missed_right),
            ] {
                if !rng.random_bool(cfg.fp_rate) {
                    continue;
                }
                let duplicate = !obj.is_runt && !missed && rng.random_bool(0.5);
                let b = if duplicate {
                    let candidate = loose_duplicate(&mut rng, &camera_boxes[i]);
                    let near_other = camera_boxes
                        .iter()
                        .enumerate()
                        .any(|(j, g)| j != i && iou(&candidate, g) >= 0.45);
                    if near_other {
                        ghost_box(&mut rng, cfg)
                    } else {
                        candidate
                    }
                } else {
                    ghost_box(&mut rng, cfg)
                };
                let c = fp_confidence(&mut rng);
                camera.push(ScoredBox::new(b, c, Category::Car, frame).unwrap());
            }
        }

        artifacts.ground_truth.insert(frame, gt_row);
        artifacts.detections_left.insert(frame, left);
        artifacts.detections_right.insert(frame, right);
        artifacts
            .disparity
            .push(paint_disparity(&mut rng, cfg, &objects, frame));
        artifacts.poses.push(PoseRecord {
            frame,
            x_m: frame as f64 * speed * heading.cos(),
            y_m: frame as f64 * speed * heading.sin(),
        });
    }
    artifacts
}

/// Generate `config.n_sequences` sequence directories under `out_dir`
/// and return their paths in order.
pub fn generate(config: &SynthConfig, out_dir: &Path) -> Result<Vec<PathBuf>, SynthError> {
    config.validate()?;
    let mut dirs = Vec::with_capacity(config.n_sequences);
    for s in 0..config.n_sequences {
        let artifacts = generate_sequence(config, sequence_seed(config.seed, s));
        let root = out_dir.join(format!("seq{s:04}"));
        fs::create_dir_all(root.join(DISPARITY_DIR))?;

        let meta = SequenceMeta {
            image_width: config.image_width,
            image_height: config.image_height,
            frames: config.frames_per_sequence,
        };
        fs::write(root.join(META_FILE), write_meta(&meta))?;
        fs::write(
            root.join(GT_FILE),
            write_kitti_labels(&artifacts.ground_truth),
        )?;
        fs::write(
            root.join(DET_LEFT_FILE),
            write_detections(&artifacts.detections_left),
        )?;
        fs::write(
            root.join(DET_RIGHT_FILE),
            write_detections(&artifacts.detections_right),
        )?;

        let per_frame: Vec<Vec<ScoredBox>> = (0..config.frames_per_sequence)
            .map(|f| artifacts.detections_left[&f].clone())
            .collect();
        let tracklets = track_sequence(&per_frame, TrackerConfig::default());
        fs::write(
            root.join(TRACKLETS_FILE),
            write_tracklets(&crate::formats::tracklets::group_by_frame(tracklets)),
        )?;

        fs::write(root.join(POSES_FILE), write_poses(&artifacts.poses))?;
        fs::write(root.join(ORACLE_FILE), write_oracle(&artifacts.oracle))?;
        for (frame, map) in artifacts.disparity.iter().enumerate() {
            fs::write(disparity_path(&root, frame), write_disparity(map)?)?;
        }
        dirs.push(root);
    }
    Ok(dirs)
}

/// Outcome of checking labeled hypotheses against the planted misses.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    /// Hypotheses labeled as valid errors.
    pub valid_errors: usize,
    /// Of those, how many overlap a planted miss at IoU >= 0.5.
    pub confirmed: usize,
    /// One line per valid error with no planted miss behind it.
    pub disagreements: Vec<String>,
}

impl OracleCheck {
    /// Fraction of valid-error labels confirmed by the oracle; vacuously
    /// 1 when nothing was labeled a valid error.
    pub fn agreement(&self) -> f64 {
        if self.valid_errors == 0 {
            return 1.0;
        }
        self.confirmed as f64 / self.valid_errors as f64
    }
}

/// Verify every valid-error label against the oracle miss list of the
/// same sequence: each one must overlap a planted miss of its frame at
/// IoU >= 0.5.
pub fn oracle_label_check(
    labeled: &[LabeledHypothesis],
    oracle: &[OracleMiss],
) -> OracleCheck {
    let mut by_frame: BTreeMap<usize, Vec<&OracleMiss>> = BTreeMap::new();
    for miss in oracle {
        by_frame.entry(miss.frame).or_default().push(miss);
    }
    let mut check = OracleCheck {
        valid_errors: 0,
        confirmed: 0,
        disagreements: Vec::new(),
    };
    for lh in labeled {
        if lh.label != Label::ValidError {
            continue;
        }
        check.valid_errors += 1;
        let p = &lh.provenance;
        let hit = by_frame
            .get(&p.frame)
            .is_some_and(|misses| misses.iter().any(|m| iou(&m.bbox, &p.bbox) >= 0.5));
        if hit {
            check.confirmed += 1;
        } else {
            check.disagreements.push(format!(
                "{} frame {}: valid_error at ({}, {}, {}, {}) has no planted miss",
                p.sequence, p.frame, p.bbox.x1, p.bbox.y1, p.bbox.x2, p.bbox.y2
            ));
        }
    }
    check
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{label_hypotheses, Provenance};
    use crate::features::FeatureVector;
    use crate::formats::labels::DEFAULT_MIN_HEIGHT;
    use crate::formats::sequence::load_sequence;
    use crate::formats::parse_disparity;
    use crate::stereo::{median_disparity, shift_detections, MIN_VALID_FRACTION};
    use crate::temporal::{generate_temporal_hypotheses, Cue};

    fn small_config() -> SynthConfig {
        SynthConfig {
            n_sequences: 2,
            frames_per_sequence: 12,
            ..SynthConfig::default()
        }
    }

    fn read_tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
        let mut files = BTreeMap::new();
        let mut stack = vec![root.to_path_buf()];
        while let Some(dir) = stack.pop() {
            for entry in fs::read_dir(&dir).unwrap() {
                let path = entry.unwrap().path();
                if path.is_dir() {
                    stack.push(path);
                } else {
                    let rel = path.strip_prefix(root).unwrap().to_path_buf();
                    files.insert(rel, fs::read(&path).unwrap());
                }
            }
        }
        files
    }

    #[test]
    fn same_seed_gives_byte_identical_trees() {
        let cfg = small_config();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        generate(&cfg, a.path()).unwrap();
        generate(&cfg, b.path()).unwrap();
        let ta = read_tree(a.path());
        let tb = read_tree(b.path());
        assert_eq!(ta.len(), tb.len());
        assert!(!ta.is_empty());
        assert_eq!(ta, tb);
    }

    #[test]
    fn different_seeds_differ() {
        let cfg = small_config();
        let other = SynthConfig { seed: 43, ..small_config() };
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        generate(&cfg, a.path()).unwrap();
        generate(&other, b.path()).unwrap();
        assert_ne!(read_tree(a.path()), read_tree(b.path()));
    }

    #[test]
    fn perfect_detector_leaves_nothing_to_find() {
        let cfg = SynthConfig {
            miss_prob: 0.0,
            fp_rate: 0.0,
            n_sequences: 1,
            frames_per_sequence: 15,
            ..SynthConfig::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let dirs = generate(&cfg, dir.path()).unwrap();
        let root = &dirs[0];

        let oracle = parse_oracle(&fs::read_to_string(root.join(ORACLE_FILE)).unwrap()).unwrap();
        assert!(oracle.is_empty());

        let data = load_sequence(root, DEFAULT_MIN_HEIGHT, true).unwrap();
        let dets = data.detections_left.unwrap();
        let tracklets = data.tracklets.unwrap();
        let no_tracklets = Vec::new();
        let no_dets = Vec::new();
        for f in 0..cfg.frames_per_sequence {
            let hyps = generate_temporal_hypotheses(
                tracklets.get(&f).unwrap_or(&no_tracklets),
                dets.get(&f).unwrap_or(&no_dets),
                0.5,
            );
            assert!(hyps.is_empty(), "frame {f} produced {}", hyps.len());
        }
    }

    #[test]
    fn certain_misses_fill_the_oracle_every_frame() {
        let cfg = SynthConfig {
            miss_prob: 1.0,
            fp_rate: 0.0,
            n_sequences: 1,
            frames_per_sequence: 10,
            ..SynthConfig::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let dirs = generate(&cfg, dir.path()).unwrap();
        let root = &dirs[0];

        let oracle = parse_oracle(&fs::read_to_string(root.join(ORACLE_FILE)).unwrap()).unwrap();
        let data = load_sequence(root, DEFAULT_MIN_HEIGHT, true).unwrap();
        let gt = data.ground_truth.unwrap();
        let full_size = gt[&0].iter().filter(|g| !g.is_ignore).count();
        assert!(full_size >= cfg.min_objects);
        assert_eq!(oracle.len(), full_size * cfg.frames_per_sequence);
        assert!(data.detections_left.unwrap().values().all(Vec::is_empty));
    }

    #[test]
    fn ground_truth_stays_nearly_disjoint_and_has_one_runt() {
        let dir = tempfile::tempdir().unwrap();
        let dirs = generate(&small_config(), dir.path()).unwrap();
        for root in &dirs {
            let data = load_sequence(root, DEFAULT_MIN_HEIGHT, true).unwrap();
            let gt = data.ground_truth.unwrap();
            for objects in gt.values() {
                let runts = objects.iter().filter(|g| g.is_ignore).count();
                assert_eq!(runts, 1);
                for (i, a) in objects.iter().enumerate() {
                    for b in &objects[i + 1..] {
                        assert!(iou(&a.bbox, &b.bbox) <= MAX_GT_OVERLAP);
                    }
                }
            }
        }
    }

    #[test]
    fn unjittered_disparity_recovers_left_boxes_exactly() {
        let cfg = SynthConfig {
            jitter_px: 0.0,
            miss_prob: 0.0,
            fp_rate: 0.0,
            speckle_fraction: 0.0,
            n_sequences: 1,
            frames_per_sequence: 5,
            ..SynthConfig::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let dirs = generate(&cfg, dir.path()).unwrap();
        let root = &dirs[0];
        let data = load_sequence(root, DEFAULT_MIN_HEIGHT, true).unwrap();
        let left = data.detections_left.unwrap();
        let right = data.detections_right.unwrap();

        for f in 0..cfg.frames_per_sequence {
            let map =
                parse_disparity(&fs::read(disparity_path(root, f)).unwrap()).unwrap();
            let spans: Vec<_> = right[&f]
                .iter()
                .map(|d| {
                    (
                        pixel_span(d.bbox.x1, d.bbox.x2, cfg.image_width),
                        pixel_span(d.bbox.y1, d.bbox.y2, cfg.image_height),
                    )
                })
                .collect();
            let unoccluded = |i: usize| {
                spans.iter().enumerate().all(|(j, (xs, ys))| {
                    j == i
                        || spans[i].0.start >= xs.end
                        || xs.start >= spans[i].0.end
                        || spans[i].1.start >= ys.end
                        || ys.start >= spans[i].1.end
                })
            };

            let outcome = shift_detections(&right[&f], &map, 0.0, MIN_VALID_FRACTION);
            assert_eq!(outcome.dropped, 0);
            for (i, shifted) in outcome.shifted.iter().enumerate() {
                if !unoccluded(i) {
                    continue;
                }
                let best = left[&f]
                    .iter()
                    .map(|l| iou(&shifted.det.bbox, &l.bbox))
                    .fold(0.0, f64::max);
                assert_eq!(best, 1.0, "frame {f} object {i}");
            }
        }
    }

    #[test]
    fn planted_median_matches_the_object_depth() {
        let cfg = SynthConfig {
            jitter_px: 0.0,
            miss_prob: 0.0,
            fp_rate: 0.0,
            n_sequences: 1,
            frames_per_sequence: 3,
            ..SynthConfig::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let root = &generate(&cfg, dir.path()).unwrap()[0];
        let map = parse_disparity(&fs::read(disparity_path(root, 0)).unwrap()).unwrap();
        let data = load_sequence(root, DEFAULT_MIN_HEIGHT, true).unwrap();
        let d_lo = cfg.focal_baseline / cfg.max_depth_m;
        let d_hi = cfg.focal_baseline / cfg.min_depth_m;
        for det in &data.detections_right.unwrap()[&0] {
            let m = median_disparity(&map, &det.bbox, MIN_VALID_FRACTION)
                .unwrap()
                .unwrap();
            assert!(m >= d_lo.min(cfg.background_disparity) && m <= d_hi);
            assert_eq!(m * 256.0, (m * 256.0).round());
        }
    }

    #[test]
    fn labeling_agrees_with_the_oracle_on_a_generated_sequence() {
        let cfg = SynthConfig {
            n_sequences: 1,
            frames_per_sequence: 30,
            ..SynthConfig::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let root = &generate(&cfg, dir.path()).unwrap()[0];
        let data = load_sequence(root, DEFAULT_MIN_HEIGHT, true).unwrap();
        let dets = data.detections_left.unwrap();
        let gt = data.ground_truth.unwrap();
        let tracklets = data.tracklets.unwrap();
        let oracle =
            parse_oracle(&fs::read_to_string(root.join(ORACLE_FILE)).unwrap()).unwrap();

        let mut labeled = Vec::new();
        let empty_tracklets = Vec::new();
        let empty_dets = Vec::new();
        let empty_gt = Vec::new();
        for f in 0..cfg.frames_per_sequence {
            let hyps = generate_temporal_hypotheses(
                tracklets.get(&f).unwrap_or(&empty_tracklets),
                dets.get(&f).unwrap_or(&empty_dets),
                0.5,
            );
            let labels = label_hypotheses(
                &hyps,
                dets.get(&f).unwrap_or(&empty_dets),
                gt.get(&f).unwrap_or(&empty_gt),
            );
            for (h, l) in hyps.iter().zip(labels) {
                if let Some(label) = l {
                    labeled.push(LabeledHypothesis {
                        features: FeatureVector([0.0; 12]),
                        label,
                        provenance: Provenance {
                            sequence: "seq0000".into(),
                            frame: f,
                            cue: Cue::Temporal,
                            bbox: h.bbox,
                        },
                    });
                }
            }
        }
        assert!(labeled.iter().any(|l| l.label == Label::ValidError));
        let check = oracle_label_check(&labeled, &oracle);
        assert_eq!(check.agreement(), 1.0, "{:?}", check.disagreements);
    }

    #[test]
    fn oracle_check_flags_corrupted_labels() {
        let miss = OracleMiss {
            frame: 3,
            track_id: 0,
            bbox: BBox::new(10.0, 10.0, 60.0, 60.0).unwrap(),
        };
        let good = LabeledHypothesis {
            features: FeatureVector([0.0; 12]),
            label: Label::ValidError,
            provenance: Provenance {
                sequence: "s".into(),
                frame: 3,
                cue: Cue::Temporal,
                bbox: BBox::new(11.0, 11.0, 61.0, 61.0).unwrap(),
            },
        };
        let mut bad = good.clone();
        bad.provenance.bbox = BBox::new(300.0, 10.0, 350.0, 60.0).unwrap();

        let check =
            oracle_label_check(std::slice::from_ref(&good), std::slice::from_ref(&miss));
        assert_eq!(check.agreement(), 1.0);
        let check = oracle_label_check(&[good, bad], &[miss]);
        assert_eq!(check.valid_errors, 2);
        assert_eq!(check.confirmed, 1);
        assert_eq!(check.disagreements.len(), 1);
        assert!(check.disagreements[0].contains("frame 3"));

        let vacuous = oracle_label_check(&[], &[]);
        assert_eq!(vacuous.agreement(), 1.0);
    }

    #[test]
    fn oracle_file_round_trips() {
        let misses = vec![
            OracleMiss {
                frame: 0,
                track_id: 2,
                bbox: BBox::new(10.25, 11.5, 60.75, 61.0).unwrap(),
            },
            OracleMiss {
                frame: 5,
                track_id: 0,
                bbox: BBox::new(0.0, 40.0, 30.0, 66.0).unwrap(),
            },
        ];
        let text = write_oracle(&misses);
        assert_eq!(parse_oracle(&text).unwrap(), misses);
        assert!(parse_oracle("1,2,3\n").is_err());
        assert!(parse_oracle("a,0,1,1,2,2\n").is_err());
        assert!(parse_oracle("0,0,5,5,1,9\n").is_err());
    }

    #[test]
    fn config_validation_rejects_nonsense() {
        let ok = SynthConfig::default();
        ok.validate().unwrap();
        for cfg in [
            SynthConfig { miss_prob: 1.5, ..ok.clone() },
            SynthConfig { image_width: 0, ..ok.clone() },
            SynthConfig { min_objects: 9, max_objects: 7, ..ok.clone() },
            SynthConfig { jitter_px: 80.0, ..ok.clone() },
            SynthConfig { min_depth_m: -2.0, ..ok.clone() },
            SynthConfig { background_disparity: 100.0, ..ok.clone() },
            SynthConfig { speckle_fraction: 0.9, ..ok.clone() },
        ] {
            assert!(cfg.validate().is_err());
        }
    }
}
