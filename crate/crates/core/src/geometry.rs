//! Axis-aligned box arithmetic: IoU, normalization to the canonical
//! viewpoint, non-maximum suppression and height filtering.
//!
//! Boxes are real-valued half-open intervals in image coordinates with the
//! origin at the top-left. Area is `(x2 - x1) * (y2 - y1)` with no pixel
//! correction, which keeps scale invariance exact.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("invalid box ({x1}, {y1}, {x2}, {y2}): coordinates must be finite with x2 > x1 and y2 > y1")]
    InvalidBox { x1: f64, y1: f64, x2: f64, y2: f64 },
    #[error("confidence {0} outside [0, 1]")]
    InvalidConfidence(f64),
    #[error("box ({x1}, {y1}, {x2}, {y2}) lies fully outside a {width}x{height} image")]
    OutOfBounds {
        x1: f64,
        y1: f64,
        x2: f64,
        y2: f64,
        width: f64,
        height: f64,
    },
    #[error("image dimensions {0}x{1} must be positive")]
    BadImageDims(f64, f64),
    #[error("unknown object category {0:?}")]
    UnknownCategory(String),
}

/// Axis-aligned 2D bounding box, image origin top-left.
///
/// Invariants: `x2 > x1`, `y2 > y1`, all coordinates finite. Enforced at
/// construction so downstream arithmetic never checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, GeometryError> {
        let finite = x1.is_finite() && y1.is_finite() && x2.is_finite() && y2.is_finite();
        if !finite || x2 <= x1 || y2 <= y1 {
            return Err(GeometryError::InvalidBox { x1, y1, x2, y2 });
        }
        Ok(BBox { x1, y1, x2, y2 })
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center_x(&self) -> f64 {
        (self.x1 + self.x2) / 2.0
    }

    pub fn center_y(&self) -> f64 {
        (self.y1 + self.y2) / 2.0
    }

    /// Area of the intersection with `other`, 0 when disjoint.
    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = self.x2.min(other.x2) - self.x1.max(other.x1);
        let h = self.y2.min(other.y2) - self.y1.max(other.y1);
        if w > 0.0 && h > 0.0 {
            w * h
        } else {
            0.0
        }
    }

    /// Fraction of this box's own area covered by `other`.
    ///
    /// Used for absorbing boxes into ignore regions, where the region may be
    /// much larger than the box and plain IoU would under-report containment.
    pub fn coverage_by(&self, other: &BBox) -> f64 {
        self.intersection_area(other) / self.area()
    }

    /// Translate horizontally by `dx`, leaving the vertical extent unchanged.
    pub fn shifted_x(&self, dx: f64) -> BBox {
        BBox {
            x1: self.x1 + dx,
            y1: self.y1,
            x2: self.x2 + dx,
            y2: self.y2,
        }
    }

    /// Translate vertically by `dy`, leaving the horizontal extent unchanged.
    pub fn shifted_y(&self, dy: f64) -> BBox {
        BBox {
            x1: self.x1,
            y1: self.y1 + dy,
            x2: self.x2,
            y2: self.y2 + dy,
        }
    }

    /// Clip to the image rectangle `[0, width] x [0, height]`.
    /// Returns `None` when nothing of the box remains inside.
    pub fn clipped(&self, width: f64, height: f64) -> Option<BBox> {
        let x1 = self.x1.max(0.0);
        let y1 = self.y1.max(0.0);
        let x2 = self.x2.min(width);
        let y2 = self.y2.min(height);
        if x2 > x1 && y2 > y1 {
            Some(BBox { x1, y1, x2, y2 })
        } else {
            None
        }
    }

    /// Lexicographic coordinate key for deterministic tie-breaking.
    pub fn sort_key(&self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }
}

/// Intersection-over-Union of two boxes. Symmetric, in [0, 1], exactly 1.0
/// only for identical boxes.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter == 0.0 {
        return 0.0;
    }
    inter / (a.area() + b.area() - inter)
}

/// Object classes following the KITTI label vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    Car,
    Van,
    Truck,
    Pedestrian,
    PersonSitting,
    Cyclist,
    Tram,
    Misc,
    DontCare,
}

impl Category {
    /// Maps Van and Truck onto Car, leaving everything else untouched.
    pub fn collapsed(self) -> Category {
        match self {
            Category::Van | Category::Truck => Category::Car,
            other => other,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Category::Car => "Car",
            Category::Van => "Van",
            Category::Truck => "Truck",
            Category::Pedestrian => "Pedestrian",
            Category::PersonSitting => "Person_sitting",
            Category::Cyclist => "Cyclist",
            Category::Tram => "Tram",
            Category::Misc => "Misc",
            Category::DontCare => "DontCare",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Car" => Ok(Category::Car),
            "Van" => Ok(Category::Van),
            "Truck" => Ok(Category::Truck),
            "Pedestrian" => Ok(Category::Pedestrian),
            "Person_sitting" => Ok(Category::PersonSitting),
            "Cyclist" => Ok(Category::Cyclist),
            "Tram" => Ok(Category::Tram),
            "Misc" => Ok(Category::Misc),
            "DontCare" => Ok(Category::DontCare),
            other => Err(GeometryError::UnknownCategory(other.to_string())),
        }
    }
}

/// A detection, track box or ground-truth box with a confidence score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredBox {
    pub bbox: BBox,
    /// Detector confidence in [0, 1].
    pub confidence: f64,
    pub category: Category,
    /// Sequence-local frame index.
    pub frame: usize,
}

impl ScoredBox {
    pub fn new(
        bbox: BBox,
        confidence: f64,
        category: Category,
        frame: usize,
    ) -> Result<Self, GeometryError> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(GeometryError::InvalidConfidence(confidence));
        }
        Ok(ScoredBox {
            bbox,
            confidence,
            category,
            frame,
        })
    }
}

/// Box position and size in the normalized coordinate space with the origin
/// at the center of projection. `x`, `y` are the box center in [-0.5, 0.5];
/// `w`, `h` are the box size as a fraction of the image size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

/// Normalize `bbox` against an image of `width` x `height` pixels.
///
/// The box is clipped to the image rectangle first, so truncated objects at
/// the image border stay inside the [-0.5, 0.5] position range. A box fully
/// outside the image is rejected.
pub fn normalize(bbox: &BBox, width: f64, height: f64) -> Result<NormalizedBox, GeometryError> {
    if width <= 0.0 || height <= 0.0 || width.is_nan() || height.is_nan() {
        return Err(GeometryError::BadImageDims(width, height));
    }
    let clipped = bbox
        .clipped(width, height)
        .ok_or(GeometryError::OutOfBounds {
            x1: bbox.x1,
            y1: bbox.y1,
            x2: bbox.x2,
            y2: bbox.y2,
            width,
            height,
        })?;
    Ok(NormalizedBox {
        x: (clipped.center_x() - width / 2.0) / width,
        y: (clipped.center_y() - height / 2.0) / height,
        w: clipped.width() / width,
        h: clipped.height() / height,
    })
}

/// Greedy suppression over pre-ranked boxes.
///
/// `order` holds indices into `boxes` sorted by descending priority. Returns
/// the kept indices in ranking order; a box is kept when its IoU with every
/// previously kept box is below `min_overlap`.
pub(crate) fn nms_greedy(boxes: &[BBox], order: &[usize], min_overlap: f64) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    for &idx in order {
        if kept.iter().all(|&k| iou(&boxes[k], &boxes[idx]) < min_overlap) {
            kept.push(idx);
        }
    }
    kept
}

/// Non-maximum suppression at `min_overlap` IoU.
///
/// Boxes are ranked by descending confidence; ties are broken by frame and
/// then by lexicographic box coordinates so repeated runs agree. The output
/// is a subset of the input with no surviving pair at IoU >= `min_overlap`.
pub fn nms(boxes: &[ScoredBox], min_overlap: f64) -> Vec<ScoredBox> {
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&a, &b| {
        boxes[b]
            .confidence
            .total_cmp(&boxes[a].confidence)
            .then(boxes[a].frame.cmp(&boxes[b].frame))
            .then_with(|| {
                let (ka, kb) = (boxes[a].bbox.sort_key(), boxes[b].bbox.sort_key());
                ka.iter()
                    .zip(kb.iter())
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
    });
    let raw: Vec<BBox> = boxes.iter().map(|b| b.bbox).collect();
    nms_greedy(&raw, &order, min_overlap)
        .into_iter()
        .map(|i| boxes[i])
        .collect()
}

/// Keep boxes at least `min_height` pixels tall. The boundary is inclusive:
/// a box of exactly `min_height` survives.
pub fn height_filter(boxes: &[ScoredBox], min_height: f64) -> Vec<ScoredBox> {
    boxes
        .iter()
        .filter(|b| b.bbox.height() >= min_height)
        .copied()
        .collect()
}
