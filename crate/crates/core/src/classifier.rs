//! Ground-truth labeling of hypotheses and the per-cue random forest that
//! separates real detector misses from cue artifacts.
//!
//! Labeling is definitional: a hypothesis is a valid error exactly when it
//! matches a ground-truth object the detector missed. The forest is a
//! plain bagged ensemble of Gini-grown decision trees; all randomness
//! flows from one named seed so training is reproducible to the byte.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::assignment::match_boxes;
use crate::features::{FeatureVector, FEATURE_COUNT};
use crate::formats::GroundTruthObject;
use crate::geometry::{iou, BBox, ScoredBox};
use crate::temporal::{Cue, Hypothesis, MATCH_IOU};

/// Trees per forest.
pub const N_TREES: usize = 30;
/// Minimum node size eligible for splitting.
pub const MIN_SAMPLES_SPLIT: usize = 2;

#[derive(Debug, Error, PartialEq)]
pub enum ClassifierError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("training set mixes temporal and stereo hypotheses; train one forest per cue")]
    MixedCues,
    #[error("feature vector has {got} components, model expects {expected}")]
    FeatureCountMismatch { got: usize, expected: usize },
    #[error("tree {tree}: {msg}")]
    MalformedTree { tree: usize, msg: String },
    #[error("model declares {got} importance values, expected {expected}")]
    ImportanceCountMismatch { got: usize, expected: usize },
}

/// Ground-truth verdict for a hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    /// The hypothesis marks an object the detector really missed.
    ValidError,
    /// The hypothesis is a cue artifact (duplicate track, loose box,
    /// disparity ghost) or covers nothing.
    Invalid,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::ValidError => "valid_error",
            Label::Invalid => "invalid",
        }
    }

    pub fn is_positive(&self) -> bool {
        matches!(self, Label::ValidError)
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "valid_error" => Ok(Label::ValidError),
            "invalid" => Ok(Label::Invalid),
            other => Err(format!(
                "unknown label {other:?}, expected valid_error or invalid"
            )),
        }
    }
}

/// Where a training sample came from, also the canonical sort key that
/// makes training order-independent.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub sequence: String,
    pub frame: usize,
    pub cue: Cue,
    pub bbox: BBox,
}

impl Provenance {
    fn sort_key_cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.sequence
            .cmp(&other.sequence)
            .then(self.frame.cmp(&other.frame))
            .then_with(|| {
                let (a, b) = (self.bbox.sort_key(), other.bbox.sort_key());
                a.iter()
                    .zip(b.iter())
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
    }
}

/// A featurized hypothesis with its ground-truth verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledHypothesis {
    pub features: FeatureVector,
    pub label: Label,
    pub provenance: Provenance,
}

/// Label one frame's hypotheses against ground truth.
///
/// First the detections are matched to non-ignore ground truth at
/// [`MATCH_IOU`]; unmatched objects are the detector's misses. Hypotheses
/// are then matched one-to-one to those misses: matched ones are valid
/// errors. A hypothesis whose only ground-truth overlap is ignore-flagged
/// is excluded (`None`) so don't-care regions poison neither class;
/// everything else is invalid.
pub fn label_hypotheses(
    hypotheses: &[Hypothesis],
    detections: &[ScoredBox],
    ground_truth: &[GroundTruthObject],
) -> Vec<Option<Label>> {
    let active: Vec<&GroundTruthObject> =
        ground_truth.iter().filter(|g| !g.is_ignore).collect();
    let ignored: Vec<&GroundTruthObject> =
        ground_truth.iter().filter(|g| g.is_ignore).collect();

    let det_boxes: Vec<BBox> = detections.iter().map(|d| d.bbox).collect();
    let active_boxes: Vec<BBox> = active.iter().map(|g| g.bbox).collect();
    let missed_boxes: Vec<BBox> = match_boxes(&det_boxes, &active_boxes, MATCH_IOU)
        .unmatched_b
        .into_iter()
        .map(|i| active_boxes[i])
        .collect();

    let hyp_boxes: Vec<BBox> = hypotheses.iter().map(|h| h.bbox).collect();
    let mut labels: Vec<Option<Label>> = vec![Some(Label::Invalid); hypotheses.len()];
    for (hi, _, _) in match_boxes(&hyp_boxes, &missed_boxes, MATCH_IOU).pairs {
        labels[hi] = Some(Label::ValidError);
    }
    for (hi, label) in labels.iter_mut().enumerate() {
        if *label == Some(Label::ValidError) {
            continue;
        }
        let b = &hyp_boxes[hi];
        let touches_active = active_boxes.iter().any(|g| iou(b, g) > 0.0);
        let touches_ignored = ignored.iter().any(|g| iou(b, &g.bbox) > 0.0);
        if touches_ignored && !touches_active {
            *label = None;
        }
    }
    labels
}

/// One decision node. Split nodes route a sample left when its feature
/// value is at most the threshold; child indices always point forward in
/// the node array, so traversal provably terminates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        probability: f64,
    },
}

/// One decision tree, nodes in preorder with the root at index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    /// Probability at the leaf this feature vector routes to.
    pub fn predict(&self, values: &[f64; FEATURE_COUNT]) -> f64 {
        let mut i = 0usize;
        loop {
            match self.nodes[i] {
                Node::Leaf { probability } => return probability,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if values[feature] <= threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    fn validate(&self, tree_index: usize, feature_count: usize) -> Result<(), ClassifierError> {
        let bad = |msg: String| ClassifierError::MalformedTree {
            tree: tree_index,
            msg,
        };
        if self.nodes.is_empty() {
            return Err(bad("tree has no nodes".into()));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            match *node {
                Node::Leaf { probability } => {
                    if !(0.0..=1.0).contains(&probability) {
                        return Err(bad(format!(
                            "leaf probability {probability} outside [0, 1] at node {i}"
                        )));
                    }
                }
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if feature >= feature_count {
                        return Err(bad(format!(
                            "split on feature {feature} but model has {feature_count} features"
                        )));
                    }
                    if !threshold.is_finite() {
                        return Err(bad(format!("non-finite threshold at node {i}")));
                    }
                    for child in [left, right] {
                        if child <= i || child >= self.nodes.len() {
                            return Err(bad(format!(
                                "node {i} points at child {child}, outside ({i}, {})",
                                self.nodes.len()
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// A trained per-cue random forest.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    pub cue: Cue,
    pub feature_count: usize,
    pub seed: u64,
    /// Mean decrease in Gini impurity per feature, unnormalized.
    pub importances: Vec<f64>,
    /// Training facts: sample counts, hyperparameters, degeneracy flag.
    pub metadata: BTreeMap<String, String>,
}

impl ForestModel {
    /// Structural checks shared by training and deserialization.
    pub fn validate(&self) -> Result<(), ClassifierError> {
        if self.importances.len() != self.feature_count {
            return Err(ClassifierError::ImportanceCountMismatch {
                got: self.importances.len(),
                expected: self.feature_count,
            });
        }
        for (i, tree) in self.trees.iter().enumerate() {
            tree.validate(i, self.feature_count)?;
        }
        Ok(())
    }
}

fn gini(pos: usize, n: usize) -> f64 {
    let p = pos as f64 / n as f64;
    let q = 1.0 - p;
    1.0 - p * p - q * q
}

struct TreeBuilder<'a> {
    rows: &'a [([f64; FEATURE_COUNT], bool)],
    rng: ChaCha8Rng,
    features_per_split: usize,
    nodes: Vec<Node>,
    raw_importance: &'a mut [f64],
    total: f64,
}

impl TreeBuilder<'_> {
    /// Grow the subtree over `idx` (indices into the bootstrap sample) and
    /// return its root node index.
    fn grow(&mut self, idx: Vec<usize>) -> usize {
        let n = idx.len();
        let pos = idx.iter().filter(|&&i| self.rows[i].1).count();
        if n < MIN_SAMPLES_SPLIT || pos == 0 || pos == n {
            self.nodes.push(Node::Leaf {
                probability: pos as f64 / n as f64,
            });
            return self.nodes.len() - 1;
        }

        // Candidate features arrive in a random order; the first
        // `features_per_split` of them compete, and scanning continues
        // past that count only while no feature has offered any split at
        // all (every examined feature constant across the node).
        let perm = rand::seq::index::sample(&mut self.rng, FEATURE_COUNT, FEATURE_COUNT);
        let parent_gini = gini(pos, n);
        let mut best: Option<(f64, usize, f64)> = None;
        for (examined, f) in perm.iter().enumerate() {
            let mut vals: Vec<(f64, bool)> = idx
                .iter()
                .map(|&i| (self.rows[i].0[f], self.rows[i].1))
                .collect();
            vals.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut pos_left = 0usize;
            let mut feature_best: Option<(f64, f64)> = None;
            for i in 1..n {
                pos_left += vals[i - 1].1 as usize;
                if vals[i].0 > vals[i - 1].0 {
                    let threshold = (vals[i - 1].0 + vals[i].0) / 2.0;
                    let (n_l, n_r) = (i, n - i);
                    let weighted = (n_l as f64 * gini(pos_left, n_l)
                        + n_r as f64 * gini(pos - pos_left, n_r))
                        / n as f64;
                    let decrease = parent_gini - weighted;
                    if feature_best.is_none_or(|(d, _)| decrease > d) {
                        feature_best = Some((decrease, threshold));
                    }
                }
            }
            if let Some((decrease, threshold)) = feature_best {
                if best.is_none_or(|(d, _, _)| decrease > d) {
                    best = Some((decrease, f, threshold));
                }
            }
            if examined + 1 >= self.features_per_split && best.is_some() {
                break;
            }
        }

        match best {
            None => {
                // every feature constant on this node; cannot separate
                self.nodes.push(Node::Leaf {
                    probability: pos as f64 / n as f64,
                });
                self.nodes.len() - 1
            }
            Some((decrease, feature, threshold)) => {
                self.raw_importance[feature] += (n as f64 / self.total) * decrease.max(0.0);
                let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
                    .into_iter()
                    .partition(|&i| self.rows[i].0[feature] <= threshold);
                let me = self.nodes.len();
                self.nodes.push(Node::Leaf { probability: 0.0 });
                let left = self.grow(left_idx);
                let right = self.grow(right_idx);
                self.nodes[me] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
                me
            }
        }
    }
}

/// Train a bagged forest of Gini-grown trees.
///
/// Samples are sorted canonically by provenance first, so any input order
/// yields the same model. Each tree sees a bootstrap resample of the full
/// set and draws its randomness from `seed + tree_index`. A single-class
/// input trains fine but degenerates to constant single-leaf trees; the
/// model's metadata flags it so callers can warn.
pub fn train_forest(
    samples: &[LabeledHypothesis],
    n_trees: usize,
    seed: u64,
) -> Result<ForestModel, ClassifierError> {
    if samples.is_empty() {
        return Err(ClassifierError::EmptyTrainingSet);
    }
    let cue = samples[0].provenance.cue;
    if samples.iter().any(|s| s.provenance.cue != cue) {
        return Err(ClassifierError::MixedCues);
    }
    let mut ordered: Vec<&LabeledHypothesis> = samples.iter().collect();
    ordered.sort_by(|a, b| a.provenance.sort_key_cmp(&b.provenance));
    let rows: Vec<([f64; FEATURE_COUNT], bool)> = ordered
        .iter()
        .map(|s| (s.features.0, s.label.is_positive()))
        .collect();

    let n = rows.len();
    let positives = rows.iter().filter(|r| r.1).count();
    let features_per_split = (FEATURE_COUNT as f64).sqrt().ceil() as usize;
    let mut raw_importance = vec![0.0f64; FEATURE_COUNT];
    let mut trees = Vec::with_capacity(n_trees);
    for t in 0..n_trees {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(t as u64));
        let bootstrap: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let sampled: Vec<([f64; FEATURE_COUNT], bool)> =
            bootstrap.iter().map(|&i| rows[i]).collect();
        let mut builder = TreeBuilder {
            rows: &sampled,
            rng,
            features_per_split,
            nodes: Vec::new(),
            raw_importance: &mut raw_importance,
            total: n as f64,
        };
        let root = builder.grow((0..n).collect());
        debug_assert_eq!(root, 0);
        trees.push(Tree {
            nodes: builder.nodes,
        });
    }
    for imp in &mut raw_importance {
        *imp /= n_trees as f64;
    }

    let degenerate = positives == 0 || positives == n;
    let mut metadata = BTreeMap::new();
    metadata.insert("criterion".into(), "gini".into());
    metadata.insert("degenerate".into(), degenerate.to_string());
    metadata.insert("features_per_split".into(), features_per_split.to_string());
    metadata.insert("min_samples_split".into(), MIN_SAMPLES_SPLIT.to_string());
    metadata.insert("positives".into(), positives.to_string());
    metadata.insert("samples".into(), n.to_string());

    let model = ForestModel {
        trees,
        cue,
        feature_count: FEATURE_COUNT,
        seed,
        importances: raw_importance,
        metadata,
    };
    model.validate()?;
    Ok(model)
}

/// Mean leaf probability across the forest's trees.
pub fn predict(model: &ForestModel, features: &FeatureVector) -> Result<f64, ClassifierError> {
    if model.feature_count != FEATURE_COUNT {
        return Err(ClassifierError::FeatureCountMismatch {
            got: FEATURE_COUNT,
            expected: model.feature_count,
        });
    }
    let sum: f64 = model.trees.iter().map(|t| t.predict(&features.0)).sum();
    Ok(sum / model.trees.len() as f64)
}

/// Normalized per-feature importance weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Importances {
    /// Weights summing to 1. Uniform when degenerate.
    pub weights: Vec<f64>,
    /// Set when the forest never split, so no feature carries signal and
    /// the uniform weights are a placeholder, not a measurement.
    pub degenerate: bool,
}

/// Normalize the model's stored mean Gini decreases to weights summing
/// to 1.
pub fn feature_importances(model: &ForestModel) -> Importances {
    let total: f64 = model.importances.iter().sum();
    if total <= 0.0 {
        return Importances {
            weights: vec![1.0 / model.feature_count as f64; model.feature_count],
            degenerate: true,
        };
    }
    Importances {
        weights: model.importances.iter().map(|v| v / total).collect(),
        degenerate: false,
    }
}
