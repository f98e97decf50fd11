//! End-to-end mining through the public library API, no CLI involved:
//! generate a synthetic world, propose hypotheses from both cues, featurize
//! and label them, train a forest, and check that the learned ranking beats
//! trusting every hypothesis. What the binary wires together across stage
//! files, these tests wire together in memory.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use blindspot_core::classifier::{
    label_hypotheses, predict, train_forest, Label, LabeledHypothesis, Provenance,
};
use blindspot_core::evaluation::{average_precision, fuse_cues, naive_baseline, RankItem};
use blindspot_core::features::{featurize, CohortBox};
use blindspot_core::formats::labels::DEFAULT_MIN_HEIGHT;
use blindspot_core::formats::sequence::disparity_path;
use blindspot_core::formats::{load_sequence, parse_disparity, SequenceData};
use blindspot_core::geo::{bin_errors, export_heatmap};
use blindspot_core::geometry::{Category, ScoredBox};
use blindspot_core::stereo::{generate_stereo_hypotheses, shift_detections, MIN_VALID_FRACTION};
use blindspot_core::synth::{generate, oracle_label_check, parse_oracle, SynthConfig};
use blindspot_core::temporal::{generate_temporal_hypotheses, Hypothesis};

const CONF_THRESHOLD: f64 = 0.5;

fn small_world(dir: &Path) -> Vec<std::path::PathBuf> {
    let config = SynthConfig {
        n_sequences: 6,
        frames_per_sequence: 40,
        ..SynthConfig::default()
    };
    generate(&config, dir).expect("generate synthetic sequences")
}

fn thresholded(boxes: Option<&Vec<ScoredBox>>) -> Vec<ScoredBox> {
    boxes
        .map(|v| v.iter().filter(|b| b.confidence >= CONF_THRESHOLD).copied().collect())
        .unwrap_or_default()
}

/// Featurize and label one frame's hypotheses. The cohort is the full
/// source set of the cue; each hypothesis is dropped from its own cohort
/// so it does not count as its own neighbor.
fn labeled_frame(
    sequence: &str,
    hypotheses: &[Hypothesis],
    detections: &[ScoredBox],
    cohort: &[CohortBox],
    ground_truth: &[blindspot_core::formats::GroundTruthObject],
    image: (f64, f64),
) -> Vec<LabeledHypothesis> {
    let verdicts = label_hypotheses(hypotheses, detections, ground_truth);
    hypotheses
        .iter()
        .zip(verdicts)
        .filter_map(|(h, verdict)| {
            let mut own = cohort.to_vec();
            if let Some(at) = own
                .iter()
                .position(|c| c.bbox == h.bbox && c.confidence == h.confidence)
            {
                own.remove(at);
            }
            let features = featurize(h, detections, &own, image.0, image.1)
                .expect("hypotheses proposed from a sequence featurize");
            verdict.map(|label| LabeledHypothesis {
                features,
                label,
                provenance: Provenance {
                    sequence: sequence.to_string(),
                    frame: h.frame,
                    cue: h.cue,
                    bbox: h.bbox,
                },
            })
        })
        .collect()
}

fn mine_temporal(name: &str, seq: &SequenceData) -> Vec<LabeledHypothesis> {
    let image = (seq.meta.image_width as f64, seq.meta.image_height as f64);
    let tracklets = seq.tracklets.as_ref().expect("tracklets present");
    let detections = seq.detections_left.as_ref().expect("left detections present");
    let ground_truth = seq.ground_truth.as_ref().expect("ground truth present");
    let empty = Vec::new();
    let mut labeled = Vec::new();
    for frame in 0..seq.meta.frames {
        let tracks = tracklets.get(&frame).unwrap_or(&empty);
        let dets = thresholded(detections.get(&frame));
        let hyps: Vec<Hypothesis> = generate_temporal_hypotheses(tracks, &dets, CONF_THRESHOLD)
            .into_iter()
            .filter(|h| h.bbox.clipped(image.0, image.1).is_some())
            .collect();
        let cohort: Vec<CohortBox> = tracks
            .iter()
            .map(|t| CohortBox { bbox: t.bbox, confidence: t.confidence })
            .collect();
        let gt = ground_truth.get(&frame).map(Vec::as_slice).unwrap_or(&[]);
        labeled.extend(labeled_frame(name, &hyps, &dets, &cohort, gt, image));
    }
    labeled
}

fn mine_stereo(name: &str, root: &Path, seq: &SequenceData) -> Vec<LabeledHypothesis> {
    let image = (seq.meta.image_width as f64, seq.meta.image_height as f64);
    let left = seq.detections_left.as_ref().expect("left detections present");
    let right = seq.detections_right.as_ref().expect("right detections present");
    let ground_truth = seq.ground_truth.as_ref().expect("ground truth present");
    let empty = Vec::new();
    let mut labeled = Vec::new();
    for frame in 0..seq.meta.frames {
        let map = parse_disparity(&fs::read(disparity_path(root, frame)).unwrap()).unwrap();
        let outcome = shift_detections(
            right.get(&frame).unwrap_or(&empty),
            &map,
            CONF_THRESHOLD,
            MIN_VALID_FRACTION,
        );
        let dets = thresholded(left.get(&frame));
        let hyps: Vec<Hypothesis> =
            generate_stereo_hypotheses(&outcome.shifted, &dets, CONF_THRESHOLD)
                .into_iter()
                .filter(|h| h.bbox.clipped(image.0, image.1).is_some())
                .collect();
        let cohort: Vec<CohortBox> = outcome
            .shifted
            .iter()
            .map(|s| CohortBox { bbox: s.det.bbox, confidence: s.det.confidence })
            .collect();
        let gt = ground_truth.get(&frame).map(Vec::as_slice).unwrap_or(&[]);
        labeled.extend(labeled_frame(name, &hyps, &dets, &cohort, gt, image));
    }
    labeled
}

fn rank_with_forest(
    train: &[LabeledHypothesis],
    holdout: &[LabeledHypothesis],
) -> Vec<RankItem> {
    let model = train_forest(train, 15, 7).expect("train forest");
    holdout
        .iter()
        .map(|s| RankItem {
            score: predict(&model, &s.features).expect("score holdout sample"),
            positive: s.label == Label::ValidError,
            sequence: s.provenance.sequence.clone(),
            frame: s.provenance.frame,
            bbox: s.provenance.bbox,
        })
        .collect()
}

fn split_and_rank(
    mine: impl Fn(&str, &Path) -> Vec<LabeledHypothesis>,
    dirs: &[std::path::PathBuf],
) -> (f64, f64) {
    let mut train = Vec::new();
    let mut holdout = Vec::new();
    for (i, dir) in dirs.iter().enumerate() {
        let name = dir.file_name().unwrap().to_string_lossy().into_owned();
        let mined = mine(&name, dir);
        if i < dirs.len() / 2 {
            train.extend(mined);
        } else {
            holdout.extend(mined);
        }
    }
    let items = rank_with_forest(&train, &holdout);
    let (ap, _) = average_precision(&items).expect("holdout has positives");
    let (naive_ap, _) = naive_baseline(&items).unwrap();
    (ap, naive_ap)
}

#[test]
fn temporal_mining_outranks_trusting_every_hypothesis() {
    let tmp = tempfile::tempdir().unwrap();
    let dirs = small_world(tmp.path());
    let (ap, naive_ap) = split_and_rank(
        |name, dir| mine_temporal(name, &load_sequence(dir, DEFAULT_MIN_HEIGHT, true).unwrap()),
        &dirs,
    );
    assert!(ap > naive_ap, "forest ap {ap} should beat naive {naive_ap}");
    assert!(ap > 0.5, "forest ap {ap} should separate misses from artifacts");
}

#[test]
fn stereo_mining_outranks_trusting_every_hypothesis() {
    let tmp = tempfile::tempdir().unwrap();
    let dirs = small_world(tmp.path());
    let (ap, naive_ap) = split_and_rank(
        |name, dir| {
            mine_stereo(name, dir, &load_sequence(dir, DEFAULT_MIN_HEIGHT, true).unwrap())
        },
        &dirs,
    );
    assert!(ap > naive_ap, "forest ap {ap} should beat naive {naive_ap}");
    assert!(ap > 0.5, "forest ap {ap} should separate misses from artifacts");
}

#[test]
fn both_cues_label_in_full_agreement_with_the_planted_misses() {
    let tmp = tempfile::tempdir().unwrap();
    let dirs = small_world(tmp.path());
    let mut valid_errors = 0usize;
    for dir in &dirs {
        let name = dir.file_name().unwrap().to_string_lossy().into_owned();
        let seq = load_sequence(dir, DEFAULT_MIN_HEIGHT, true).unwrap();
        let oracle =
            parse_oracle(&fs::read_to_string(dir.join("oracle.csv")).unwrap()).unwrap();
        for labeled in [mine_temporal(&name, &seq), mine_stereo(&name, dir, &seq)] {
            let check = oracle_label_check(&labeled, &oracle);
            assert_eq!(check.disagreements, Vec::<String>::new());
            valid_errors += check.valid_errors;
        }
    }
    assert!(valid_errors > 0, "a lossy detector must leave something to find");
}

#[test]
fn fused_errors_bin_onto_the_drive_route() {
    let tmp = tempfile::tempdir().unwrap();
    let dirs = small_world(tmp.path());
    let dir = &dirs[0];
    let name = dir.file_name().unwrap().to_string_lossy().into_owned();
    let seq = load_sequence(dir, DEFAULT_MIN_HEIGHT, true).unwrap();

    let as_boxes = |labeled: Vec<LabeledHypothesis>| -> Vec<ScoredBox> {
        labeled
            .into_iter()
            .filter(|l| l.label == Label::ValidError)
            .map(|l| {
                ScoredBox::new(l.provenance.bbox, 1.0, Category::Car, l.provenance.frame)
                    .unwrap()
            })
            .collect()
    };
    let temporal = as_boxes(mine_temporal(&name, &seq));
    let stereo = as_boxes(mine_stereo(&name, dir, &seq));
    assert!(temporal.iter().all(|b| b.frame < seq.meta.frames));

    let (fused, stats) = fuse_cues(&temporal, &stereo);
    assert_eq!(stats.unique_temporal + stats.intersection, stats.total_temporal);
    assert_eq!(stats.unique_stereo + stats.intersection, stats.total_stereo);
    assert!(!fused.is_empty());

    let mut errors_per_frame: BTreeMap<usize, usize> = BTreeMap::new();
    for b in &fused {
        *errors_per_frame.entry(b.frame).or_default() += 1;
    }
    let poses = seq.poses.as_ref().expect("poses present");
    let grid = bin_errors(poses, &errors_per_frame, 10.0).unwrap();
    let total_frames: usize = grid.bins.values().map(|c| c.frame_count).sum();
    assert_eq!(total_frames, poses.len());
    let total_errors: usize = grid.bins.values().map(|c| c.error_count).sum();
    assert_eq!(total_errors, fused.len());

    let (csv, pgm) = export_heatmap(&grid).unwrap();
    assert_eq!(csv.lines().count(), grid.bins.len() + 1);
    assert!(pgm.starts_with(b"P5"));
}
