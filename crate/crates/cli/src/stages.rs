//! The pipeline stages behind each subcommand.
//!
//! Stages communicate exclusively through files, one directory per
//! sequence, so any stage's input can come from an external detector,
//! tracker or disparity method that writes the same formats. Each stage
//! returns a summary map that the driver writes next to its outputs.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use anyhow::anyhow;

use blindspot_core::classifier::{
    feature_importances, label_hypotheses, predict, train_forest, Label, LabeledHypothesis,
    Provenance,
};
use blindspot_core::evaluation::{
    evaluate, f1_with_corrections, fuse_cues, naive_baseline, Counts, FuseStats, RankItem,
};
use blindspot_core::features::{featurize, CohortBox, FEATURE_NAMES};
use blindspot_core::formats::labels::DEFAULT_MIN_HEIGHT;
use blindspot_core::formats::sequence::{
    disparity_path, load_sequence, DET_LEFT_FILE, DET_RIGHT_FILE, GT_FILE, POSES_FILE,
    TRACKLETS_FILE,
};
use blindspot_core::formats::{
    parse_detections, parse_disparity, parse_model, write_detections, write_hypotheses,
    write_model, HypothesisRow,
};
use blindspot_core::geo::{bin_errors, GeoGrid};
use blindspot_core::geometry::{Category, ScoredBox};
use blindspot_core::stereo::{generate_stereo_hypotheses, shift_detections};
use blindspot_core::synth::{generate, parse_oracle, SynthConfig, SynthError, ORACLE_FILE};
use blindspot_core::temporal::{generate_temporal_hypotheses, Cue, Hypothesis, MATCH_IOU};

use crate::args::{
    EvalArgs, FeaturizeArgs, FuseArgs, GeomapArgs, HypothesizeStereoArgs,
    HypothesizeTemporalArgs, LabelArgs, PredictArgs, SynthArgs, TrainArgs,
};
use crate::support::{
    data, par_map, parse_file, read_bytes, read_hypotheses_file, require_exists, require_unit,
    sequence_dirs, usage, write_file, CliError, KeyValues, ERRORS_FILE, HYPOTHESES_FILE,
    MODEL_FILE, SHIFTED_FILE,
};

fn missing_input(root: &Path, file: &str, needed_for: &str) -> CliError {
    data(anyhow!(
        "{} is missing {file}, which {needed_for} needs",
        root.display()
    ))
}

pub fn synth(args: &SynthArgs) -> Result<KeyValues, CliError> {
    let config = SynthConfig {
        seed: args.seed,
        n_sequences: args.sequences,
        frames_per_sequence: args.frames,
        image_width: args.width,
        image_height: args.height,
        min_objects: args.min_objects,
        max_objects: args.max_objects,
        miss_prob: args.miss_prob,
        fp_rate: args.fp_rate,
        conf_noise: args.conf_noise,
        jitter_px: args.jitter,
        speckle_fraction: args.speckle,
        ..SynthConfig::default()
    };
    let dirs = generate(&config, &args.out).map_err(|e| match e {
        SynthError::BadConfig(msg) => usage(format!("invalid synth parameters: {msg}")),
        other => data(other),
    })?;

    let mut planted = 0usize;
    for dir in &dirs {
        planted += parse_file(&dir.join(ORACLE_FILE), parse_oracle)?.len();
    }
    let mut summary = KeyValues::new();
    summary
        .put("sequences", dirs.len())
        .put("frames_per_sequence", config.frames_per_sequence)
        .put("planted_misses", planted);
    Ok(summary)
}

pub fn hypothesize_temporal(args: &HypothesizeTemporalArgs) -> Result<KeyValues, CliError> {
    require_exists(&args.data, "--data directory")?;
    require_unit(args.conf_threshold, "conf-threshold")?;
    let seqs = sequence_dirs(&args.data)?;

    let counts = par_map(&seqs, |(name, root)| {
        let seq = load_sequence(root, DEFAULT_MIN_HEIGHT, true).map_err(data)?;
        let dets = seq
            .detections_left
            .ok_or_else(|| missing_input(root, DET_LEFT_FILE, "temporal mining"))?;
        let tracklets = seq
            .tracklets
            .ok_or_else(|| missing_input(root, TRACKLETS_FILE, "temporal mining"))?;

        let (width, height) = (seq.meta.image_width as f64, seq.meta.image_height as f64);
        let no_dets = Vec::new();
        let no_tracks = Vec::new();
        let mut rows = Vec::new();
        for frame in 0..seq.meta.frames {
            let hypotheses = generate_temporal_hypotheses(
                tracklets.get(&frame).unwrap_or(&no_tracks),
                dets.get(&frame).unwrap_or(&no_dets),
                args.conf_threshold,
            );
            // coasted tracks can drift off-image, where there is nothing
            // left to detect
            rows.extend(
                hypotheses
                    .iter()
                    .filter(|h| h.bbox.clipped(width, height).is_some())
                    .map(HypothesisRow::skeleton),
            );
        }
        write_file(
            &args.out.join(name).join(HYPOTHESES_FILE),
            write_hypotheses(&rows),
        )?;
        Ok(rows.len())
    })?;

    let mut summary = KeyValues::new();
    summary
        .put("sequences", seqs.len())
        .put("hypotheses", counts.iter().sum::<usize>());
    Ok(summary)
}

pub fn hypothesize_stereo(args: &HypothesizeStereoArgs) -> Result<KeyValues, CliError> {
    require_exists(&args.data, "--data directory")?;
    require_unit(args.conf_threshold, "conf-threshold")?;
    require_unit(args.min_valid_fraction, "min-valid-fraction")?;
    let seqs = sequence_dirs(&args.data)?;

    let counts = par_map(&seqs, |(name, root)| {
        let seq = load_sequence(root, DEFAULT_MIN_HEIGHT, true).map_err(data)?;
        let left = seq
            .detections_left
            .ok_or_else(|| missing_input(root, DET_LEFT_FILE, "stereo mining"))?;
        let right = seq
            .detections_right
            .ok_or_else(|| missing_input(root, DET_RIGHT_FILE, "stereo mining"))?;

        let (width, height) = (seq.meta.image_width as f64, seq.meta.image_height as f64);
        let no_dets = Vec::new();
        let mut rows = Vec::new();
        let mut shifted_by_frame: BTreeMap<usize, Vec<ScoredBox>> = BTreeMap::new();
        let mut dropped = 0usize;
        for frame in 0..seq.meta.frames {
            let map_path = disparity_path(root, frame);
            let map = parse_disparity(&read_bytes(&map_path)?)
                .map_err(|e| e.in_file(map_path.display().to_string()))
                .map_err(data)?;
            let outcome = shift_detections(
                right.get(&frame).unwrap_or(&no_dets),
                &map,
                args.conf_threshold,
                args.min_valid_fraction,
            );
            dropped += outcome.dropped;
            let hypotheses = generate_stereo_hypotheses(
                &outcome.shifted,
                left.get(&frame).unwrap_or(&no_dets),
                args.conf_threshold,
            );
            // large disparities can shift a narrow box past the left edge
            rows.extend(
                hypotheses
                    .iter()
                    .filter(|h| h.bbox.clipped(width, height).is_some())
                    .map(HypothesisRow::skeleton),
            );
            shifted_by_frame
                .insert(frame, outcome.shifted.into_iter().map(|s| s.det).collect());
        }
        let out = args.out.join(name);
        write_file(&out.join(HYPOTHESES_FILE), write_hypotheses(&rows))?;
        write_file(&out.join(SHIFTED_FILE), write_detections(&shifted_by_frame))?;
        Ok((rows.len(), dropped))
    })?;

    let mut summary = KeyValues::new();
    summary
        .put("sequences", seqs.len())
        .put("hypotheses", counts.iter().map(|c| c.0).sum::<usize>())
        .put("dropped_no_disparity", counts.iter().map(|c| c.1).sum::<usize>());
    Ok(summary)
}

/// The cue of a hypothesis table, which must be uniform per file.
fn table_cue(rows: &[HypothesisRow], path: &Path) -> Result<Option<Cue>, CliError> {
    let Some(first) = rows.first() else {
        return Ok(None);
    };
    if rows.iter().any(|r| r.cue != first.cue) {
        return Err(data(anyhow!(
            "{} mixes hypotheses of both cues; featurize and train expect one cue per table",
            path.display()
        )));
    }
    Ok(Some(first.cue))
}

pub fn featurize_hypotheses(args: &FeaturizeArgs) -> Result<KeyValues, CliError> {
    require_exists(&args.data, "--data directory")?;
    require_exists(&args.hypotheses, "--hypotheses directory")?;
    if let Some(shifted) = &args.shifted {
        require_exists(shifted, "--shifted directory")?;
    }
    require_unit(args.conf_threshold, "conf-threshold")?;
    let seqs = sequence_dirs(&args.hypotheses)?;

    let counts = par_map(&seqs, |(name, dir)| {
        let table = dir.join(HYPOTHESES_FILE);
        let mut rows = read_hypotheses_file(&table)?;
        let cue = table_cue(&rows, &table)?;

        let data_root = args.data.join(name);
        let seq = load_sequence(&data_root, DEFAULT_MIN_HEIGHT, true).map_err(data)?;
        let dets = seq
            .detections_left
            .ok_or_else(|| missing_input(&data_root, DET_LEFT_FILE, "featurizing"))?;
        let width = seq.meta.image_width as f64;
        let height = seq.meta.image_height as f64;

        let cohort_by_frame: BTreeMap<usize, Vec<CohortBox>> = match cue {
            None => BTreeMap::new(),
            Some(Cue::Temporal) => seq
                .tracklets
                .ok_or_else(|| {
                    missing_input(&data_root, TRACKLETS_FILE, "featurizing the temporal cue")
                })?
                .into_iter()
                .map(|(f, boxes)| {
                    let cohort = boxes
                        .into_iter()
                        .map(|t| CohortBox {
                            bbox: t.bbox,
                            confidence: t.confidence,
                        })
                        .collect();
                    (f, cohort)
                })
                .collect(),
            Some(Cue::Stereo) => {
                let shifted_root = args.shifted.as_ref().ok_or_else(|| {
                    usage("--shifted is required to featurize stereo hypotheses")
                })?;
                parse_file(
                    &shifted_root.join(name).join(SHIFTED_FILE),
                    parse_detections,
                )?
                .into_iter()
                .map(|(f, boxes)| {
                    let cohort = boxes
                        .into_iter()
                        .map(|d| CohortBox {
                            bbox: d.bbox,
                            confidence: d.confidence,
                        })
                        .collect();
                    (f, cohort)
                })
                .collect()
            }
        };

        let no_cohort = Vec::new();
        let no_dets = Vec::new();
        for row in &mut rows {
            let hypothesis = row.hypothesis();
            let frame_dets: Vec<ScoredBox> = dets
                .get(&hypothesis.frame)
                .unwrap_or(&no_dets)
                .iter()
                .filter(|d| d.confidence >= args.conf_threshold)
                .copied()
                .collect();
            let mut cohort = cohort_by_frame
                .get(&hypothesis.frame)
                .unwrap_or(&no_cohort)
                .clone();
            // a hypothesis is itself a member of its source set; drop
            // that one entry so it does not count as its own neighbor
            if let Some(own) = cohort.iter().position(|c| {
                c.bbox == hypothesis.bbox && c.confidence == hypothesis.confidence
            }) {
                cohort.remove(own);
            }
            row.features =
                featurize(&hypothesis, &frame_dets, &cohort, width, height).map_err(|e| {
                    data(anyhow!(
                        "featurizing frame {} of {}: {e}",
                        hypothesis.frame,
                        table.display()
                    ))
                })?;
        }
        write_file(
            &args.out.join(name).join(HYPOTHESES_FILE),
            write_hypotheses(&rows),
        )?;
        Ok(rows.len())
    })?;

    let mut summary = KeyValues::new();
    summary
        .put("sequences", seqs.len())
        .put("rows", counts.iter().sum::<usize>());
    Ok(summary)
}

pub fn label(args: &LabelArgs) -> Result<KeyValues, CliError> {
    require_exists(&args.data, "--data directory")?;
    require_exists(&args.hypotheses, "--hypotheses directory")?;
    require_unit(args.conf_threshold, "conf-threshold")?;
    let seqs = sequence_dirs(&args.hypotheses)?;

    // rows in, valid errors, artifacts, excluded by ignore regions
    let counts = par_map(&seqs, |(name, dir)| {
        let table = dir.join(HYPOTHESES_FILE);
        let rows = read_hypotheses_file(&table)?;

        let data_root = args.data.join(name);
        let seq = load_sequence(&data_root, DEFAULT_MIN_HEIGHT, true).map_err(data)?;
        let gt = seq.ground_truth.ok_or_else(|| {
            missing_input(&data_root, GT_FILE, "labeling (it needs ground truth)")
        })?;
        let dets = seq
            .detections_left
            .ok_or_else(|| missing_input(&data_root, DET_LEFT_FILE, "labeling"))?;

        let mut by_frame: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, row) in rows.iter().enumerate() {
            by_frame.entry(row.frame).or_default().push(i);
        }

        let no_dets = Vec::new();
        let no_gt = Vec::new();
        let mut labels: Vec<Option<Label>> = vec![None; rows.len()];
        for (frame, indices) in &by_frame {
            let hypotheses: Vec<Hypothesis> =
                indices.iter().map(|&i| rows[i].hypothesis()).collect();
            let frame_dets: Vec<ScoredBox> = dets
                .get(frame)
                .unwrap_or(&no_dets)
                .iter()
                .filter(|d| d.confidence >= args.conf_threshold)
                .copied()
                .collect();
            let verdicts = label_hypotheses(
                &hypotheses,
                &frame_dets,
                gt.get(frame).unwrap_or(&no_gt),
            );
            for (&i, verdict) in indices.iter().zip(verdicts) {
                labels[i] = verdict;
            }
        }

        let rows_in = rows.len();
        let mut kept = Vec::new();
        let (mut valid, mut invalid) = (0usize, 0usize);
        for (mut row, verdict) in rows.into_iter().zip(labels) {
            match verdict {
                Some(Label::ValidError) => valid += 1,
                Some(Label::Invalid) => invalid += 1,
                // only overlaps ignore regions: excluded from training
                None => continue,
            }
            row.label = verdict;
            kept.push(row);
        }
        write_file(
            &args.out.join(name).join(HYPOTHESES_FILE),
            write_hypotheses(&kept),
        )?;
        Ok((rows_in, valid, invalid))
    })?;

    let rows_in: usize = counts.iter().map(|c| c.0).sum();
    let valid: usize = counts.iter().map(|c| c.1).sum();
    let invalid: usize = counts.iter().map(|c| c.2).sum();
    let mut summary = KeyValues::new();
    summary
        .put("sequences", seqs.len())
        .put("rows_in", rows_in)
        .put("valid_errors", valid)
        .put("artifacts", invalid)
        .put("excluded_ignore", rows_in - valid - invalid);
    Ok(summary)
}

pub fn train(args: &TrainArgs) -> Result<KeyValues, CliError> {
    require_exists(&args.hypotheses, "--hypotheses directory")?;
    if args.trees == 0 {
        return Err(usage("--trees must be at least 1"));
    }
    let seqs = sequence_dirs(&args.hypotheses)?;

    let per_sequence = par_map(&seqs, |(name, dir)| {
        let table = dir.join(HYPOTHESES_FILE);
        let rows = read_hypotheses_file(&table)?;
        rows.into_iter()
            .map(|row| {
                let label = row.label.ok_or_else(|| {
                    data(anyhow!(
                        "{} has unlabeled rows; run the label stage first",
                        table.display()
                    ))
                })?;
                Ok(LabeledHypothesis {
                    features: row.features,
                    label,
                    provenance: Provenance {
                        sequence: name.clone(),
                        frame: row.frame,
                        cue: row.cue,
                        bbox: row.bbox,
                    },
                })
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;
    let samples: Vec<LabeledHypothesis> = per_sequence.into_iter().flatten().collect();
    let positives = samples
        .iter()
        .filter(|s| s.label.is_positive())
        .count();

    let model = train_forest(&samples, args.trees, args.seed).map_err(data)?;
    write_file(&args.out.join(MODEL_FILE), write_model(&model))?;

    let mut summary = KeyValues::new();
    summary
        .put("samples", samples.len())
        .put("positives", positives)
        .put("trees", args.trees)
        .put("seed", args.seed)
        .put("cue", model.cue);
    let importances = feature_importances(&model);
    summary.put("importances_degenerate", importances.degenerate);
    for (name, weight) in FEATURE_NAMES.iter().zip(&importances.weights) {
        summary.put(&format!("importance_{name}"), weight);
    }
    Ok(summary)
}

pub fn predict_scores(args: &PredictArgs) -> Result<KeyValues, CliError> {
    require_exists(&args.hypotheses, "--hypotheses directory")?;
    require_exists(&args.model, "--model file")?;
    let model = parse_file(&args.model, parse_model)?;
    let seqs = sequence_dirs(&args.hypotheses)?;

    let counts = par_map(&seqs, |(name, dir)| {
        let table = dir.join(HYPOTHESES_FILE);
        let mut rows = read_hypotheses_file(&table)?;
        for row in &mut rows {
            if row.cue != model.cue {
                return Err(data(anyhow!(
                    "cue mismatch: the model was trained on the {} cue but {} holds {} hypotheses",
                    model.cue,
                    table.display(),
                    row.cue
                )));
            }
            row.score = Some(predict(&model, &row.features).map_err(data)?);
        }
        write_file(
            &args.out.join(name).join(HYPOTHESES_FILE),
            write_hypotheses(&rows),
        )?;
        Ok(rows.len())
    })?;

    let mut summary = KeyValues::new();
    summary
        .put("sequences", seqs.len())
        .put("rows", counts.iter().sum::<usize>())
        .put("cue", model.cue);
    Ok(summary)
}

/// Read one cue's scored hypotheses for `fuse`, keeping rows at or above
/// the operating threshold as error boxes scored by the classifier.
fn scored_errors(
    root: &Path,
    name: &str,
    expected: Cue,
    threshold: f64,
) -> Result<Vec<ScoredBox>, CliError> {
    let table = root.join(name).join(HYPOTHESES_FILE);
    if !table.exists() {
        return Ok(Vec::new());
    }
    let rows = read_hypotheses_file(&table)?;
    let mut boxes = Vec::new();
    for row in rows {
        if row.cue != expected {
            return Err(data(anyhow!(
                "{} holds {} hypotheses but was passed as the {expected} side",
                table.display(),
                row.cue
            )));
        }
        let score = row.score.ok_or_else(|| {
            data(anyhow!(
                "{} has unscored rows; run the predict stage first",
                table.display()
            ))
        })?;
        if score >= threshold {
            boxes.push(
                ScoredBox::new(row.bbox, score, Category::Car, row.frame).map_err(data)?,
            );
        }
    }
    Ok(boxes)
}

pub fn fuse(args: &FuseArgs) -> Result<KeyValues, CliError> {
    require_exists(&args.temporal, "--temporal directory")?;
    require_exists(&args.stereo, "--stereo directory")?;
    require_unit(args.threshold, "threshold")?;
    let names: Vec<String> = sequence_dirs(&args.temporal)?
        .into_iter()
        .map(|(n, _)| n)
        .chain(sequence_dirs(&args.stereo)?.into_iter().map(|(n, _)| n))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let results = par_map(&names, |name| {
        let temporal = scored_errors(&args.temporal, name, Cue::Temporal, args.threshold)?;
        let stereo = scored_errors(&args.stereo, name, Cue::Stereo, args.threshold)?;
        let (fused, stats) = fuse_cues(&temporal, &stereo);

        let mut by_frame: BTreeMap<usize, Vec<ScoredBox>> = BTreeMap::new();
        for b in &fused {
            by_frame.entry(b.frame).or_default().push(*b);
        }
        write_file(
            &args.out.join(name).join(ERRORS_FILE),
            write_detections(&by_frame),
        )?;
        Ok((stats, fused.len()))
    })?;

    let mut total = FuseStats::default();
    let mut fused_count = 0usize;
    for (stats, n) in &results {
        total.total_temporal += stats.total_temporal;
        total.total_stereo += stats.total_stereo;
        total.unique_temporal += stats.unique_temporal;
        total.unique_stereo += stats.unique_stereo;
        total.intersection += stats.intersection;
        fused_count += n;
    }
    let mut summary = KeyValues::new();
    summary
        .put("sequences", names.len())
        .put("total_temporal", total.total_temporal)
        .put("total_stereo", total.total_stereo)
        .put("unique_temporal", total.unique_temporal)
        .put("unique_stereo", total.unique_stereo)
        .put("intersection", total.intersection)
        .put("fused", fused_count);
    Ok(summary)
}

pub fn eval(args: &EvalArgs) -> Result<KeyValues, CliError> {
    require_exists(&args.hypotheses, "--hypotheses directory")?;
    require_unit(args.threshold, "threshold")?;
    require_unit(args.conf_threshold, "conf-threshold")?;
    let seqs = sequence_dirs(&args.hypotheses)?;

    let per_sequence = par_map(&seqs, |(name, dir)| {
        let table = dir.join(HYPOTHESES_FILE);
        let rows = read_hypotheses_file(&table)?;
        rows.into_iter()
            .map(|row| {
                let label = row.label.ok_or_else(|| {
                    data(anyhow!(
                        "{} has unlabeled rows; evaluation needs ground-truth labels \
                         from the label stage",
                        table.display()
                    ))
                })?;
                let score = row.score.ok_or_else(|| {
                    data(anyhow!(
                        "{} has unscored rows; run the predict stage first",
                        table.display()
                    ))
                })?;
                Ok(RankItem {
                    score,
                    positive: label.is_positive(),
                    sequence: name.clone(),
                    frame: row.frame,
                    bbox: row.bbox,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;
    let items: Vec<RankItem> = per_sequence.into_iter().flatten().collect();
    let positives = items.iter().filter(|i| i.positive).count();

    let report = evaluate(&items, args.threshold).map_err(data)?;
    let (naive_ap, _) = naive_baseline(&items).map_err(data)?;

    let mut curve = String::from("recall,precision,threshold\n");
    for p in &report.pr_points {
        curve.push_str(&format!("{},{},{}\n", p.recall, p.precision, p.threshold));
    }
    write_file(&args.out.join("pr_curve.csv"), curve)?;

    let mut summary = KeyValues::new();
    summary
        .put("items", items.len())
        .put("positives", positives)
        .put("ap", report.ap)
        .put("naive_ap", naive_ap)
        .put("threshold", args.threshold)
        .put("true_positives", report.counts.true_positives)
        .put("false_positives", report.counts.false_positives)
        .put("false_negatives", report.counts.false_negatives)
        .put("f1", report.counts.f1());

    match (&args.errors, &args.data) {
        (None, None) => {}
        (Some(errors_root), Some(data_root)) => {
            let (before, after) = correction_counts(
                errors_root,
                data_root,
                args.conf_threshold,
            )?;
            summary
                .put("f1_before", before.f1())
                .put("f1_after", after.f1())
                .put("corrected_true_positives", after.true_positives)
                .put("corrected_false_positives", after.false_positives)
                .put("corrected_false_negatives", after.false_negatives);
        }
        _ => {
            return Err(usage(
                "--errors and --data go together: both are needed to judge corrections",
            ));
        }
    }
    Ok(summary)
}

/// Detector confusion counts against ground truth, before and after
/// merging the predicted error boxes, aggregated over all sequences.
fn correction_counts(
    errors_root: &Path,
    data_root: &Path,
    conf_threshold: f64,
) -> Result<(Counts, Counts), CliError> {
    require_exists(errors_root, "--errors directory")?;
    require_exists(data_root, "--data directory")?;
    let seqs = sequence_dirs(errors_root)?;

    let outcomes = par_map(&seqs, |(name, dir)| {
        let errors = parse_file(&dir.join(ERRORS_FILE), parse_detections)?;
        let seq_root = data_root.join(name);
        let seq = load_sequence(&seq_root, DEFAULT_MIN_HEIGHT, true).map_err(data)?;
        let gt = seq
            .ground_truth
            .ok_or_else(|| missing_input(&seq_root, GT_FILE, "judging corrections"))?;
        let dets: BTreeMap<usize, Vec<ScoredBox>> = seq
            .detections_left
            .ok_or_else(|| missing_input(&seq_root, DET_LEFT_FILE, "judging corrections"))?
            .into_iter()
            .map(|(f, boxes)| {
                let kept = boxes
                    .into_iter()
                    .filter(|d| d.confidence >= conf_threshold)
                    .collect();
                (f, kept)
            })
            .collect();
        Ok(f1_with_corrections(&dets, &errors, &gt, MATCH_IOU))
    })?;

    let mut before = Counts::default();
    let mut after = Counts::default();
    for o in outcomes {
        before.true_positives += o.counts_before.true_positives;
        before.false_positives += o.counts_before.false_positives;
        before.false_negatives += o.counts_before.false_negatives;
        after.true_positives += o.counts_after.true_positives;
        after.false_positives += o.counts_after.false_positives;
        after.false_negatives += o.counts_after.false_negatives;
    }
    Ok((before, after))
}

pub fn geomap(args: &GeomapArgs) -> Result<KeyValues, CliError> {
    require_exists(&args.data, "--data directory")?;
    require_exists(&args.errors, "--errors directory")?;
    if !args.bin_size.is_finite() || args.bin_size <= 0.0 {
        return Err(usage(format!(
            "--bin-size must be a positive number of meters, got {}",
            args.bin_size
        )));
    }
    let seqs = sequence_dirs(&args.errors)?;

    let grids = par_map(&seqs, |(name, dir)| {
        let errors = parse_file(&dir.join(ERRORS_FILE), parse_detections)?;
        let counts: BTreeMap<usize, usize> =
            errors.into_iter().map(|(f, boxes)| (f, boxes.len())).collect();
        let seq_root = args.data.join(name);
        let seq = load_sequence(&seq_root, DEFAULT_MIN_HEIGHT, true).map_err(data)?;
        let poses = seq
            .poses
            .ok_or_else(|| missing_input(&seq_root, POSES_FILE, "geographic binning"))?;
        bin_errors(&poses, &counts, args.bin_size).map_err(data)
    })?;

    let mut grid: Option<GeoGrid> = None;
    for g in grids {
        match &mut grid {
            None => grid = Some(g),
            Some(total) => total.merge(&g).map_err(data)?,
        }
    }
    let grid = grid.expect("sequence_dirs guarantees at least one sequence");
    let (csv, pgm) = blindspot_core::geo::export_heatmap(&grid).map_err(data)?;
    write_file(&args.out.join("heatmap.csv"), csv)?;
    write_file(&args.out.join("heatmap.pgm"), pgm)?;

    let frames: usize = grid.bins.values().map(|c| c.frame_count).sum();
    let errors: usize = grid.bins.values().map(|c| c.error_count).sum();
    let mut summary = KeyValues::new();
    summary
        .put("sequences", seqs.len())
        .put("cells", grid.bins.len())
        .put("frames", frames)
        .put("errors", errors);
    Ok(summary)
}
