//! Core library for mining missed detections of single-frame object
//! detectors from unlabeled driving logs.
//!
//! The pipeline proposes error hypotheses from two independent consistency
//! cues, turns each hypothesis into a fixed feature vector, and scores it
//! with a random forest that separates real misses from tracker and stereo
//! artifacts:
//!
//! * [`temporal`] compares per-frame detections against tracklets; track
//!   boxes with no matching detection become hypotheses.
//! * [`stereo`] compares left-image detections against right-image
//!   detections shifted by their median disparity; shifted boxes with no
//!   matching left detection become hypotheses.
//! * [`features`] and [`classifier`] featurize, label and score the
//!   hypotheses; [`evaluation`] ranks them and fuses the two cues.
//! * [`geo`] accumulates scored errors on a ground-plan grid from ego
//!   poses, [`synth`] renders self-consistent synthetic sequences for
//!   end-to-end testing, and [`formats`] reads and writes every on-disk
//!   artifact the pipeline exchanges.

pub mod assignment;
pub mod classifier;
pub mod evaluation;
pub mod features;
pub mod formats;
pub mod geo;
pub mod geometry;
pub mod stereo;
pub mod synth;
pub mod temporal;
