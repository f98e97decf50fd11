//! Subcommand driver for the false-negative mining pipeline.
//!
//! Every stage reads files, writes files, and echoes its parameters as
//! `manifest.txt` plus its outcome as `summary.txt` in the output
//! directory. Outputs are deterministic functions of inputs and flags.
//! Exit codes: 0 on success, 1 for wrong invocations, 2 for bad data.

mod args;
mod stages;
mod support;

use std::path::Path;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use support::{key_value_lines, write_file, CliError, KeyValues, MANIFEST_FILE, SUMMARY_FILE};

#[derive(Parser)]
#[command(
    name = "blindspot",
    version,
    about = "Mines missed detections from stereo driving logs by cross-checking \
             a detector against tracking and disparity"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic sequences with planted detector misses
    Synth(args::SynthArgs),
    /// Propose missed objects from tracklets the detector did not confirm
    HypothesizeTemporal(args::HypothesizeTemporalArgs),
    /// Propose missed objects from disparity-shifted right-camera detections
    HypothesizeStereo(args::HypothesizeStereoArgs),
    /// Recompute the feature vector of every hypothesis
    Featurize(args::FeaturizeArgs),
    /// Attach ground-truth verdicts to hypotheses
    Label(args::LabelArgs),
    /// Train the per-cue random forest on labeled hypotheses
    Train(args::TrainArgs),
    /// Score hypotheses with a trained model
    Predict(args::PredictArgs),
    /// Merge both cues' predicted errors and deduplicate
    Fuse(args::FuseArgs),
    /// Rank scored hypotheses against their labels
    Eval(args::EvalArgs),
    /// Bin error counts by ego position into a heatmap
    Geomap(args::GeomapArgs),
}

fn execute(
    out: &Path,
    manifest: KeyValues,
    run: impl FnOnce() -> Result<KeyValues, CliError>,
) -> Result<(), CliError> {
    write_file(&out.join(MANIFEST_FILE), key_value_lines(&manifest.0))?;
    let summary = run()?;
    write_file(&out.join(SUMMARY_FILE), key_value_lines(&summary.0))
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Synth(a) => execute(&a.out, a.manifest(), || stages::synth(a)),
        Command::HypothesizeTemporal(a) => {
            execute(&a.out, a.manifest(), || stages::hypothesize_temporal(a))
        }
        Command::HypothesizeStereo(a) => {
            execute(&a.out, a.manifest(), || stages::hypothesize_stereo(a))
        }
        Command::Featurize(a) => {
            execute(&a.out, a.manifest(), || stages::featurize_hypotheses(a))
        }
        Command::Label(a) => execute(&a.out, a.manifest(), || stages::label(a)),
        Command::Train(a) => execute(&a.out, a.manifest(), || stages::train(a)),
        Command::Predict(a) => execute(&a.out, a.manifest(), || stages::predict_scores(a)),
        Command::Fuse(a) => execute(&a.out, a.manifest(), || stages::fuse(a)),
        Command::Eval(a) => execute(&a.out, a.manifest(), || stages::eval(a)),
        Command::Geomap(a) => execute(&a.out, a.manifest(), || stages::geomap(a)),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version land here too; they are not errors
            let code = u8::from(e.use_stderr());
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
