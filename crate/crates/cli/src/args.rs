//! Flag definitions for every subcommand, plus the manifest echo: each
//! stage writes the exact parameter set it ran with into its output
//! directory, so a result tree is reproducible from its manifests alone.

use std::path::PathBuf;

use clap::Args;

use blindspot_core::geo::DEFAULT_BIN_SIZE_M;
use blindspot_core::stereo::MIN_VALID_FRACTION;
use blindspot_core::synth::SynthConfig;

use crate::support::KeyValues;

fn defaults() -> SynthConfig {
    SynthConfig::default()
}

#[derive(Args)]
pub struct SynthArgs {
    /// Directory to create the sequence directories in
    #[arg(long)]
    pub out: PathBuf,
    /// Master seed; each sequence derives an independent stream from it
    #[arg(long, default_value_t = defaults().seed)]
    pub seed: u64,
    /// Number of sequences to generate
    #[arg(long, default_value_t = defaults().n_sequences)]
    pub sequences: usize,
    /// Frames per sequence
    #[arg(long, default_value_t = defaults().frames_per_sequence)]
    pub frames: usize,
    /// Image width in pixels
    #[arg(long, default_value_t = defaults().image_width)]
    pub width: usize,
    /// Image height in pixels
    #[arg(long, default_value_t = defaults().image_height)]
    pub height: usize,
    /// Fewest objects per sequence
    #[arg(long, default_value_t = defaults().min_objects)]
    pub min_objects: usize,
    /// Most objects per sequence
    #[arg(long, default_value_t = defaults().max_objects)]
    pub max_objects: usize,
    /// Probability that the detector drops an object in one camera
    #[arg(long, default_value_t = defaults().miss_prob)]
    pub miss_prob: f64,
    /// Per-object per-frame probability of a false-positive detection
    #[arg(long, default_value_t = defaults().fp_rate)]
    pub fp_rate: f64,
    /// Half-width of the confidence band around 0.85
    #[arg(long, default_value_t = defaults().conf_noise)]
    pub conf_noise: f64,
    /// Detection box edge jitter in pixels
    #[arg(long, default_value_t = defaults().jitter_px)]
    pub jitter: f64,
    /// Fraction of disparity pixels marked invalid
    #[arg(long, default_value_t = defaults().speckle_fraction)]
    pub speckle: f64,
}

impl SynthArgs {
    pub fn manifest(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.put("command", "synth")
            .put("out", self.out.display())
            .put("seed", self.seed)
            .put("sequences", self.sequences)
            .put("frames", self.frames)
            .put("width", self.width)
            .put("height", self.height)
            .put("min_objects", self.min_objects)
            .put("max_objects", self.max_objects)
            .put("miss_prob", self.miss_prob)
            .put("fp_rate", self.fp_rate)
            .put("conf_noise", self.conf_noise)
            .put("jitter", self.jitter)
            .put("speckle", self.speckle);
        kv
    }
}

#[derive(Args)]
pub struct HypothesizeTemporalArgs {
    /// Root of the sequence directories (detections and tracklets)
    #[arg(long)]
    pub data: PathBuf,
    /// Directory for the per-sequence hypothesis tables
    #[arg(long)]
    pub out: PathBuf,
    /// Detector operating threshold; weaker detections do not count
    #[arg(long, default_value_t = 0.5)]
    pub conf_threshold: f64,
}

impl HypothesizeTemporalArgs {
    pub fn manifest(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.put("command", "hypothesize-temporal")
            .put("data", self.data.display())
            .put("out", self.out.display())
            .put("conf_threshold", self.conf_threshold);
        kv
    }
}

#[derive(Args)]
pub struct HypothesizeStereoArgs {
    /// Root of the sequence directories (detections and disparity maps)
    #[arg(long)]
    pub data: PathBuf,
    /// Directory for the per-sequence hypothesis tables
    #[arg(long)]
    pub out: PathBuf,
    /// Detector operating threshold; weaker detections do not count
    #[arg(long, default_value_t = 0.5)]
    pub conf_threshold: f64,
    /// Minimum fraction of valid disparity pixels under a box
    #[arg(long, default_value_t = MIN_VALID_FRACTION)]
    pub min_valid_fraction: f64,
}

impl HypothesizeStereoArgs {
    pub fn manifest(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.put("command", "hypothesize-stereo")
            .put("data", self.data.display())
            .put("out", self.out.display())
            .put("conf_threshold", self.conf_threshold)
            .put("min_valid_fraction", self.min_valid_fraction);
        kv
    }
}

#[derive(Args)]
pub struct FeaturizeArgs {
    /// Root of the sequence directories
    #[arg(long)]
    pub data: PathBuf,
    /// Directory of hypothesis tables to featurize
    #[arg(long)]
    pub hypotheses: PathBuf,
    /// Output directory of a hypothesize-stereo run, required for the
    /// stereo cue (its cohort is the shifted detections)
    #[arg(long)]
    pub shifted: Option<PathBuf>,
    /// Directory for the featurized tables
    #[arg(long)]
    pub out: PathBuf,
    /// Detector operating threshold; weaker detections do not count
    #[arg(long, default_value_t = 0.5)]
    pub conf_threshold: f64,
}

impl FeaturizeArgs {
    pub fn manifest(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.put("command", "featurize")
            .put("data", self.data.display())
            .put("hypotheses", self.hypotheses.display())
            .put("out", self.out.display())
            .put("conf_threshold", self.conf_threshold);
        if let Some(shifted) = &self.shifted {
            kv.put("shifted", shifted.display());
        }
        kv
    }
}

#[derive(Args)]
pub struct LabelArgs {
    /// Root of the sequence directories (must include ground truth)
    #[arg(long)]
    pub data: PathBuf,
    /// Directory of hypothesis tables to label
    #[arg(long)]
    pub hypotheses: PathBuf,
    /// Directory for the labeled tables
    #[arg(long)]
    pub out: PathBuf,
    /// Detector operating threshold; weaker detections do not count
    #[arg(long, default_value_t = 0.5)]
    pub conf_threshold: f64,
}

impl LabelArgs {
    pub fn manifest(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.put("command", "label")
            .put("data", self.data.display())
            .put("hypotheses", self.hypotheses.display())
            .put("out", self.out.display())
            .put("conf_threshold", self.conf_threshold);
        kv
    }
}

#[derive(Args)]
pub struct TrainArgs {
    /// Directory of labeled hypothesis tables
    #[arg(long)]
    pub hypotheses: PathBuf,
    /// Directory for the model file
    #[arg(long)]
    pub out: PathBuf,
    /// Number of trees in the forest
    #[arg(long, default_value_t = 30)]
    pub trees: usize,
    /// Seed for bootstrap sampling and feature subsets
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

impl TrainArgs {
    pub fn manifest(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.put("command", "train")
            .put("hypotheses", self.hypotheses.display())
            .put("out", self.out.display())
            .put("trees", self.trees)
            .put("seed", self.seed);
        kv
    }
}

#[derive(Args)]
pub struct PredictArgs {
    /// Directory of featurized hypothesis tables
    #[arg(long)]
    pub hypotheses: PathBuf,
    /// Trained model file
    #[arg(long)]
    pub model: PathBuf,
    /// Directory for the scored tables
    #[arg(long)]
    pub out: PathBuf,
}

impl PredictArgs {
    pub fn manifest(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.put("command", "predict")
            .put("hypotheses", self.hypotheses.display())
            .put("model", self.model.display())
            .put("out", self.out.display());
        kv
    }
}

#[derive(Args)]
pub struct FuseArgs {
    /// Directory of scored temporal hypothesis tables
    #[arg(long)]
    pub temporal: PathBuf,
    /// Directory of scored stereo hypothesis tables
    #[arg(long)]
    pub stereo: PathBuf,
    /// Directory for the fused error boxes
    #[arg(long)]
    pub out: PathBuf,
    /// Classifier score at or above which a hypothesis counts as an error
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
}

impl FuseArgs {
    pub fn manifest(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.put("command", "fuse")
            .put("temporal", self.temporal.display())
            .put("stereo", self.stereo.display())
            .put("out", self.out.display())
            .put("threshold", self.threshold);
        kv
    }
}

#[derive(Args)]
pub struct EvalArgs {
    /// Directory of labeled and scored hypothesis tables
    #[arg(long)]
    pub hypotheses: PathBuf,
    /// Directory for the report and precision-recall curve
    #[arg(long)]
    pub out: PathBuf,
    /// Classifier score at or above which a hypothesis counts as an error
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Directory of fused error boxes; with --data, also reports
    /// detector F1 before and after merging them in
    #[arg(long)]
    pub errors: Option<PathBuf>,
    /// Root of the sequence directories, for the F1 comparison
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Detector operating threshold used in the F1 comparison
    #[arg(long, default_value_t = 0.5)]
    pub conf_threshold: f64,
}

impl EvalArgs {
    pub fn manifest(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.put("command", "eval")
            .put("hypotheses", self.hypotheses.display())
            .put("out", self.out.display())
            .put("threshold", self.threshold)
            .put("conf_threshold", self.conf_threshold);
        if let Some(errors) = &self.errors {
            kv.put("errors", errors.display());
        }
        if let Some(data) = &self.data {
            kv.put("data", data.display());
        }
        kv
    }
}

#[derive(Args)]
pub struct GeomapArgs {
    /// Root of the sequence directories (must include ego poses)
    #[arg(long)]
    pub data: PathBuf,
    /// Directory of per-sequence error boxes
    #[arg(long)]
    pub errors: PathBuf,
    /// Directory for the heatmap files
    #[arg(long)]
    pub out: PathBuf,
    /// Grid cell size in meters
    #[arg(long, default_value_t = DEFAULT_BIN_SIZE_M)]
    pub bin_size: f64,
}

impl GeomapArgs {
    pub fn manifest(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.put("command", "geomap")
            .put("data", self.data.display())
            .put("errors", self.errors.display())
            .put("out", self.out.display())
            .put("bin_size", self.bin_size);
        kv
    }
}
