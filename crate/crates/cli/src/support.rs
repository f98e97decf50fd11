//! Shared plumbing for the pipeline stages: error classification,
//! sequence-directory discovery, manifest and summary serialization, and
//! a scoped thread pool for per-sequence parallelism.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{anyhow, Context};
use blindspot_core::formats::{parse_hypotheses, FormatError, HypothesisRow};

/// Name of the per-sequence hypothesis table written by the hypothesize
/// stages and rewritten by featurize, label and predict.
pub const HYPOTHESES_FILE: &str = "hypotheses.csv";
/// Disparity-shifted right detections, the cohort of the stereo cue.
pub const SHIFTED_FILE: &str = "shifted.txt";
/// Fused or predicted error boxes in detections format.
pub const ERRORS_FILE: &str = "errors.txt";
/// Serialized random forest.
pub const MODEL_FILE: &str = "model.txt";
/// Echo of the flags a stage ran with.
pub const MANIFEST_FILE: &str = "manifest.txt";
/// Machine-readable stage outcome.
pub const SUMMARY_FILE: &str = "summary.txt";

/// Failures split by exit code: usage errors are wrong invocations
/// (exit 1), data errors are problems with file contents discovered
/// while processing (exit 2).
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Data(e)
    }
}

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn data(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Data(e.into())
}

/// Require a user-supplied path to exist before the stage starts.
pub fn require_exists(path: &Path, what: &str) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(usage(format!("{what} {} does not exist", path.display())))
    }
}

/// Require a probability-like flag to lie in [0, 1].
pub fn require_unit(value: f64, flag: &str) -> Result<(), CliError> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(usage(format!("--{flag} must be in [0, 1], got {value}")))
    }
}

/// Subdirectories of `root`, sorted by name. Every pipeline stage treats
/// one subdirectory as one sequence.
pub fn sequence_dirs(root: &Path) -> Result<Vec<(String, PathBuf)>, CliError> {
    let entries = fs::read_dir(root)
        .with_context(|| format!("reading {}", root.display()))
        .map_err(CliError::Data)?;
    let mut dirs = Vec::new();
    for entry in entries {
        let entry = entry
            .with_context(|| format!("reading {}", root.display()))
            .map_err(CliError::Data)?;
        let path = entry.path();
        if path.is_dir() {
            let name = entry.file_name().to_string_lossy().into_owned();
            dirs.push((name, path));
        }
    }
    if dirs.is_empty() {
        return Err(data(anyhow!(
            "no sequence directories under {}",
            root.display()
        )));
    }
    dirs.sort();
    Ok(dirs)
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(CliError::Data)
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(CliError::Data)
}

/// Parse a file with `parse`, wrapping failures with the file path so
/// format errors always name file and line.
pub fn parse_file<T>(
    path: &Path,
    parse: impl FnOnce(&str) -> Result<T, FormatError>,
) -> Result<T, CliError> {
    let text = read_text(path)?;
    parse(&text)
        .map_err(|e| e.in_file(path.display().to_string()))
        .map_err(data)
}

pub fn read_hypotheses_file(path: &Path) -> Result<Vec<HypothesisRow>, CliError> {
    parse_file(path, parse_hypotheses)
}

/// Write a file, creating parent directories as needed.
pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))
            .map_err(CliError::Data)?;
    }
    fs::write(path, contents)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(CliError::Data)
}

/// Sorted key=value lines, the format of manifests, summaries and
/// reports. Contains nothing volatile, so identical runs produce
/// identical bytes.
pub fn key_value_lines(entries: &BTreeMap<String, String>) -> String {
    let mut out = String::new();
    for (k, v) in entries {
        out.push_str(k);
        out.push('=');
        out.push_str(v);
        out.push('\n');
    }
    out
}

/// Convenience builder for manifest and summary maps.
pub struct KeyValues(pub BTreeMap<String, String>);

impl KeyValues {
    pub fn new() -> Self {
        KeyValues(BTreeMap::new())
    }

    pub fn put(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.0.insert(key.to_string(), value.to_string());
        self
    }
}

/// Run `work` over the jobs on a scoped pool, one job per sequence.
/// Results come back in job order and the first failure (in that order)
/// wins, so parallel and sequential runs are indistinguishable.
pub fn par_map<J, T>(
    jobs: &[J],
    work: impl Fn(&J) -> Result<T, CliError> + Sync,
) -> Result<Vec<T>, CliError>
where
    J: Sync,
    T: Send,
{
    let n = jobs.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let workers = std::thread::available_parallelism()
        .map(|p| p.get())
        .unwrap_or(1)
        .min(n);
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<T, CliError>>>> =
        (0..n).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let result = work(&jobs[i]);
                *slots[i].lock().unwrap() = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().expect("every slot was filled"))
        .collect()
}
