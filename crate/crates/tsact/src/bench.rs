//! Sweeps over (dataset × activation × seed) cells with an append-only
//! JSON-lines results store and per-cell checkpoints.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tsact_core::data::majority_baseline;
use tsact_core::train::{self, Divergence};
use tsact_core::{ActivationKind, Dataset, ModelSpec, RunStatus, TrainConfig, TrainOutcome};

use crate::checkpoint::{write_checkpoint, Checkpoint};
use crate::error::{Error, Result};
use crate::ucr::{self, UcrDataset};

pub const RESULTS_FILE: &str = "results.jsonl";
pub const SWEEP_MANIFEST_FILE: &str = "sweep_manifest.json";
pub const CHECKPOINT_DIR: &str = "checkpoints";

/// Hex SHA-256 of the canonical (key-sorted, compact) JSON of `value`.
pub fn canonical_hash<T: Serialize>(value: &T) -> String {
    // `serde_json::Value` keeps object keys in a BTreeMap, so keys come out sorted.
    let v = serde_json::to_value(value).expect("config serializes to JSON");
    let text = serde_json::to_string(&v).expect("JSON value serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// One unit of work: a dataset and the full training configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub dataset: String,
    pub config: TrainConfig,
}

impl Cell {
    pub fn hash(&self) -> String {
        canonical_hash(self)
    }

    pub fn label(&self) -> String {
        format!(
            "{}/{}/{}/seed{}",
            self.dataset,
            self.config.architecture,
            self.config.activation.name(),
            self.config.seed
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub dataset: String,
    pub config_hash: String,
    pub config: TrainConfig,
    pub status: RunStatus,
    /// `correct / test_size`; absent only for failed runs.
    pub accuracy: Option<f64>,
    pub correct: usize,
    pub test_size: usize,
    /// Mean loss of the last finished epoch.
    pub train_loss: Option<f64>,
    pub epochs_run: usize,
    pub majority_baseline: Option<f64>,
    pub parameter_count: Option<usize>,
    pub divergence: Option<Divergence>,
    pub error: Option<String>,
    /// Relative to the results directory.
    pub checkpoint: Option<String>,
    pub wall_seconds: f64,
}

impl RunResult {
    pub fn usable(&self) -> bool {
        matches!(self.status, RunStatus::Completed | RunStatus::Diverged) && self.accuracy.is_some()
    }

    pub fn failed(cell: &Cell, hash: String, error: String, wall_seconds: f64) -> Self {
        Self {
            dataset: cell.dataset.clone(),
            config_hash: hash,
            config: cell.config.clone(),
            status: RunStatus::Failed,
            accuracy: None,
            correct: 0,
            test_size: 0,
            train_loss: None,
            epochs_run: 0,
            majority_baseline: None,
            parameter_count: None,
            divergence: None,
            error: Some(error),
            checkpoint: None,
            wall_seconds,
        }
    }
}

/// Trains one cell. Swappable so tests can inject faults.
pub trait CellExecutor: Sync {
    fn train(&self, spec: &ModelSpec, train: &Dataset, config: &TrainConfig) -> tsact_core::Result<TrainOutcome>;
}

/// Plain training with [`tsact_core::train::train`].
#[derive(Debug, Clone, Copy, Default)]
pub struct Trainer;

impl CellExecutor for Trainer {
    fn train(&self, spec: &ModelSpec, data: &Dataset, config: &TrainConfig) -> tsact_core::Result<TrainOutcome> {
        train::train(spec, data, config)
    }
}

/// Append-only `results.jsonl` plus checkpoints, safe to share between workers.
#[derive(Debug)]
pub struct ResultsStore {
    dir: PathBuf,
    file: Mutex<File>,
    done: Mutex<HashMap<String, RunStatus>>,
}

impl ResultsStore {
    pub fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(RESULTS_FILE);
        let done = if path.exists() {
            drop_torn_tail(&path)?;
            read_results(&path)?
                .into_iter()
                .map(|r| (r.config_hash, r.status))
                .filter(|(_, s)| *s != RunStatus::Failed)
                .collect()
        } else {
            HashMap::new()
        };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            file: Mutex::new(file),
            done: Mutex::new(done),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn results_path(&self) -> PathBuf {
        self.dir.join(RESULTS_FILE)
    }

    /// Completed or diverged runs are final; failed ones are retried.
    pub fn is_done(&self, hash: &str) -> bool {
        self.done.lock().expect("store lock").contains_key(hash)
    }

    /// Appends `result` unless its hash already has a final record.
    /// Returns whether a line was written.
    pub fn append(&self, result: &RunResult) -> Result<bool> {
        let mut done = self.done.lock().expect("store lock");
        if done.contains_key(&result.config_hash) {
            return Ok(false);
        }
        let mut line = serde_json::to_string(result).map_err(|e| Error::Json {
            path: self.results_path(),
            source: e,
        })?;
        line.push('\n');
        let mut f = self.file.lock().expect("file lock");
        f.write_all(line.as_bytes())
            .and_then(|_| f.flush())
            .map_err(|e| Error::io(self.results_path(), e))?;
        if result.status != RunStatus::Failed {
            done.insert(result.config_hash.clone(), result.status);
        }
        Ok(true)
    }

    pub fn checkpoint_rel(hash: &str) -> String {
        format!("{CHECKPOINT_DIR}/{hash}.ckpt")
    }
}

/// Cuts a final line that an interrupted write left without its newline.
fn drop_torn_tail(path: &Path) -> Result<()> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.is_empty() || bytes.ends_with(b"\n") {
        return Ok(());
    }
    let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    let f = OpenOptions::new()
        .write(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    f.set_len(keep as u64).map_err(|e| Error::io(path, e))
}

/// Reads every record; a torn final line from an interrupted write is ignored.
pub fn read_results(path: &Path) -> Result<Vec<RunResult>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let complete = text.ends_with('\n');
    let lines: Vec<&str> = text.lines().collect();
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => out.push(r),
            Err(_) if i + 1 == lines.len() && !complete => break,
            Err(e) => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row: i + 1,
                    column: e.column(),
                    detail: e.to_string(),
                })
            }
        }
    }
    Ok(out)
}

/// Trains and evaluates one cell, writing its checkpoint under `store_dir`.
///
/// Never returns an error: every problem becomes a failed record.
pub fn run_cell(cell: &Cell, data: &UcrDataset, executor: &dyn CellExecutor, store_dir: &Path) -> RunResult {
    let hash = cell.hash();
    let start = Instant::now();
    match execute_cell(cell, data, executor, store_dir) {
        Ok(r) => r,
        Err(e) => RunResult::failed(cell, hash, e.to_string(), start.elapsed().as_secs_f64()),
    }
}

/// Like [`run_cell`] but surfaces errors instead of recording them.
pub fn execute_cell(
    cell: &Cell,
    data: &UcrDataset,
    executor: &dyn CellExecutor,
    store_dir: &Path,
) -> Result<RunResult> {
    let start = Instant::now();
    let hash = cell.hash();
    let hash = hash.as_str();
    let cfg = &cell.config;
    let train_set = data.train.znormalize(cfg.normalization);
    let test_set = data.test.znormalize(cfg.normalization);
    let spec = cfg.spec_for(train_set.series_len(), train_set.n_classes())?;
    let outcome = executor.train(&spec, &train_set, cfg)?;
    // A diverged state can be finite yet still overflow at inference; that
    // cell stays diverged, without an accuracy.
    let (accuracy, correct, error) = match train::predict(&spec, &outcome.state, &test_set) {
        Ok(predicted) => {
            let correct = predicted.iter().zip(test_set.labels()).filter(|(p, l)| p == l).count();
            (Some(correct as f64 / test_set.len() as f64), correct, None)
        }
        Err(e @ tsact_core::Error::Numeric { .. }) if outcome.status == RunStatus::Diverged => {
            (None, 0, Some(format!("evaluation failed: {e}")))
        }
        Err(e) => return Err(e.into()),
    };

    let rel = ResultsStore::checkpoint_rel(hash);
    write_checkpoint(
        &store_dir.join(&rel),
        &Checkpoint {
            dataset: cell.dataset.clone(),
            config: cfg.clone(),
            spec: spec.clone(),
            state: outcome.state.clone(),
            optimizer: outcome.optimizer.clone(),
            history: outcome.history.clone(),
            status: outcome.status,
        },
    )?;

    Ok(RunResult {
        dataset: cell.dataset.clone(),
        config_hash: hash.to_string(),
        config: cfg.clone(),
        status: outcome.status,
        accuracy,
        correct,
        test_size: test_set.len(),
        train_loss: outcome.final_loss(),
        epochs_run: outcome.history.len(),
        majority_baseline: Some(majority_baseline(&train_set, &test_set)),
        parameter_count: Some(outcome.state.parameter_count()),
        divergence: outcome.divergence,
        error,
        checkpoint: Some(rel),
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Cross product of datasets, activations and seeds over a base configuration.
pub fn plan_cells(
    datasets: &[String],
    activations: &[ActivationKind],
    seeds: &[u64],
    base: &TrainConfig,
) -> Result<Vec<Cell>> {
    if datasets.is_empty() {
        return Err(tsact_core::Error::Config("sweep needs at least one dataset".into()).into());
    }
    if activations.is_empty() || seeds.is_empty() {
        return Err(tsact_core::Error::Config("sweep needs at least one activation and seed".into()).into());
    }
    let mut cells = Vec::with_capacity(datasets.len() * activations.len() * seeds.len());
    for d in datasets {
        for a in activations {
            for &seed in seeds {
                cells.push(Cell {
                    dataset: d.clone(),
                    config: TrainConfig {
                        activation: *a,
                        seed,
                        ..base.clone()
                    },
                });
            }
        }
    }
    Ok(cells)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SweepSummary {
    pub cells: usize,
    pub cached: usize,
    pub trained: usize,
    pub completed: usize,
    pub diverged: usize,
    pub failed: usize,
}

#[derive(Debug, Serialize)]
struct SweepManifest<'a> {
    cells: Vec<ManifestCell<'a>>,
}

#[derive(Debug, Serialize)]
struct ManifestCell<'a> {
    dataset: &'a str,
    activation: &'a str,
    seed: u64,
    config_hash: String,
    config: &'a TrainConfig,
}

pub fn write_sweep_manifest(dir: &Path, cells: &[Cell]) -> Result<()> {
    let manifest = SweepManifest {
        cells: cells
            .iter()
            .map(|c| ManifestCell {
                dataset: &c.dataset,
                activation: c.config.activation.name(),
                seed: c.config.seed,
                config_hash: c.hash(),
                config: &c.config,
            })
            .collect(),
    };
    let path = dir.join(SWEEP_MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Json {
        path: path.clone(),
        source: e,
    })?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

/// Runs every cell not already in `store`, up to `jobs` at a time.
///
/// Datasets are loaded once from `data_root`; a dataset that fails to load
/// turns each of its cells into a failed record.
pub fn run_sweep(
    cells: &[Cell],
    data_root: &Path,
    store: &ResultsStore,
    jobs: usize,
    executor: &dyn CellExecutor,
    on_result: &(dyn Fn(&RunResult) + Sync),
) -> Result<SweepSummary> {
    if cells.is_empty() {
        return Err(tsact_core::Error::Config("sweep has no cells".into()).into());
    }
    write_sweep_manifest(store.dir(), cells)?;

    let mut summary = SweepSummary {
        cells: cells.len(),
        ..Default::default()
    };
    let pending: Vec<&Cell> = cells.iter().filter(|c| !store.is_done(&c.hash())).collect();
    summary.cached = cells.len() - pending.len();

    let mut data: BTreeMap<&str, std::result::Result<UcrDataset, String>> = BTreeMap::new();
    for c in &pending {
        data.entry(c.dataset.as_str())
            .or_insert_with(|| ucr::load_dataset(data_root, &c.dataset).map_err(|e| e.to_string()));
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Usage(format!("cannot start {jobs} workers: {e}")))?;
    let results: Vec<Result<RunResult>> = pool.install(|| {
        pending
            .par_iter()
            .map(|cell| {
                let result = match &data[cell.dataset.as_str()] {
                    Ok(d) => run_cell(cell, d, executor, store.dir()),
                    Err(e) => RunResult::failed(cell, cell.hash(), e.clone(), 0.0),
                };
                store.append(&result)?;
                on_result(&result);
                Ok(result)
            })
            .collect()
    });
    for r in results {
        match r?.status {
            RunStatus::Completed => summary.completed += 1,
            RunStatus::Diverged => summary.diverged += 1,
            RunStatus::Failed => summary.failed += 1,
        }
        summary.trained += 1;
    }
    Ok(summary)
}

/// Record fields that must agree between two runs of the same manifest.
pub fn payload_without_timing(r: &RunResult) -> RunResult {
    RunResult {
        wall_seconds: 0.0,
        ..r.clone()
    }
}
