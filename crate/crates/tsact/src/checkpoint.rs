//! Model checkpoints: a JSON header naming every tensor and its shape,
//! followed by the tensors as little-endian `f64`.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use tsact_core::tape::RunningStats;
use tsact_core::{Array, ModelSpec, ModelState, Optimizer, OptimizerConfig, RunStatus, TrainConfig};

use crate::error::{Error, Result};

const MAGIC: &str = "tsact-checkpoint 1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub dataset: String,
    pub config: TrainConfig,
    pub spec: ModelSpec,
    pub state: ModelState,
    pub optimizer: Optimizer,
    pub history: Vec<f64>,
    pub status: RunStatus,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    dataset: String,
    seed: u64,
    config: TrainConfig,
    spec: ModelSpec,
    status: RunStatus,
    history: Vec<f64>,
    optimizer: OptimizerConfig,
    optimizer_step: u64,
    tensors: Vec<TensorEntry>,
}

fn bad(path: &Path, detail: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        row: 0,
        column: 0,
        detail: detail.into(),
    }
}

pub fn write_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let mut tensors = Vec::new();
    let mut payload: Vec<&[f64]> = Vec::new();
    for (name, p) in ckpt.state.names.iter().zip(&ckpt.state.params) {
        tensors.push(TensorEntry {
            name: name.clone(),
            shape: p.shape().to_vec(),
        });
        payload.push(p.data());
    }
    for (i, r) in ckpt.state.running.iter().enumerate() {
        for (tag, v) in [("mean", &r.mean), ("var", &r.var)] {
            tensors.push(TensorEntry {
                name: format!("running.{i}.{tag}"),
                shape: vec![v.len()],
            });
            payload.push(v);
        }
    }
    for (i, pair) in ckpt.optimizer.slots().iter().enumerate() {
        for (j, v) in pair.iter().enumerate() {
            tensors.push(TensorEntry {
                name: format!("optimizer.{i}.{j}"),
                shape: vec![v.len()],
            });
            payload.push(v);
        }
    }
    let header = Header {
        dataset: ckpt.dataset.clone(),
        seed: ckpt.config.seed,
        config: ckpt.config.clone(),
        spec: ckpt.spec.clone(),
        status: ckpt.status,
        history: ckpt.history.clone(),
        optimizer: ckpt.optimizer.config,
        optimizer_step: ckpt.optimizer.step,
        tensors,
    };
    let json = serde_json::to_string(&header).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;

    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension("tmp");
    let write = || -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(fs::File::create(&tmp)?);
        writeln!(f, "{MAGIC}")?;
        writeln!(f, "{json}")?;
        for block in &payload {
            for v in block.iter() {
                f.write_all(&v.to_le_bytes())?;
            }
        }
        f.into_inner().map_err(|e| e.into_error())?.sync_all()
    };
    write().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut line = String::new();
    r.read_line(&mut line).map_err(|e| Error::io(path, e))?;
    if line.trim_end() != MAGIC {
        return Err(bad(path, "not a tsact checkpoint"));
    }
    line.clear();
    r.read_line(&mut line).map_err(|e| Error::io(path, e))?;
    let header: Header = serde_json::from_str(&line).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    let expected: usize = header.tensors.iter().map(|t| t.shape.iter().product::<usize>()).sum();
    if bytes.len() != expected * 8 {
        return Err(bad(
            path,
            format!("payload holds {} bytes, header describes {}", bytes.len(), expected * 8),
        ));
    }
    let mut values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));

    let mut names = Vec::new();
    let mut params = Vec::new();
    let mut running_flat = Vec::new();
    let mut slots_flat = Vec::new();
    for t in header.tensors {
        let n = t.shape.iter().product();
        let data: Vec<f64> = values.by_ref().take(n).collect();
        if t.name.starts_with("running.") {
            running_flat.push(data);
        } else if t.name.starts_with("optimizer.") {
            slots_flat.push(data);
        } else {
            params.push(Array::new(t.shape, data)?);
            names.push(t.name);
        }
    }
    if running_flat.len() % 2 != 0 || slots_flat.len() % 2 != 0 {
        return Err(bad(path, "unpaired running statistics or optimizer slots"));
    }
    let running = running_flat
        .chunks_exact(2)
        .map(|c| RunningStats {
            mean: c[0].clone(),
            var: c[1].clone(),
        })
        .collect();
    let slots = slots_flat
        .chunks_exact(2)
        .map(|c| [c[0].clone(), c[1].clone()])
        .collect();
    Ok(Checkpoint {
        dataset: header.dataset,
        config: header.config,
        spec: header.spec,
        state: ModelState { names, params, running },
        optimizer: Optimizer::from_parts(header.optimizer, header.optimizer_step, slots)?,
        history: header.history,
        status: header.status,
    })
}
