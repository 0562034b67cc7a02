//! UCR archive TSV files: one series per line, label first, tab-separated.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use tsact_core::{Dataset, LabelMap, Split};

use crate::error::{Error, Result};

/// Environment variable naming the archive root.
pub const DATA_ROOT_ENV: &str = "UCR_DATA_ROOT";

/// Parsed file contents before label encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSplit {
    pub labels: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

/// Train and test splits sharing the label map fitted on train.
#[derive(Debug, Clone, PartialEq)]
pub struct UcrDataset {
    pub train: Dataset,
    pub test: Dataset,
}

impl UcrDataset {
    pub fn name(&self) -> &str {
        &self.train.name
    }
}

pub fn parse_split(text: &str, path: &Path) -> Result<RawSplit> {
    let mut labels = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let row_no = i + 1;
        let mut values = Vec::new();
        for (j, field) in line.split('\t').enumerate() {
            let field = field.trim();
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                row: row_no,
                column: j + 1,
                detail: format!("{field:?} is not a number"),
            })?;
            if !v.is_finite() {
                return Err(tsact_core::Error::Unsupported(format!(
                    "{}:{row_no}:{}: missing or non-finite value (variable-length series are not supported)",
                    path.display(),
                    j + 1
                ))
                .into());
            }
            values.push(v);
        }
        if values.len() < 2 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row: row_no,
                column: 1,
                detail: "expected a label followed by at least one observation".into(),
            });
        }
        let series = values.split_off(1);
        if let Some(first) = rows.first() {
            if first.len() != series.len() {
                return Err(tsact_core::Error::Unsupported(format!(
                    "{}:{row_no}: series of length {} after length {} (ragged datasets are not supported)",
                    path.display(),
                    series.len(),
                    first.len()
                ))
                .into());
            }
        }
        labels.push(values[0]);
        rows.push(series);
    }
    if rows.is_empty() {
        return Err(tsact_core::Error::Data(format!("{}: no series", path.display())).into());
    }
    Ok(RawSplit { labels, rows })
}

pub fn read_split(path: &Path) -> Result<RawSplit> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_split(&text, path)
}

/// Loads one split. Without a map, the split's own labels define it.
pub fn load_ucr_split(path: &Path, name: &str, split: Split, label_map: Option<&LabelMap>) -> Result<Dataset> {
    let raw = read_split(path)?;
    let map = match label_map {
        Some(m) => m.clone(),
        None => LabelMap::fit(&raw.labels)?,
    };
    Ok(Dataset::from_raw(name, split, &raw.rows, &raw.labels, map)?)
}

/// `<root>/<Name>/<Name>_<SPLIT>.tsv`, falling back to `<root>/<Name>_<SPLIT>.tsv`.
pub fn split_path(root: &Path, name: &str, split: Split) -> Result<PathBuf> {
    let file = format!("{name}_{}.tsv", split.file_suffix());
    let nested = root.join(name).join(&file);
    if nested.is_file() {
        return Ok(nested);
    }
    let flat = root.join(&file);
    if flat.is_file() {
        return Ok(flat);
    }
    Err(Error::io(
        nested,
        std::io::Error::new(std::io::ErrorKind::NotFound, "dataset file not found"),
    ))
}

pub fn load_dataset(root: &Path, name: &str) -> Result<UcrDataset> {
    let train = load_ucr_split(&split_path(root, name, Split::Train)?, name, Split::Train, None)?;
    let test = load_ucr_split(
        &split_path(root, name, Split::Test)?,
        name,
        Split::Test,
        Some(train.label_map()),
    )?;
    if test.series_len() != train.series_len() {
        return Err(tsact_core::Error::Unsupported(format!(
            "{name}: train length {} differs from test length {}",
            train.series_len(),
            test.series_len()
        ))
        .into());
    }
    Ok(UcrDataset { train, test })
}

/// Renders a dataset in UCR format with the original labels.
///
/// Values use the shortest representation that parses back to the same bits.
pub fn format_split(dataset: &Dataset) -> String {
    let mut out = String::new();
    let raw = dataset.raw_labels();
    for (i, label) in raw.iter().enumerate() {
        let _ = write!(out, "{label}");
        for v in dataset.series().row(i) {
            let _ = write!(out, "\t{v}");
        }
        out.push('\n');
    }
    out
}

pub fn write_split(path: &Path, dataset: &Dataset) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, format_split(dataset)).map_err(|e| Error::io(path, e))
}
