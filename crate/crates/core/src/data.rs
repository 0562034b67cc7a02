//! Labelled univariate series, label encoding and z-normalization.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::array::Array;
use crate::error::{Error, Result};
use crate::{math, rng};

/// Series with a population standard deviation below this are treated as constant.
pub const CONSTANT_SERIES_STD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn file_suffix(self) -> &'static str {
        match self {
            Split::Train => "TRAIN",
            Split::Test => "TEST",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    PerSeries,
    None,
}

/// Bijection from raw (numeric) class labels to `0..C`, in ascending order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMap {
    classes: Vec<f64>,
}

impl LabelMap {
    /// Collects the distinct labels of `raw` and sorts them numerically.
    pub fn fit(raw: &[f64]) -> Result<Self> {
        if let Some(bad) = raw.iter().find(|v| !v.is_finite()) {
            return Err(Error::Data(format!("label {bad} is not finite")));
        }
        let mut classes = raw.to_vec();
        classes.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
        classes.dedup();
        if classes.len() < 2 {
            return Err(Error::Data(format!(
                "need at least two distinct labels, found {}",
                classes.len()
            )));
        }
        Ok(Self { classes })
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn classes(&self) -> &[f64] {
        &self.classes
    }

    pub fn index_of(&self, label: f64) -> Option<usize> {
        self.classes
            .binary_search_by(|c| c.partial_cmp(&label).unwrap_or(Ordering::Less))
            .ok()
    }

    pub fn encode(&self, raw: &[f64]) -> Result<Vec<usize>> {
        raw.iter()
            .map(|&l| {
                self.index_of(l)
                    .ok_or_else(|| Error::Data(format!("label {l} does not occur in the training split")))
            })
            .collect()
    }

    pub fn decode(&self, index: usize) -> Option<f64> {
        self.classes.get(index).copied()
    }
}

/// Encodes raw labels with a freshly fitted map.
pub fn encode_labels(raw: &[f64]) -> Result<(Vec<usize>, LabelMap)> {
    let map = LabelMap::fit(raw)?;
    let encoded = map.encode(raw)?;
    Ok((encoded, map))
}

/// Equal-length univariate series with encoded labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub split: Split,
    series: Array,
    labels: Vec<usize>,
    label_map: LabelMap,
}

impl Dataset {
    /// `series` must be `[N, L]` with `N = labels.len()` and every label below `C`.
    pub fn new(
        name: impl Into<String>,
        split: Split,
        series: Array,
        labels: Vec<usize>,
        label_map: LabelMap,
    ) -> Result<Self> {
        let shape = series.shape();
        if shape.len() != 2 || shape[0] != labels.len() {
            return Err(Error::Data(format!(
                "series shape {:?} does not match {} labels",
                shape,
                labels.len()
            )));
        }
        if shape[0] == 0 || shape[1] == 0 {
            return Err(Error::Data("dataset is empty".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= label_map.n_classes()) {
            return Err(Error::Data(format!(
                "encoded label {bad} out of range for {} classes",
                label_map.n_classes()
            )));
        }
        if !series.is_finite() {
            return Err(Error::Data("series contain non-finite values".into()));
        }
        Ok(Self {
            name: name.into(),
            split,
            series,
            labels,
            label_map,
        })
    }

    /// Builds a dataset from raw rows and raw labels, encoding with `label_map`.
    pub fn from_raw(
        name: impl Into<String>,
        split: Split,
        rows: &[Vec<f64>],
        raw_labels: &[f64],
        label_map: LabelMap,
    ) -> Result<Self> {
        let series = Array::from_rows(rows).map_err(|_| Error::Unsupported("series differ in length".into()))?;
        let labels = label_map.encode(raw_labels)?;
        Self::new(name, split, series, labels, label_map)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn series_len(&self) -> usize {
        self.series.shape()[1]
    }

    pub fn n_classes(&self) -> usize {
        self.label_map.n_classes()
    }

    pub fn series(&self) -> &Array {
        &self.series
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label_map(&self) -> &LabelMap {
        &self.label_map
    }

    /// Raw labels in their original numeric form.
    pub fn raw_labels(&self) -> Vec<f64> {
        self.labels.iter().map(|&l| self.label_map.classes[l]).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Most frequent class, lowest index on ties.
    pub fn majority_class(&self) -> usize {
        let counts = self.class_counts();
        let mut best = 0;
        for (i, &c) in counts.iter().enumerate() {
            if c > counts[best] {
                best = i;
            }
        }
        best
    }

    pub fn znormalize(&self, mode: Normalization) -> Self {
        let mut out = self.clone();
        if mode == Normalization::PerSeries {
            let len = self.series_len();
            for row in out.series.data_mut().chunks_exact_mut(len) {
                znormalize_in_place(row);
            }
        }
        out
    }
}

/// Rescales to mean 0 and population standard deviation 1; near-constant input becomes zeros.
pub fn znormalize_in_place(row: &mut [f64]) {
    if row.is_empty() {
        return;
    }
    let n = row.len() as f64;
    let mean = row.iter().sum::<f64>() / n;
    let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = math::sqrt(var);
    if std < CONSTANT_SERIES_STD {
        row.fill(0.0);
    } else {
        for v in row.iter_mut() {
            *v = (*v - mean) / std;
        }
    }
}

/// Accuracy of always predicting the training split's majority class.
pub fn majority_baseline(train: &Dataset, test: &Dataset) -> f64 {
    let class = train.majority_class();
    let hits = test.labels().iter().filter(|&&l| l == class).count();
    hits as f64 / test.len() as f64
}

/// Two-class toy set: class 0 is `sin(2πt/L)`, class 1 is flat zero.
///
/// `noise` adds uniform jitter in `[-noise, noise]` drawn from `seed`.
pub fn sine_vs_flat(per_class: usize, len: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if per_class == 0 || len == 0 {
        return Err(Error::Config(
            "toy dataset needs at least one series of length ≥ 1".into(),
        ));
    }
    let mut r = rng::stream(seed, &[0x7079]);
    let mut rows = Vec::with_capacity(2 * per_class);
    let mut raw = Vec::with_capacity(2 * per_class);
    for class in 0..2 {
        for _ in 0..per_class {
            let row = (0..len)
                .map(|t| {
                    let base = if class == 0 {
                        math::sin(2.0 * core::f64::consts::PI * t as f64 / len as f64)
                    } else {
                        0.0
                    };
                    if noise > 0.0 {
                        base + r.random_range(-noise..=noise)
                    } else {
                        base
                    }
                })
                .collect();
            rows.push(row);
            raw.push(class as f64);
        }
    }
    let map = LabelMap::fit(&raw)?;
    Dataset::from_raw("SineVsFlat", Split::Train, &rows, &raw, map)
}
