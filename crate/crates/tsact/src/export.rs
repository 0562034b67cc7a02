//! Plot-ready exports: comparison report, CD/MCM/scatter CSVs and property tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use tsact_core::property::PropertyReport;
use tsact_core::stats::{AccuracyMatrix, ComparisonReport};
use tsact_core::{ActivationKind, Architecture};

use crate::bench::RunResult;
use crate::error::{Error, Result};

/// Mean accuracy per (dataset, activation) over the usable records of `arch`.
///
/// Methods follow the canonical activation order, datasets are sorted by name.
/// Any dataset × method combination without a usable record is reported as missing.
pub fn accuracy_matrix(records: &[RunResult], arch: Architecture) -> Result<AccuracyMatrix> {
    let mut latest: BTreeMap<&str, &RunResult> = BTreeMap::new();
    for r in records.iter().filter(|r| r.config.architecture == arch) {
        latest.insert(&r.config_hash, r);
    }
    let mut datasets = BTreeSet::new();
    let mut methods = BTreeSet::new();
    let mut cells: BTreeMap<(&str, &str), Vec<f64>> = BTreeMap::new();
    for r in latest.values() {
        let m = r.config.activation.name();
        datasets.insert(r.dataset.as_str());
        methods.insert(m);
        if let (true, Some(acc)) = (r.usable(), r.accuracy) {
            cells.entry((r.dataset.as_str(), m)).or_default().push(acc);
        }
    }
    if datasets.is_empty() {
        return Err(tsact_core::Error::Data(format!("no results for architecture {arch}")).into());
    }
    let order: Vec<&str> = ActivationKind::all().iter().map(|k| k.name()).collect();
    let mut methods: Vec<&str> = methods.into_iter().collect();
    methods.sort_by_key(|m| order.iter().position(|o| o == m).unwrap_or(usize::MAX));

    let mut missing = Vec::new();
    let mut values = Vec::with_capacity(datasets.len());
    for d in &datasets {
        let mut row = Vec::with_capacity(methods.len());
        for m in &methods {
            match cells.get(&(*d, *m)) {
                Some(accs) => row.push(accs.iter().sum::<f64>() / accs.len() as f64),
                None => {
                    missing.push(format!("{d}/{m}"));
                    row.push(f64::NAN);
                }
            }
        }
        values.push(row);
    }
    if !missing.is_empty() {
        return Err(Error::Incomplete { missing });
    }
    Ok(AccuracyMatrix::new(
        methods.iter().map(|m| m.to_string()).collect(),
        datasets.iter().map(|d| d.to_string()).collect(),
        values,
    )?)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    write_text(path, &(text + "\n"))
}

/// `method,avg_rank,clique_id`, one row per clique membership, in rank order.
pub fn cd_csv(report: &ComparisonReport) -> String {
    let mut out = String::from("method,avg_rank,clique_id\n");
    for &m in &report.rank_order {
        let name = &report.methods[m];
        for (id, clique) in report.cliques.iter().enumerate() {
            if clique.contains(name) {
                let _ = writeln!(out, "{name},{},{id}", report.average_ranks[m]);
            }
        }
    }
    out
}

/// Both orientations of every pair, rows ordered by mean accuracy of the first method.
pub fn mcm_csv(report: &ComparisonReport) -> String {
    let mut out = String::from("pair,a,b,mean_difference,p_value,p_adjusted,significant,win,tie,loss\n");
    for &i in &report.accuracy_order {
        for &j in &report.accuracy_order {
            if i == j {
                continue;
            }
            let (a, b) = (&report.methods[i], &report.methods[j]);
            let Some(p) = report.pair(a, b) else { continue };
            let (diff, wtl) = if &p.a == a {
                (p.mean_difference, p.wtl)
            } else {
                (-p.mean_difference, p.wtl.reversed())
            };
            let _ = writeln!(
                out,
                "{a}_vs_{b},{a},{b},{diff},{},{},{},{},{},{}",
                p.wilcoxon.p_value, p.p_adjusted, p.significant, wtl.win, wtl.tie, wtl.loss
            );
        }
    }
    out
}

pub fn scatter_csv(matrix: &AccuracyMatrix, a: usize, b: usize) -> String {
    let m = matrix.methods();
    let mut out = format!("dataset,acc_{},acc_{}\n", m[a], m[b]);
    for (d, row) in matrix.datasets().iter().zip(matrix.rows()) {
        let _ = writeln!(out, "{d},{},{}", row[a], row[b]);
    }
    out
}

/// Writes `report.json`, `cd.csv`, `mcm.csv` and every `scatter_<A>_vs_<B>.csv`.
/// Returns the files written.
pub fn write_comparison(dir: &Path, matrix: &AccuracyMatrix, report: &ComparisonReport) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let p = dir.join("report.json");
    write_json(&p, report)?;
    written.push(p);
    for (name, text) in [("cd.csv", cd_csv(report)), ("mcm.csv", mcm_csv(report))] {
        let p = dir.join(name);
        write_text(&p, &text)?;
        written.push(p);
    }
    let m = matrix.methods();
    for a in 0..m.len() {
        for b in a + 1..m.len() {
            let p = dir.join(format!("scatter_{}_vs_{}.csv", m[a], m[b]));
            write_text(&p, &scatter_csv(matrix, a, b))?;
            written.push(p);
        }
    }
    Ok(written)
}

pub fn properties_csv(reports: &[PropertyReport]) -> String {
    let mut out = String::from(
        "activation,lower_limit,upper_limit,catalog_lower,catalog_upper,monotone,catalog_monotone,\
         min_derivative,min_derivative_at,semi_period,semi_max_deviation,infimum,infimum_at,\
         matches_catalog,documented_deviation\n",
    );
    for r in reports {
        let c = r.kind.catalog();
        let (period, dev) = match r
            .semi_periodic
            .iter()
            .max_by(|a, b| a.max_deviation.total_cmp(&b.max_deviation))
        {
            Some(p) => (p.period.to_string(), p.max_deviation.to_string()),
            None => (String::new(), String::new()),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},\"{}\"",
            r.kind.name(),
            r.limits.negative.as_limit(),
            r.limits.positive.as_limit(),
            c.lower_limit,
            c.upper_limit,
            r.monotone.monotone,
            c.monotonic,
            r.monotone.min_derivative,
            r.monotone.witness,
            period,
            dev,
            r.infimum.value,
            r.infimum.x,
            r.matches_catalog,
            r.documented_deviation.as_deref().unwrap_or("").replace('"', "'"),
        );
    }
    out
}

/// Fixed-width summary for terminals.
pub fn properties_table(reports: &[PropertyReport]) -> String {
    let mut out = format!(
        "{:<12} {:>8} {:>8} {:>9} {:>14} {:>7}\n",
        "activation", "lower", "upper", "monotone", "semi-periodic", "match"
    );
    for r in reports {
        let semi = if r.semi_periodic.is_empty() {
            "-".to_string()
        } else if r.semi_periodic.iter().all(|p| p.holds) {
            format!("T={:.4}", r.semi_periodic[0].period)
        } else {
            "no".to_string()
        };
        let verdict = match (r.matches_catalog, &r.documented_deviation) {
            (true, Some(_)) => "ok*",
            (true, None) => "ok",
            (false, _) => "FAIL",
        };
        let _ = writeln!(
            out,
            "{:<12} {:>8} {:>8} {:>9} {:>14} {:>7}",
            r.kind.name(),
            r.limits.negative.as_limit().to_string(),
            r.limits.positive.as_limit().to_string(),
            r.monotone.monotone,
            semi,
            verdict
        );
    }
    if reports.iter().any(|r| r.documented_deviation.is_some()) {
        out.push_str("* documented deviation from the commonly listed limits\n");
    }
    out
}

pub fn write_properties(dir: &Path, reports: &[PropertyReport]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json = dir.join("properties.json");
    write_json(&json, reports)?;
    let csv = dir.join("properties.csv");
    write_text(&csv, &properties_csv(reports))?;
    Ok(vec![json, csv])
}
