//! Classifier comparison statistics.
//!
//! Average ranks, the Friedman test, pairwise Wilcoxon signed-rank tests
//! with Holm's step-down correction, win/tie/loss counts and the interval
//! cliques drawn in critical-difference diagrams.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;

/// Largest number of non-zero differences tested with the exact distribution.
pub const EXACT_CUTOFF: usize = 20;
/// `|d|` values closer than this (relative) share a rank.
pub const TIE_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_ALPHA: f64 = 0.05;

/// Complete `N × k` table of accuracies: one row per dataset, one column per method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyMatrix {
    methods: Vec<String>,
    datasets: Vec<String>,
    values: Vec<Vec<f64>>,
}

impl AccuracyMatrix {
    pub fn new(methods: Vec<String>, datasets: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        if methods.len() < 2 || datasets.len() < 2 {
            return Err(Error::Contract(format!(
                "need at least 2 methods and 2 datasets, got {} and {}",
                methods.len(),
                datasets.len()
            )));
        }
        if values.len() != datasets.len() || values.iter().any(|r| r.len() != methods.len()) {
            return Err(Error::Contract("accuracy matrix has missing cells".into()));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Contract("accuracy matrix has non-finite cells".into()));
        }
        for names in [&methods, &datasets] {
            let mut sorted = names.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != names.len() {
                return Err(Error::Contract(format!("duplicate names in {names:?}")));
            }
        }
        Ok(Self {
            methods,
            datasets,
            values,
        })
    }

    pub fn methods(&self) -> &[String] {
        &self.methods
    }

    pub fn datasets(&self) -> &[String] {
        &self.datasets
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|r| r[j]).collect()
    }

    pub fn k(&self) -> usize {
        self.methods.len()
    }

    pub fn n(&self) -> usize {
        self.datasets.len()
    }
}

/// Ranks of `row` with 1 for the largest value; ties share their mean rank.
pub fn rank_descending(row: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![0.0; row.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && row[order[j + 1]] == row[order[i]] {
            j += 1;
        }
        let mean = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = mean;
        }
        i = j + 1;
    }
    ranks
}

pub fn rank_matrix(matrix: &AccuracyMatrix) -> Vec<Vec<f64>> {
    matrix.rows().iter().map(|r| rank_descending(r)).collect()
}

/// Mean per-dataset rank of every method.
pub fn average_ranks(matrix: &AccuracyMatrix) -> Vec<f64> {
    let ranks = rank_matrix(matrix);
    let n = matrix.n() as f64;
    (0..matrix.k())
        .map(|j| ranks.iter().map(|r| r[j]).sum::<f64>() / n)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Friedman {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// `χ²_F = 12N / (k(k+1)) · Σ (R̄ⱼ − (k+1)/2)²` against χ² with `k − 1` degrees of freedom.
pub fn friedman(matrix: &AccuracyMatrix) -> Result<Friedman> {
    let k = matrix.k();
    if k < 3 {
        return Err(Error::Unsupported(
            "the Friedman test needs at least 3 methods; compare two methods with Wilcoxon".into(),
        ));
    }
    let n = matrix.n() as f64;
    let kf = k as f64;
    let centre = (kf + 1.0) / 2.0;
    let ss: f64 = average_ranks(matrix).iter().map(|r| (r - centre) * (r - centre)).sum();
    let statistic = 12.0 * n / (kf * (kf + 1.0)) * ss;
    Ok(Friedman {
        statistic,
        df: k - 1,
        p_value: math::chi_square_sf(statistic, kf - 1.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WilcoxonMethod {
    Exact,
    NormalApprox,
    /// Every difference was zero.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wilcoxon {
    /// `min(W⁺, W⁻)`.
    pub w: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    /// Number of non-zero differences.
    pub n: usize,
    pub zero_differences: usize,
    pub p_value: f64,
    pub method: WilcoxonMethod,
}

/// Ranks of `|d|` (ascending from 1) with near-equal values sharing their mean rank.
pub fn signed_rank_magnitudes(diffs: &[f64]) -> Vec<f64> {
    let abs: Vec<f64> = diffs.iter().map(|d| math::abs(*d)).collect();
    let mut order: Vec<usize> = (0..abs.len()).collect();
    order.sort_by(|&a, &b| abs[a].partial_cmp(&abs[b]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![0.0; abs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && near(abs[order[j + 1]], abs[order[i]]) {
            j += 1;
        }
        let mean = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = mean;
        }
        i = j + 1;
    }
    ranks
}

fn near(a: f64, b: f64) -> bool {
    math::abs(a - b) <= TIE_TOLERANCE * a.abs().max(b.abs())
}

/// Two-sided Wilcoxon signed-rank test of paired samples.
///
/// Zero differences are dropped. Up to [`EXACT_CUTOFF`] remaining pairs the
/// p-value is exact over all `2ⁿ` sign assignments (average ranks included);
/// above it a normal approximation with tie and continuity corrections is used.
pub fn wilcoxon(a: &[f64], b: &[f64]) -> Result<Wilcoxon> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Contract(format!(
            "Wilcoxon needs equal non-empty samples, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let zero_differences = a.len() - diffs.len();
    let n = diffs.len();
    if n == 0 {
        return Ok(Wilcoxon {
            w: 0.0,
            w_plus: 0.0,
            w_minus: 0.0,
            n,
            zero_differences,
            p_value: 1.0,
            method: WilcoxonMethod::Degenerate,
        });
    }
    let ranks = signed_rank_magnitudes(&diffs);
    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let w_minus = total - w_plus;
    let w = w_plus.min(w_minus);

    let (p_value, method) = if n <= EXACT_CUTOFF {
        (exact_p(&ranks, w), WilcoxonMethod::Exact)
    } else {
        (normal_p(&ranks, w), WilcoxonMethod::NormalApprox)
    };
    Ok(Wilcoxon {
        w,
        w_plus,
        w_minus,
        n,
        zero_differences,
        p_value,
        method,
    })
}

/// `min(1, 2·#{sign assignments with W⁺ ≤ w} / 2ⁿ)` by dynamic programming
/// over doubled (hence integral) ranks.
fn exact_p(ranks: &[f64], w: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| libm::round(2.0 * r) as usize).collect();
    let limit = libm::round(2.0 * w) as usize;
    let max: usize = doubled.iter().sum();
    // counts[s] = number of subsets of ranks with doubled sum s
    let mut counts = vec![0u64; max + 1];
    counts[0] = 1;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] != 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let hits: u64 = counts[..=limit.min(max)].iter().sum();
    let p = 2.0 * hits as f64 / libm::pow(2.0, ranks.len() as f64);
    p.min(1.0)
}

fn normal_p(ranks: &[f64], w: f64) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut sorted = ranks.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = (math::abs(w - mean) - 0.5) / math::sqrt(var);
    (2.0 * math::normal_sf(z)).min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Holm {
    pub adjusted: Vec<f64>,
    pub reject: Vec<bool>,
}

/// Holm's step-down adjustment; outputs are in input order.
pub fn holm(pvals: &[f64], alpha: f64) -> Result<Holm> {
    if let Some(p) = pvals.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Contract(format!("p-value {p} outside [0, 1]")));
    }
    let m = pvals.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvals[a].partial_cmp(&pvals[b]).unwrap_or(Ordering::Equal));
    let mut adjusted = vec![0.0; m];
    let mut reject = vec![false; m];
    let mut running = 0.0f64;
    let mut rejecting = true;
    for (rank, &i) in order.iter().enumerate() {
        let scaled = ((m - rank) as f64 * pvals[i]).min(1.0);
        running = running.max(scaled);
        adjusted[i] = running;
        rejecting = rejecting && running < alpha;
        reject[i] = rejecting;
    }
    Ok(Holm { adjusted, reject })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WinTieLoss {
    pub win: usize,
    pub tie: usize,
    pub loss: usize,
}

impl WinTieLoss {
    pub fn reversed(self) -> Self {
        Self {
            win: self.loss,
            tie: self.tie,
            loss: self.win,
        }
    }
}

/// Datasets on which `a` is better than, equal to, or worse than `b` (exact comparison).
pub fn win_tie_loss(a: &[f64], b: &[f64]) -> WinTieLoss {
    let mut out = WinTieLoss {
        win: 0,
        tie: 0,
        loss: 0,
    };
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(Ordering::Greater) => out.win += 1,
            Some(Ordering::Less) => out.loss += 1,
            _ => out.tie += 1,
        }
    }
    out
}

/// Win/tie/loss for every pair `(i, j)` with `i < j`.
pub fn pairwise_wtl(matrix: &AccuracyMatrix) -> Vec<(usize, usize, WinTieLoss)> {
    let cols: Vec<Vec<f64>> = (0..matrix.k()).map(|j| matrix.column(j)).collect();
    let mut out = Vec::new();
    for i in 0..matrix.k() {
        for j in i + 1..matrix.k() {
            out.push((i, j, win_tie_loss(&cols[i], &cols[j])));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairComparison {
    pub a: String,
    pub b: String,
    /// Mean accuracy of `a` minus mean accuracy of `b`.
    pub mean_difference: f64,
    pub wilcoxon: Wilcoxon,
    pub p_adjusted: f64,
    pub significant: bool,
    pub wtl: WinTieLoss,
}

/// Conventions that affect the numbers in a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub rank_order: String,
    pub zero_differences: String,
    pub exact_cutoff: usize,
    pub tie_tolerance: f64,
    pub multiple_testing: String,
    pub cliques: String,
}

impl Default for Conventions {
    fn default() -> Self {
        Self {
            rank_order: "rank 1 is the highest accuracy; ties share the mean rank".into(),
            zero_differences: "dropped before ranking (Wilcoxon), not Pratt".into(),
            exact_cutoff: EXACT_CUTOFF,
            tie_tolerance: TIE_TOLERANCE,
            multiple_testing: "Holm step-down over all method pairs".into(),
            cliques: "maximal runs of rank-ordered methods that are pairwise not significantly different".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub methods: Vec<String>,
    pub datasets: Vec<String>,
    pub alpha: f64,
    pub average_ranks: Vec<f64>,
    pub mean_accuracy: Vec<f64>,
    /// Method indices by ascending average rank (ties by name).
    pub rank_order: Vec<usize>,
    /// Method indices by descending mean accuracy (ties by name).
    pub accuracy_order: Vec<usize>,
    /// Absent for fewer than three methods.
    pub friedman: Option<Friedman>,
    pub pairs: Vec<PairComparison>,
    /// Method names per clique, each ordered by rank.
    pub cliques: Vec<Vec<String>>,
    pub conventions: Conventions,
}

impl ComparisonReport {
    pub fn pair(&self, a: &str, b: &str) -> Option<&PairComparison> {
        self.pairs
            .iter()
            .find(|p| (p.a == a && p.b == b) || (p.a == b && p.b == a))
    }

    pub fn significant(&self, a: &str, b: &str) -> bool {
        self.pair(a, b).is_some_and(|p| p.significant)
    }
}

fn order_by(values: &[f64], names: &[String], descending: bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        let c = values[a].partial_cmp(&values[b]).unwrap_or(Ordering::Equal);
        let c = if descending { c.reverse() } else { c };
        c.then_with(|| names[a].cmp(&names[b]))
    });
    order
}

/// Maximal intervals of `order` in which every pair is not significant.
///
/// `significant(i, j)` is queried with method indices. Every method lands in
/// at least one interval; intervals contained in an earlier one are dropped.
pub fn cliques(order: &[usize], significant: impl Fn(usize, usize) -> bool) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut covered_to: Option<usize> = None;
    for start in 0..order.len() {
        let mut end = start;
        'grow: while end + 1 < order.len() {
            let next = order[end + 1];
            for &m in &order[start..=end] {
                if significant(m, next) {
                    break 'grow;
                }
            }
            end += 1;
        }
        if covered_to.is_none_or(|c| end > c) {
            out.push(order[start..=end].to_vec());
            covered_to = Some(end);
        }
    }
    out
}

/// Assembles ranks, Friedman, all pairwise Wilcoxon tests with Holm
/// correction, win/tie/loss counts and cliques.
pub fn build_report(matrix: &AccuracyMatrix, alpha: f64) -> Result<ComparisonReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let k = matrix.k();
    let names = matrix.methods();
    let average_ranks = average_ranks(matrix);
    let cols: Vec<Vec<f64>> = (0..k).map(|j| matrix.column(j)).collect();
    let mean_accuracy: Vec<f64> = cols.iter().map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
    let friedman = if k >= 3 { Some(friedman(matrix)?) } else { None };

    let mut tests = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            tests.push((i, j, wilcoxon(&cols[i], &cols[j])?));
        }
    }
    let raw: Vec<f64> = tests.iter().map(|t| t.2.p_value).collect();
    let corrected = holm(&raw, alpha)?;

    let mut significant = vec![vec![false; k]; k];
    let pairs = tests
        .iter()
        .enumerate()
        .map(|(t, &(i, j, w))| {
            let sig = corrected.reject[t];
            significant[i][j] = sig;
            significant[j][i] = sig;
            PairComparison {
                a: names[i].clone(),
                b: names[j].clone(),
                mean_difference: mean_accuracy[i] - mean_accuracy[j],
                wilcoxon: w,
                p_adjusted: corrected.adjusted[t],
                significant: sig,
                wtl: win_tie_loss(&cols[i], &cols[j]),
            }
        })
        .collect();

    let rank_order = order_by(&average_ranks, names, false);
    let accuracy_order = order_by(&mean_accuracy, names, true);
    let cliques = cliques(&rank_order, |a, b| significant[a][b])
        .into_iter()
        .map(|c| c.into_iter().map(|m| names[m].clone()).collect())
        .collect();

    Ok(ComparisonReport {
        methods: names.to_vec(),
        datasets: matrix.datasets().to_vec(),
        alpha,
        average_ranks,
        mean_accuracy,
        rank_order,
        accuracy_order,
        friedman,
        pairs,
        cliques,
        conventions: Conventions::default(),
    })
}
