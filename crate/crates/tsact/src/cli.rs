//! Command-line front end. [`main_with_args`] maps every outcome to an exit code.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use tsact_core::activation::name_list;
use tsact_core::property::{self, dead_region_trace, linspace};
use tsact_core::stats::{build_report, DEFAULT_ALPHA};
use tsact_core::{ActivationKind, Architecture, Normalization, RunStatus, TrainConfig};

use crate::bench::{self, read_results, Cell, ResultsStore, RunResult, Trainer};
use crate::config::{resolve_data_root, resolve_out, FileConfig, Invocation};
use crate::error::{Error, Result};
use crate::export;
use crate::ucr::{self, DATA_ROOT_ENV};

#[derive(Debug, Parser)]
#[command(
    name = "tsact",
    version,
    about = "Semi-periodic activations for time-series classification"
)]
pub struct Cli {
    /// TOML file with defaults (data_root, out, seed, jobs, epochs, batch_size, alpha).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Root of the per-invocation output directories.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Probe limits, monotonicity and semi-periodicity against the catalog.
    Analyze {
        /// Activation name or `all`.
        #[arg(long, default_value = "all")]
        activation: String,
    },
    /// Train and evaluate one model on one UCR dataset.
    Train {
        #[arg(long)]
        activation: String,
        #[arg(long)]
        dataset: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Sweep datasets × activations; resumes from the results store.
    Bench {
        /// Comma-separated names or `all`.
        #[arg(long, default_value = "all")]
        activations: String,
        /// A file with one dataset per line, or a comma-separated list.
        #[arg(long)]
        datasets: String,
        /// Comma-separated seeds (one record per seed); defaults to --seed.
        #[arg(long)]
        seeds: Option<String>,
        /// Cells trained in parallel.
        #[arg(long)]
        jobs: Option<usize>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Ranks, Friedman, Wilcoxon + Holm, CD and MCM data from a results store.
    Compare {
        /// `results.jsonl` or a directory containing one.
        #[arg(long)]
        results: PathBuf,
        #[arg(long, default_value = "mlp")]
        arch: String,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Activation values, derivatives and dead-region statistics along a series.
    Trace {
        #[arg(long)]
        activation: String,
        /// A file (UCR TSV or plain numbers) or a literal row of numbers.
        #[arg(long, conflicts_with = "grid", required_unless_present = "grid")]
        input: Option<String>,
        /// Evenly spaced grid `lo:hi:n` instead of an input series.
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        /// Zero-based line of the input file to trace.
        #[arg(long, default_value_t = 0)]
        row: usize,
        /// Drop the first field (the label of a UCR row).
        #[arg(long)]
        skip_label: bool,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, default_value = "mlp")]
    pub arch: String,
    #[arg(long, env = DATA_ROOT_ENV, hide_env_values = true)]
    pub data_root: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Build the FCN without batch normalization.
    #[arg(long)]
    pub no_norm_layers: bool,
    /// Keep series as stored instead of z-normalizing each one.
    #[arg(long)]
    pub no_znorm: bool,
}

fn parse_activation(name: &str) -> Result<ActivationKind> {
    ActivationKind::from_str(name)
        .map_err(|_| Error::Usage(format!("unknown activation `{name}`; expected one of: {}", name_list())))
}

fn parse_activations(list: &str) -> Result<Vec<ActivationKind>> {
    if list.trim().eq_ignore_ascii_case("all") {
        return Ok(ActivationKind::all().to_vec());
    }
    let kinds = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse_activation)
        .collect::<Result<Vec<_>>>()?;
    if kinds.is_empty() {
        return Err(Error::Usage("no activations given".into()));
    }
    Ok(kinds)
}

fn parse_arch(name: &str) -> Result<Architecture> {
    Architecture::from_str(name).map_err(|e| Error::Usage(e.to_string()))
}

fn parse_list<T: FromStr>(list: &str, what: &str) -> Result<Vec<T>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Error::Usage(format!("invalid {what} `{s}`"))))
        .collect()
}

fn dataset_names(arg: &str) -> Result<Vec<String>> {
    let path = Path::new(arg);
    let names: Vec<String> = if path.is_file() {
        fs::read_to_string(path)
            .map_err(|e| Error::io(path, e))?
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim().to_string())
            .filter(|l| !l.is_empty())
            .collect()
    } else {
        arg.split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect()
    };
    if names.is_empty() {
        return Err(Error::Usage("no datasets given".into()));
    }
    Ok(names)
}

struct Context {
    file: FileConfig,
    out: PathBuf,
}

impl Context {
    fn train_config(&self, run: &RunArgs, activation: ActivationKind) -> Result<TrainConfig> {
        let arch = parse_arch(&run.arch)?;
        let base = TrainConfig::standard(arch, activation);
        let cfg = TrainConfig {
            epochs: run.epochs.or(self.file.epochs).unwrap_or(base.epochs),
            batch_size: run.batch_size.or(self.file.batch_size).unwrap_or(base.batch_size),
            seed: run.seed.or(self.file.seed).unwrap_or(base.seed),
            normalization: if run.no_znorm {
                Normalization::None
            } else {
                Normalization::PerSeries
            },
            norm_enabled: !run.no_norm_layers,
            ..base
        };
        cfg.validate().map_err(|e| Error::Usage(e.to_string()))?;
        Ok(cfg)
    }

    fn data_root(&self, run: &RunArgs) -> Result<PathBuf> {
        // clap already folded UCR_DATA_ROOT into the flag value.
        resolve_data_root(run.data_root.as_deref(), None, &self.file).ok_or_else(|| {
            Error::Usage(format!(
                "no data root: pass --data-root, set {DATA_ROOT_ENV} or add data_root to --config"
            ))
        })
    }
}

/// Parses `args` and runs the command, printing errors to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let out = resolve_out(cli.out.as_deref(), &file);
    let ctx = Context { file, out };
    match cli.command {
        Command::Analyze { activation } => analyze(&ctx, &activation),
        Command::Train {
            activation,
            dataset,
            run,
        } => train(&ctx, &activation, &dataset, &run),
        Command::Bench {
            activations,
            datasets,
            seeds,
            jobs,
            run,
        } => bench(&ctx, &activations, &datasets, seeds.as_deref(), jobs, &run),
        Command::Compare { results, arch, alpha } => compare(&ctx, &results, &arch, alpha),
        Command::Trace {
            activation,
            input,
            grid,
            row,
            skip_label,
            csv,
        } => trace(
            &ctx,
            &activation,
            input.as_deref(),
            grid.as_deref(),
            row,
            skip_label,
            csv.as_deref(),
        ),
    }
}

fn analyze(ctx: &Context, activation: &str) -> Result<()> {
    let kinds = parse_activations(activation)?;
    let names: Vec<&str> = kinds.iter().map(|k| k.name()).collect();
    let inv = Invocation::create(
        &ctx.out,
        "analyze",
        &names,
        &serde_json::json!({ "activations": names }),
    )?;
    let reports = kinds
        .iter()
        .map(property::analyze)
        .collect::<tsact_core::Result<Vec<_>>>()?;
    export::write_properties(&inv.dir, &reports)?;
    print!("{}", export::properties_table(&reports));
    println!("wrote {}", inv.dir.display());
    let failed: Vec<String> = reports
        .iter()
        .filter(|r| !r.matches_catalog)
        .map(|r| format!("{}: {}", r.kind.name(), r.mismatches.join("; ")))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Check(format!("catalog mismatches: {}", failed.join(" | "))))
    }
}

#[derive(Serialize)]
struct TrainManifest<'a> {
    dataset: &'a str,
    data_root: &'a Path,
    config: &'a TrainConfig,
}

fn train(ctx: &Context, activation: &str, dataset: &str, run: &RunArgs) -> Result<()> {
    let kind = parse_activation(activation)?;
    let config = ctx.train_config(run, kind)?;
    let root = ctx.data_root(run)?;
    let identity = Cell {
        dataset: dataset.to_string(),
        config: config.clone(),
    };
    let inv = Invocation::create(
        &ctx.out,
        "train",
        &identity,
        &TrainManifest {
            dataset,
            data_root: &root,
            config: &config,
        },
    )?;
    let store = ResultsStore::open(&inv.dir)?;
    let cell = identity;
    let result = match bench::read_results(&store.results_path())?
        .into_iter()
        .rev()
        .find(|r| r.config_hash == cell.hash() && r.status != RunStatus::Failed)
    {
        Some(r) => {
            println!("cached result for {}", cell.label());
            r
        }
        None => {
            let data = ucr::load_dataset(&root, dataset)?;
            match bench::execute_cell(&cell, &data, &Trainer, store.dir()) {
                Ok(r) => {
                    store.append(&r)?;
                    r
                }
                Err(e) => {
                    store.append(&RunResult::failed(&cell, cell.hash(), e.to_string(), 0.0))?;
                    return Err(e);
                }
            }
        }
    };
    print_result(&result);
    println!("wrote {}", inv.dir.display());
    match (&result.status, &result.divergence) {
        (RunStatus::Diverged, Some(d)) => Err(Error::Diverged {
            epoch: d.epoch,
            batch: d.batch,
            detail: d.detail.clone(),
        }),
        _ => Ok(()),
    }
}

fn print_result(r: &RunResult) {
    let acc = r.accuracy.map_or("-".to_string(), |a| format!("{a:.4}"));
    let base = r.majority_baseline.map_or("-".to_string(), |a| format!("{a:.4}"));
    println!(
        "{} {} {}: accuracy {acc} ({}/{}), majority baseline {base}, train loss {}, {} epochs, {:?}",
        r.dataset,
        r.config.architecture,
        r.config.activation.name(),
        r.correct,
        r.test_size,
        r.train_loss.map_or("-".to_string(), |l| format!("{l:.6}")),
        r.epochs_run,
        r.status,
    );
}

#[derive(Serialize)]
struct BenchManifest<'a> {
    datasets: &'a [String],
    activations: Vec<&'a str>,
    seeds: &'a [u64],
    base: &'a TrainConfig,
    data_root: &'a Path,
    jobs: usize,
}

fn bench(
    ctx: &Context,
    activations: &str,
    datasets: &str,
    seeds: Option<&str>,
    jobs: Option<usize>,
    run: &RunArgs,
) -> Result<()> {
    let kinds = parse_activations(activations)?;
    let names = dataset_names(datasets)?;
    let base = ctx.train_config(run, kinds[0])?;
    let seeds: Vec<u64> = match seeds {
        Some(s) => parse_list(s, "seed")?,
        None => vec![base.seed],
    };
    let jobs = jobs.or(ctx.file.jobs).unwrap_or(1);
    if jobs == 0 {
        return Err(Error::Usage("--jobs must be at least 1".into()));
    }
    let root = ctx.data_root(run)?;
    let cells = bench::plan_cells(&names, &kinds, &seeds, &base)?;
    let hashes: Vec<String> = cells.iter().map(Cell::hash).collect();
    let manifest = BenchManifest {
        datasets: &names,
        activations: kinds.iter().map(|k| k.name()).collect(),
        seeds: &seeds,
        base: &base,
        data_root: &root,
        jobs,
    };
    let inv = Invocation::create(&ctx.out, "bench", &hashes, &manifest)?;
    let store = ResultsStore::open(&inv.dir)?;
    let report = |r: &RunResult| {
        let acc = r.accuracy.map_or("-".to_string(), |a| format!("{a:.4}"));
        let mut err = std::io::stderr().lock();
        let _ = writeln!(
            err,
            "{} {} {acc} {:?}{}",
            r.dataset,
            r.config.activation.name(),
            r.status,
            r.error.as_deref().map(|e| format!(": {e}")).unwrap_or_default()
        );
    };
    let summary = bench::run_sweep(&cells, &root, &store, jobs, &Trainer, &report)?;
    println!(
        "{} cached, {} trained ({} completed, {} diverged, {} failed)",
        summary.cached, summary.trained, summary.completed, summary.diverged, summary.failed
    );
    println!("wrote {}", store.results_path().display());
    Ok(())
}

fn compare(ctx: &Context, results: &Path, arch: &str, alpha: Option<f64>) -> Result<()> {
    let arch = parse_arch(arch)?;
    let alpha = alpha.or(ctx.file.alpha).unwrap_or(DEFAULT_ALPHA);
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Usage(format!("--alpha must lie in (0, 1), got {alpha}")));
    }
    let path = if results.is_dir() {
        results.join(bench::RESULTS_FILE)
    } else {
        results.to_path_buf()
    };
    let records = read_results(&path)?;
    let content = bench::canonical_hash(&records.iter().map(bench::payload_without_timing).collect::<Vec<_>>());
    let inv = Invocation::create(
        &ctx.out,
        "compare",
        &(&content, arch, alpha),
        &serde_json::json!({
            "results": path,
            "results_hash": content,
            "architecture": arch,
            "alpha": alpha,
        }),
    )?;
    let matrix = export::accuracy_matrix(&records, arch)?;
    let report = build_report(&matrix, alpha)?;
    let files = export::write_comparison(&inv.dir, &matrix, &report)?;

    println!("{:<12} {:>9} {:>9}", "method", "avg rank", "mean acc");
    for &m in &report.rank_order {
        println!(
            "{:<12} {:>9.4} {:>9.4}",
            report.methods[m], report.average_ranks[m], report.mean_accuracy[m]
        );
    }
    if let Some(f) = &report.friedman {
        println!("friedman chi2 {:.4} (df {}), p = {:.4e}", f.statistic, f.df, f.p_value);
    }
    for (i, c) in report.cliques.iter().enumerate() {
        println!("clique {i}: {}", c.join(", "));
    }
    println!("wrote {} files to {}", files.len(), inv.dir.display());
    Ok(())
}

fn parse_numbers(text: &str, origin: &Path, row: usize) -> Result<Vec<f64>> {
    text.split(|c: char| c == '\t' || c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .enumerate()
        .map(|(j, s)| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    path: origin.to_path_buf(),
                    row: row + 1,
                    column: j + 1,
                    detail: format!("{s:?} is not a finite number"),
                })
        })
        .collect()
}

fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::Usage(format!("--grid expects lo:hi:n, got `{spec}`"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n < 2 || lo >= hi || !lo.is_finite() || !hi.is_finite() {
        return Err(bad());
    }
    Ok(linspace(lo, hi, n))
}

/// `-2pi`, `6.28`, `pi/2` style bounds are common; accept `pi` multiples.
fn expand_pi(spec: &str) -> String {
    spec.split(':')
        .map(|p| {
            let p = p.trim();
            match p.strip_suffix("pi") {
                Some(coef) => {
                    let c = match coef {
                        "" | "+" => 1.0,
                        "-" => -1.0,
                        c => c.trim_end_matches('*').parse().unwrap_or(f64::NAN),
                    };
                    (c * std::f64::consts::PI).to_string()
                }
                None => p.to_string(),
            }
        })
        .collect::<Vec<_>>()
        .join(":")
}

#[derive(Serialize)]
struct TraceStats {
    activation: &'static str,
    n: usize,
    dead_fraction: f64,
    negative_fraction: f64,
    min_derivative: f64,
    max_derivative: f64,
}

fn trace(
    ctx: &Context,
    activation: &str,
    input: Option<&str>,
    grid: Option<&str>,
    row: usize,
    skip_label: bool,
    csv: Option<&Path>,
) -> Result<()> {
    let kind = parse_activation(activation)?;
    let mut series = match (input, grid) {
        (_, Some(g)) => parse_grid(&expand_pi(g))?,
        (Some(inp), None) => {
            let path = Path::new(inp);
            if path.is_file() {
                let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                let line = text
                    .lines()
                    .filter(|l| !l.trim().is_empty())
                    .nth(row)
                    .ok_or_else(|| Error::Parse {
                        path: path.to_path_buf(),
                        row: row + 1,
                        column: 0,
                        detail: "no such row".into(),
                    })?;
                parse_numbers(line, path, row)?
            } else {
                parse_numbers(inp, Path::new("<input>"), 0)?
            }
        }
        (None, None) => return Err(Error::Usage("pass --input or --grid".into())),
    };
    if skip_label && grid.is_none() && !series.is_empty() {
        series.remove(0);
    }
    if series.is_empty() {
        return Err(tsact_core::Error::Data("input series is empty".into()).into());
    }

    let inv = Invocation::create(
        &ctx.out,
        "trace",
        &(kind.name(), &series),
        &serde_json::json!({ "activation": kind.name(), "input": input, "grid": grid, "row": row, "skip_label": skip_label, "n": series.len() }),
    )?;
    let t = dead_region_trace(&kind, &series)?;
    let mut text = String::from("x,sigma,dsigma\n");
    for ((x, y), d) in t.input.iter().zip(&t.activated).zip(&t.derivative) {
        text.push_str(&format!("{x},{y},{d}\n"));
    }
    let stats = TraceStats {
        activation: kind.name(),
        n: series.len(),
        dead_fraction: t.dead_fraction,
        negative_fraction: series.iter().filter(|&&x| x < 0.0).count() as f64 / series.len() as f64,
        min_derivative: t.derivative.iter().copied().fold(f64::INFINITY, f64::min),
        max_derivative: t.derivative.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    };
    export::write_json(&inv.dir.join("stats.json"), &stats)?;
    fs::write(inv.dir.join("trace.csv"), &text).map_err(|e| Error::io(inv.dir.join("trace.csv"), e))?;
    match csv {
        Some(p) => fs::write(p, &text).map_err(|e| Error::io(p, e))?,
        None => print!("{text}"),
    }
    eprintln!(
        "{}: n = {}, dead_fraction = {}, negative_fraction = {}, min dsigma = {}",
        stats.activation, stats.n, stats.dead_fraction, stats.negative_fraction, stats.min_derivative
    );
    Ok(())
}
