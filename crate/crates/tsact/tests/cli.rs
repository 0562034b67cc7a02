use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/ucr")
}

fn tsact(args: &[&str]) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_tsact"));
    c.args(args).env_remove("UCR_DATA_ROOT");
    c
}

fn run(c: &mut Command) -> (i32, String, String) {
    let Output { status, stdout, stderr } = c.output().unwrap();
    (
        status.code().unwrap(),
        String::from_utf8(stdout).unwrap(),
        String::from_utf8(stderr).unwrap(),
    )
}

#[test]
fn analyze_prints_the_property_table() {
    let out = tempfile::tempdir().unwrap();
    let (code, stdout, _) = run(&mut tsact(&["analyze", "--out", out.path().to_str().unwrap()]));
    assert_eq!(code, 0);
    for name in ["leakysinelu", "relu", "snake", "sine"] {
        assert!(stdout.contains(name), "{stdout}");
    }
}

#[test]
fn usage_errors_exit_2() {
    let (code, _, err) = run(&mut tsact(&["analyze", "--activation", "swish"]));
    assert_eq!(code, 2);
    assert!(err.contains("leakysinelu"), "{err}");
    assert_eq!(run(&mut tsact(&["train", "--activation", "relu"])).0, 2);
    assert_eq!(run(&mut tsact(&["frobnicate"])).0, 2);
    let root = data_root();
    let (code, _, _) = run(&mut tsact(&[
        "train",
        "--activation",
        "relu",
        "--dataset",
        "Coffee",
        "--batch-size",
        "0",
        "--data-root",
        root.to_str().unwrap(),
    ]));
    assert_eq!(code, 2);
}

#[test]
fn missing_data_exits_3() {
    let out = tempfile::tempdir().unwrap();
    let (code, _, err) = run(&mut tsact(&[
        "train",
        "--activation",
        "relu",
        "--dataset",
        "NoSuchSet",
        "--epochs",
        "1",
        "--data-root",
        data_root().to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]));
    assert_eq!(code, 3, "{err}");
    let bad = out.path().join("bad.tsv");
    fs::write(&bad, "1\t0.5\tx\n").unwrap();
    let (code, _, _) = run(&mut tsact(&[
        "trace",
        "--activation",
        "relu",
        "--input",
        bad.to_str().unwrap(),
    ]));
    assert_eq!(code, 3);
}

#[test]
fn data_root_precedence_is_flag_then_env_then_file() {
    let out = tempfile::tempdir().unwrap();
    let cfg = out.path().join("tsact.toml");
    fs::write(&cfg, "data_root = \"/nowhere\"\nepochs = 1\n").unwrap();
    let good = data_root();
    let base = [
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
        "train",
        "--activation",
        "relu",
        "--dataset",
        "ItalyPowerDemand",
    ];

    assert_eq!(run(&mut tsact(&base)).0, 3);
    assert_eq!(run(tsact(&base).env("UCR_DATA_ROOT", &good)).0, 0);
    // A fresh output directory, so the cached result above is not reused.
    let other = tempfile::tempdir().unwrap();
    let mut flagged = base.to_vec();
    flagged[3] = other.path().to_str().unwrap();
    flagged.extend(["--data-root", "/also/nowhere"]);
    assert_eq!(run(tsact(&flagged).env("UCR_DATA_ROOT", &good)).0, 3);

    fs::write(&cfg, "data_root = \"/nowhere\"\nepochs = 1\nlearning_rate = 3\n").unwrap();
    assert_eq!(run(tsact(&base).env("UCR_DATA_ROOT", &good)).0, 3);
}

#[test]
fn train_then_bench_reuses_cached_cells_and_compare_exports() {
    let out = tempfile::tempdir().unwrap();
    let o = out.path().to_str().unwrap();
    let root = data_root();
    let r = root.to_str().unwrap();
    let bench = [
        "--out",
        o,
        "bench",
        "--datasets",
        "ItalyPowerDemand,Coffee",
        "--activations",
        "relu,leakysinelu,tanh",
        "--epochs",
        "1",
        "--jobs",
        "3",
        "--data-root",
        r,
    ];
    let (code, stdout, err) = run(&mut tsact(&bench));
    assert_eq!(code, 0, "{err}");
    assert!(
        stdout.contains("0 cached, 6 trained") || err.contains("0 cached, 6 trained"),
        "{stdout}{err}"
    );
    let (code, stdout, err) = run(&mut tsact(&bench));
    assert_eq!(code, 0);
    assert!(
        stdout.contains("6 cached, 0 trained") || err.contains("6 cached, 0 trained"),
        "{stdout}{err}"
    );

    let dirs: Vec<PathBuf> = fs::read_dir(out.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_str().unwrap().starts_with("bench-"))
        .collect();
    assert_eq!(dirs.len(), 1, "one invocation directory per manifest");
    let results = dirs[0].join("results.jsonl");
    assert!(dirs[0].join("manifest.json").is_file());

    let (code, stdout, err) = run(&mut tsact(&[
        "--out",
        o,
        "compare",
        "--results",
        results.to_str().unwrap(),
    ]));
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("leakysinelu"), "{stdout}");
    let cmp: Vec<PathBuf> = fs::read_dir(out.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_str().unwrap().starts_with("compare-"))
        .collect();
    assert_eq!(cmp.len(), 1);
    for f in ["report.json", "cd.csv", "mcm.csv"] {
        assert!(cmp[0].join(f).is_file(), "{f}");
    }
    let cd = fs::read_to_string(cmp[0].join("cd.csv")).unwrap();
    assert!(cd.starts_with("method,avg_rank,clique_id\n"));

    // Drop one record: compare must refuse the incomplete matrix.
    let text = fs::read_to_string(&results).unwrap();
    let partial = out.path().join("partial.jsonl");
    let kept: Vec<&str> = text.lines().skip(1).collect();
    fs::write(&partial, kept.join("\n") + "\n").unwrap();
    let (code, _, err) = run(&mut tsact(&[
        "--out",
        o,
        "compare",
        "--results",
        partial.to_str().unwrap(),
    ]));
    assert_eq!(code, 5);
    assert!(err.contains("missing"), "{err}");
}

#[test]
fn trace_on_a_grid_writes_one_row_per_point() {
    let out = tempfile::tempdir().unwrap();
    let csv = out.path().join("t.csv");
    let (code, _, err) = run(&mut tsact(&[
        "--out",
        out.path().to_str().unwrap(),
        "trace",
        "--activation",
        "leakysinelu",
        "--grid=-2pi:2pi:101",
        "--csv",
        csv.to_str().unwrap(),
    ]));
    assert_eq!(code, 0, "{err}");
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 102);
    let min_slope = text
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
        .fold(f64::INFINITY, f64::min);
    assert!(min_slope >= 0.0, "{min_slope}");
}

#[test]
fn error_kinds_map_to_stable_exit_codes() {
    use tsact::Error;
    let core = |e: tsact_core::Error| Error::from(e).exit_code();
    assert_eq!(core(tsact_core::Error::Config("x".into())), 2);
    assert_eq!(core(tsact_core::Error::Data("x".into())), 3);
    assert_eq!(
        Error::Diverged {
            epoch: 3,
            batch: 1,
            detail: "nan".into()
        }
        .exit_code(),
        4
    );
    assert_eq!(
        Error::Incomplete {
            missing: vec!["a/b".into()]
        }
        .exit_code(),
        5
    );
}
