//! The `mackrl` binary end to end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mackrl_core::trainer::{Algorithm, Learner, Phase, RunConfig};
use mackrl_harness::metrics::read_metrics;
use mackrl_harness::{save_config, Checkpoint, RunManifest};

fn mackrl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mackrl"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn quick_matrix(dir: &Path) -> PathBuf {
    let mut c = RunConfig::matrix(Algorithm::Mackrl, 2.0 / 3.0, 0.0, 3);
    c.total_env_steps = 2_000;
    c.eval_interval = 500;
    let path = dir.join("quick.json");
    save_config(&path, &c).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn missing_config_exits_2_naming_the_path() {
    let out = mackrl(&[
        "train",
        "--config",
        "/no/such/config.json",
        "--out",
        "/tmp/unused",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/config.json"));
}

#[test]
fn malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, "{\"algorithm\": \"mackrl\"}").unwrap();
    let out = mackrl(&[
        "train",
        "--config",
        s(&path),
        "--out",
        s(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_writes_manifest_csv_and_checkpoint_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_matrix(dir.path());
    let first = dir.path().join("first");
    let out = mackrl(&[
        "train",
        "--config",
        s(&cfg),
        "--seed",
        "7",
        "--out",
        s(&first),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let records = read_metrics(fs::File::open(first.join("metrics.csv")).unwrap()).unwrap();
    assert!(records
        .iter()
        .any(|r| r.phase == Phase::Eval && r.metric == "return"));
    assert!(records.iter().all(|r| r.value.is_finite() && r.seed == 7));

    let manifest = RunManifest::read(&first.join("manifest.json")).unwrap();
    assert_eq!(manifest.seeds, vec![7]);
    assert_eq!(manifest.config.seed, 7);
    assert_eq!(manifest.code_hash.len(), 64);
    for f in &manifest.outputs {
        assert!(
            first.join(&f.path).is_file(),
            "{} listed but missing",
            f.path
        );
    }

    let second = dir.path().join("second");
    let out = mackrl(&[
        "train",
        "--config",
        s(&first.join("manifest.json")),
        "--out",
        s(&second),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        fs::read(first.join("metrics.csv")).unwrap(),
        fs::read(second.join("metrics.csv")).unwrap()
    );
    assert_eq!(
        fs::read(first.join("checkpoint.bin")).unwrap(),
        fs::read(second.join("checkpoint.bin")).unwrap()
    );

    let ck = Checkpoint::from_bytes(&fs::read(first.join("checkpoint.bin")).unwrap()).unwrap();
    assert_eq!(ck.header.seed, 7);
    let mut learner = Learner::for_config(&manifest.config).unwrap();
    ck.restore(&mut learner).unwrap();
    assert_eq!(Checkpoint::capture(&learner, 7, ck.header.env_steps), ck);
}

#[test]
fn oracle_table_and_range() {
    let out = mackrl(&["oracle", "--env", "matrix", "--ck-fraction", "0"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let value = |class: &str| -> f64 {
        let line = text
            .lines()
            .find(|l| l.split_whitespace().next() == Some(class))
            .unwrap();
        line.split_whitespace().nth(1).unwrap().parse().unwrap()
    };
    assert_eq!(value("MACKRL"), value("IAC"));
    assert!(value("JAL") >= value("MACKRL"));
    assert_eq!(
        mackrl(&["oracle", "--ck-fraction", "1.01"]).status.code(),
        Some(2)
    );
    assert_eq!(
        mackrl(&["oracle", "--ck-fraction", "-0.5"]).status.code(),
        Some(2)
    );
}

#[test]
fn verify_suite_reports_each_invariant() {
    let out = mackrl(&["verify", "--suite", "ck"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().filter(|l| l.starts_with("[PASS] ck/")).count() >= 4);
    assert!(!text.contains("[FAIL]"));
    assert_ne!(
        mackrl(&["verify", "--suite", "nonsense"]).status.code(),
        Some(0)
    );
}

#[test]
fn sweep_merges_runs_with_mean_and_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_matrix(dir.path());
    let out_dir = dir.path().join("sweep");
    let out = Command::new(env!("CARGO_BIN_EXE_mackrl"))
        .env("CK_MACKRL_THREADS", "1")
        .args([
            "sweep",
            "--config",
            s(&cfg),
            "--param",
            "flip_p",
            "--values",
            "0,0.2",
            "--seeds",
            "0,1",
            "--out",
            s(&out_dir),
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let mut r = csv::Reader::from_path(out_dir.join("summary.csv")).unwrap();
    let header: Vec<String> = r.headers().unwrap().iter().map(str::to_string).collect();
    assert_eq!(
        header,
        ["param", "value", "seeds", "mean", "stderr", "median"]
    );
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(&rows[0][0], "env.matrix.flip_p");
    assert_eq!(&rows[1][1], "0.2");
    assert_eq!(&rows[1][2], "2");

    let merged = read_metrics(fs::File::open(out_dir.join("metrics.csv")).unwrap()).unwrap();
    let ids: std::collections::BTreeSet<_> = merged.iter().map(|m| m.run_id.clone()).collect();
    assert_eq!(ids.len(), 4);
    let manifest = RunManifest::read(&out_dir.join("manifest.json")).unwrap();
    assert_eq!(manifest.seeds, vec![0, 1]);
    for f in &manifest.outputs {
        assert!(
            out_dir.join(&f.path).is_file(),
            "{} listed but missing",
            f.path
        );
    }

    let missing = mackrl(&[
        "sweep",
        "--config",
        s(&cfg),
        "--param",
        "no_such",
        "--values",
        "1",
        "--out",
        s(&out_dir),
    ]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn defaults_print_loadable_configs() {
    for (env, alg) in [("matrix", "ck_jal"), ("grid", "central_v")] {
        let out = mackrl(&["defaults", "--env", env, "--algorithm", alg]);
        assert!(out.status.success());
        mackrl_harness::parse_config(&String::from_utf8(out.stdout).unwrap()).unwrap();
    }
}

#[test]
fn shipped_configs_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for e in fs::read_dir(&dir).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "json") {
            mackrl_harness::load_config(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            n += 1;
        }
    }
    assert!(n >= 4);
}
