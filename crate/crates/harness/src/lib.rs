//! File formats and command-line entry points around `mackrl-core`.
//!
//! Output layout of `train --out DIR`:
//!
//! - `manifest.json`: config snapshot, code hash, seed and the files below.
//! - `metrics.csv`: `run_id,seed,env_steps,phase,metric,value`.
//! - `checkpoint.bin`: final parameters (see [`checkpoint`]).
//!
//! `sweep --out DIR` writes `points/<index>/seed-<s>/` with the same files per run, a
//! merged `metrics.csv`, a `summary.csv` of final evaluation returns per value and
//! one `manifest.json` covering all of them.

pub mod checkpoint;
pub mod config;
mod error;
pub mod manifest;
pub mod metrics;
pub mod verify;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use mackrl_core::envs::MatrixGameConfig;
use mackrl_core::oracle::{matrix_oracle, OracleTable};
use mackrl_core::trainer::{train, Algorithm, MetricRecord, RunArtifacts, RunConfig};
use rayon::prelude::*;
use serde_json::Value;

pub use checkpoint::Checkpoint;
pub use config::{load_config, parse_config, save_config};
pub use error::{HarnessError, Result};
pub use manifest::RunManifest;
pub use verify::{run_suite, Check, Suite};

/// Environment variable capping worker threads.
pub const THREADS_VAR: &str = "CK_MACKRL_THREADS";

/// Reads a run config, or the config snapshot of a manifest.
pub fn load_run_config(path: &Path) -> Result<RunConfig> {
    match load_config(path) {
        Err(HarnessError::BadConfig { .. }) if RunManifest::read(path).is_ok() => {
            Ok(RunManifest::read(path)?.config)
        }
        other => other,
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| HarnessError::io(path, e))
}

fn write_csv(path: &Path, records: &[MetricRecord]) -> Result<()> {
    let f = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    metrics::write_metrics(BufWriter::new(f), records)
}

/// Trains one run and writes its metrics and checkpoint into `dir`.
fn train_into(config: &RunConfig, dir: &Path) -> Result<RunArtifacts> {
    create_dir(dir)?;
    let run = train(config)?;
    write_csv(&dir.join("metrics.csv"), &run.records)?;
    let ck = Checkpoint::capture(&run.learner, config.seed, run.env_steps);
    write_file(&dir.join("checkpoint.bin"), &ck.to_bytes())?;
    Ok(run)
}

/// `train`: one run of `config` with `seed` into `out`.
pub fn cmd_train(config_path: &Path, seed: Option<u64>, out: &Path) -> Result<RunArtifacts> {
    let mut config = load_run_config(config_path)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    let run = train_into(&config, out)?;
    let mut manifest = RunManifest::new("train", &config, vec![config.seed]);
    manifest.add("metrics.csv", "metrics", config.seed);
    manifest.add("checkpoint.bin", "checkpoint", config.seed);
    manifest.write(&out.join("manifest.json"))?;
    Ok(run)
}

/// Default config of `env` (`matrix` or `grid`) for `algorithm`.
pub fn default_config(env: &str, algorithm: &str) -> Result<RunConfig> {
    let algorithm: Algorithm =
        serde_json::from_value(Value::String(algorithm.replace('-', "_")))
            .map_err(|_| HarnessError::Usage(format!("unknown algorithm {algorithm}")))?;
    match env {
        "matrix" => Ok(RunConfig::matrix(algorithm, 2.0 / 3.0, 0.0, 0)),
        "grid" => Ok(RunConfig::grid(algorithm, 0)),
        other => Err(HarnessError::Usage(format!("unknown environment {other}"))),
    }
}

/// `oracle`: exact optimal returns of each policy class in the matrix game.
pub fn cmd_oracle(ck_fraction: f64) -> Result<OracleTable> {
    if !(0.0..=1.0).contains(&ck_fraction) {
        return Err(HarnessError::Usage(format!(
            "--ck-fraction {ck_fraction} outside [0, 1]"
        )));
    }
    Ok(matrix_oracle(&MatrixGameConfig::from_ck_fraction(
        ck_fraction,
        0.0,
    )?)?)
}

pub fn format_oracle(ck_fraction: f64, t: &OracleTable) -> String {
    let p_ck = ck_fraction * 0.75;
    format!(
        "ck_fraction {ck_fraction} (p_ck {p_ck:.4})\nclass   optimal_return\nIAC     {:.6}\nCK-JAL  {:.6}\nJAL     {:.6}\nMACKRL  {:.6}\n",
        t.iac, t.ck_jal, t.jal, t.mackrl
    )
}

/// One row of a sweep summary.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SweepPoint {
    pub param: String,
    pub value: String,
    pub seeds: usize,
    pub mean: f64,
    pub stderr: f64,
    pub median: f64,
}

fn summarise(param: &str, value: &Value, returns: &[f64]) -> SweepPoint {
    let n = returns.len();
    let mean = returns.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let mut sorted = returns.to_vec();
    sorted.sort_by(f64::total_cmp);
    SweepPoint {
        param: param.to_string(),
        value: value.to_string(),
        seeds: n,
        mean,
        stderr: (var / n as f64).sqrt(),
        median: (sorted[(n - 1) / 2] + sorted[n / 2]) / 2.0,
    }
}

/// Worker pool sized by [`THREADS_VAR`] when set.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let n: usize = v
            .parse()
            .map_err(|_| HarnessError::Usage(format!("{THREADS_VAR}={v} is not a thread count")))?;
        b = b.num_threads(n.max(1));
    }
    b.build().map_err(|e| HarnessError::Usage(e.to_string()))
}

/// Parses `--values`: a JSON array, or comma-separated JSON scalars.
pub fn parse_values(list: &str) -> Result<Vec<Value>> {
    let t = list.trim();
    let values: Vec<Value> = if t.starts_with('[') {
        serde_json::from_str(t).map_err(|e| HarnessError::Usage(format!("--values {t}: {e}")))?
    } else {
        t.split(',')
            .map(|x| {
                serde_json::from_str(x.trim())
                    .unwrap_or_else(|_| Value::String(x.trim().to_string()))
            })
            .collect()
    };
    if values.is_empty() {
        return Err(HarnessError::Usage("--values is empty".into()));
    }
    Ok(values)
}

/// `sweep`: one run per (value, seed), merged.
pub fn cmd_sweep(
    config_path: &Path,
    param: &str,
    values: &[Value],
    seeds: &[u64],
    out: &Path,
) -> Result<Vec<SweepPoint>> {
    let base = load_run_config(config_path)?;
    let tree = serde_json::to_value(&base)?;
    let path = config::resolve_param(&tree, param).ok_or_else(|| {
        HarnessError::Usage(format!(
            "parameter {param} not found (or ambiguous) in {}",
            config_path.display()
        ))
    })?;
    let dotted = path.join(".");
    let mut configs = Vec::new();
    for (i, v) in values.iter().enumerate() {
        let c = config::with_param(&base, &path, v).map_err(|msg| HarnessError::BadConfig {
            path: config_path.to_path_buf(),
            msg,
        })?;
        for &s in seeds {
            let mut c = c.clone();
            c.seed = s;
            configs.push((i, s, c));
        }
    }
    create_dir(out)?;
    let pool = thread_pool()?;
    let dirs: Vec<PathBuf> = configs
        .iter()
        .map(|(i, s, _)| {
            out.join("points")
                .join(i.to_string())
                .join(format!("seed-{s}"))
        })
        .collect();
    let runs: Vec<Result<RunArtifacts>> = pool.install(|| {
        configs
            .par_iter()
            .zip(&dirs)
            .map(|((_, _, c), d)| train_into(c, d))
            .collect()
    });

    let mut manifest = RunManifest::new("sweep", &base, seeds.to_vec());
    manifest.sweep = Some((dotted.clone(), values.to_vec()));
    let mut merged = Vec::new();
    let mut returns = vec![Vec::new(); values.len()];
    for (((i, s, _), dir), run) in configs.iter().zip(&dirs).zip(runs) {
        let run = run?;
        let rel = dir
            .strip_prefix(out)
            .unwrap_or(dir)
            .to_string_lossy()
            .replace('\\', "/");
        manifest.add(format!("{rel}/metrics.csv"), "metrics", *s);
        manifest.add(format!("{rel}/checkpoint.bin"), "checkpoint", *s);
        let run_id = format!("{}-{}={}", run.run_id, dotted, values[*i]);
        merged.extend(run.records.into_iter().map(|mut r| {
            r.run_id = run_id.clone();
            r
        }));
        returns[*i].push(run.final_return);
    }
    write_csv(&out.join("metrics.csv"), &merged)?;
    manifest.add(
        "metrics.csv",
        "metrics",
        seeds.first().copied().unwrap_or(0),
    );
    let points: Vec<SweepPoint> = values
        .iter()
        .zip(&returns)
        .map(|(v, r)| summarise(&dotted, v, r))
        .collect();
    let f = File::create(out.join("summary.csv"))
        .map_err(|e| HarnessError::io(out.join("summary.csv"), e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(f));
    for p in &points {
        w.serialize(p)?;
    }
    w.flush()
        .map_err(|e| HarnessError::io(out.join("summary.csv"), e))?;
    manifest.add(
        "summary.csv",
        "summary",
        seeds.first().copied().unwrap_or(0),
    );
    manifest.write(&out.join("manifest.json"))?;
    Ok(points)
}

/// `verify`: runs `suite`, writing one line per check; true when all pass.
pub fn cmd_verify(suite: Suite, mut out: impl Write) -> Result<bool> {
    let checks = run_suite(suite)?;
    for c in &checks {
        writeln!(out, "{c}").map_err(|e| HarnessError::io("<stdout>", e))?;
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    writeln!(
        out,
        "{}: {} checks, {failed} failed",
        suite.name(),
        checks.len()
    )
    .map_err(|e| HarnessError::io("<stdout>", e))?;
    Ok(failed == 0)
}
