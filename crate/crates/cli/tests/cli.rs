use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mlss_cli::{CliError, PipelineConfig};
use serde_json::json;

fn mlss(args: &[&str], out: &Path, envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mlss"));
    cmd.args(args).arg("--out").arg(out);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, value: serde_json::Value) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, serde_json::to_string_pretty(&value).unwrap()).unwrap();
    p
}

fn tiny_config() -> serde_json::Value {
    json!({
        "seed": 17,
        "synth": { "n_series": 3, "n_factors": 1, "n_obs": 400 },
        "estimate": { "models": ["MLSS", "OBS"], "q_news": 1, "q_social": 1, "q_grid": [1], "max_iter": 100 },
        "backtest": { "window": 60 },
        "mc": { "n_sims": 200 }
    })
}

fn run_all(config: &Path, out: &Path, envs: &[(&str, &str)]) {
    for stage in ["synth", "estimate", "analyze", "backtest", "mc"] {
        let o = mlss(&[stage, "--config", config.to_str().unwrap()], out, envs);
        assert!(o.status.success(), "{stage}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

fn csv_files(dir: &Path) -> Vec<PathBuf> {
    let mut v = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            v.extend(csv_files(&p));
        } else if p.extension().is_some_and(|x| x == "csv") {
            v.push(p);
        }
    }
    v.sort();
    v
}

#[test]
fn synth_is_reproducible_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), json!({ "seed": 3, "synth": { "n_series": 3, "n_factors": 1, "n_obs": 50 } }));
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        assert!(mlss(&["synth", "--config", cfg.to_str().unwrap()], out, &[]).status.success());
    }
    let fa = csv_files(&a);
    assert!(!fa.is_empty());
    for f in fa {
        let g = b.join(f.strip_prefix(&a).unwrap());
        assert_eq!(std::fs::read(&f).unwrap(), std::fs::read(&g).unwrap(), "{}", f.display());
    }
    // a different seed changes the draw
    let c = dir.path().join("c");
    assert!(mlss(&["synth", "--config", cfg.to_str().unwrap(), "--seed", "4"], &c, &[]).status.success());
    assert_ne!(std::fs::read(a.join("data/news.csv")).unwrap(), std::fs::read(c.join("data/news.csv")).unwrap());
}

#[test]
fn empty_synth_writes_header_only_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), json!({ "seed": 1, "synth": { "n_series": 2, "n_factors": 1, "n_obs": 0 } }));
    let out = dir.path().join("run");
    let o = mlss(&["synth", "--config", cfg.to_str().unwrap()], &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let news = std::fs::read_to_string(out.join("data/news.csv")).unwrap();
    assert_eq!(news.lines().count(), 1);
    assert!(news.starts_with("date,"));
}

#[test]
fn validation_failures_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");

    let no_seed = write_config(dir.path(), json!({ "synth": { "n_obs": 10 } }));
    let o = mlss(&["synth", "--config", no_seed.to_str().unwrap()], &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));

    let o = mlss(&["estimate"], &out, &[]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));

    let bad = write_config(dir.path(), json!({ "seed": 1, "no_such_section": {} }));
    assert_eq!(mlss(&["synth", "--config", bad.to_str().unwrap()], &out, &[]).status.code(), Some(2));

    let bad = write_config(dir.path(), json!({ "seed": 1, "estimate": { "tol": -1.0 } }));
    assert_eq!(mlss(&["estimate", "--config", bad.to_str().unwrap()], &out, &[]).status.code(), Some(2));

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("estimate_report.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "failed");
    assert_eq!(report["exit_code"], 2);
}

#[test]
fn echoed_config_reloads_to_the_same_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), json!({ "seed": 9, "synth": { "n_series": 2, "n_factors": 1, "n_obs": 20 } }));
    let out = dir.path().join("run");
    assert!(mlss(&["synth", "--config", cfg.to_str().unwrap()], &out, &[]).status.success());
    let echo = out.join("synth_config.json");
    let mut first = PipelineConfig::load(&echo).unwrap();
    let mut again = first.clone();
    let root = out.canonicalize().unwrap();
    again.resolve(&root, None);
    first.resolve(&root, None);
    assert_eq!(first, again);
    assert_eq!(first.seed, Some(9));
    assert_eq!(first.synth.n_obs, 20);
    assert_eq!(first.data.news.as_deref(), Some(root.join("data/news.csv").as_path()));
}

#[test]
fn exit_codes_follow_error_kind() {
    assert_eq!(CliError::Validation("x".into()).exit_code(), 2);
    assert_eq!(CliError::Output(std::io::Error::other("disk")).exit_code(), 1);
    assert_eq!(CliError::Core(mlss_core::Error::InvalidInput("x".into())).exit_code(), 2);
    assert_eq!(CliError::Core(mlss_core::Error::Singular("x".into())).exit_code(), 3);
    assert_eq!(CliError::Core(mlss_core::Error::NotPsd("x".into())).exit_code(), 3);
}

#[test]
fn pipeline_outputs_do_not_depend_on_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), tiny_config());
    let (a, b) = (dir.path().join("one"), dir.path().join("three"));
    run_all(&cfg, &a, &[("RAYON_NUM_THREADS", "1")]);
    run_all(&cfg, &b, &[("RAYON_NUM_THREADS", "3")]);
    let fa = csv_files(&a);
    assert!(fa.len() > 10);
    for f in fa {
        let g = b.join(f.strip_prefix(&a).unwrap());
        assert_eq!(std::fs::read(&f).unwrap(), std::fs::read(&g).unwrap(), "{}", f.display());
    }
}
