//! Artifact bookkeeping: tables with metadata sidecars and the run report.

use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::NaiveDate;
use mlss_core::io;
use mlss_core::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult, PipelineConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub version: String,
    pub status: String,
    pub error: Option<String>,
    pub exit_code: i32,
    /// Effective configuration; feeding it back with `--config` reproduces the run.
    pub config: PipelineConfig,
    pub timings: Vec<StageTiming>,
    /// Paths relative to the output directory.
    pub artifacts: Vec<String>,
    pub warnings: Vec<String>,
}

#[derive(Serialize)]
struct TableMeta<'a> {
    table: &'a str,
    description: &'a str,
    columns: &'a [String],
    n_rows: usize,
    command: &'a str,
    seed: Option<u64>,
    version: &'a str,
}

pub struct Run {
    pub out: PathBuf,
    report: RunReport,
}

impl Run {
    pub fn new(command: &str, cfg: &PipelineConfig, out: &Path) -> Self {
        Self {
            out: out.to_path_buf(),
            report: RunReport {
                command: command.into(),
                version: VERSION.into(),
                status: "running".into(),
                error: None,
                exit_code: 0,
                config: cfg.clone(),
                timings: Vec::new(),
                artifacts: Vec::new(),
                warnings: Vec::new(),
            },
        }
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        self.report.warnings.push(msg.into());
    }

    pub fn warnings(&self) -> &[String] {
        &self.report.warnings
    }

    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce(&mut Run) -> CliResult<T>) -> CliResult<T> {
        let t0 = Instant::now();
        let r = f(self);
        self.report.timings.push(StageTiming {
            stage: stage.into(),
            seconds: t0.elapsed().as_secs_f64(),
        });
        r
    }

    /// Creates `out/sub` and returns it.
    pub fn dir(&self, sub: &str) -> CliResult<PathBuf> {
        let d = self.out.join(sub);
        std::fs::create_dir_all(&d)?;
        Ok(d)
    }

    fn record(&mut self, path: &Path) {
        let rel = path.strip_prefix(&self.out).unwrap_or(path);
        self.report.artifacts.push(rel.display().to_string());
    }

    fn sidecar(&mut self, path: &Path, description: &str, columns: &[String], n_rows: usize) -> CliResult<()> {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let meta = TableMeta {
            table: &name,
            description,
            columns,
            n_rows,
            command: &self.report.command,
            seed: self.report.config.seed,
            version: VERSION,
        };
        let side = path.with_extension("meta.json");
        io::write_json(&side, &meta)?;
        self.record(&side);
        Ok(())
    }

    pub fn table(&mut self, path: &Path, description: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
        io::write_rows_csv(path, header, rows)?;
        self.record(path);
        let cols: Vec<String> = header.iter().map(|s| s.to_string()).collect();
        self.sidecar(path, description, &cols, rows.len())
    }

    pub fn wide(
        &mut self,
        path: &Path,
        description: &str,
        dates: &[NaiveDate],
        columns: &[String],
        values: &DMatrix<f64>,
    ) -> CliResult<()> {
        io::write_wide_csv(path, dates, columns, values)?;
        self.record(path);
        let mut cols = vec!["date".to_string()];
        cols.extend(columns.iter().cloned());
        self.sidecar(path, description, &cols, dates.len())
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, path: &Path, value: &T) -> CliResult<()> {
        io::write_json(path, value)?;
        self.record(path);
        Ok(())
    }

    fn write_report(&self) -> CliResult<()> {
        let name = &self.report.command;
        io::write_json(&self.out.join(format!("{name}_report.json")), &self.report)?;
        io::write_json(&self.out.join(format!("{name}_config.json")), &self.report.config)?;
        Ok(())
    }

    pub fn finish(mut self) -> CliResult<RunReport> {
        let missing: Vec<&String> = self
            .report
            .artifacts
            .iter()
            .filter(|a| !self.out.join(a).is_file())
            .collect();
        if !missing.is_empty() {
            return Err(CliError::Validation(format!("artifacts not written: {missing:?}")));
        }
        self.report.status = "ok".into();
        self.write_report()?;
        Ok(self.report)
    }

    /// Best-effort report of a failed run; the original error wins.
    pub fn fail(&mut self, e: &CliError) {
        self.report.status = "failed".into();
        self.report.error = Some(e.to_string());
        self.report.exit_code = e.exit_code();
        let _ = self.write_report();
    }
}

/// Shortest round-trip formatting, empty for NaN.
pub fn num(v: f64) -> String {
    io::num(v)
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}
