//! Manifest of experiments run as one suite.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{run_config, Outcome, RunOptions};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default, rename = "experiment")]
    pub experiments: Vec<Entry>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entry {
    pub id: String,
    /// Relative to the manifest's directory.
    pub config: PathBuf,
    /// Acceptance criterion this row reports on.
    pub criterion: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub id: String,
    pub criterion: Option<String>,
    pub config: String,
    pub status: &'static str,
    pub checks_passed: usize,
    pub checks_total: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub experiments: Vec<Row>,
    pub passed: usize,
    pub failed: usize,
    pub errors: usize,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.failed == 0 && self.errors == 0
    }
}

pub fn load(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let m: Manifest = toml::from_str(&text).map_err(|e| anyhow!("in {}: {e}", path.display()))?;
    let mut seen = HashSet::new();
    for e in &m.experiments {
        if !seen.insert(e.id.as_str()) {
            bail!("duplicate experiment id `{}` in {}", e.id, path.display());
        }
    }
    Ok(m)
}

/// Runs every entry concurrently, each into `out/<id>`; failures are recorded
/// and do not stop the suite.
pub fn run(path: &Path, opts: &RunOptions) -> Result<SuiteReport> {
    let manifest = load(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(&opts.out).with_context(|| format!("creating {}", opts.out.display()))?;
    let rows: Vec<Row> = manifest
        .experiments
        .par_iter()
        .map(|e| {
            let sub = RunOptions { out: opts.out.join(&e.id), seed: opts.seed };
            let cfg_path = base.join(&e.config);
            let (status, passed, total, error) = match run_config(&cfg_path, &sub) {
                Ok(Outcome { summary, .. }) => {
                    let passed = summary.checks.iter().filter(|c| c.pass).count();
                    let status = if summary.passed() { "pass" } else { "fail" };
                    (status, passed, summary.checks.len(), None)
                }
                Err(err) => ("error", 0, 0, Some(format!("{err:#}"))),
            };
            Row {
                id: e.id.clone(),
                criterion: e.criterion.clone(),
                config: e.config.display().to_string(),
                status,
                checks_passed: passed,
                checks_total: total,
                error,
            }
        })
        .collect();
    let count = |s: &str| rows.iter().filter(|r| r.status == s).count();
    let report = SuiteReport { passed: count("pass"), failed: count("fail"), errors: count("error"), experiments: rows };

    fs::write(opts.out.join("suite_report.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    let mut w = csv::Writer::from_path(opts.out.join("acceptance_matrix.csv"))?;
    w.write_record(["criterion", "id", "status", "checks_passed", "checks_total"])?;
    for r in &report.experiments {
        w.write_record([
            r.criterion.clone().unwrap_or_default(),
            r.id.clone(),
            r.status.to_string(),
            r.checks_passed.to_string(),
            r.checks_total.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(report)
}
