//! JSON summaries and CSV series.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// One pass/fail comparison. The relation is part of the name.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub expected: f64,
    pub measured: f64,
    pub tol: f64,
    pub pass: bool,
}

impl Check {
    /// `|measured - expected| <= tol`.
    pub fn close(name: impl Into<String>, expected: f64, measured: f64, tol: f64) -> Self {
        let pass = (measured - expected).abs() <= tol;
        Check { name: name.into(), expected, measured, tol, pass }
    }

    /// `measured <= limit`.
    pub fn at_most(name: impl Into<String>, limit: f64, measured: f64) -> Self {
        Check { name: format!("{} <=", name.into()), expected: limit, measured, tol: 0.0, pass: measured <= limit }
    }

    /// `measured >= limit`.
    pub fn at_least(name: impl Into<String>, limit: f64, measured: f64) -> Self {
        Check { name: format!("{} >=", name.into()), expected: limit, measured, tol: 0.0, pass: measured >= limit }
    }

    /// A yes/no property, reported as 1/0.
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Check { name: name.into(), expected: 1.0, measured: f64::from(u8::from(ok)), tol: 0.0, pass: ok }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub experiment: String,
    pub inputs_digest: String,
    pub metrics: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
}

impl Summary {
    pub fn new(experiment: &str, digest: String) -> Self {
        Summary { experiment: experiment.to_string(), inputs_digest: digest, metrics: BTreeMap::new(), checks: Vec::new() }
    }

    pub fn metric(&mut self, name: impl Into<String>, value: f64) {
        self.metrics.insert(name.into(), value);
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }
}

/// sha256 over the config text and the effective seed.
pub fn inputs_digest(config_text: &str, seed: u64) -> String {
    let mut h = Sha256::new();
    h.update(config_text.as_bytes());
    h.update(b"\0seed=");
    h.update(seed.to_string().as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// 17 significant digits, enough to round-trip any f64.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| format_float(*v)))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(format_float(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(format_float(f64::INFINITY), "inf");
    }

    #[test]
    fn digest_depends_on_seed() {
        assert_ne!(inputs_digest("a", 1), inputs_digest("a", 2));
        assert_eq!(inputs_digest("a", 1).len(), 64);
    }

    #[test]
    fn check_relations() {
        assert!(Check::close("x", 1.0, 1.05, 0.1).pass);
        assert!(!Check::at_most("x", 1.0, 1.5).pass);
        assert!(Check::at_least("x", 1.0, 1.5).pass);
        assert_eq!(Check::holds("y", false).measured, 0.0);
    }
}
