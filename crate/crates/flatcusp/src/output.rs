//! Report files: JSON envelopes, CSV curves and the MANIFEST.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

/// One pass/fail comparison of a measured value against its target band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub target: f64,
    /// Allowed `|value − target|`; for one-sided checks, the bound.
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    pub fn band(name: &str, value: f64, target: f64, tolerance: f64) -> Check {
        Check { name: name.into(), value, target, tolerance, passed: (value - target).abs() <= tolerance }
    }

    /// `value ≤ bound`.
    pub fn at_most(name: &str, value: f64, bound: f64) -> Check {
        Check { name: name.into(), value, target: bound, tolerance: 0.0, passed: value <= bound }
    }

    pub fn holds(name: &str, value: f64, ok: bool) -> Check {
        Check { name: name.into(), value, target: f64::NAN, tolerance: f64::NAN, passed: ok }
    }
}

/// Envelope written for every command. Contains no timestamps, so equal
/// config and seed give byte-identical files.
#[derive(Debug, Serialize)]
pub struct Envelope<'a, R: Serialize> {
    pub command: &'a str,
    pub version: &'a str,
    pub seed: u64,
    pub config_hash: String,
    pub config: &'a ExperimentConfig,
    pub checks: &'a [Check],
    pub report: &'a R,
}

pub struct Output {
    dir: PathBuf,
    config_hash: String,
    seed: u64,
    written: Vec<PathBuf>,
}

impl Output {
    pub fn new(dir: &Path, cfg: &ExperimentConfig) -> Result<Output> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Output { dir: dir.to_path_buf(), config_hash: cfg.hash(), seed: cfg.seed, written: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn json<R: Serialize>(&mut self, name: &str, cfg: &ExperimentConfig, checks: &[Check], report: &R) -> Result<PathBuf> {
        let env = Envelope {
            command: name,
            version: env!("CARGO_PKG_VERSION"),
            seed: cfg.seed,
            config_hash: self.config_hash.clone(),
            config: cfg,
            checks,
            report,
        };
        let mut bytes = serde_json::to_vec_pretty(&env)?;
        bytes.push(b'\n');
        self.write(&format!("{name}.json"), &bytes)
    }

    /// CSV with a header; every row must have the header's length.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("csv: {e}"))?;
        self.write(&format!("{name}.csv"), &bytes)
    }

    fn write(&mut self, file: &str, bytes: &[u8]) -> Result<PathBuf> {
        let p = self.dir.join(file);
        fs::write(&p, bytes).with_context(|| format!("writing {}", p.display()))?;
        self.written.push(p.clone());
        Ok(p)
    }

    /// Adds this run's artifacts to `MANIFEST`, replacing older entries for
    /// the same files. Lines are `file  sha256  config_hash  seed`.
    pub fn finish(self) -> Result<PathBuf> {
        let path = self.dir.join("MANIFEST");
        let mut entries: BTreeMap<String, String> = BTreeMap::new();
        if let Ok(old) = fs::read_to_string(&path) {
            for line in old.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
                if let Some((f, rest)) = line.split_once('\t') {
                    entries.insert(f.to_string(), rest.to_string());
                }
            }
        }
        for p in &self.written {
            let bytes = fs::read(p)?;
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            let digest = hex::encode(Sha256::digest(&bytes));
            entries.insert(name, format!("{digest}\t{}\t{}", self.config_hash, self.seed));
        }
        let mut text = String::from("# file\tsha256\tconfig_hash\tseed\n");
        for (f, rest) in &entries {
            text.push_str(&format!("{f}\t{rest}\n"));
        }
        fs::write(&path, text)?;
        Ok(path)
    }
}

/// Aligned-column text table.
pub fn text_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (i, c) in r.iter().enumerate() {
            width[i] = width[i].max(c.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (i, c) in cells.iter().enumerate() {
            let pad = width[i] - c.chars().count();
            if i > 0 {
                s.push_str("  ");
            }
            s.push_str(c);
            if i + 1 < cells.len() {
                s.push_str(&" ".repeat(pad));
            }
        }
        s.push('\n');
        s
    };
    let mut out = line(header.to_vec());
    out.push_str(&line(width.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(|s| s.as_str()).collect()));
    for r in rows {
        out.push_str(&line(r.iter().map(|s| s.as_str()).collect()));
    }
    out
}

pub fn checks_table(checks: &[Check]) -> String {
    let rows: Vec<Vec<String>> = checks
        .iter()
        .map(|c| {
            let target = if c.target.is_nan() {
                String::new()
            } else if c.tolerance == 0.0 {
                format!("<= {}", fmt(c.target))
            } else {
                format!("{} ± {}", fmt(c.target), fmt(c.tolerance))
            };
            vec![c.name.clone(), fmt(c.value), target, if c.passed { "pass".into() } else { "FAIL".into() }]
        })
        .collect();
    text_table(&["check", "value", "target", "result"], &rows)
}

pub fn fmt(v: f64) -> String {
    if v.is_nan() {
        "-".into()
    } else if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e5) {
        format!("{v:.3e}")
    } else {
        format!("{v:.4}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_columns_align() {
        let t = text_table(&["a", "bb"], &[vec!["xxx".into(), "y".into()], vec!["z".into(), "wwww".into()]]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 4);
        let col = lines[0].find("bb").unwrap();
        assert_eq!(lines[2].find('y').unwrap(), col);
        assert_eq!(lines[3].find('w').unwrap(), col);
    }

    #[test]
    fn manifest_merges_runs() {
        let d = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::default();
        let mut o = Output::new(d.path(), &cfg).unwrap();
        o.csv("a", &["x"], &[vec!["1".into()]]).unwrap();
        o.finish().unwrap();
        let mut o = Output::new(d.path(), &cfg).unwrap();
        o.json("b", &cfg, &[], &1u8).unwrap();
        let m = fs::read_to_string(o.finish().unwrap()).unwrap();
        assert!(m.contains("a.csv\t") && m.contains("b.json\t"));
        assert!(m.lines().filter(|l| !l.starts_with('#')).all(|l| l.split('\t').count() == 4));
        assert!(m.contains(&cfg.hash()));
    }
}
