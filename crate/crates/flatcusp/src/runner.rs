//! Parallel chunk execution with resumable checkpoints.
//!
//! A job is split into chunks indexed `0..n`; chunk `i` draws from RNG
//! stream `i` and its result depends only on `(config, i)`. Results are
//! returned in index order, so the merged output is independent of the
//! worker count and of which chunks came from a checkpoint.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

pub struct Runner {
    pool: rayon::ThreadPool,
    checkpoint_root: Option<PathBuf>,
    config_hash: String,
    quiet: bool,
}

impl Runner {
    /// `workers = 0` uses every available core. With `checkpoint_root`,
    /// finished chunks are stored under it and reused on the next run with
    /// the same config hash.
    pub fn new(workers: usize, checkpoint_root: Option<PathBuf>, config_hash: &str) -> Result<Runner> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().context("building worker pool")?;
        Ok(Runner { pool, checkpoint_root, config_hash: config_hash.to_string(), quiet: false })
    }

    pub fn quiet(mut self, quiet: bool) -> Self {
        self.quiet = quiet;
        self
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }

    fn dir(&self, job: &str) -> Option<PathBuf> {
        self.checkpoint_root.as_ref().map(|r| r.join(format!("{job}-{}", &self.config_hash[..16])))
    }

    /// Runs `f(i)` for `i in 0..n` on the pool.
    pub fn run<T, F>(&self, job: &str, n: usize, f: F) -> Result<Vec<T>>
    where
        T: Serialize + DeserializeOwned + Send,
        F: Fn(usize) -> T + Sync,
    {
        let dir = self.dir(job);
        if let Some(d) = &dir {
            fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
        }
        let done = AtomicUsize::new(0);
        let out: Vec<Result<T>> = self.pool.install(|| {
            (0..n)
                .into_par_iter()
                .map(|i| {
                    let path = dir.as_ref().map(|d| d.join(format!("chunk-{i:05}.json")));
                    if let Some(p) = &path {
                        if let Some(v) = load::<T>(p) {
                            done.fetch_add(1, Ordering::Relaxed);
                            return Ok(v);
                        }
                    }
                    let v = f(i);
                    if let Some(p) = &path {
                        store(p, &v)?;
                    }
                    let k = done.fetch_add(1, Ordering::Relaxed) + 1;
                    if let Some(d) = &dir {
                        store(&d.join("progress.json"), &serde_json::json!({ "job": job, "completed": k, "total": n }))?;
                    }
                    if !self.quiet {
                        eprintln!("[{job}] chunk {k}/{n}");
                    }
                    Ok(v)
                })
                .collect()
        });
        out.into_iter().collect()
    }

    /// Like [`Runner::run`] for results that are not checkpointed.
    pub fn run_plain<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        self.pool.install(|| (0..n).into_par_iter().map(&f).collect())
    }

    /// Removes the checkpoints of a finished job.
    pub fn finish(&self, job: &str) -> Result<()> {
        if let Some(d) = self.dir(job) {
            if d.exists() {
                fs::remove_dir_all(&d).with_context(|| format!("removing {}", d.display()))?;
            }
            if let Some(root) = &self.checkpoint_root {
                let _ = fs::remove_dir(root);
            }
        }
        Ok(())
    }
}

fn load<T: DeserializeOwned>(p: &Path) -> Option<T> {
    let bytes = fs::read(p).ok()?;
    serde_json::from_slice(&bytes).ok()
}

/// Writes through a temporary file so an interrupted write never leaves a
/// truncated chunk behind.
fn store<T: Serialize + ?Sized>(p: &Path, v: &T) -> Result<()> {
    let tmp = p.with_extension(format!("tmp{:?}", std::thread::current().id()).replace(['(', ')'], ""));
    fs::write(&tmp, serde_json::to_vec(v)?).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, p).with_context(|| format!("renaming to {}", p.display()))?;
    Ok(())
}

/// Splits `total` into `n` near-equal parts, larger parts first.
pub fn split(total: u64, n: usize) -> Vec<u64> {
    let n = n.max(1) as u64;
    (0..n).map(|i| total / n + u64::from(i < total % n)).collect()
}
