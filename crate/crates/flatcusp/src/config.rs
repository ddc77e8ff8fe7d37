//! Experiment configuration: a TOML file with one section per command.

use std::path::{Path, PathBuf};

use flatcusp_core::corner::{CornerConfig, EnsembleConfig, SeriesMode};
use flatcusp_core::induced::{InducedConfig, OneStepConfig};
use flatcusp_core::stats::correlation::{CorrelationConfig, Observable};
use flatcusp_core::stats::transitions::TransitionConfig;
use flatcusp_core::TableConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config field `{field}`: {msg}")]
    Field { field: String, msg: String },
    #[error("config syntax: {0}")]
    Syntax(String),
}

fn field(field: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Field { field: field.into(), msg: msg.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    Standard,
    Extended,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CornerMode {
    #[default]
    Exact,
    Reduced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CornerSection {
    pub gamma_bar: f64,
    pub max_len: usize,
    /// Series starts drawn per ensemble.
    pub count: usize,
    /// Starts per parallel chunk.
    pub chunk: usize,
    pub s1: [f64; 2],
    pub kappa: [f64; 2],
    pub n_range: [usize; 2],
    pub mode: CornerMode,
    /// Compare exact records against the reduced recursion.
    pub compare: bool,
    pub compare_count: usize,
}

impl Default for CornerSection {
    fn default() -> Self {
        let c = CornerConfig::default();
        let e = EnsembleConfig::default();
        CornerSection {
            gamma_bar: c.gamma_bar,
            max_len: c.max_len,
            count: 400,
            chunk: 50,
            s1: e.s1,
            kappa: e.kappa,
            n_range: e.n_range,
            mode: CornerMode::Exact,
            compare: false,
            compare_count: 20,
        }
    }
}

impl CornerSection {
    pub fn corner(&self) -> CornerConfig {
        CornerConfig { gamma_bar: self.gamma_bar, max_len: self.max_len }
    }

    pub fn ensemble(&self) -> EnsembleConfig {
        EnsembleConfig { s1: self.s1, kappa: self.kappa, n_range: self.n_range }
    }

    pub fn series_mode(&self, precision: Precision) -> SeriesMode {
        match (self.mode, precision) {
            (CornerMode::Exact, _) => SeriesMode::Exact,
            (CornerMode::Reduced, Precision::Standard) => SeriesMode::Reduced,
            (CornerMode::Reduced, Precision::Extended) => SeriesMode::Extended,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TailSection {
    /// Returns of `F` sampled from `μ_M`.
    pub returns: usize,
    /// Hitting times sampled from `μ` on the full phase space.
    pub full_samples: usize,
    pub full_cap: usize,
    /// Returns per chunk; full samples are split over the same chunks.
    pub chunk: usize,
}

impl Default for TailSection {
    fn default() -> Self {
        TailSection { returns: 10_000_000, full_samples: 200_000, full_cap: 1_000_000, chunk: 250_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpansionSection {
    pub alt_seed_extra: f64,
    pub matrix_checks: usize,
    /// Cutoffs `n₀` of the one-step sum; empty skips it.
    pub one_step_n0: Vec<usize>,
    pub one_step_n_cap: usize,
    pub one_step_tail_factor: usize,
    pub one_step_tail_cells: usize,
}

impl Default for ExpansionSection {
    fn default() -> Self {
        let o = OneStepConfig::default();
        ExpansionSection {
            alt_seed_extra: 5.0,
            matrix_checks: 40,
            one_step_n0: vec![50, 100, 200],
            one_step_n_cap: o.n_cap,
            one_step_tail_factor: o.tail_factor,
            one_step_tail_cells: o.tail_cells,
        }
    }
}

impl ExpansionSection {
    pub fn one_step(&self) -> OneStepConfig {
        OneStepConfig { n_cap: self.one_step_n_cap, tail_factor: self.one_step_tail_factor, tail_cells: self.one_step_tail_cells }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransitionSection {
    pub returns: u64,
    pub burn_in: u64,
    pub chunk: u64,
    pub band_edges: Vec<usize>,
    pub target_band: [usize; 2],
    pub min_band: u64,
    pub bins_per_decade: usize,
    pub min_bin: u64,
    pub chain_min: usize,
}

impl Default for TransitionSection {
    fn default() -> Self {
        let t = TransitionConfig::default();
        TransitionSection {
            returns: 10_000_000,
            burn_in: 100,
            chunk: 1_000_000,
            band_edges: t.band_edges,
            target_band: t.target_band,
            min_band: t.min_band,
            bins_per_decade: t.bins_per_decade,
            min_bin: t.min_bin,
            chain_min: t.chain_min,
        }
    }
}

impl TransitionSection {
    pub fn transitions(&self) -> TransitionConfig {
        TransitionConfig {
            band_edges: self.band_edges.clone(),
            target_band: self.target_band,
            min_band: self.min_band,
            bins_per_decade: self.bins_per_decade,
            min_bin: self.min_bin,
            chain_min: self.chain_min,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrelationSection {
    pub n_max: usize,
    /// Total collisions over all orbits.
    pub orbit_length: u64,
    /// Independent orbits (one stream each) sharing `orbit_length`.
    pub orbits: u64,
    pub burn_in: u64,
    pub block_factor: usize,
    pub bootstrap_reps: usize,
    pub fit_lo: usize,
    pub fit_hi: usize,
    pub f: Observable,
    pub g: Observable,
}

impl Default for CorrelationSection {
    fn default() -> Self {
        let c = CorrelationConfig::default();
        CorrelationSection {
            n_max: c.n_max,
            orbit_length: c.orbit_length,
            orbits: 1,
            burn_in: c.burn_in,
            block_factor: c.block_factor,
            bootstrap_reps: c.bootstrap_reps,
            fit_lo: c.fit_lo,
            fit_hi: c.fit_hi,
            f: Observable::cos_r(1),
            g: Observable::cos_r(1),
        }
    }
}

impl CorrelationSection {
    pub fn correlation(&self) -> CorrelationConfig {
        CorrelationConfig {
            n_max: self.n_max,
            orbit_length: self.orbit_length,
            burn_in: self.burn_in,
            block_factor: self.block_factor,
            bootstrap_reps: self.bootstrap_reps,
            fit_lo: self.fit_lo,
            fit_hi: self.fit_hi,
        }
    }
}

/// Everything that determines the numbers in a report. Worker count and
/// output location are not part of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub precision: Precision,
    pub table: TableConfig,
    pub induced: InducedConfig,
    pub corner: CornerSection,
    pub tail: TailSection,
    pub expansion: ExpansionSection,
    pub transitions: TransitionSection,
    pub correlations: CorrelationSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            precision: Precision::Standard,
            table: TableConfig::default(),
            induced: InducedConfig::default(),
            corner: CornerSection::default(),
            tail: TailSection::default(),
            expansion: ExpansionSection::default(),
            transitions: TransitionSection::default(),
            correlations: CorrelationSection::default(),
        }
    }
}

/// Execution settings; results do not depend on them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    pub out: PathBuf,
    /// Reuse finished chunks from an interrupted run.
    pub checkpoints: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { workers: 0, out: PathBuf::from("out"), checkpoints: true }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    run: RunSection,
    seed: Option<u64>,
    precision: Option<Precision>,
    table: Option<TableConfig>,
    induced: Option<InducedConfig>,
    corner: Option<CornerSection>,
    tail: Option<TailSection>,
    expansion: Option<ExpansionSection>,
    transitions: Option<TransitionSection>,
    correlations: Option<CorrelationSection>,
}

/// Parses a config file body. Errors name the offending field.
pub fn parse_config(text: &str) -> Result<(ExperimentConfig, RunSection), ConfigError> {
    let de = toml::de::Deserializer::parse(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    let file: ConfigFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let msg = inner.message().to_string();
        let line = inner.span().map(|s| text[..s.start].lines().count().max(1));
        let msg = match line {
            Some(l) => format!("{msg} (line {l})"),
            None => msg,
        };
        field(&path, msg)
    })?;
    let d = ExperimentConfig::default();
    let f = file;
    let cfg = ExperimentConfig {
        seed: f.seed.unwrap_or(d.seed),
        precision: f.precision.unwrap_or(d.precision),
        table: f.table.unwrap_or(d.table),
        induced: f.induced.unwrap_or(d.induced),
        corner: f.corner.unwrap_or(d.corner),
        tail: f.tail.unwrap_or(d.tail),
        expansion: f.expansion.unwrap_or(d.expansion),
        transitions: f.transitions.unwrap_or(d.transitions),
        correlations: f.correlations.unwrap_or(d.correlations),
    };
    Ok((cfg, f.run))
}

pub fn load_config(path: &Path) -> Result<(ExperimentConfig, RunSection), ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    parse_config(&text)
}

impl ExperimentConfig {
    /// Checks every section against the preconditions of the operations it
    /// feeds, before any computation starts.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.table.validate().map_err(|e| match e {
            flatcusp_core::geometry::GeometryError::InvalidParameter { field: f, msg } => field(&format!("table.{f}"), msg),
            other => field("table.beta", other.to_string()),
        })?;
        self.induced.validate().map_err(|e| field("induced", e.to_string()))?;
        let c = &self.corner;
        if !(c.gamma_bar > 0.0 && c.gamma_bar < std::f64::consts::FRAC_PI_2) {
            return Err(field("corner.gamma_bar", "must lie in (0, pi/2)"));
        }
        positive("corner.count", c.count)?;
        positive("corner.chunk", c.chunk)?;
        positive("corner.max_len", c.max_len)?;
        range("corner.s1", c.s1, 0.0, self.table.eps0)?;
        range("corner.kappa", c.kappa, 0.0, f64::INFINITY)?;
        if c.n_range[0] > c.n_range[1] {
            return Err(field("corner.n_range", "lower bound exceeds upper bound"));
        }
        let t = &self.tail;
        positive("tail.returns", t.returns)?;
        positive("tail.chunk", t.chunk)?;
        if t.full_samples > 0 && t.full_cap <= self.induced.series_cutoff {
            return Err(field("tail.full_cap", "must exceed induced.series_cutoff"));
        }
        let e = &self.expansion;
        if !(e.alt_seed_extra.is_finite() && e.alt_seed_extra > 0.0) {
            return Err(field("expansion.alt_seed_extra", "must be finite and > 0"));
        }
        if e.one_step_n0.iter().any(|&n| n <= self.induced.series_cutoff) {
            return Err(field("expansion.one_step_n0", "every cutoff must exceed induced.series_cutoff"));
        }
        positive("expansion.one_step_n_cap", e.one_step_n_cap)?;
        if e.one_step_tail_factor < 2 {
            return Err(field("expansion.one_step_tail_factor", "must be at least 2"));
        }
        let tr = &self.transitions;
        positive("transitions.returns", tr.returns as usize)?;
        positive("transitions.chunk", tr.chunk as usize)?;
        if tr.band_edges.len() < 2 || tr.band_edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(field("transitions.band_edges", "need at least two strictly increasing edges"));
        }
        if tr.target_band[0] >= tr.target_band[1] {
            return Err(field("transitions.target_band", "lower bound must be below upper bound"));
        }
        let co = &self.correlations;
        if co.n_max == 0 || co.n_max > 200 {
            return Err(field("correlations.n_max", "must lie in [1, 200]"));
        }
        positive("correlations.orbits", co.orbits as usize)?;
        if co.orbit_length < co.orbits * (co.n_max as u64 + 1) {
            return Err(field("correlations.orbit_length", "too short for n_max on every orbit"));
        }
        if co.fit_lo == 0 || co.fit_lo >= co.fit_hi || co.fit_hi > co.n_max {
            return Err(field("correlations.fit_lo", "need 1 <= fit_lo < fit_hi <= n_max"));
        }
        for (name, o) in [("correlations.f", &co.f), ("correlations.g", &co.g)] {
            if !o.bound().is_finite() {
                return Err(field(name, "coefficients must be finite"));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

fn positive(name: &str, v: usize) -> Result<(), ConfigError> {
    if v == 0 {
        Err(field(name, "must be at least 1"))
    } else {
        Ok(())
    }
}

fn range(name: &str, v: [f64; 2], lo: f64, hi: f64) -> Result<(), ConfigError> {
    if v[0] > lo && v[0] <= v[1] && v[1] <= hi && v[0].is_finite() {
        Ok(())
    } else {
        Err(field(name, format!("need {lo} < lo <= hi <= {hi}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let (c, r) = parse_config("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(r, RunSection::default());
        c.validate().unwrap();
    }

    #[test]
    fn round_trip_through_toml() {
        let c = ExperimentConfig { seed: 99, ..Default::default() };
        let (back, _) = parse_config(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn unknown_and_mistyped_fields_are_named() {
        let e = parse_config("[table]\nbetta = 3.0\n").unwrap_err().to_string();
        assert!(e.contains("betta"), "{e}");
        let e = parse_config("[tail]\nreturns = \"many\"\n").unwrap_err().to_string();
        assert!(e.contains("tail.returns"), "{e}");
        let e = parse_config("sead = 3\n").unwrap_err().to_string();
        assert!(e.contains("sead"), "{e}");
    }

    #[test]
    fn validation_names_the_field() {
        let mut c = ExperimentConfig::default();
        c.correlations.n_max = 500;
        assert!(c.validate().unwrap_err().to_string().contains("correlations.n_max"));
        let c = ExperimentConfig { table: TableConfig::with_beta(2.0), ..Default::default() };
        assert!(c.validate().unwrap_err().to_string().contains("beta"));
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig { seed: 2, ..Default::default() };
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
