//! Run configuration: defaults, a flat key-value config file, and typed
//! accessors for the learner and experiment parameters.

use std::path::{Path, PathBuf};

use thiserror::Error;

use selfgain::corpus::CorpusFormat;
use selfgain::learner::TrainParams;
use selfgain::selftrain::ExperimentParams;
use selfgain::similarity::Measure;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config line {line} is not `key = value`")]
    BadLine { line: usize },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {reason}")]
    BadValue { key: String, reason: String },
}

/// Which setups a sweep enumerates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Domain,
    Bulk,
    Both,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "domain" => Ok(Mode::Domain),
            "bulk" => Ok(Mode::Bulk),
            "both" => Ok(Mode::Both),
            other => Err(format!("unknown mode `{other}` (domain|bulk|both)")),
        }
    }
}

/// Report protocols.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    Unsup,
    Loo,
    Tailored,
    TailoredTtOnly,
    Baselines,
    Grid,
    All,
}

impl Protocol {
    pub const CONCRETE: [Protocol; 6] = [
        Protocol::Unsup,
        Protocol::Loo,
        Protocol::Tailored,
        Protocol::TailoredTtOnly,
        Protocol::Baselines,
        Protocol::Grid,
    ];

    /// Output file stem for this protocol.
    pub fn file_stem(self) -> &'static str {
        match self {
            Protocol::Unsup => "unsup",
            Protocol::Loo => "loo",
            Protocol::Tailored => "tailored",
            Protocol::TailoredTtOnly => "tailored_tt_only",
            Protocol::Baselines => "baselines",
            Protocol::Grid => "grid",
            Protocol::All => "all",
        }
    }
}

impl std::str::FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "unsup" => Ok(Protocol::Unsup),
            "loo" => Ok(Protocol::Loo),
            "tailored" => Ok(Protocol::Tailored),
            "tailored_tt_only" => Ok(Protocol::TailoredTtOnly),
            "baselines" => Ok(Protocol::Baselines),
            "grid" => Ok(Protocol::Grid),
            "all" => Ok(Protocol::All),
            other => Err(format!(
                "unknown protocol `{other}` (unsup|loo|tailored|tailored-tt-only|baselines|grid|all)"
            )),
        }
    }
}

/// Everything a command needs to run. Values come from defaults, then an
/// optional config file, then command-line flag overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub corpus_dir: PathBuf,
    pub out_dir: PathBuf,
    /// Domains to operate on; empty means discover from `corpus_dir`.
    pub domains: Vec<String>,
    pub sample_size: usize,
    pub seed: u64,
    pub measures: Vec<Measure>,
    pub mode: Mode,
    pub tau: f64,
    pub k: usize,
    pub regularization: f64,
    pub epochs: u32,
    pub significance_iterations: u32,
    pub stratify: bool,
    pub format: CorpusFormat,
    /// Worker threads for the sweep; 0 lets the thread pool decide.
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            corpus_dir: PathBuf::from("."),
            out_dir: PathBuf::from("out"),
            domains: Vec::new(),
            sample_size: 2500,
            seed: 0,
            measures: Measure::ALL.to_vec(),
            mode: Mode::Domain,
            tau: -1.0,
            k: 1,
            regularization: 1e-4,
            epochs: 10,
            significance_iterations: 1000,
            stratify: true,
            format: CorpusFormat::Canonical,
            jobs: 0,
        }
    }
}

impl RunConfig {
    pub fn train_params(&self) -> TrainParams {
        TrainParams {
            regularization: self.regularization,
            epochs: self.epochs,
            seed: 0,
        }
    }

    pub fn experiment_params(&self) -> ExperimentParams {
        ExperimentParams {
            train: self.train_params(),
            significance_iterations: self.significance_iterations,
        }
    }

    /// Applies a flat `key = value` config file. Later entries win; unknown
    /// keys are rejected.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ConfigError::BadLine { line: idx + 1 })?;
            self.apply_entry(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn apply_entry(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = |reason: &str| ConfigError::BadValue {
            key: key.to_string(),
            reason: reason.to_string(),
        };
        match key {
            "corpus_dir" => self.corpus_dir = PathBuf::from(value),
            "out" => self.out_dir = PathBuf::from(value),
            "domains" => {
                self.domains = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect();
            }
            "sample_size" => self.sample_size = value.parse().map_err(|_| bad("not an integer"))?,
            "seed" => self.seed = value.parse().map_err(|_| bad("not an integer"))?,
            "measure" => {
                self.measures = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<Measure>().map_err(|e| bad(&e)))
                    .collect::<Result<_, _>>()?;
            }
            "mode" => self.mode = value.parse().map_err(|e: String| bad(&e))?,
            "tau" => self.tau = value.parse().map_err(|_| bad("not a number"))?,
            "k" => self.k = value.parse().map_err(|_| bad("not an integer"))?,
            "regularization" => {
                self.regularization = value.parse().map_err(|_| bad("not a number"))?
            }
            "epochs" => self.epochs = value.parse().map_err(|_| bad("not an integer"))?,
            "sig_iterations" => {
                self.significance_iterations = value.parse().map_err(|_| bad("not an integer"))?
            }
            "stratify" => {
                self.stratify = match value {
                    "true" => true,
                    "false" => false,
                    _ => return Err(bad("expected true or false")),
                }
            }
            "format" => self.format = value.parse().map_err(|e: String| bad(&e))?,
            "jobs" => self.jobs = value.parse().map_err(|_| bad("not an integer"))?,
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }
}
