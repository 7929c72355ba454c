use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyparse::anytime::StrategyParams;
use anyparse::grammar::{Grammar, LoadError};
use anyparse::lattice::{parse_lattice, LatticeError, WordHypothesis};
use thiserror::Error;

use crate::exit;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Batch,
    Anytime,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Text,
    JsonLines,
}

/// When an anytime consumer is satisfied.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Until {
    /// First complete start-category analysis.
    Complete,
    /// Only when the producer has nothing left to do.
    Quiescent,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub grammar: PathBuf,
    pub lexicon: PathBuf,
    pub lattice: PathBuf,
    pub mode: Mode,
    /// Milliseconds between polls, or transactions in deterministic mode.
    pub poll_interval: u64,
    /// Same unit as `poll_interval`.
    pub deadline: Option<u64>,
    /// Milliseconds between hypotheses; 0 hands over the whole lattice.
    pub feed_interval_ms: u64,
    pub params: StrategyParams,
    pub format: Format,
    pub until: Until,
    /// Lockstep producer, transaction-count triggers, no timings.
    pub deterministic: bool,
}

impl RunConfig {
    pub fn new(
        grammar: impl Into<PathBuf>,
        lexicon: impl Into<PathBuf>,
        lattice: impl Into<PathBuf>,
    ) -> Self {
        RunConfig {
            grammar: grammar.into(),
            lexicon: lexicon.into(),
            lattice: lattice.into(),
            mode: Mode::Batch,
            poll_interval: 5,
            deadline: None,
            feed_interval_ms: 0,
            params: StrategyParams::new("S"),
            format: Format::Text,
            until: Until::Complete,
            deterministic: false,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.mode == Mode::Anytime && self.poll_interval == 0 {
            return Err(CliError::Config("poll interval must be at least 1".into()));
        }
        self.params
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load_grammar(&self) -> Result<Arc<Grammar>, CliError> {
        let g = read(&self.grammar)?;
        let l = read(&self.lexicon)?;
        let grammar = Grammar::from_sources(&g, &l).map_err(CliError::Grammar)?;
        for w in grammar.warnings() {
            log::warn!("{w}");
        }
        Ok(Arc::new(grammar))
    }

    pub fn load_lattice(&self) -> Result<Vec<WordHypothesis>, CliError> {
        load_lattice(&self.lattice)
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("cannot read {}: {source}", path.display())]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Lattice { path: PathBuf, source: LatticeError },
    #[error("{0}")]
    Grammar(LoadError),
    #[error("{}: {source}", path.display())]
    Script {
        path: PathBuf,
        source: crate::script::ScriptError,
    },
    #[error("writing report: {0}")]
    Output(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Script { .. } => exit::CONFIG,
            CliError::Read { .. } | CliError::Lattice { .. } | CliError::Grammar(_) => exit::LOAD,
            CliError::Output(_) => exit::LOAD,
        }
    }

    /// Every line worth showing a human, most specific first.
    pub fn lines(&self) -> Vec<String> {
        match self {
            CliError::Grammar(e) => e.diagnostics.iter().map(|d| d.to_string()).collect(),
            other => vec![other.to_string()],
        }
    }
}

pub fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_lattice(path: &Path) -> Result<Vec<WordHypothesis>, CliError> {
    parse_lattice(&read(path)?).map_err(|source| CliError::Lattice {
        path: path.to_path_buf(),
        source,
    })
}
