//! Scored word hypotheses and the lattice file format.
//!
//! One hypothesis per line: `word<TAB>start<TAB>end<TAB>score`. Blank lines
//! and lines starting with `#` are ignored. Any run of whitespace is accepted
//! as a separator.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fs::Symbol;

pub type Vertex = u32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WordHypothesis {
    pub word: Symbol,
    pub start: Vertex,
    pub end: Vertex,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LatticeError {
    #[error("hypothesis '{word}' must satisfy start < end (got {start}..{end})")]
    EmptySpan {
        word: String,
        start: Vertex,
        end: Vertex,
    },
    #[error("hypothesis '{word}' has score {score} outside [0, 1]")]
    Score { word: String, score: f64 },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
}

impl WordHypothesis {
    pub fn new(word: &str, start: Vertex, end: Vertex, score: f64) -> Result<Self, LatticeError> {
        if start >= end {
            return Err(LatticeError::EmptySpan {
                word: word.to_string(),
                start,
                end,
            });
        }
        if !(0.0..=1.0).contains(&score) {
            return Err(LatticeError::Score {
                word: word.to_string(),
                score,
            });
        }
        Ok(WordHypothesis {
            word: word.into(),
            start,
            end,
            score,
        })
    }
}

impl fmt::Display for WordHypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{}\t{}",
            self.word, self.start, self.end, self.score
        )
    }
}

/// The hypotheses received so far, in arrival order.
#[derive(Clone, Debug, Default)]
pub struct Lattice {
    hypotheses: Vec<WordHypothesis>,
    span_end: Vertex,
}

impl Lattice {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, wh: WordHypothesis) {
        self.span_end = self.span_end.max(wh.end);
        self.hypotheses.push(wh);
    }

    pub fn hypotheses(&self) -> &[WordHypothesis] {
        &self.hypotheses
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    /// The last time vertex reached by any hypothesis; the utterance spans
    /// `0..span_end`.
    pub fn span_end(&self) -> Vertex {
        self.span_end
    }

    pub fn vertex_count(&self) -> u32 {
        self.span_end + 1
    }
}

pub fn parse_lattice(text: &str) -> Result<Vec<WordHypothesis>, LatticeError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let syntax = |message: String| LatticeError::Syntax { line, message };
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(syntax(format!("expected 4 fields, found {}", fields.len())));
        }
        let start: Vertex = fields[1]
            .parse()
            .map_err(|_| syntax(format!("bad start vertex '{}'", fields[1])))?;
        let end: Vertex = fields[2]
            .parse()
            .map_err(|_| syntax(format!("bad end vertex '{}'", fields[2])))?;
        let score: f64 = fields[3]
            .parse()
            .map_err(|_| syntax(format!("bad score '{}'", fields[3])))?;
        let wh =
            WordHypothesis::new(fields[0], start, end, score).map_err(|e| syntax(e.to_string()))?;
        out.push(wh);
    }
    Ok(out)
}

/// A single-path lattice with one hypothesis per word, all scored 1.
pub fn from_words(words: &[&str]) -> Vec<WordHypothesis> {
    words
        .iter()
        .enumerate()
        .map(|(i, w)| {
            WordHypothesis::new(w, i as Vertex, i as Vertex + 1, 1.0).expect("valid span")
        })
        .collect()
}
