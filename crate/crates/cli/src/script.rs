//! Consumer scripts: one action per line, `poll <t>`, `abort <t>` or
//! `reset <t> <lattice>`, with `#` comments. Offsets are milliseconds from
//! the start, or transaction counts in deterministic mode, and must never
//! decrease. Relative lattice paths are taken from the script's directory.

use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Action {
    Poll,
    Abort,
    Reset(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step {
    pub at: u64,
    pub action: Action,
    pub line: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConsumerScript {
    pub steps: Vec<Step>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ScriptError {
    pub line: usize,
    pub message: String,
}

pub fn parse_script(text: &str, base: &Path) -> Result<ConsumerScript, ScriptError> {
    let mut steps: Vec<Step> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |message: String| ScriptError { line, message };
        let fields: Vec<&str> = content.split_whitespace().collect();
        let at: u64 = match fields.get(1) {
            Some(t) => t.parse().map_err(|_| err(format!("bad offset '{t}'")))?,
            None => return Err(err(format!("'{}' needs an offset", fields[0]))),
        };
        let action = match (fields[0], fields.len()) {
            ("poll", 2) => Action::Poll,
            ("abort", 2) => Action::Abort,
            ("reset", 3) => Action::Reset(base.join(fields[2])),
            ("reset", 2) => return Err(err("reset needs a lattice file".into())),
            ("poll" | "abort" | "reset", n) => return Err(err(format!("too many fields ({n})"))),
            (other, _) => return Err(err(format!("unknown action '{other}'"))),
        };
        if let Some(prev) = steps.last() {
            if at < prev.at {
                return Err(err(format!("offset {at} comes before {}", prev.at)));
            }
        }
        steps.push(Step { at, action, line });
    }
    Ok(ConsumerScript { steps })
}
