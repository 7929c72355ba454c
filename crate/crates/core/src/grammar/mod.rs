//! Grammar rules, lexicon entries, and their compiled constraint form.
//!
//! Edge feature structures use a fixed layout: the left-hand side structure
//! lives under `head-fs`, and the full structure of the constituent in rhs
//! position `i` lives under the feature `i`. An equation path `<0 agr>`
//! therefore addresses `head-fs agr`, and `<2 agr>` addresses
//! `2 head-fs agr`.

mod check;
mod file;

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::fs::{Disjunction, FeatureStructure, Path, Symbol};

pub use check::check_sources;
pub use file::{parse_source, RawItem, RawKind};

pub type Category = Symbol;

/// Feature holding an edge's own (left-hand side) structure.
pub const HEAD: &str = "head-fs";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RuleId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LexId(pub u32);

/// A path relative to one constituent: 0 is the left-hand side, 1..=n the
/// right-hand side positions.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ConstituentPath {
    pub constituent: usize,
    pub path: Path,
}

impl ConstituentPath {
    /// The same location in the edge feature-structure layout.
    pub fn layout_path(&self) -> Path {
        let mut v: Vec<Symbol> = Vec::with_capacity(self.path.len() + 2);
        if self.constituent > 0 {
            v.push(Symbol::from(self.constituent.to_string()));
        }
        v.push(Symbol::from(HEAD));
        v.extend(self.path.features().iter().cloned());
        Path(v)
    }
}

impl fmt::Display for ConstituentPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}", self.constituent)?;
        for feat in self.path.features() {
            write!(f, " {feat}")?;
        }
        f.write_str(">")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Term {
    Path(ConstituentPath),
    Atom(Symbol),
    Structure(FeatureStructure),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Path(p) => write!(f, "{p}"),
            Term::Atom(a) => f.write_str(a),
            Term::Structure(s) => write!(f, "{s}"),
        }
    }
}

/// `lhs = alt1 | alt2 | ...`, optionally deferred to the end of the
/// utterance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Equation {
    pub lhs: ConstituentPath,
    pub alternatives: Vec<Term>,
    pub final_only: bool,
    pub line: usize,
}

impl Equation {
    pub fn max_constituent(&self) -> usize {
        self.alternatives
            .iter()
            .filter_map(|t| match t {
                Term::Path(p) => Some(p.constituent),
                _ => None,
            })
            .chain(std::iter::once(self.lhs.constituent))
            .max()
            .unwrap_or(0)
    }

    /// Each alternative as a constraint structure over the edge layout.
    pub fn compile(&self) -> Result<Vec<FeatureStructure>, String> {
        let target = self.lhs.layout_path();
        self.alternatives
            .iter()
            .map(|term| match term {
                Term::Atom(a) => Ok(FeatureStructure::atom(a).embed(&target)),
                Term::Structure(s) => Ok(s.embed(&target)),
                Term::Path(p) => FeatureStructure::with_path_equality(&target, &p.layout_path())
                    .map_err(|_| format!("equation {} = {} is cyclic", self.lhs, p)),
            })
            .collect()
    }
}

impl fmt::Display for Equation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} =", self.lhs)?;
        for (i, alt) in self.alternatives.iter().enumerate() {
            if i > 0 {
                f.write_str(" |")?;
            }
            write!(f, " {alt}")?;
        }
        if self.final_only {
            f.write_str(" !final")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrammarRule {
    pub id: RuleId,
    pub lhs: Category,
    pub rhs: Vec<Category>,
    pub equations: Vec<Equation>,
    pub line: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LexEntry {
    pub id: LexId,
    pub word: Symbol,
    pub category: Category,
    pub equations: Vec<Equation>,
    pub line: usize,
}

/// Constraints applied when the fundamental rule consumes one constituent.
#[derive(Clone, Debug, Default)]
pub struct StepConstraints {
    pub fixed: Vec<FeatureStructure>,
    pub disjunctions: Vec<Disjunction>,
    pub deferred: Vec<Arc<FeatureStructure>>,
}

impl StepConstraints {
    /// Number of disjunct combinations, each its own transaction.
    pub fn choice_count(&self) -> usize {
        self.disjunctions.iter().map(Disjunction::len).product()
    }

    /// Mixed-radix decoding of a combination index into one alternative
    /// index per disjunction.
    pub fn decode_choice(&self, mut choice: usize) -> Vec<usize> {
        self.disjunctions
            .iter()
            .map(|d| {
                let i = choice % d.len();
                choice /= d.len();
                i
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct CompiledRule {
    pub rule: GrammarRule,
    /// `steps[k - 1]` holds the constraints applied when constituent `k` is
    /// consumed.
    pub steps: Vec<StepConstraints>,
}

/// One consistent reading of a lexical entry.
#[derive(Clone, Debug)]
pub struct LexVariant {
    pub fs: Arc<FeatureStructure>,
    pub pending: Vec<Arc<FeatureStructure>>,
    pub choice: u32,
}

#[derive(Clone, Debug)]
pub struct CompiledLex {
    pub entry: LexEntry,
    pub variants: Vec<LexVariant>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub source: String,
    pub line: usize,
    pub severity: Severity,
    pub message: String,
}

impl Diagnostic {
    pub fn error(source: &str, line: usize, message: impl Into<String>) -> Self {
        Diagnostic {
            source: source.to_string(),
            line,
            severity: Severity::Error,
            message: message.into(),
        }
    }

    pub fn warning(source: &str, line: usize, message: impl Into<String>) -> Self {
        Diagnostic {
            source: source.to_string(),
            line,
            severity: Severity::Warning,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(
            f,
            "{}:{}: {}: {}",
            self.source, self.line, sev, self.message
        )
    }
}

#[derive(Debug, Error)]
pub struct LoadError {
    pub diagnostics: Vec<Diagnostic>,
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut errors = self
            .diagnostics
            .iter()
            .filter(|d| d.severity == Severity::Error);
        match errors.next() {
            Some(first) => write!(f, "{first} ({} more)", errors.count()),
            None => f.write_str("grammar failed to load"),
        }
    }
}

/// The structure of a fresh edge before any constituent is consumed.
pub fn initial_layout() -> FeatureStructure {
    FeatureStructure::empty().embed(&Path::new([HEAD]))
}

#[derive(Clone, Debug)]
pub struct Grammar {
    rules: Vec<CompiledRule>,
    lexicon: Vec<CompiledLex>,
    by_word: HashMap<Symbol, Vec<LexId>>,
    by_first: HashMap<Category, Vec<RuleId>>,
    warnings: Vec<Diagnostic>,
}

impl Grammar {
    /// Loads a grammar file and a lexicon file (either may hold both kinds
    /// of item). Warnings are kept on the grammar; any error fails the load.
    pub fn from_sources(grammar: &str, lexicon: &str) -> Result<Grammar, LoadError> {
        let (items_g, mut diags) = parse_source(grammar, "grammar");
        let (items_l, diags_l) = parse_source(lexicon, "lexicon");
        diags.extend(diags_l);
        let mut items = items_g;
        items.extend(items_l);
        let (grammar, more) = Grammar::build(items);
        diags.extend(more);
        if diags.iter().any(|d| d.severity == Severity::Error) {
            return Err(LoadError { diagnostics: diags });
        }
        let mut grammar = grammar;
        grammar.warnings = diags;
        Ok(grammar)
    }

    /// Builds from already-parsed items, returning structural diagnostics.
    /// The grammar is only safe to use when no error is reported.
    pub fn build(items: Vec<RawItem>) -> (Grammar, Vec<Diagnostic>) {
        check::build(items)
    }

    pub fn rules(&self) -> &[CompiledRule] {
        &self.rules
    }

    pub fn rule(&self, id: RuleId) -> &CompiledRule {
        &self.rules[id.0 as usize]
    }

    pub fn lexicon(&self) -> &[CompiledLex] {
        &self.lexicon
    }

    pub fn lex(&self, id: LexId) -> &CompiledLex {
        &self.lexicon[id.0 as usize]
    }

    pub fn entries_for(&self, word: &str) -> &[LexId] {
        self.by_word.get(word).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Rules whose first right-hand-side symbol is `category`.
    pub fn rules_starting_with(&self, category: &str) -> &[RuleId] {
        self.by_first
            .get(category)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn warnings(&self) -> &[Diagnostic] {
        &self.warnings
    }
}
