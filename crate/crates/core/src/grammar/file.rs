//! Line-oriented grammar and lexicon files.
//!
//! ```text
//! # comment
//! Rule S -> NP VP
//!   <0 agr> = <1 agr>
//!   <0 tense> = <2 tense> !final
//! Lex sheep N
//!   <0 num> = sg | pl
//!   <0 agr> = [pers: 3rd]
//! ```
//!
//! Indented lines are equations of the preceding `Rule` or `Lex` header.
//! The right-hand side of an equation is a path, an atom, or a bracketed
//! structure; `|` separates alternatives and a trailing `!final` defers the
//! equation to the end of the utterance.

use crate::fs::{parse_fs, Path, Symbol};

use super::{ConstituentPath, Diagnostic, Equation, Term};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RawKind {
    Rule { lhs: Symbol, rhs: Vec<Symbol> },
    Lex { word: Symbol, category: Symbol },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawItem {
    pub source: String,
    pub line: usize,
    pub kind: RawKind,
    pub equations: Vec<Equation>,
}

fn is_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(crate::fs::notation_symbol_char)
}

/// Parses one file. Malformed lines are reported and skipped so that every
/// problem in a file surfaces in one pass.
pub fn parse_source(text: &str, source: &str) -> (Vec<RawItem>, Vec<Diagnostic>) {
    let mut items: Vec<RawItem> = Vec::new();
    let mut diags = Vec::new();
    // Equations following a broken header are dropped silently.
    let mut orphaned = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let indented = raw.starts_with(|c: char| c.is_whitespace());
        if indented {
            if orphaned {
                continue;
            }
            match items.last_mut() {
                Some(item) => match parse_equation(trimmed, line) {
                    Ok(eq) => item.equations.push(eq),
                    Err(msg) => diags.push(Diagnostic::error(source, line, msg)),
                },
                None => diags.push(Diagnostic::error(
                    source,
                    line,
                    "equation outside of a Rule or Lex block",
                )),
            }
            continue;
        }
        match parse_header(trimmed) {
            Ok(kind) => {
                orphaned = false;
                items.push(RawItem {
                    source: source.to_string(),
                    line,
                    kind,
                    equations: Vec::new(),
                });
            }
            Err(msg) => {
                orphaned = true;
                diags.push(Diagnostic::error(source, line, msg));
            }
        }
    }
    (items, diags)
}

fn parse_header(line: &str) -> Result<RawKind, String> {
    let mut tokens = line.split_whitespace();
    match tokens.next() {
        Some("Rule") => {
            let lhs = tokens.next().ok_or("rule without left-hand side")?;
            if tokens.next() != Some("->") {
                return Err("expected '->' after rule left-hand side".into());
            }
            let rhs: Vec<&str> = tokens.collect();
            if rhs.is_empty() {
                return Err("rule with empty right-hand side".into());
            }
            for cat in std::iter::once(&lhs).chain(rhs.iter()) {
                if !is_name(cat) {
                    return Err(format!("invalid category name '{cat}'"));
                }
            }
            Ok(RawKind::Rule {
                lhs: lhs.into(),
                rhs: rhs.into_iter().map(Symbol::from).collect(),
            })
        }
        Some("Lex") => {
            let word = tokens.next().ok_or("lexical entry without word")?;
            let category = tokens.next().ok_or("lexical entry without category")?;
            if tokens.next().is_some() {
                return Err("trailing tokens after lexical category".into());
            }
            if !is_name(word) {
                return Err(format!("invalid word '{word}'"));
            }
            if !is_name(category) {
                return Err(format!("invalid category name '{category}'"));
            }
            Ok(RawKind::Lex {
                word: word.into(),
                category: category.into(),
            })
        }
        Some(other) => Err(format!("expected 'Rule' or 'Lex', found '{other}'")),
        None => Err("empty header".into()),
    }
}

fn parse_path(text: &str) -> Result<ConstituentPath, String> {
    let inner = text
        .strip_prefix('<')
        .and_then(|t| t.strip_suffix('>'))
        .ok_or_else(|| format!("malformed path '{text}'"))?;
    let mut tokens = inner.split_whitespace();
    let idx = tokens
        .next()
        .ok_or_else(|| format!("path '{text}' lacks a constituent index"))?;
    let constituent: usize = idx
        .parse()
        .map_err(|_| format!("constituent index '{idx}' is not a number"))?;
    let features: Vec<&str> = tokens.collect();
    if let Some(bad) = features.iter().find(|f| !is_name(f)) {
        return Err(format!("invalid feature name '{bad}'"));
    }
    Ok(ConstituentPath {
        constituent,
        path: Path::new(features),
    })
}

/// Splits on `|` outside brackets.
fn split_alternatives(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in text.char_indices() {
        match c {
            '[' => depth += 1,
            ']' => depth -= 1,
            '|' if depth == 0 => {
                out.push(&text[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&text[start..]);
    out
}

fn parse_term(text: &str) -> Result<Term, String> {
    let text = text.trim();
    if text.is_empty() {
        return Err("empty alternative".into());
    }
    if text.starts_with('<') {
        return parse_path(text).map(Term::Path);
    }
    if text.starts_with('[') || text.starts_with('#') {
        return parse_fs(text)
            .map(Term::Structure)
            .map_err(|e| format!("bad structure '{text}': {e}"));
    }
    if is_name(text) {
        return Ok(Term::Atom(text.into()));
    }
    Err(format!("bad value '{text}'"))
}

pub(super) fn parse_equation(text: &str, line: usize) -> Result<Equation, String> {
    let (body, final_only) = match text.strip_suffix("!final") {
        Some(rest) => (rest.trim_end(), true),
        None => (text, false),
    };
    let close = body
        .find('>')
        .ok_or("equation must start with a path '<i ...>'")?;
    if !body.starts_with('<') {
        return Err("equation must start with a path '<i ...>'".into());
    }
    let lhs = parse_path(&body[..=close])?;
    let rest = body[close + 1..].trim_start();
    let rhs = rest
        .strip_prefix('=')
        .ok_or("expected '=' after equation path")?;
    let alternatives = split_alternatives(rhs)
        .into_iter()
        .map(parse_term)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Equation {
        lhs,
        alternatives,
        final_only,
        line,
    })
}
