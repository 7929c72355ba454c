//! Bracket notation for feature structures.
//!
//! ```text
//! value   := tag? (struct | atom)?        a bare tag is a reference
//! struct  := '[' (feature ':' value (',' feature ':' value)*)? ','? ']'
//! tag     := '#' digits
//! atom, feature := run of characters other than whitespace and []:,#|<>!
//! ```
//!
//! `[subj: #1[num: sg], agr: #1]` shares one node between `subj` and `agr`.
//! A tag may be referenced before its definition; defining it twice is an
//! error, as is any coreference that closes a cycle.

use std::collections::{HashMap, HashSet};
use std::fmt;

use thiserror::Error;

use super::{Builder, FeatureStructure, FsError, Node, NodeId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message} at byte {offset}")]
pub struct NotationError {
    pub offset: usize,
    pub message: String,
}

pub(crate) fn is_symbol_char(c: char) -> bool {
    !c.is_whitespace() && !matches!(c, '[' | ']' | ':' | ',' | '#' | '|' | '<' | '>' | '!')
}

pub fn parse_fs(input: &str) -> Result<FeatureStructure, NotationError> {
    let mut p = Parser {
        src: input,
        pos: 0,
        builder: Builder::new(),
        tags: HashMap::new(),
        defined: HashSet::new(),
    };
    p.skip_ws();
    p.value(Some(0))?;
    p.skip_ws();
    if p.pos != input.len() {
        return Err(p.error("trailing input"));
    }
    let offset = p.pos;
    p.builder.finish().map_err(|e| NotationError {
        offset,
        message: match e {
            FsError::Cycle(path) => format!("coreference cycle through {path}"),
            FsError::Dangling(n) => format!("dangling node {n}"),
        },
    })
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    builder: Builder,
    tags: HashMap<String, usize>,
    defined: HashSet<String>,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> NotationError {
        NotationError {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn symbol(&mut self) -> Option<String> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if !is_symbol_char(c) {
                break;
            }
            self.pos += c.len_utf8();
        }
        (self.pos > start).then(|| self.src[start..self.pos].to_string())
    }

    /// Parses a value into `target` (a fresh node when `None`) and returns
    /// the node holding it.
    fn value(&mut self, target: Option<usize>) -> Result<usize, NotationError> {
        if self.eat('#') {
            let start = self.pos;
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                self.pos += 1;
            }
            if self.pos == start {
                return Err(self.error("expected tag number after '#'"));
            }
            let tag = self.src[start..self.pos].to_string();
            let node = match self.tags.get(&tag) {
                Some(&n) => n,
                None => {
                    let n = match target {
                        Some(t) => t,
                        None => self.builder.fresh(),
                    };
                    self.tags.insert(tag.clone(), n);
                    n
                }
            };
            if let Some(t) = target {
                if t != node {
                    // Only the root is pre-allocated; a root tag that was
                    // already used elsewhere would have to be a cycle.
                    return Err(self.error("tag on root refers to an inner node"));
                }
            }
            self.skip_ws();
            if matches!(self.peek(), Some(c) if c == '[' || is_symbol_char(c)) {
                if !self.defined.insert(tag) {
                    return Err(self.error("tag defined twice"));
                }
                self.content(node)?;
            }
            return Ok(node);
        }
        let node = match target {
            Some(t) => t,
            None => self.builder.fresh(),
        };
        self.content(node)?;
        Ok(node)
    }

    fn content(&mut self, node: usize) -> Result<(), NotationError> {
        if self.eat('[') {
            let mut seen = HashSet::new();
            loop {
                self.skip_ws();
                if self.eat(']') {
                    return Ok(());
                }
                let Some(feat) = self.symbol() else {
                    return Err(self.error("expected feature name"));
                };
                if !seen.insert(feat.clone()) {
                    return Err(self.error("duplicate feature"));
                }
                self.skip_ws();
                if !self.eat(':') {
                    return Err(self.error("expected ':'"));
                }
                self.skip_ws();
                let child = self.value(None)?;
                if !self.builder.arc(node, &feat, child) {
                    return Err(self.error("feature on atomic node"));
                }
                self.skip_ws();
                if self.eat(',') {
                    continue;
                }
                self.skip_ws();
                if self.eat(']') {
                    return Ok(());
                }
                return Err(self.error("expected ',' or ']'"));
            }
        }
        let Some(atom) = self.symbol() else {
            return Err(self.error("expected value"));
        };
        if !self.builder.set_atom(node, &atom) {
            return Err(self.error("atom on complex node"));
        }
        Ok(())
    }
}

impl fmt::Display for FeatureStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let counts = self.in_degree();
        let mut tags: HashMap<NodeId, usize> = HashMap::new();
        render(self, self.root(), &counts, &mut tags, f)
    }
}

fn render(
    fs: &FeatureStructure,
    id: NodeId,
    counts: &[usize],
    tags: &mut HashMap<NodeId, usize>,
    f: &mut fmt::Formatter<'_>,
) -> fmt::Result {
    if counts[id.index()] > 1 {
        if let Some(t) = tags.get(&id) {
            return write!(f, "#{t}");
        }
        let t = tags.len() + 1;
        tags.insert(id, t);
        write!(f, "#{t}")?;
        if let Node::Atom(_) = fs.node(id) {
            f.write_str(" ")?;
        }
    }
    match fs.node(id) {
        Node::Atom(a) => f.write_str(a),
        Node::Complex(arcs) => {
            f.write_str("[")?;
            for (i, (feat, child)) in arcs.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{feat}: ")?;
                render(fs, *child, counts, tags, f)?;
            }
            f.write_str("]")
        }
    }
}
