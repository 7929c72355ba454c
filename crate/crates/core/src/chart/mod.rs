//! Append-only chart of active and passive edges.

mod agenda;
mod parser;

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::fs::{FeatureStructure, Path, Symbol};
use crate::grammar::{Category, LexId, RuleId, HEAD};
use crate::lattice::Vertex;

pub use agenda::{Agenda, Task, TaskKind};
pub use parser::{
    category_check, combine_scores, ChartError, ChartParser, ParseStats, StepResult,
    TransactionOutcome,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeOrigin {
    Rule(RuleId),
    Lexical { entry: LexId, variant: u32 },
}

#[derive(Clone, Debug)]
pub struct Edge {
    /// Assigned by [`Chart::insert`].
    pub id: EdgeId,
    pub from: Vertex,
    pub to: Vertex,
    pub origin: EdgeOrigin,
    pub category: Category,
    /// Right-hand-side symbols consumed so far.
    pub dot: usize,
    pub arity: usize,
    /// The category after the dot, for active edges.
    pub expects: Option<Category>,
    pub fs: Arc<FeatureStructure>,
    pub score: f64,
    pub children: Vec<EdgeId>,
    /// Deferred constraints over this edge's layout, applied at the end of
    /// the utterance.
    pub pending_final: Vec<Arc<FeatureStructure>>,
    /// Disjunct combination chosen at each step (0 when there was none).
    pub choices: Vec<u32>,
    /// For edges produced by finalisation: the edge they refine.
    pub refines: Option<EdgeId>,
    pub word: Option<Symbol>,
}

impl Edge {
    pub fn is_passive(&self) -> bool {
        self.dot == self.arity
    }

    pub fn is_lexical(&self) -> bool {
        matches!(self.origin, EdgeOrigin::Lexical { .. })
    }

    pub fn span_len(&self) -> u32 {
        self.to - self.from
    }

    /// What a parent holds for this edge as its `k`-th constituent. The
    /// head alone suffices unless deferred constraints still refer to the
    /// edge's own constituents, which keeps structures from growing with
    /// the size of the derivation.
    pub fn constituent_fs(&self, k: usize) -> FeatureStructure {
        if self.pending_final.is_empty() {
            let head = self
                .fs
                .at(&Path::new([HEAD]))
                .unwrap_or_else(FeatureStructure::empty);
            head.embed(&Path::new([k.to_string(), HEAD.to_string()]))
        } else {
            self.fs.embed(&Path::new([k.to_string()]))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct EdgeKey {
    from: Vertex,
    to: Vertex,
    origin: EdgeOrigin,
    dot: usize,
    children: Vec<EdgeId>,
    choices: Vec<u32>,
    refines: Option<EdgeId>,
}

impl EdgeKey {
    fn of(e: &Edge) -> Self {
        EdgeKey {
            from: e.from,
            to: e.to,
            origin: e.origin,
            dot: e.dot,
            children: e.children.clone(),
            choices: e.choices.clone(),
            refines: e.refines,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Chart {
    edges: Vec<Edge>,
    /// Active edges by the vertex they end at.
    actives_ending: HashMap<Vertex, Vec<EdgeId>>,
    /// Passive edges by the vertex they start at.
    passives_starting: HashMap<Vertex, Vec<EdgeId>>,
    keys: HashSet<EdgeKey>,
}

impl Chart {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends `edge` unless an identical one exists. Refinements are logged
    /// but not indexed for further combination.
    pub fn insert(&mut self, mut edge: Edge) -> Option<EdgeId> {
        if !self.keys.insert(EdgeKey::of(&edge)) {
            return None;
        }
        let id = EdgeId(self.edges.len() as u32);
        edge.id = id;
        if edge.refines.is_none() {
            if edge.is_passive() {
                self.passives_starting
                    .entry(edge.from)
                    .or_default()
                    .push(id);
            } else {
                self.actives_ending.entry(edge.to).or_default().push(id);
            }
        }
        self.edges.push(edge);
        Some(id)
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id.0 as usize]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn actives_ending_at(&self, v: Vertex) -> &[EdgeId] {
        self.actives_ending
            .get(&v)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn passives_starting_at(&self, v: Vertex) -> &[EdgeId] {
        self.passives_starting
            .get(&v)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}
