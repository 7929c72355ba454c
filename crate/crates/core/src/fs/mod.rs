//! Untyped feature structures as rooted DAGs.
//!
//! A [`FeatureStructure`] owns an arena of nodes. Coreference is node
//! identity: two paths are token-identical exactly when they reach the same
//! [`NodeId`]. Every constructor canonicalises the arena (depth-first
//! preorder over sorted arcs), so two structures are isomorphic iff they are
//! `==`.
//!
//! A complex node without arcs is the unconstrained structure `[]`; it
//! unifies with atoms as well as with complex nodes.

mod notation;
mod unify;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub(crate) use notation::is_symbol_char as notation_symbol_char;
pub use notation::{parse_fs, NotationError};
pub use unify::{unify_one_disjunct, ClashReason, Disjunction, UnifyFailure};

/// Interned-by-value symbol used for feature names and atoms.
pub type Symbol = Arc<str>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub(crate) u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Node {
    Atom(Symbol),
    Complex(BTreeMap<Symbol, NodeId>),
}

impl Node {
    pub fn arcs(&self) -> Option<&BTreeMap<Symbol, NodeId>> {
        match self {
            Node::Complex(arcs) => Some(arcs),
            Node::Atom(_) => None,
        }
    }

    pub fn atom(&self) -> Option<&str> {
        match self {
            Node::Atom(a) => Some(a),
            Node::Complex(_) => None,
        }
    }
}

/// A sequence of feature names; the empty path addresses the root.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Path(pub Vec<Symbol>);

impl Path {
    pub fn root() -> Self {
        Path(Vec::new())
    }

    pub fn new<I, S>(features: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Path(
            features
                .into_iter()
                .map(|s| Symbol::from(s.as_ref()))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn features(&self) -> &[Symbol] {
        &self.0
    }

    pub fn child(&self, feature: &Symbol) -> Path {
        let mut v = self.0.clone();
        v.push(feature.clone());
        Path(v)
    }

    pub fn join(&self, suffix: &Path) -> Path {
        let mut v = self.0.clone();
        v.extend(suffix.0.iter().cloned());
        Path(v)
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("<")?;
        for (i, feat) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(feat)?;
        }
        f.write_str(">")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FsError {
    #[error("cycle through path {0}")]
    Cycle(Path),
    #[error("dangling node reference {0}")]
    Dangling(u32),
}

#[derive(Clone, PartialEq, Eq)]
pub struct FeatureStructure {
    nodes: Vec<Node>,
    root: NodeId,
}

impl Default for FeatureStructure {
    fn default() -> Self {
        Self::empty()
    }
}

impl FeatureStructure {
    /// The unconstrained structure `[]`.
    pub fn empty() -> Self {
        FeatureStructure {
            nodes: vec![Node::Complex(BTreeMap::new())],
            root: NodeId(0),
        }
    }

    pub fn atom(value: &str) -> Self {
        FeatureStructure {
            nodes: vec![Node::Atom(Symbol::from(value))],
            root: NodeId(0),
        }
    }

    /// Builds a structure from a raw arena. Unreachable nodes are dropped and
    /// the result is canonicalised.
    pub fn from_arena(nodes: Vec<Node>, root: usize) -> Result<Self, FsError> {
        canonicalize(&nodes, root)
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        matches!(self.node(self.root), Node::Complex(arcs) if arcs.is_empty())
    }

    /// The node reached by `path` from the root, or `None` when an arc is
    /// missing or the path runs into an atom.
    pub fn follow(&self, path: &Path) -> Option<NodeId> {
        let mut cur = self.root;
        for feat in path.features() {
            cur = *self.node(cur).arcs()?.get(feat)?;
        }
        Some(cur)
    }

    /// The substructure rooted at `path`.
    pub fn at(&self, path: &Path) -> Option<FeatureStructure> {
        let node = self.follow(path)?;
        Some(canonicalize(&self.nodes, node.index()).expect("substructure of acyclic structure"))
    }

    pub fn copy(&self) -> FeatureStructure {
        self.clone()
    }

    pub fn is_isomorphic(&self, other: &FeatureStructure) -> bool {
        self == other
    }

    /// A structure in which `self` sits under `prefix`.
    pub fn embed(&self, prefix: &Path) -> FeatureStructure {
        if prefix.is_empty() {
            return self.clone();
        }
        let offset = prefix.len();
        let mut nodes: Vec<Node> = Vec::with_capacity(self.nodes.len() + offset);
        for (i, feat) in prefix.features().iter().enumerate() {
            let mut arcs = BTreeMap::new();
            let next = if i + 1 == offset {
                self.root.0 + offset as u32
            } else {
                i as u32 + 1
            };
            arcs.insert(feat.clone(), NodeId(next));
            nodes.push(Node::Complex(arcs));
        }
        for node in &self.nodes {
            nodes.push(shift(node, offset as u32));
        }
        // Already in preorder: the prefix chain precedes the embedded arena.
        FeatureStructure {
            nodes,
            root: NodeId(0),
        }
    }

    /// A structure whose only information is that `path` holds `value`.
    pub fn with_path_value(path: &Path, value: &FeatureStructure) -> FeatureStructure {
        value.embed(path)
    }

    /// A structure in which `a` and `b` reach one shared node.
    pub fn with_path_equality(a: &Path, b: &Path) -> Result<FeatureStructure, FsError> {
        let mut builder = Builder::new();
        if a == b {
            builder.ensure(a.features());
            return builder.finish();
        }
        let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
        if long.features().starts_with(short.features()) {
            return Err(FsError::Cycle(long.clone()));
        }
        // The paths diverge below their common prefix, so the two chains
        // never collide.
        let shared = builder.fresh();
        builder.bind(a, shared);
        builder.bind(b, shared);
        builder.finish()
    }

    /// Every root path, paired with the node it reaches, in depth-first
    /// order over sorted arcs.
    pub fn paths(&self) -> Vec<(Path, NodeId)> {
        let mut out = Vec::new();
        let mut stack = vec![(Path::root(), self.root)];
        while let Some((p, n)) = stack.pop() {
            if let Some(arcs) = self.node(n).arcs() {
                for (f, c) in arcs.iter().rev() {
                    stack.push((p.child(f), *c));
                }
            }
            out.push((p, n));
        }
        out
    }

    /// Number of arcs entering each node.
    pub(crate) fn in_degree(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.nodes.len()];
        for node in &self.nodes {
            if let Some(arcs) = node.arcs() {
                for c in arcs.values() {
                    counts[c.index()] += 1;
                }
            }
        }
        counts
    }

    /// True iff every piece of information in `self` is present in `other`:
    /// each atom at a path, each arc, and each path equality.
    pub fn subsumes(&self, other: &FeatureStructure) -> bool {
        let mut map: HashMap<NodeId, NodeId> = HashMap::new();
        let mut stack = vec![(self.root, other.root)];
        while let Some((a, b)) = stack.pop() {
            if let Some(prev) = map.get(&a) {
                if *prev != b {
                    return false;
                }
                continue;
            }
            map.insert(a, b);
            match (self.node(a), other.node(b)) {
                (Node::Atom(x), Node::Atom(y)) => {
                    if x != y {
                        return false;
                    }
                }
                (Node::Atom(_), Node::Complex(_)) => return false,
                (Node::Complex(arcs), Node::Atom(_)) => {
                    if !arcs.is_empty() {
                        return false;
                    }
                }
                (Node::Complex(xa), Node::Complex(ya)) => {
                    for (f, xc) in xa {
                        match ya.get(f) {
                            Some(yc) => stack.push((*xc, *yc)),
                            None => return false,
                        }
                    }
                }
            }
        }
        true
    }

    pub fn unify(&self, other: &FeatureStructure) -> Result<FeatureStructure, UnifyFailure> {
        unify::unify(self, other)
    }
}

impl fmt::Debug for FeatureStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

fn shift(node: &Node, by: u32) -> Node {
    match node {
        Node::Atom(a) => Node::Atom(a.clone()),
        Node::Complex(arcs) => Node::Complex(
            arcs.iter()
                .map(|(f, c)| (f.clone(), NodeId(c.0 + by)))
                .collect(),
        ),
    }
}

/// Renumbers the nodes reachable from `root` in preorder over sorted arcs,
/// rejecting cycles.
pub(crate) fn canonicalize(nodes: &[Node], root: usize) -> Result<FeatureStructure, FsError> {
    const WHITE: u8 = 0;
    const GRAY: u8 = 1;
    const BLACK: u8 = 2;
    if root >= nodes.len() {
        return Err(FsError::Dangling(root as u32));
    }
    let mut color = vec![WHITE; nodes.len()];
    let mut new_id = vec![u32::MAX; nodes.len()];
    let mut order: Vec<usize> = Vec::new();
    // (node, path to node, next-arc cursor)
    let mut stack: Vec<(usize, Path, usize)> = vec![(root, Path::root(), 0)];
    color[root] = GRAY;
    new_id[root] = 0;
    order.push(root);
    while let Some((n, path, cursor)) = stack.last_mut() {
        let n = *n;
        let next = match &nodes[n] {
            Node::Complex(arcs) => arcs
                .iter()
                .nth(*cursor)
                .map(|(f, c)| (f.clone(), c.index())),
            Node::Atom(_) => None,
        };
        match next {
            None => {
                color[n] = BLACK;
                stack.pop();
            }
            Some((feat, child)) => {
                *cursor += 1;
                if child >= nodes.len() {
                    return Err(FsError::Dangling(child as u32));
                }
                match color[child] {
                    GRAY => return Err(FsError::Cycle(path.child(&feat))),
                    BLACK => {}
                    _ => {
                        color[child] = GRAY;
                        new_id[child] = order.len() as u32;
                        order.push(child);
                        let child_path = path.child(&feat);
                        stack.push((child, child_path, 0));
                    }
                }
            }
        }
    }
    let out = order
        .iter()
        .map(|&old| match &nodes[old] {
            Node::Atom(a) => Node::Atom(a.clone()),
            Node::Complex(arcs) => Node::Complex(
                arcs.iter()
                    .map(|(f, c)| (f.clone(), NodeId(new_id[c.index()])))
                    .collect(),
            ),
        })
        .collect();
    Ok(FeatureStructure {
        nodes: out,
        root: NodeId(0),
    })
}

/// Mutable arena used to assemble structures before canonicalisation.
#[derive(Debug, Default)]
pub struct Builder {
    nodes: Vec<Node>,
}

impl Builder {
    /// A builder whose root (node 0) is `[]`.
    pub fn new() -> Self {
        Builder {
            nodes: vec![Node::Complex(BTreeMap::new())],
        }
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn fresh(&mut self) -> usize {
        self.nodes.push(Node::Complex(BTreeMap::new()));
        self.nodes.len() - 1
    }

    pub fn atom(&mut self, value: &str) -> usize {
        self.nodes.push(Node::Atom(Symbol::from(value)));
        self.nodes.len() - 1
    }

    /// Sets `node`'s content to an atom. Returns false if it already has arcs.
    pub fn set_atom(&mut self, node: usize, value: &str) -> bool {
        match &self.nodes[node] {
            Node::Complex(arcs) if !arcs.is_empty() => false,
            _ => {
                self.nodes[node] = Node::Atom(Symbol::from(value));
                true
            }
        }
    }

    /// Adds an arc. Returns false if `from` is atomic or already has a
    /// different target under `feature`.
    pub fn arc(&mut self, from: usize, feature: &str, to: usize) -> bool {
        match &mut self.nodes[from] {
            Node::Atom(_) => false,
            Node::Complex(arcs) => match arcs.get(feature) {
                Some(existing) => existing.index() == to,
                None => {
                    arcs.insert(Symbol::from(feature), NodeId(to as u32));
                    true
                }
            },
        }
    }

    /// Creates (or walks) the complex nodes along `path` from the root.
    /// Returns `None` when the path runs through an atom.
    pub fn ensure(&mut self, path: &[Symbol]) -> Option<usize> {
        let mut cur = 0usize;
        for feat in path {
            let next = match &self.nodes[cur] {
                Node::Atom(_) => return None,
                Node::Complex(arcs) => arcs.get(feat).map(|c| c.index()),
            };
            cur = match next {
                Some(n) => n,
                None => {
                    let n = self.fresh();
                    self.arc(cur, feat, n);
                    n
                }
            };
        }
        Some(cur)
    }

    /// Makes `path` lead to `target`.
    fn bind(&mut self, path: &Path, target: usize) -> bool {
        match path.features().split_last() {
            None => target == 0,
            Some((last, init)) => match self.ensure(init) {
                Some(parent) => self.arc(parent, last, target),
                None => false,
            },
        }
    }

    pub fn finish(self) -> Result<FeatureStructure, FsError> {
        canonicalize(&self.nodes, 0)
    }
}
