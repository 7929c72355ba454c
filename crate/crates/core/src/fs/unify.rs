use std::collections::{BTreeMap, HashSet, VecDeque};
use std::fmt;

use thiserror::Error;

use super::{FeatureStructure, FsError, Node, NodeId, Path, Symbol};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ClashReason {
    /// Two distinct atoms met at the same node.
    AtomMismatch(Symbol, Symbol),
    /// An atom met a complex node that has arcs.
    AtomVsComplex(Symbol),
    /// Coreferences closed a loop.
    Cycle,
}

impl fmt::Display for ClashReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClashReason::AtomMismatch(a, b) => write!(f, "{a} vs {b}"),
            ClashReason::AtomVsComplex(a) => write!(f, "atom {a} vs complex"),
            ClashReason::Cycle => f.write_str("cyclic result"),
        }
    }
}

/// Unification failure. `path` is the shortest clashing path, and among
/// those of equal length the lexicographically smallest.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("unification failed at {path}: {reason}")]
pub struct UnifyFailure {
    pub path: Path,
    pub reason: ClashReason,
}

/// Alternatives offered by one grammar constraint, tried one per transaction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Disjunction {
    pub alternatives: Vec<FeatureStructure>,
    pub origin: String,
}

impl Disjunction {
    /// `alternatives` must be non-empty.
    pub fn new(alternatives: Vec<FeatureStructure>, origin: impl Into<String>) -> Option<Self> {
        if alternatives.is_empty() {
            return None;
        }
        Some(Disjunction {
            alternatives,
            origin: origin.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.alternatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alternatives.is_empty()
    }
}

/// Unifies `fs` with a single alternative of `d`.
///
/// Panics if `index` is out of range.
pub fn unify_one_disjunct(
    fs: &FeatureStructure,
    d: &Disjunction,
    index: usize,
) -> Result<FeatureStructure, UnifyFailure> {
    fs.unify(&d.alternatives[index])
}

#[derive(Default)]
struct Class {
    atom: Option<Symbol>,
    arcs: BTreeMap<Symbol, usize>,
    clash: Option<ClashReason>,
}

struct Work {
    parent: Vec<usize>,
    class: Vec<Class>,
}

impl Work {
    fn find(&mut self, mut x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[x] != root {
            let next = self.parent[x];
            self.parent[x] = root;
            x = next;
        }
        root
    }

    fn load(&mut self, fs: &FeatureStructure) -> usize {
        let offset = self.parent.len();
        for (i, node) in fs.nodes.iter().enumerate() {
            self.parent.push(offset + i);
            let class = match node {
                Node::Atom(a) => Class {
                    atom: Some(a.clone()),
                    ..Class::default()
                },
                Node::Complex(arcs) => Class {
                    arcs: arcs
                        .iter()
                        .map(|(f, c)| (f.clone(), c.index() + offset))
                        .collect(),
                    ..Class::default()
                },
            };
            self.class.push(class);
        }
        offset + fs.root.index()
    }

    /// Merges the classes of `x` and `y`, queueing pairs for shared features.
    fn merge(&mut self, x: usize, y: usize, queue: &mut VecDeque<(usize, usize)>) {
        let rx = self.find(x);
        let ry = self.find(y);
        if rx == ry {
            return;
        }
        let absorbed = std::mem::take(&mut self.class[ry]);
        self.parent[ry] = rx;
        let target = &mut self.class[rx];
        if target.clash.is_none() {
            target.clash = absorbed.clash;
        }
        match (&target.atom, absorbed.atom) {
            (Some(a), Some(b)) if *a != b => {
                if target.clash.is_none() {
                    target.clash = Some(ClashReason::AtomMismatch(a.clone(), b));
                }
            }
            (None, Some(b)) => target.atom = Some(b),
            _ => {}
        }
        for (f, child) in absorbed.arcs {
            match target.arcs.get(&f) {
                Some(&existing) => queue.push_back((existing, child)),
                None => {
                    target.arcs.insert(f, child);
                }
            }
        }
        if target.clash.is_none() && !target.arcs.is_empty() {
            if let Some(a) = &target.atom {
                target.clash = Some(ClashReason::AtomVsComplex(a.clone()));
            }
        }
    }

    /// Breadth-first walk over the merged graph with sorted arcs; the first
    /// clashing class reached gives the leftmost-shortest path.
    fn first_clash(&mut self, root: usize) -> Option<UnifyFailure> {
        let root = self.find(root);
        let mut seen = HashSet::new();
        seen.insert(root);
        let mut queue = VecDeque::from([(root, Path::root())]);
        while let Some((n, path)) = queue.pop_front() {
            if let Some(reason) = &self.class[n].clash {
                return Some(UnifyFailure {
                    path,
                    reason: reason.clone(),
                });
            }
            let arcs: Vec<(Symbol, usize)> = self.class[n]
                .arcs
                .iter()
                .map(|(f, c)| (f.clone(), *c))
                .collect();
            for (f, c) in arcs {
                let c = self.find(c);
                if seen.insert(c) {
                    queue.push_back((c, path.child(&f)));
                }
            }
        }
        None
    }

    fn extract(&mut self, root: usize) -> Result<FeatureStructure, UnifyFailure> {
        let root = self.find(root);
        // Compact arena over class representatives.
        let mut index = vec![usize::MAX; self.parent.len()];
        let mut nodes = Vec::new();
        let mut stack = vec![root];
        index[root] = 0;
        nodes.push(Node::Complex(BTreeMap::new()));
        while let Some(n) = stack.pop() {
            let me = index[n];
            if let Some(a) = &self.class[n].atom {
                nodes[me] = Node::Atom(a.clone());
                continue;
            }
            let arcs: Vec<(Symbol, usize)> = self.class[n]
                .arcs
                .iter()
                .map(|(f, c)| (f.clone(), *c))
                .collect();
            let mut out = BTreeMap::new();
            for (f, c) in arcs {
                let c = self.find(c);
                if index[c] == usize::MAX {
                    index[c] = nodes.len();
                    nodes.push(Node::Complex(BTreeMap::new()));
                    stack.push(c);
                }
                out.insert(f, NodeId(index[c] as u32));
            }
            nodes[me] = Node::Complex(out);
        }
        super::canonicalize(&nodes, 0).map_err(|e| match e {
            FsError::Cycle(path) => UnifyFailure {
                path,
                reason: ClashReason::Cycle,
            },
            FsError::Dangling(_) => unreachable!("extracted arena is closed"),
        })
    }
}

pub(super) fn unify(
    a: &FeatureStructure,
    b: &FeatureStructure,
) -> Result<FeatureStructure, UnifyFailure> {
    let mut work = Work {
        parent: Vec::with_capacity(a.nodes.len() + b.nodes.len()),
        class: Vec::with_capacity(a.nodes.len() + b.nodes.len()),
    };
    let ra = work.load(a);
    let rb = work.load(b);
    let mut queue = VecDeque::from([(ra, rb)]);
    while let Some((x, y)) = queue.pop_front() {
        work.merge(x, y, &mut queue);
    }
    if let Some(failure) = work.first_clash(ra) {
        return Err(failure);
    }
    work.extract(ra)
}
