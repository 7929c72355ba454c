//! Feature structures as sets of path facts, unified by fixpoint closure.
//!
//! A structure is described by the paths it defines, the atom at each path
//! and which paths reach the same node. Unification takes the union of two
//! descriptions and closes it: equal paths get equal extensions and equal
//! atoms. No graph is ever built, so this shares nothing with the library's
//! union-find unifier.

use std::collections::{BTreeMap, BTreeSet};

use anyparse::fs::{Builder, FeatureStructure};
use rand::Rng;

pub type P = Vec<String>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Description {
    pub paths: BTreeSet<P>,
    pub atoms: BTreeMap<P, String>,
    /// Partition of `paths` into co-referring classes.
    pub classes: BTreeSet<BTreeSet<P>>,
    /// Node count of the source structure, to bound path length.
    pub size: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OracleFailure {
    Clash,
    Cycle,
}

pub fn describe(fs: &FeatureStructure) -> Description {
    let mut paths = BTreeSet::new();
    let mut atoms = BTreeMap::new();
    let mut by_node: BTreeMap<usize, BTreeSet<P>> = BTreeMap::new();
    for (path, node) in fs.paths() {
        let p: P = path.features().iter().map(|s| s.to_string()).collect();
        if let Some(a) = fs.node(node).atom() {
            atoms.insert(p.clone(), a.to_string());
        }
        by_node.entry(node.index()).or_default().insert(p.clone());
        paths.insert(p);
    }
    Description {
        paths,
        atoms,
        classes: by_node.into_values().collect(),
        size: fs.node_count(),
    }
}

struct Uf {
    parent: Vec<usize>,
}

impl Uf {
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut x = x;
        while self.parent[x] != r {
            let n = self.parent[x];
            self.parent[x] = r;
            x = n;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (a, b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        self.parent[a.max(b)] = a.min(b);
        true
    }
}

pub fn oracle_unify(a: &Description, b: &Description) -> Result<Description, OracleFailure> {
    // An acyclic result has at most |a| + |b| nodes, so no simple path in it
    // is that long.
    let bound = a.size + b.size;
    let mut index: BTreeMap<P, usize> = BTreeMap::new();
    let mut paths: Vec<P> = Vec::new();
    let mut uf = Uf { parent: Vec::new() };
    let intern =
        |p: &P, index: &mut BTreeMap<P, usize>, paths: &mut Vec<P>, uf: &mut Uf| -> usize {
            if let Some(&i) = index.get(p) {
                return i;
            }
            let i = paths.len();
            index.insert(p.clone(), i);
            paths.push(p.clone());
            uf.parent.push(i);
            i
        };
    for d in [a, b] {
        for p in &d.paths {
            intern(p, &mut index, &mut paths, &mut uf);
        }
        for class in &d.classes {
            let mut it = class.iter();
            if let Some(first) = it.next() {
                let f = index[first];
                for other in it {
                    uf.union(f, index[other]);
                }
            }
        }
    }
    loop {
        let mut changed = false;
        // Group members by class, then give every member every extension
        // seen on any member.
        let n = paths.len();
        let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..n {
            members.entry(uf.find(i)).or_default().push(i);
        }
        for group in members.values() {
            let mut ext: BTreeMap<String, Vec<usize>> = BTreeMap::new();
            for &i in group {
                let p = paths[i].clone();
                for (j, q) in paths.iter().enumerate().take(n) {
                    if q.len() == p.len() + 1 && q.starts_with(&p) {
                        ext.entry(q[p.len()].clone()).or_default().push(j);
                    }
                }
            }
            for (feat, targets) in ext {
                for &i in group {
                    let mut q = paths[i].clone();
                    q.push(feat.clone());
                    if q.len() >= bound {
                        return Err(OracleFailure::Cycle);
                    }
                    let before = paths.len();
                    let j = intern(&q, &mut index, &mut paths, &mut uf);
                    changed |= paths.len() != before;
                    changed |= uf.union(j, targets[0]);
                }
                for w in targets.windows(2) {
                    changed |= uf.union(w[0], w[1]);
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut class_atom: BTreeMap<usize, String> = BTreeMap::new();
    for d in [a, b] {
        for (p, v) in &d.atoms {
            let c = uf.find(index[p]);
            match class_atom.get(&c) {
                Some(w) if w != v => return Err(OracleFailure::Clash),
                _ => {
                    class_atom.insert(c, v.clone());
                }
            }
        }
    }
    let set: BTreeSet<P> = paths.iter().cloned().collect();
    let mut atoms = BTreeMap::new();
    let mut classes: BTreeMap<usize, BTreeSet<P>> = BTreeMap::new();
    for (i, p) in paths.iter().enumerate() {
        let c = uf.find(i);
        if let Some(v) = class_atom.get(&c) {
            let has_ext = set.iter().any(|q| q.len() > p.len() && q.starts_with(p));
            if has_ext {
                return Err(OracleFailure::Clash);
            }
            atoms.insert(p.clone(), v.clone());
        }
        classes.entry(c).or_default().insert(p.clone());
    }
    Ok(Description {
        paths: set,
        atoms,
        classes: classes.into_values().collect(),
        size: a.size + b.size,
    })
}

/// Information containment: paths, atoms and path equalities of `a` all
/// hold in `b`.
pub fn oracle_subsumes(a: &Description, b: &Description) -> bool {
    if !a.paths.is_subset(&b.paths) {
        return false;
    }
    if a.atoms.iter().any(|(p, v)| b.atoms.get(p) != Some(v)) {
        return false;
    }
    // Paths equal in `a` must be equal in `b`.
    let class_of = |d: &Description, p: &P| d.classes.iter().position(|c| c.contains(p));
    for class in &a.classes {
        let mut it = class.iter();
        if let Some(first) = it.next() {
            let target = class_of(b, first);
            if it.any(|p| class_of(b, p) != target) {
                return false;
            }
        }
    }
    true
}

/// Same information up to renaming of nodes.
pub fn same_description(a: &Description, b: &Description) -> bool {
    a.paths == b.paths && a.atoms == b.atoms && a.classes == b.classes
}

pub const FEATURES: [&str; 4] = ["f", "g", "h", "k"];
pub const ATOMS: [&str; 3] = ["x", "y", "z"];

/// A random acyclic structure with at most six nodes. Arcs only point to
/// later nodes, and several arcs may share a target.
pub fn random_fs(rng: &mut impl Rng) -> FeatureStructure {
    let n = rng.gen_range(1..=6);
    let mut b = Builder::new();
    let mut ids = vec![b.root()];
    let mut atomic = vec![false];
    for _ in 1..n {
        if rng.gen_bool(0.35) {
            ids.push(b.atom(ATOMS[rng.gen_range(0..ATOMS.len())]));
            atomic.push(true);
        } else {
            ids.push(b.fresh());
            atomic.push(false);
        }
    }
    for i in 0..n {
        if atomic[i] || i + 1 == n {
            continue;
        }
        for f in FEATURES {
            if rng.gen_bool(0.4) {
                let t = rng.gen_range(i + 1..n);
                b.arc(ids[i], f, ids[t]);
            }
        }
    }
    b.finish().expect("forward arcs are acyclic")
}

#[cfg(test)]
mod tests {
    use super::*;
    use anyparse::fs::parse_fs;

    fn d(s: &str) -> Description {
        describe(&parse_fs(s).unwrap())
    }

    #[test]
    fn oracle_reproduces_coreference_example() {
        let r = oracle_unify(&d("[subj: #1[num: sg], agr: #1]"), &d("[agr: [pers: 3rd]]")).unwrap();
        assert!(same_description(
            &r,
            &d("[subj: #1[num: sg, pers: 3rd], agr: #1]")
        ));
    }

    #[test]
    fn oracle_detects_clash_and_cycle() {
        assert_eq!(
            oracle_unify(&d("[num: sg]"), &d("[num: pl]")),
            Err(OracleFailure::Clash)
        );
        assert_eq!(
            oracle_unify(&d("[a: x]"), &d("[a: [b: y]]")),
            Err(OracleFailure::Clash)
        );
        assert_eq!(
            oracle_unify(&d("[a: #1[], b: #1]"), &d("[a: [c: #2[]], b: #2]")),
            Err(OracleFailure::Cycle)
        );
    }

    #[test]
    fn oracle_subsumption_examples() {
        assert!(oracle_subsumes(&d("[]"), &d("[a: [b: x]]")));
        assert!(oracle_subsumes(&d("[num: sg]"), &d("[num: sg, pers: 3rd]")));
        assert!(!oracle_subsumes(
            &d("[num: sg, pers: 3rd]"),
            &d("[num: sg]")
        ));
        assert!(!oracle_subsumes(
            &d("[a: #1[], b: #1]"),
            &d("[a: [f: v], b: [f: v]]")
        ));
    }

    #[test]
    fn generator_respects_size_bound() {
        let mut rng = rand::thread_rng();
        for _ in 0..200 {
            assert!(random_fs(&mut rng).node_count() <= 6);
        }
    }
}
