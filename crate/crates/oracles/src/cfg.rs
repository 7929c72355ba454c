//! Context-free skeletons and exhaustive derivation counting.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use rand::Rng;

pub const NONTERMINALS: [&str; 3] = ["S", "A", "B"];
pub const WORDS: [&str; 2] = ["a", "b"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cfg {
    pub rules: Vec<(String, Vec<String>)>,
    /// (word, category) pairs; a word may have several.
    pub lexicon: Vec<(String, String)>,
}

impl Cfg {
    pub fn grammar_text(&self) -> String {
        let mut out = String::new();
        for (lhs, rhs) in &self.rules {
            let _ = writeln!(out, "Rule {lhs} -> {}", rhs.join(" "));
        }
        out
    }

    pub fn lexicon_text(&self) -> String {
        let mut out = String::new();
        for (w, c) in &self.lexicon {
            let _ = writeln!(out, "Lex {w} {c}");
        }
        out
    }

    fn has_unary_cycle(&self) -> bool {
        let mut edges: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for (lhs, rhs) in &self.rules {
            if rhs.len() == 1 {
                edges.entry(lhs).or_default().insert(&rhs[0]);
            }
        }
        // Transitive closure over three symbols.
        let mut reach = edges.clone();
        for _ in 0..NONTERMINALS.len() {
            let snapshot = reach.clone();
            for (from, tos) in reach.iter_mut() {
                for t in snapshot.get(from).into_iter().flatten() {
                    if let Some(next) = snapshot.get(t) {
                        tos.extend(next.iter().copied());
                    }
                }
            }
        }
        reach.iter().any(|(from, tos)| tos.contains(from))
    }

    /// Every category used on a right-hand side has a rule or word.
    fn all_categories_produced(&self) -> bool {
        let produced: BTreeSet<&str> = self
            .rules
            .iter()
            .map(|(l, _)| l.as_str())
            .chain(self.lexicon.iter().map(|(_, c)| c.as_str()))
            .collect();
        self.rules
            .iter()
            .flat_map(|(_, rhs)| rhs.iter())
            .all(|c| produced.contains(c.as_str()))
    }

    /// Number of distinct derivations of `cat` over all of `words`.
    pub fn count(&self, cat: &str, words: &[&str]) -> u128 {
        let mut memo = HashMap::new();
        self.count_span(cat, words, 0, words.len(), &mut memo)
    }

    fn count_span(
        &self,
        cat: &str,
        words: &[&str],
        i: usize,
        j: usize,
        memo: &mut HashMap<(String, usize, usize), u128>,
    ) -> u128 {
        if let Some(&n) = memo.get(&(cat.to_string(), i, j)) {
            return n;
        }
        let mut total = 0u128;
        if j == i + 1 {
            total += self
                .lexicon
                .iter()
                .filter(|(w, c)| w == words[i] && c == cat)
                .count() as u128;
        }
        for (lhs, rhs) in &self.rules {
            if lhs == cat {
                total += self.count_seq(rhs, words, i, j, memo);
            }
        }
        memo.insert((cat.to_string(), i, j), total);
        total
    }

    /// Ways to split `i..j` into non-empty parts derived by `seq`.
    fn count_seq(
        &self,
        seq: &[String],
        words: &[&str],
        i: usize,
        j: usize,
        memo: &mut HashMap<(String, usize, usize), u128>,
    ) -> u128 {
        match seq {
            [] => u128::from(i == j),
            [only] => {
                if i < j {
                    self.count_span(only, words, i, j, memo)
                } else {
                    0
                }
            }
            [first, rest @ ..] => {
                let mut total = 0;
                for m in i + 1..=j.saturating_sub(rest.len()) {
                    let left = self.count_span(first, words, i, m, memo);
                    if left > 0 {
                        total += left * self.count_seq(rest, words, m, j, memo);
                    }
                }
                total
            }
        }
    }

    /// Derivations of every category over every span of `words`: a proxy
    /// for how many edges a non-packing chart will hold.
    pub fn total_derivations(&self, words: &[&str]) -> u128 {
        let mut memo = HashMap::new();
        let mut total = 0;
        for i in 0..words.len() {
            for j in i + 1..=words.len() {
                for c in NONTERMINALS {
                    total += self.count_span(c, words, i, j, &mut memo);
                }
            }
        }
        total
    }
}

/// A random skeleton grammar over [`NONTERMINALS`] and [`WORDS`] without
/// unary cycles.
pub fn random_cfg(rng: &mut impl Rng) -> Cfg {
    loop {
        let n_rules = rng.gen_range(2..=6);
        let mut rules = Vec::new();
        for _ in 0..n_rules {
            let lhs = NONTERMINALS[rng.gen_range(0..3)].to_string();
            let len = rng.gen_range(1..=3);
            let rhs = (0..len)
                .map(|_| NONTERMINALS[rng.gen_range(0..3)].to_string())
                .collect();
            rules.push((lhs, rhs));
        }
        rules.sort();
        rules.dedup();
        let mut lexicon = Vec::new();
        for w in WORDS {
            let k = rng.gen_range(1..=2);
            for _ in 0..k {
                lexicon.push((w.to_string(), NONTERMINALS[rng.gen_range(0..3)].to_string()));
            }
        }
        lexicon.sort();
        lexicon.dedup();
        let g = Cfg { rules, lexicon };
        if !g.has_unary_cycle() && g.all_categories_produced() {
            return g;
        }
    }
}

/// Every string over `alphabet` with length in `1..=max_len`.
pub fn all_inputs<'a>(alphabet: &[&'a str], max_len: usize) -> Vec<Vec<&'a str>> {
    let mut out = Vec::new();
    let mut layer: Vec<Vec<&str>> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for prefix in &layer {
            for &w in alphabet {
                let mut s = prefix.clone();
                s.push(w);
                next.push(s);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}
