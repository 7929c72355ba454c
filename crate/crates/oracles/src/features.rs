//! Toy feature grammars and an eager, exhaustive enumerator of their
//! analyses.
//!
//! The enumerator builds every derivation top-down over every split of the
//! input and only then unifies all of its constraints at once. There is no
//! chart, no agenda and no incremental constraint application.

use std::collections::HashMap;
use std::fmt::Write as _;

use anyparse::fs::{FeatureStructure, Path};
use anyparse::grammar::{initial_layout, Equation, Grammar, HEAD};
use anyparse::lattice::WordHypothesis;
use rand::Rng;

use crate::cfg::{all_inputs, Cfg, WORDS};

const CATS: [&str; 3] = ["S", "A", "B"];
const FEATS: [&str; 2] = ["f", "g"];
const VALUES: [&str; 2] = ["x", "y"];

/// Grammar and lexicon text for a small random feature grammar. Loading may
/// still fail (unary cycles, cyclic equations); [`random_grammar`] retries.
pub fn random_sources(rng: &mut impl Rng) -> (String, String) {
    let mut grammar = String::new();
    for _ in 0..rng.gen_range(2..=6) {
        let lhs = CATS[rng.gen_range(0..3)];
        let n = rng.gen_range(1..=3);
        let rhs: Vec<&str> = (0..n).map(|_| CATS[rng.gen_range(0..3)]).collect();
        let _ = writeln!(grammar, "Rule {lhs} -> {}", rhs.join(" "));
        for _ in 0..rng.gen_range(0..=3) {
            let _ = writeln!(grammar, "  {}", random_equation(rng, n));
        }
    }
    let mut lexicon = String::new();
    for w in ["a", "b"] {
        for _ in 0..rng.gen_range(1..=2) {
            let _ = writeln!(lexicon, "Lex {w} {}", CATS[rng.gen_range(0..3)]);
            for _ in 0..rng.gen_range(0..=2) {
                let _ = writeln!(lexicon, "  {}", random_equation(rng, 0));
            }
        }
    }
    (grammar, lexicon)
}

fn random_equation(rng: &mut impl Rng, arity: usize) -> String {
    let lhs = format!(
        "<{} {}>",
        rng.gen_range(0..=arity),
        FEATS[rng.gen_range(0..2)]
    );
    let roll = rng.gen_range(0..10);
    if roll < 4 && arity > 0 {
        let rhs = format!(
            "<{} {}>",
            rng.gen_range(0..=arity),
            FEATS[rng.gen_range(0..2)]
        );
        if rng.gen_bool(0.2) {
            format!("{lhs} = {rhs} !final")
        } else {
            format!("{lhs} = {rhs}")
        }
    } else if roll < 6 {
        format!("{lhs} = x | y")
    } else {
        let v = VALUES[rng.gen_range(0..2)];
        if rng.gen_bool(0.2) {
            format!("{lhs} = {v} !final")
        } else {
            format!("{lhs} = {v}")
        }
    }
}

/// A random grammar that loads, with its sources.
pub fn random_grammar(rng: &mut impl Rng) -> (Grammar, String, String) {
    loop {
        let (g, l) = random_sources(rng);
        if let Ok(grammar) = Grammar::from_sources(&g, &l) {
            return (grammar, g, l);
        }
    }
}

/// A random grammar whose backbone has at most `cap` derivations, over
/// all spans, of any input up to `len` words.
pub fn tame_grammar(rng: &mut impl Rng, len: usize, cap: u128) -> Grammar {
    loop {
        let (g, _, _) = random_grammar(rng);
        let backbone = skeleton(&g);
        let worst = all_inputs(&WORDS, len)
            .iter()
            .map(|w| backbone.total_derivations(w))
            .max()
            .unwrap_or(0);
        if worst <= cap {
            return g;
        }
    }
}

/// The context-free backbone of `grammar`, one lexical pair per reading,
/// for bounding how ambiguous it is.
pub fn skeleton(grammar: &Grammar) -> Cfg {
    Cfg {
        rules: grammar
            .rules()
            .iter()
            .map(|r| {
                let rhs = r.rule.rhs.iter().map(|c| c.to_string()).collect();
                (r.rule.lhs.to_string(), rhs)
            })
            .collect(),
        lexicon: grammar
            .lexicon()
            .iter()
            .flat_map(|l| {
                let pair = (l.entry.word.to_string(), l.entry.category.to_string());
                std::iter::repeat_n(pair, l.variants.len())
            })
            .collect(),
    }
}

/// A derivation that has not been checked yet: its bracketing, score, and
/// the constraints it carries over the edge layout.
#[derive(Clone)]
struct Item {
    derivation: String,
    score: f64,
    now: Vec<FeatureStructure>,
    deferred: Vec<FeatureStructure>,
}

/// Every alternative combination of the non-deferred equations, plus the
/// deferred ones. `None` when an equation does not compile.
fn equation_choices(
    equations: &[Equation],
) -> Option<(Vec<Vec<FeatureStructure>>, Vec<FeatureStructure>)> {
    let mut combos: Vec<Vec<FeatureStructure>> = vec![Vec::new()];
    let mut deferred = Vec::new();
    for eq in equations {
        let alts = eq.compile().ok()?;
        if eq.final_only {
            deferred.extend(alts);
            continue;
        }
        let mut next = Vec::new();
        for c in &combos {
            for a in &alts {
                let mut c = c.clone();
                c.push(a.clone());
                next.push(c);
            }
        }
        combos = next;
    }
    Some((combos, deferred))
}

fn unify_all(parts: &[FeatureStructure]) -> Option<FeatureStructure> {
    let mut fs = initial_layout();
    for p in parts {
        fs = fs.unify(p).ok()?;
    }
    Some(fs)
}

struct Enumerator<'a> {
    grammar: &'a Grammar,
    hyps: &'a [WordHypothesis],
    memo: HashMap<(String, u32, u32), Vec<Item>>,
}

impl Enumerator<'_> {
    fn items(&mut self, cat: &str, i: u32, j: u32) -> Vec<Item> {
        let key = (cat.to_string(), i, j);
        if let Some(v) = self.memo.get(&key) {
            return v.clone();
        }
        let mut out = Vec::new();
        for h in self.hyps.iter().filter(|h| h.start == i && h.end == j) {
            for &id in self.grammar.entries_for(&h.word) {
                let entry = &self.grammar.lex(id).entry;
                if &*entry.category != cat {
                    continue;
                }
                let Some((combos, deferred)) = equation_choices(&entry.equations) else {
                    continue;
                };
                for now in combos {
                    // A reading whose own constraints clash never exists.
                    if unify_all(&now).is_none() {
                        continue;
                    }
                    out.push(Item {
                        derivation: format!("({cat} {})", h.word),
                        score: h.score,
                        now,
                        deferred: deferred.clone(),
                    });
                }
            }
        }
        for (ri, compiled) in self.grammar.rules().iter().enumerate() {
            let rule = &compiled.rule;
            if &*rule.lhs != cat {
                continue;
            }
            let Some((combos, deferred)) = equation_choices(&rule.equations) else {
                continue;
            };
            let rhs: Vec<String> = rule.rhs.iter().map(|c| c.to_string()).collect();
            for children in self.sequences(&rhs, i, j) {
                let mut now_base = Vec::new();
                let mut deferred_all = deferred.clone();
                let mut derivation = format!("({cat}:r{ri}");
                let mut score = 1.0;
                for (k, child) in children.iter().enumerate() {
                    let prefix = Path::new([(k + 1).to_string()]);
                    let Some(child_fs) = unify_all(&child.now) else {
                        unreachable!("children are consistent");
                    };
                    now_base.push(child_fs.embed(&prefix));
                    deferred_all.extend(child.deferred.iter().map(|d| d.embed(&prefix)));
                    derivation.push(' ');
                    derivation.push_str(&child.derivation);
                    score *= child.score;
                }
                derivation.push(')');
                for combo in &combos {
                    let mut now = now_base.clone();
                    now.extend(combo.iter().cloned());
                    if unify_all(&now).is_none() {
                        continue;
                    }
                    out.push(Item {
                        derivation: derivation.clone(),
                        score,
                        now,
                        deferred: deferred_all.clone(),
                    });
                }
            }
        }
        self.memo.insert(key, out.clone());
        out
    }

    /// Every way to derive `cats` in order over `i..j`, one item per
    /// constituent.
    fn sequences(&mut self, cats: &[String], i: u32, j: u32) -> Vec<Vec<Item>> {
        match cats {
            [] => {
                if i == j {
                    vec![Vec::new()]
                } else {
                    Vec::new()
                }
            }
            [first, rest @ ..] => {
                let mut out = Vec::new();
                // Every later constituent needs at least one vertex.
                let last = j.saturating_sub(rest.len() as u32);
                for m in i + 1..=last {
                    let heads = self.items(first, i, m);
                    if heads.is_empty() {
                        continue;
                    }
                    let tails = self.sequences(rest, m, j);
                    for h in &heads {
                        for t in &tails {
                            let mut v = vec![h.clone()];
                            v.extend(t.iter().cloned());
                            out.push(v);
                        }
                    }
                }
                out
            }
        }
    }
}

/// Complete analyses of `start` over the whole lattice as `(score,
/// derivation, head structure)`, deferred constraints applied.
pub fn eager_forest(
    grammar: &Grammar,
    hyps: &[WordHypothesis],
    start: &str,
) -> Vec<(f64, String, String)> {
    let end = hyps.iter().map(|h| h.end).max().unwrap_or(0);
    if end == 0 {
        return Vec::new();
    }
    let mut en = Enumerator {
        grammar,
        hyps,
        memo: HashMap::new(),
    };
    let mut out = Vec::new();
    for item in en.items(start, 0, end) {
        let mut all = item.now.clone();
        all.extend(item.deferred.iter().cloned());
        if let Some(fs) = unify_all(&all) {
            let head = fs
                .at(&Path::new([HEAD]))
                .unwrap_or_else(FeatureStructure::empty);
            out.push((item.score, item.derivation, head.to_string()));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use anyparse::lattice::from_words;

    #[test]
    fn agreement_filters_derivations() {
        let g = Grammar::from_sources(
            "Rule S -> A B\n  <1 f> = <2 f>\n  <0 f> = <1 f>\n",
            "Lex a A\n  <0 f> = x | y\nLex b B\n  <0 f> = y\n",
        )
        .unwrap();
        let forest = eager_forest(&g, &from_words(&["a", "b"]), "S");
        assert_eq!(forest.len(), 1);
        assert_eq!(forest[0].1, "(S:r0 (A a) (B b))");
        assert_eq!(forest[0].2, "[f: y]");
    }

    #[test]
    fn deferred_constraints_apply_at_the_top() {
        let g = Grammar::from_sources(
            "Rule S -> A\n  <1 g> = x !final\n",
            "Lex a A\n  <0 f> = x\nLex b A\n  <0 g> = y\n",
        )
        .unwrap();
        assert_eq!(eager_forest(&g, &from_words(&["a"]), "S").len(), 1);
        assert!(eager_forest(&g, &from_words(&["b"]), "S").is_empty());
    }

    #[test]
    fn generated_grammars_load() {
        let mut rng = rand::thread_rng();
        for _ in 0..20 {
            let (g, _, _) = random_grammar(&mut rng);
            assert!(!g.rules().is_empty());
        }
    }
}
