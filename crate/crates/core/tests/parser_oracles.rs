use std::sync::Arc;

use anyparse::anytime::forest_dump;
use anyparse::chart::{ChartParser, Edge, EdgeId, EdgeOrigin, StepResult};
use anyparse::fs::FeatureStructure;
use anyparse::grammar::{Grammar, Term};
use anyparse::lattice::{from_words, WordHypothesis};
use anyparse_oracles::cfg::{all_inputs, random_cfg, Cfg, WORDS};
use anyparse_oracles::features::{eager_forest, tame_grammar};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn parse(grammar: &Arc<Grammar>, hyps: Vec<WordHypothesis>) -> ChartParser {
    let mut p = ChartParser::new(Arc::clone(grammar));
    for h in hyps {
        p.feed(h).unwrap();
    }
    p.end_input();
    p.run_to_quiescence();
    p
}

/// A grammar whose worst input of length `len` stays under `cap` derivations.
fn tame_cfg(rng: &mut ChaCha8Rng, len: usize, cap: u128) -> Cfg {
    loop {
        let g = random_cfg(rng);
        let worst = all_inputs(&WORDS, len)
            .iter()
            .map(|w| g.total_derivations(w))
            .max()
            .unwrap_or(0);
        if worst <= cap {
            return g;
        }
    }
}

#[test]
fn context_free_counts_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..15 {
        let cfg = tame_cfg(&mut rng, 6, 2_000);
        let grammar =
            Arc::new(Grammar::from_sources(&cfg.grammar_text(), &cfg.lexicon_text()).unwrap());
        for words in all_inputs(&WORDS, 6) {
            let p = parse(&grammar, from_words(&words));
            let got = p.forest("S").len() as u128;
            assert_eq!(got, cfg.count("S", &words), "{cfg:?} on {words:?}");
        }
    }
}

fn sorted(mut rows: Vec<(f64, String, String)>) -> Vec<(f64, String, String)> {
    rows.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| a.1.cmp(&b.1))
            .then_with(|| a.2.cmp(&b.2))
    });
    rows
}

fn chart_forest(p: &ChartParser) -> Vec<(f64, String, String)> {
    p.forest("S")
        .into_iter()
        .map(|e| (e.score, p.derivation(e.id), p.head_fs(e.id).to_string()))
        .collect()
}

#[test]
fn feature_forests_match_eager_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut nonempty = 0;
    for _ in 0..10 {
        let grammar = Arc::new(tame_grammar(&mut rng, 5, 500));
        for words in all_inputs(&WORDS, 5) {
            let hyps = from_words(&words);
            let p = parse(&grammar, hyps.clone());
            let got = sorted(chart_forest(&p));
            let want = sorted(eager_forest(&grammar, &hyps, "S"));
            nonempty += usize::from(!want.is_empty());
            assert_eq!(got, want, "{words:?}");
        }
    }
    assert!(nonempty > 0, "generator never produced a parsable input");
}

#[test]
fn competing_hypotheses_match_eager_enumeration() {
    let grammar = Arc::new(
        Grammar::from_sources(
            "Rule S -> A B\n  <1 f> = <2 f>\nRule S -> A\n",
            "Lex a A\n  <0 f> = x | y\nLex b B\n  <0 f> = y\nLex ab A\n  <0 f> = x\n",
        )
        .unwrap(),
    );
    let hyps = vec![
        WordHypothesis::new("a", 0, 1, 0.9).unwrap(),
        WordHypothesis::new("b", 1, 2, 0.5).unwrap(),
        WordHypothesis::new("ab", 0, 2, 0.7).unwrap(),
    ];
    let p = parse(&grammar, hyps.clone());
    let got = sorted(chart_forest(&p));
    assert_eq!(got, sorted(eager_forest(&grammar, &hyps, "S")));
    assert_eq!(got.len(), 2);
    assert_eq!(got[0].0, 0.7);
}

/// Every non-deferred equation of the edge's origin has an alternative the
/// edge already entails, and every child's constituent structure sits
/// unchanged under its position.
fn edge_satisfies_constraints(p: &ChartParser, e: &Edge) -> bool {
    let entails = |c: &FeatureStructure| e.fs.unify(c).map(|r| r == *e.fs).unwrap_or(false);
    let equations = match e.origin {
        EdgeOrigin::Rule(r) => &p.grammar().rule(r).rule.equations,
        EdgeOrigin::Lexical { entry, .. } => &p.grammar().lex(entry).entry.equations,
    };
    for eq in equations.iter().filter(|eq| !eq.final_only) {
        if !e.is_lexical() && eq.max_constituent().max(1) > e.dot {
            continue;
        }
        let alts = eq.compile().unwrap();
        if !alts.iter().any(entails) {
            return false;
        }
    }
    e.children.iter().enumerate().all(|(k, &c)| {
        let child = p.chart().edge(c);
        entails(&child.constituent_fs(k + 1))
    })
}

#[test]
fn every_edge_is_justified_by_its_constraints() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let g = Arc::new(tame_grammar(&mut rng, 4, 500));
        for words in all_inputs(&WORDS, 4) {
            let p = parse(&g, from_words(&words));
            for e in p.chart().edges() {
                assert!(edge_satisfies_constraints(&p, e), "edge {:?}", e.id);
            }
        }
    }
}

#[test]
fn equations_reference_only_known_terms() {
    // The replay check above relies on compile() being total for loaded
    // grammars.
    let g = Grammar::from_sources("Rule S -> A\n  <0 f> = <1 f> | x\n", "Lex a A\n").unwrap();
    let eq = &g.rules()[0].rule.equations[0];
    assert!(matches!(eq.alternatives[0], Term::Path(_)));
    assert_eq!(eq.compile().unwrap().len(), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn identical_runs_build_identical_charts(seed in any::<u64>(), len in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Arc::new(tame_grammar(&mut rng, 5, 500));
        let words: Vec<&str> = (0..len).map(|i| WORDS[(seed as usize >> i) & 1]).collect();
        let a = parse(&g, from_words(&words));
        let b = parse(&g, from_words(&words));
        prop_assert_eq!(a.chart().len(), b.chart().len());
        for (x, y) in a.chart().edges().iter().zip(b.chart().edges()) {
            prop_assert_eq!(x.id, y.id);
            prop_assert_eq!((x.from, x.to, x.dot), (y.from, y.to, y.dot));
            prop_assert_eq!(&x.origin, &y.origin);
            prop_assert_eq!(&x.children, &y.children);
            prop_assert_eq!(&x.fs, &y.fs);
        }
        prop_assert_eq!(forest_dump(&a, "S"), forest_dump(&b, "S"));
    }

    #[test]
    fn gating_bounds_unifications(seed in any::<u64>(), len in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = tame_grammar(&mut rng, 5, 500);
        let words: Vec<&str> = (0..len).map(|i| WORDS[(seed as usize >> i) & 1]).collect();
        let p = parse(&Arc::new(g), from_words(&words));
        let s = p.stats();
        prop_assert!(s.fundamental_applications <= s.category_checks);
    }

    #[test]
    fn repeated_hypotheses_add_nothing(seed in any::<u64>(), len in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Arc::new(tame_grammar(&mut rng, 5, 500));
        let words: Vec<&str> = (0..len).map(|i| WORDS[(seed as usize >> i) & 1]).collect();
        let mut p = ChartParser::new(Arc::clone(&g));
        for h in from_words(&words) {
            p.feed(h).unwrap();
        }
        p.run_to_quiescence();
        let before = p.chart().len();
        for h in from_words(&words) {
            p.feed(h).unwrap();
        }
        p.run_to_quiescence();
        prop_assert_eq!(p.chart().len(), before);
    }

    #[test]
    fn chart_only_grows(seed in any::<u64>(), len in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = tame_grammar(&mut rng, 5, 500);
        let words: Vec<&str> = (0..len).map(|i| WORDS[(seed as usize >> i) & 1]).collect();
        let mut p = ChartParser::new(Arc::new(g));
        for h in from_words(&words) {
            p.feed(h).unwrap();
        }
        p.end_input();
        let mut seen: Vec<(EdgeId, Arc<FeatureStructure>, Vec<EdgeId>)> = Vec::new();
        while let StepResult::Transaction(_) = p.step() {
            let edges = p.chart().edges();
            prop_assert!(edges.len() >= seen.len());
            for ((id, fs, children), now) in seen.iter().zip(edges) {
                prop_assert_eq!(*id, now.id);
                prop_assert!(Arc::ptr_eq(fs, &now.fs));
                prop_assert_eq!(children, &now.children);
            }
            // Between steps every new structure is complete and canonical.
            for e in &edges[seen.len()..] {
                let rebuilt = FeatureStructure::from_arena(e.fs.nodes().to_vec(), e.fs.root().index());
                prop_assert_eq!(rebuilt.as_ref(), Ok(&*e.fs));
            }
            seen = edges.iter().map(|e| (e.id, Arc::clone(&e.fs), e.children.clone())).collect();
        }
    }
}
