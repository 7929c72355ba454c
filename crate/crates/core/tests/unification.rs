use anyparse::fs::{
    parse_fs, unify_one_disjunct, ClashReason, Disjunction, FeatureStructure, Path,
};
use anyparse_oracles::fs::{describe, oracle_subsumes, oracle_unify, random_fs, same_description};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fs(s: &str) -> FeatureStructure {
    parse_fs(s).unwrap()
}

fn structures(seed: u64, n: usize) -> Vec<FeatureStructure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| random_fs(&mut rng)).collect()
}

#[test]
fn empty_structure_is_identity() {
    for x in structures(1, 200) {
        assert_eq!(FeatureStructure::empty().unify(&x).unwrap(), x);
        assert_eq!(x.unify(&FeatureStructure::empty()).unwrap(), x);
        assert!(FeatureStructure::empty().subsumes(&x));
    }
}

#[test]
fn atom_clash_reports_path() {
    let err = fs("[num: sg]").unify(&fs("[num: pl]")).unwrap_err();
    assert_eq!(err.path, Path::new(["num"]));
    assert!(matches!(err.reason, ClashReason::AtomMismatch(..)));
}

#[test]
fn coreference_example() {
    let r = fs("[subj: #1[num: sg], agr: #1]")
        .unify(&fs("[agr: [pers: 3rd]]"))
        .unwrap();
    assert_eq!(r, fs("[subj: #1[num: sg, pers: 3rd], agr: #1]"));
    assert_eq!(
        r.follow(&Path::new(["subj"])),
        r.follow(&Path::new(["agr"]))
    );
}

#[test]
fn subsumption_examples() {
    assert!(fs("[num: sg]").subsumes(&fs("[num: sg, pers: 3rd]")));
    assert!(!fs("[num: sg, pers: 3rd]").subsumes(&fs("[num: sg]")));
    assert!(!fs("[a: #1[], b: #1]").subsumes(&fs("[a: [f: v], b: [f: v]]")));
}

#[test]
fn disjunct_examples() {
    let d = Disjunction::new(vec![fs("[num: sg]"), fs("[num: pl]")], "test").unwrap();
    let a = fs("[num: pl]");
    assert!(unify_one_disjunct(&a, &d, 0).is_err());
    assert_eq!(unify_one_disjunct(&a, &d, 1).unwrap(), fs("[num: pl]"));
    for i in 0..2 {
        assert_eq!(
            unify_one_disjunct(&FeatureStructure::empty(), &d, i).unwrap(),
            d.alternatives[i]
        );
    }
}

#[test]
fn follow_examples() {
    let x = fs("[a: [b: x]]");
    let n = x.follow(&Path::new(["a", "b"])).unwrap();
    assert_eq!(x.node(n).atom(), Some("x"));
    assert_eq!(x.follow(&Path::root()), Some(x.root()));
    assert_eq!(fs("[a: x]").follow(&Path::new(["a", "b"])), None);
}

#[test]
fn copy_keeps_sharing_and_unifies_with_original() {
    let x = fs("[subj: #1[num: sg], agr: #1]");
    let c = x.copy();
    assert_eq!(
        c.follow(&Path::new(["subj"])),
        c.follow(&Path::new(["agr"]))
    );
    assert_eq!(c.unify(&x).unwrap(), x);
    assert_eq!(FeatureStructure::empty().copy(), FeatureStructure::empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn commutative(seed in any::<u64>()) {
        let v = structures(seed, 2);
        let (a, b) = (&v[0], &v[1]);
        match (a.unify(b), b.unify(a)) {
            (Ok(x), Ok(y)) => prop_assert_eq!(x, y),
            (Err(_), Err(_)) => {}
            (x, y) => prop_assert!(false, "{a} / {b}: {x:?} vs {y:?}"),
        }
    }

    #[test]
    fn associative(seed in any::<u64>()) {
        let v = structures(seed, 3);
        let (a, b, c) = (&v[0], &v[1], &v[2]);
        let left = a.unify(b).and_then(|ab| ab.unify(c));
        let right = b.unify(c).and_then(|bc| a.unify(&bc));
        match (left, right) {
            (Ok(x), Ok(y)) => prop_assert_eq!(x, y),
            (Err(_), Err(_)) => {}
            (x, y) => prop_assert!(false, "{a} {b} {c}: {x:?} vs {y:?}"),
        }
    }

    #[test]
    fn idempotent(seed in any::<u64>()) {
        let a = &structures(seed, 1)[0];
        prop_assert_eq!(&a.unify(a).unwrap(), a);
    }

    #[test]
    fn inputs_untouched(seed in any::<u64>()) {
        let v = structures(seed, 2);
        let (a0, b0) = (v[0].copy(), v[1].copy());
        let _ = v[0].unify(&v[1]);
        prop_assert_eq!(&v[0], &a0);
        prop_assert_eq!(&v[1], &b0);
    }

    #[test]
    fn agrees_with_tree_expansion_oracle(seed in any::<u64>()) {
        let v = structures(seed, 2);
        let (a, b) = (&v[0], &v[1]);
        let oracle = oracle_unify(&describe(a), &describe(b));
        match (a.unify(b), oracle) {
            (Ok(r), Ok(d)) => prop_assert!(same_description(&describe(&r), &d), "{a} + {b} = {r}"),
            (Err(_), Err(_)) => {}
            (x, y) => prop_assert!(false, "{a} + {b}: {x:?} vs {y:?}"),
        }
    }

    #[test]
    fn least_upper_bound(seed in any::<u64>()) {
        let v = structures(seed, 3);
        let (a, b, c) = (&v[0], &v[1], &v[2]);
        if let Ok(r) = a.unify(b) {
            prop_assert!(a.subsumes(&r) && b.subsumes(&r));
            if a.subsumes(c) && b.subsumes(c) {
                prop_assert!(r.subsumes(c));
            }
            // An upper bound built from r: anything above it is above r.
            if let Ok(up) = r.unify(c) {
                prop_assert!(a.subsumes(&up) && b.subsumes(&up) && r.subsumes(&up));
            }
        }
    }

    #[test]
    fn subsumption_agrees_with_oracle(seed in any::<u64>()) {
        let v = structures(seed, 2);
        let (a, b) = (&v[0], &v[1]);
        prop_assert_eq!(a.subsumes(b), oracle_subsumes(&describe(a), &describe(b)));
        if let Ok(r) = a.unify(b) {
            prop_assert!(oracle_subsumes(&describe(a), &describe(&r)));
        }
    }

    #[test]
    fn coreference_propagates(seed in any::<u64>()) {
        let v = structures(seed, 2);
        let (a, b) = (&v[0], &v[1]);
        if let Ok(r) = a.unify(b) {
            // Paths sharing a node in either input share one in the result.
            for input in [a, b] {
                let paths = input.paths();
                for (p, n) in &paths {
                    for (q, m) in &paths {
                        if n == m {
                            prop_assert_eq!(r.follow(p), r.follow(q));
                        }
                    }
                }
            }
        }
    }
}
