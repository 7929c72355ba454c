mod common;

use std::sync::Arc;

use anyparse::anytime::format_forest;
use anyparse::grammar::Grammar;
use anyparse::lattice::parse_lattice;
use anyparse_oracles::features::eager_forest;
use common::*;

fn stdout(o: &std::process::Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn enumerated_forest(stem: &str, lattice: &str) -> String {
    let read = |n: String| std::fs::read_to_string(fixture(&n)).unwrap();
    let g = Arc::new(
        Grammar::from_sources(
            &read(format!("{stem}.grammar")),
            &read(format!("{stem}.lexicon")),
        )
        .unwrap(),
    );
    let hyps = parse_lattice(&read(lattice.to_string())).unwrap();
    let rows = eager_forest(&g, &hyps, "S");
    format_forest(rows.iter().map(|(s, d, f)| (*s, d.as_str(), f.as_str())))
}

#[test]
fn batch_forests_match_enumeration_and_repeat_exactly() {
    for (stem, lattice) in FIXTURES {
        let a = run("parse", stem, lattice, &[]);
        let b = run("parse", stem, lattice, &[]);
        assert_eq!(a.status.code(), Some(0), "{lattice}");
        assert_eq!(a.stdout, b.stdout, "{lattice}");
        assert_eq!(stdout(&a), enumerated_forest(stem, lattice), "{lattice}");
    }
}

#[test]
fn toy_sentence_has_one_parse() {
    let out = stdout(&run("parse", "toy", "toy.lattice", &[]));
    assert_eq!(out.lines().count(), 1);
    assert!(out.contains("(V sees)"));
}

#[test]
fn zero_deadline_gives_void_result() {
    for extra in [
        &["--deadline", "0"][..],
        &["--deadline", "0", "--deterministic"],
    ] {
        let mut args = vec!["--mode", "anytime", "--format", "json-lines"];
        args.extend_from_slice(extra);
        let o = run("parse", "pp", "pp.lattice", &args);
        assert_eq!(o.status.code(), Some(4), "{extra:?}");
        let ev = events(&o);
        assert!(of_kind(&ev, "snapshot").is_empty());
        let f = final_event(&ev);
        assert_eq!(f["stop"], "deadline");
        assert!(f["version"].is_null());
        assert_eq!(f["snapshot"]["void"], true);
    }
}

#[test]
fn generous_deadline_converges_to_batch() {
    for (stem, lattice) in FIXTURES {
        let batch = stdout(&run("parse", stem, lattice, &[]));
        for extra in [
            &["--deadline", "60000"][..],
            &[
                "--deadline",
                "60000",
                "--feed-interval",
                "1",
                "--fragment-first",
            ],
            &["--deterministic", "--poll-interval", "3"],
        ] {
            let mut args = vec![
                "--mode",
                "anytime",
                "--until",
                "quiescent",
                "--format",
                "json-lines",
            ];
            args.extend_from_slice(extra);
            let o = run("parse", stem, lattice, &args);
            assert_eq!(o.status.code(), Some(0));
            let ev = events(&o);
            let f = final_event(&ev);
            assert_eq!(f["stop"], "quiescent");
            assert_eq!(f["snapshot"]["finalized"], true);
            assert_eq!(f["forest"].as_str().unwrap(), batch, "{lattice} {extra:?}");
        }
    }
}

#[test]
fn consumer_stops_at_first_complete_analysis() {
    let o = run(
        "parse",
        "pp",
        "pp.lattice",
        &[
            "--mode",
            "anytime",
            "--deterministic",
            "--format",
            "json-lines",
        ],
    );
    let ev = events(&o);
    let f = final_event(&ev);
    assert_eq!(f["stop"], "satisfied");
    let snaps = of_kind(&ev, "snapshot");
    let complete = |s: &serde_json::Value| {
        s["snapshot"]["analyses"]
            .as_array()
            .unwrap()
            .iter()
            .any(|a| a["complete"] == true)
    };
    assert!(complete(snaps.last().unwrap()));
    assert!(snaps[..snaps.len() - 1].iter().all(|s| !complete(s)));
}

#[test]
fn deterministic_reports_are_byte_identical() {
    let parse = [
        "--mode",
        "anytime",
        "--deterministic",
        "--until",
        "quiescent",
        "--format",
        "json-lines",
    ];
    for (stem, lattice) in FIXTURES {
        let a = run("parse", stem, lattice, &parse);
        let b = run("parse", stem, lattice, &parse);
        assert_eq!(a.stdout, b.stdout, "{lattice}");
    }
    for script in ["abort.script", "reset.script", "empty.script"] {
        let s = fixture(script).display().to_string();
        let args = [
            "--script",
            s.as_str(),
            "--deterministic",
            "--format",
            "json-lines",
        ];
        let a = run("replay", "toy", "toy.lattice", &args);
        let b = run("replay", "toy", "toy.lattice", &args);
        assert_eq!(a.status.code(), Some(0));
        assert_eq!(a.stdout, b.stdout, "{script}");
    }
}

fn replay(script: &str, extra: &[&str]) -> Vec<serde_json::Value> {
    let s = fixture(script).display().to_string();
    let mut args = vec!["--script", s.as_str(), "--format", "json-lines"];
    args.extend_from_slice(extra);
    let o = run("replay", "pp", "pp.lattice", &args);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    events(&o)
}

#[test]
fn scripted_abort_stops_within_one_transaction() {
    for extra in [&[][..], &["--deterministic"]] {
        let ev = replay("abort.script", extra);
        let aborts = of_kind(&ev, "abort");
        assert_eq!(aborts.len(), 1);
        assert!(aborts[0]["transactions_after"].as_u64().unwrap() <= 1);
        assert_eq!(final_event(&ev)["stop"], "aborted");
    }
    // In lockstep the cut is exact: the abort lands after transaction 20.
    let ev = replay("abort.script", &["--deterministic"]);
    assert_eq!(of_kind(&ev, "transaction").len(), 20);
}

#[test]
fn snapshots_after_reset_use_only_the_new_lattice() {
    for extra in [&[][..], &["--deterministic"]] {
        let ev = replay("reset.script", extra);
        let at = ev.iter().position(|e| e["event"] == "reset").unwrap();
        let after: Vec<_> = ev[at..]
            .iter()
            .filter(|e| e["event"] == "snapshot" || e["event"] == "final")
            .collect();
        assert!(!after.is_empty());
        for e in after {
            for a in e["snapshot"]["analyses"].as_array().unwrap() {
                let d = a["derivation"].as_str().unwrap();
                for w in ["kim", "saw", "man", "with", "telescope"] {
                    assert!(!d.contains(w), "{d}");
                }
            }
        }
    }
}

#[test]
fn empty_script_reports_only_the_final_snapshot() {
    let ev = replay("empty.script", &["--deterministic"]);
    assert!(of_kind(&ev, "snapshot").is_empty());
    let f = final_event(&ev);
    assert_eq!(f["stop"], "quiescent");
    assert_eq!(f["snapshot"]["finalized"], true);
    let tx = of_kind(&ev, "transaction").len() as u64;
    assert_eq!(f["snapshot"]["transactions_executed"].as_u64(), Some(tx));
}

#[test]
fn reset_without_lattice_is_a_config_error() {
    let s = fixture("bad.script").display().to_string();
    let o = run("replay", "toy", "toy.lattice", &["--script", &s]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
}

#[test]
fn check_reports_errors_and_leniency() {
    let check = |g: &str, l: &str| {
        let (g, l) = (
            fixture(g).display().to_string(),
            fixture(l).display().to_string(),
        );
        anyparse(&["check", "--grammar", &g, "--lexicon", &l, "--start", "S"])
    };
    let clean = check("toy.grammar", "toy.lexicon");
    assert_eq!(clean.status.code(), Some(0));
    assert!(clean.stdout.is_empty());

    let bad = check("bad.grammar", "toy.lexicon");
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("grammar:2: error: constituent index 3"));

    let dup = check("dup.grammar", "toy.lexicon");
    assert_eq!(dup.status.code(), Some(0));
    assert!(stdout(&dup).contains("warning: duplicate"));
}

#[test]
fn load_failures_have_their_own_exit_code() {
    let path = |n: &str| fixture(n).display().to_string();
    let parse = |g: &str, l: &str, x: &str| {
        anyparse(&[
            "parse",
            "--grammar",
            &path(g),
            "--lexicon",
            &path(l),
            "--lattice",
            &path(x),
        ])
    };

    let o = parse("broken.grammar", "toy.lexicon", "toy.lattice");
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("grammar:2: error"));

    // A grammar file is not a lattice.
    let o = parse("toy.grammar", "toy.lexicon", "toy.grammar");
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    let o = parse("toy.grammar", "missing.lexicon", "toy.lattice");
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(anyparse(&["parse"]).status.code(), Some(2));
    let o = run(
        "parse",
        "toy",
        "toy.lattice",
        &["--mode", "anytime", "--poll-interval", "0"],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn text_reports_are_readable() {
    let o = run(
        "parse",
        "pp",
        "pp.lattice",
        &[
            "--mode",
            "anytime",
            "--deterministic",
            "--until",
            "quiescent",
        ],
    );
    let out = stdout(&o);
    assert!(out.contains("final quiescent"));
    assert!(out.lines().any(|l| l.starts_with("snapshot v")));
    assert!(out.contains("transactions: "));
}
