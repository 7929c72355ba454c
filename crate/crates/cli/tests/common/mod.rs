#![allow(dead_code)]

use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

/// (grammar stem, lattice) for every parsable fixture.
pub const FIXTURES: [(&str, &str); 6] = [
    ("toy", "toy.lattice"),
    ("toy", "toy_b.lattice"),
    ("toy", "competing.lattice"),
    ("pp", "pp.lattice"),
    ("tense", "tense_ok.lattice"),
    ("tense", "tense_bad.lattice"),
];

pub fn anyparse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anyparse"))
        .args(args)
        .output()
        .expect("binary runs")
}

/// Arguments naming a fixture grammar, its lexicon and a lattice.
pub fn inputs(stem: &str, lattice: &str) -> Vec<String> {
    vec![
        "--grammar".into(),
        fixture(&format!("{stem}.grammar")).display().to_string(),
        "--lexicon".into(),
        fixture(&format!("{stem}.lexicon")).display().to_string(),
        "--lattice".into(),
        fixture(lattice).display().to_string(),
    ]
}

pub fn run(cmd: &str, stem: &str, lattice: &str, extra: &[&str]) -> Output {
    let mut args: Vec<String> = vec![cmd.to_string()];
    args.extend(inputs(stem, lattice));
    args.extend(extra.iter().map(|s| s.to_string()));
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    anyparse(&refs)
}

pub fn events(out: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap_or_else(|e| panic!("{e}: {l}")))
        .collect()
}

pub fn of_kind<'a>(events: &'a [Value], kind: &str) -> Vec<&'a Value> {
    events.iter().filter(|e| e["event"] == kind).collect()
}

pub fn final_event(events: &[Value]) -> &Value {
    let finals = of_kind(events, "final");
    assert_eq!(finals.len(), 1, "expected one final event");
    finals[0]
}
