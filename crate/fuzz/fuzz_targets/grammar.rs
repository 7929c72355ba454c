#![no_main]
use std::sync::Arc;

use anyparse::chart::ChartParser;
use anyparse::grammar::{check_sources, Grammar};
use anyparse::lattice::from_words;
use libfuzzer_sys::fuzz_target;

// Grammar and lexicon text separated by a NUL byte.
fuzz_target!(|data: &str| {
    let (g, l) = data.split_once('\0').unwrap_or((data, ""));
    let _ = check_sources(g, l, Some("S"));
    if let Ok(grammar) = Grammar::from_sources(g, l) {
        let words: Vec<&str> = l
            .lines()
            .filter_map(|line| line.strip_prefix("Lex "))
            .filter_map(|rest| rest.split_whitespace().next())
            .take(4)
            .collect();
        let mut p = ChartParser::new(Arc::new(grammar));
        for h in from_words(&words) {
            let _ = p.feed(h);
        }
        p.end_input();
        // Bounded: a pathological grammar must not hang the fuzzer.
        for _ in 0..5_000 {
            if let anyparse::chart::StepResult::Quiescent = p.step() {
                break;
            }
        }
    }
});
