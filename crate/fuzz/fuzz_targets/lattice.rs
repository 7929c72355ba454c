#![no_main]
use anyparse::lattice::parse_lattice;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(hyps) = parse_lattice(data) {
        for h in &hyps {
            assert!(h.start < h.end);
            assert!((0.0..=1.0).contains(&h.score));
            assert_eq!(parse_lattice(&h.to_string()).unwrap(), vec![h.clone()]);
        }
    }
});
