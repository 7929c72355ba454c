#![no_main]
use std::path::Path;

use anyparse_cli::{parse_script, Action};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(script) = parse_script(data, Path::new("base")) {
        for w in script.steps.windows(2) {
            assert!(w[0].at <= w[1].at);
        }
        for s in &script.steps {
            if let Action::Reset(p) = &s.action {
                assert!(p.starts_with("base"));
            }
        }
    }
});
