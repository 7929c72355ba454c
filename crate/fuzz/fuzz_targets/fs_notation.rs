#![no_main]
use anyparse::fs::parse_fs;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(fs) = parse_fs(data) {
        // Printing and reading back gives the same structure.
        let again = parse_fs(&fs.to_string()).expect("printed form parses");
        assert_eq!(again, fs);
        assert_eq!(fs.unify(&fs).as_ref(), Ok(&fs));
    }
});
