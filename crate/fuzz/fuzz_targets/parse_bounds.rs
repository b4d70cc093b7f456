#![no_main]

use libfuzzer_sys::fuzz_target;
use paramred::io::{parse_bounds_csv, parse_bounds_list};

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        for parsed in [parse_bounds_list(s), parse_bounds_csv(s)].into_iter().flatten() {
            assert!(parsed.lower().iter().zip(parsed.upper()).all(|(lo, hi)| lo < hi));
        }
    }
});
