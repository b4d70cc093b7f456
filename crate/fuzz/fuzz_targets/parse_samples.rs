#![no_main]

use libfuzzer_sys::fuzz_target;
use paramred::io::{parse_samples, BoundsSource};
use paramred::Bounds;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = parse_samples(text, &BoundsSource::AssumeNormalized);
    // Wide bounds so most finite inputs survive normalization.
    for d in 1..=3 {
        let bounds = Bounds::new(vec![-1e6; d], vec![1e6; d]).unwrap();
        if let Ok(loaded) = parse_samples(text, &BoundsSource::Explicit(bounds)) {
            assert!(loaded.samples.is_normalized());
            assert_eq!(loaded.samples.dim(), d);
        }
    }
});
