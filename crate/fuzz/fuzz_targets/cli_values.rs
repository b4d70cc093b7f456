#![no_main]

use libfuzzer_sys::fuzz_target;
use paramred::kas::SpectralDistribution;
use paramred_cli::args::KSpec;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(k) = s.parse::<KSpec>() {
            assert_eq!(k.to_string().parse::<KSpec>(), Ok(k));
        }
        let _ = s.parse::<SpectralDistribution>();
    }
});
