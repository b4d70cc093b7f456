#![no_main]

use libfuzzer_sys::fuzz_target;
use paramred::nll::RevNet;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(net) = RevNet::from_json(s) {
        // Anything accepted must serialize back to an equal network.
        let again = RevNet::from_json(&net.to_json().unwrap()).unwrap();
        assert_eq!(net, again);
    }
});
