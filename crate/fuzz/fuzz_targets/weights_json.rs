#![no_main]

use ccucp::qubo::PenaltyWeights;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(w) = PenaltyWeights::from_json_str(s) {
            w.validate().unwrap();
        }
    }
});
