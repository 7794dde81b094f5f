#![no_main]

use ccucp::qubo::QuboModel;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if data.len() > 1 << 16 {
        return;
    }
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(model) = QuboModel::from_text(s) {
            let again = QuboModel::from_text(&model.to_text()).unwrap();
            assert!(model.same_polynomial(&again));
        }
    }
});
