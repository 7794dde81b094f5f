#![no_main]

use ccucp::instance::{validate, UcpInstance};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(instance) = UcpInstance::from_json_str(s) {
            let _ = validate(&instance);
        }
    }
});
