#![no_main]

use ccucp::encoding::{BitString, Formulation};
use ccucp::instance::builtin_deterministic_instance;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(bits) = s.parse::<BitString>() else {
        return;
    };
    assert_eq!(bits.to_string(), s.trim());
    let f = Formulation::deterministic(&builtin_deterministic_instance()).unwrap();
    if bits.len() == f.num_vars() {
        let solution = f.decode(&bits).unwrap();
        let _ = f.encode(&solution);
    } else {
        assert!(f.decode(&bits).is_err());
    }
});
