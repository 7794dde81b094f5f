#![no_main]

use ccucp::sampler::{parse_scenarios_csv, ScenarioSet};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if data.len() > 1 << 16 {
        return;
    }
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(rows) = parse_scenarios_csv(s) {
            if let Ok(set) = ScenarioSet::new(rows, 0, "none") {
                let _ = set.to_csv_string();
            }
        }
    }
});
