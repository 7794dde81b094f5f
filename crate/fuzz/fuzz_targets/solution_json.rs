#![no_main]

use ccucp::instance::builtin_deterministic_instance;
use ccucp::scenario_model::{check_feasible, objective, Solution, DEFAULT_TOL};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(solution) = Solution::from_json_str(s) {
            let instance = builtin_deterministic_instance();
            let _ = objective(&instance, &solution);
            let _ = check_feasible(&instance, None, 1.0, &solution, DEFAULT_TOL);
        }
    }
});
