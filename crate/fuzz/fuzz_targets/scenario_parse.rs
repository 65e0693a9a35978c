#![no_main]

use entrap_core::scenario::Scenario;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(scenario) = Scenario::from_json_bytes(data) {
        let _ = scenario.prepare();
    }
});
