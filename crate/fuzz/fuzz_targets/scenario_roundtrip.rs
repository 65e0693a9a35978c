#![no_main]

use entrap_core::scenario::Scenario;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(scenario) = Scenario::from_json_bytes(data) else {
        return;
    };
    let text = scenario.to_json_pretty();
    let reparsed = Scenario::from_json_str(&text).expect("serialized scenario parses");
    assert_eq!(reparsed, scenario);
});
