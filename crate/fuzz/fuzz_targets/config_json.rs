#![no_main]

use libfuzzer_sys::fuzz_target;
use trustmarket::harness::ScenarioConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(config) = ScenarioConfig::from_json(text) {
        let again = ScenarioConfig::from_json(&config.to_json()).expect("serialized config reloads");
        assert_eq!(again, config);
    }
});
