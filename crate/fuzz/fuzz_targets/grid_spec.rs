#![no_main]

use libfuzzer_sys::fuzz_target;
use trustmarket::harness::GridSpec;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = GridSpec::from_json(text);
    }
});
