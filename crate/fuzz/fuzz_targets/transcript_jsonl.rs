#![no_main]

use libfuzzer_sys::fuzz_target;
use trustmarket::framework::parse_transcript;
use trustmarket::harness::audit_transcript;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if parse_transcript(text).is_ok() {
        let _ = audit_transcript(text);
    }
});
