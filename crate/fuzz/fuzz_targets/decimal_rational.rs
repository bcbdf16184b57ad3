#![no_main]

use libfuzzer_sys::fuzz_target;
use trustmarket::rational::{parse_rational, to_canonical};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    // Bounded so a huge exponent cannot stall the run.
    if text.len() > 256 {
        return;
    }
    if let Ok(x) = parse_rational(text) {
        assert_eq!(parse_rational(&to_canonical(&x)).expect("canonical text parses"), x);
    }
});
