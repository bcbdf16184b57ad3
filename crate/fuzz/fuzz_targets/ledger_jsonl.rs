#![no_main]

use libfuzzer_sys::fuzz_target;
use trustmarket::framework::EventStore;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(store) = EventStore::from_jsonl(text) {
        let back = EventStore::from_jsonl(&store.to_jsonl()).expect("exported ledger reloads");
        assert_eq!(back.events(), store.events());
    }
});
