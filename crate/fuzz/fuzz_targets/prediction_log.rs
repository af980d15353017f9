#![no_main]

use libfuzzer_sys::fuzz_target;
use triplet_core::metrics::parse_prediction_file;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(records) = parse_prediction_file(text, "fuzz") {
        assert!(records.iter().all(|r| r.scores.len() == 100));
    }
});
