#![no_main]

use libfuzzer_sys::fuzz_target;
use triplet_core::datapipe::SplitSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(split) = SplitSpec::parse(text, "fuzz") {
        assert_eq!(
            SplitSpec::parse(&split.to_text(), "fuzz").expect("printed split parses"),
            split
        );
    }
});
