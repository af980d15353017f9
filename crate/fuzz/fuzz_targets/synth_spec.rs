#![no_main]

use libfuzzer_sys::fuzz_target;
use triplet_core::datapipe::SynthSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(spec) = SynthSpec::parse(text, "fuzz") {
        assert_eq!(
            SynthSpec::parse(&spec.to_text(), "fuzz").expect("printed spec parses"),
            spec
        );
    }
});
