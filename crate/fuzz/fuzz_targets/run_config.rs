#![no_main]

use libfuzzer_sys::fuzz_target;
use triplet_core::harness::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = RunConfig::parse(text, "fuzz") {
        let again = RunConfig::parse(&cfg.to_text(), "fuzz").expect("printed config parses");
        assert_eq!(again.to_text(), cfg.to_text());
    }
});
