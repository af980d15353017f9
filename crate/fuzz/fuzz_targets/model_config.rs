#![no_main]

use libfuzzer_sys::fuzz_target;
use triplet_core::model::ModelConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = ModelConfig::parse(text, "fuzz") {
        assert_eq!(
            ModelConfig::parse(&cfg.to_text(), "fuzz").expect("printed config parses"),
            cfg
        );
        let _ = cfg.feature_extent();
    }
});
