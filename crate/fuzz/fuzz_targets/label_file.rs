#![no_main]

use libfuzzer_sys::fuzz_target;
use triplet_core::labels::{format_label_file, parse_label_file};
use triplet_core::TripletTaxonomy;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let tax = TripletTaxonomy::default();
    if let Ok(records) = parse_label_file(text, "fuzz", &tax) {
        let again = parse_label_file(&format_label_file(&records), "fuzz", &tax)
            .expect("printed labels parse");
        assert_eq!(again, records);
    }
});
