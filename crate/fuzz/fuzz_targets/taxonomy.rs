#![no_main]

use libfuzzer_sys::fuzz_target;
use triplet_core::TripletTaxonomy;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(tax) = TripletTaxonomy::parse(text, "fuzz") {
        let again =
            TripletTaxonomy::parse(&tax.to_text(), "fuzz").expect("printed taxonomy parses");
        assert_eq!(again, tax);
    }
});
