#![no_main]

use libfuzzer_sys::fuzz_target;
use openworld::knowledge::{parse_assertions, AssertionFormat};

fuzz_target!(|text: &str| {
    if let Ok(ingested) = parse_assertions(text, AssertionFormat::ConceptNet) {
        assert!(ingested.value.assertion_count() > 0);
    }
    let _ = parse_assertions(text, AssertionFormat::Auto);
});
