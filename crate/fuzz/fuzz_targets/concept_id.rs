#![no_main]

use libfuzzer_sys::fuzz_target;
use openworld::ConceptId;

fuzz_target!(|text: &str| {
    if let Ok(id) = ConceptId::new(text) {
        assert_eq!(ConceptId::new(id.as_str()).unwrap(), id);
    }
});
