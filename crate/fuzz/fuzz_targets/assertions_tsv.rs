#![no_main]

use libfuzzer_sys::fuzz_target;
use openworld::knowledge::{parse_assertions, AssertionFormat};

fuzz_target!(|text: &str| {
    let Ok(ingested) = parse_assertions(text, AssertionFormat::Tsv) else { return };
    // canonical TSV re-ingests to the same graph
    let mut out = Vec::new();
    ingested.value.write_tsv(&mut out).unwrap();
    let again = parse_assertions(std::str::from_utf8(&out).unwrap(), AssertionFormat::Tsv).unwrap();
    assert!(again.rejected.is_empty());
    assert_eq!(again.value, ingested.value);
});
