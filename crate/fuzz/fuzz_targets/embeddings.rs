#![no_main]

use libfuzzer_sys::fuzz_target;
use openworld::embedding::parse_embeddings;

fuzz_target!(|text: &str| {
    let _ = parse_embeddings(text);
});
