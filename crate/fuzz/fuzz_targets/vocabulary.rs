#![no_main]

use libfuzzer_sys::fuzz_target;
use openworld::harness::parse_vocabulary;

fuzz_target!(|text: &str| {
    let _ = parse_vocabulary(text);
});
