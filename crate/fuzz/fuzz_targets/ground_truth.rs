#![no_main]

use libfuzzer_sys::fuzz_target;
use openworld::harness::parse_ground_truth;

fuzz_target!(|text: &str| {
    let _ = parse_ground_truth(text);
});
