#![no_main]

use libfuzzer_sys::fuzz_target;
use openworld::attention::{group_segments, parse_detections};

fuzz_target!(|text: &str| {
    if let Ok(frames) = parse_detections(text, 0.25) {
        for frame in &frames.value {
            assert!(frame.regions.iter().all(|r| r.labels.iter().all(|l| l.confidence >= 0.25)));
        }
        let _ = group_segments(frames.value);
    }
});
