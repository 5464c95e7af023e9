#![no_main]

use libfuzzer_sys::fuzz_target;
use openworld::harness::{coco_thresholds, detection_map, parse_detection_eval};

// ground truth and predictions separated by a NUL byte
fuzz_target!(|text: &str| {
    let (gt, pred) = text.split_once('\0').unwrap_or((text, ""));
    let Ok(records) = parse_detection_eval(gt, pred) else { return };
    if let Ok(report) = detection_map(&records.value, &coco_thresholds()) {
        for t in &report.per_threshold {
            assert!((0.0..=1.0).contains(&t.map));
        }
    }
});
