//! Pipeline orchestration, input files and evaluation metrics.

pub mod config;
pub mod files;
pub mod metrics;
pub mod pipeline;

pub use config::{Mode, Paths, PipelineConfig};
pub use files::{
    load_detection_eval, load_ground_truth, load_vocabulary, parse_detection_eval, parse_ground_truth,
    parse_vocabulary, Annotation, GroundTruth,
};
pub use metrics::{
    activity_accuracy, coco_thresholds, detection_map, hits_at_k, iou, topk_accuracy, DetectionEvalRecord,
    DetectionReport, GtBox, PredBox,
};
pub use pipeline::{
    load_inputs, run_pipeline, run_with_inputs, Inputs, InterpretationRecord, MetricsReport, PipelineReport,
    SegmentResult, SkippedSegment,
};
