//! Small hand-checkable knowledge base used by tests, docs and the CLI demo.
//!
//! Concepts: knife, fork, utensil, cut, spread, bread, cheese.

use crate::embedding::{parse_embeddings, EmbeddingTable};
use crate::knowledge::{parse_assertions, AssertionFormat, KnowledgeGraph};

pub const ASSERTIONS_TSV: &str = "\
# relation\tstart\tend\tweight
IsA\tknife\tutensil\t2.0
IsA\tfork\tutensil\t1.0
UsedFor\tknife\tcut\t4.0
UsedFor\tknife\tspread\t1.0
ReceivesAction\tbread\tcut\t2.0
RelatedTo\tcheese\tbread\t0.5
";

pub const EMBEDDINGS_TXT: &str = "\
7 2
knife 1 0
fork 0.8 0.6
cut 0.6 0.8
spread 0 1
utensil 0.9487 0.3162
bread 0.7071 0.7071
cheese 0.6 -0.8
";

/// One segment: a knife detection with the gaze resting on it, followed by
/// a second frame that keeps the knife in view.
pub const DETECTIONS_JSONL: &str = r#"{"segment": "s1", "frame": 0, "size": [640, 480], "gaze": [320, 240], "regions": [{"bbox": [300, 220, 40, 40], "labels": [{"concept": "knife", "conf": 0.8}]}, {"bbox": [10, 10, 50, 50], "labels": [{"concept": "fork", "conf": 0.3}]}]}
{"segment": "s1", "frame": 1, "size": [640, 480], "gaze": [322, 241], "regions": [{"bbox": [302, 221, 40, 40], "labels": [{"concept": "knife", "conf": 0.7}]}]}
"#;

pub const GROUND_TRUTH_TSV: &str = "s1\tcut\tbread\n";

pub const ACTIONS_TXT: &str = "cut\nspread\n";

pub const OBJECTS_TXT: &str = "bread\nfork\nutensil\n";

pub fn knowledge_graph() -> KnowledgeGraph {
    parse_assertions(ASSERTIONS_TSV, AssertionFormat::Tsv)
        .expect("fixture assertions parse")
        .value
}

pub fn embeddings() -> EmbeddingTable {
    parse_embeddings(EMBEDDINGS_TXT)
        .expect("fixture embeddings parse")
        .value
}
