//! Open-world concept inference.
//!
//! Detected concepts from a source vocabulary are mapped into an unseen
//! target vocabulary through a commonsense knowledge graph, action
//! hypotheses are ranked by abduction, and scene interpretations are chosen
//! as minimum-energy pattern-theory configurations found by simulated
//! annealing.
//!
//! Module map:
//!
//! * [`knowledge`] / [`embedding`]: graph and vector stores.
//! * [`correspondence`]: relatedness, path similarity and the mapping score.
//! * [`pattern`]: generators, bonds, configurations and their energies.
//! * [`abduction`]: action hypothesis generation and ranking.
//! * [`attention`]: gaze-driven region selection and object probabilities.
//! * [`inference`]: Metropolis simulated annealing over configurations.
//! * [`harness`]: pipeline, file formats and evaluation metrics.

pub mod abduction;
pub mod attention;
pub mod concept;
pub mod correspondence;
pub mod embedding;
pub mod error;
pub mod fixture;
pub mod harness;
pub mod inference;
pub mod knowledge;
pub mod pattern;

pub use concept::ConceptId;
pub use embedding::EmbeddingTable;
pub use error::{Error, RecordError, Result};
pub use knowledge::{Assertion, KnowledgeGraph, Relation};
