//! Abductive action hypotheses.
//!
//! Given observed `(source, target)` object pairs, every candidate action is
//! scored by
//!
//! ```text
//! p(a | s, t) = max(d_rel(a, s), 0) * max(d_rel(a, t), 0) / max(d_cs(t, s), cs_floor)
//! ```
//!
//! and the per-pair scores are aggregated over pairs. Candidates come from
//! a fixed vocabulary (closed mode) or from knowledge-graph traversal of the
//! observed objects' affordances (open mode).

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::concept::ConceptId;
use crate::correspondence::{contextual_similarity, relatedness, DecayParams};
use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::knowledge::{ContextualPath, Direction, KnowledgeGraph, Relation};

/// Relations whose far end is treated as an action when traversing in open mode.
pub const AFFORDANCE_RELATIONS: [Relation; 3] =
    [Relation::UsedFor, Relation::CapableOf, Relation::ReceivesAction];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Max,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbductionParams {
    pub decay: DecayParams,
    /// Lower clamp on `d_cs` in the denominator.
    pub cs_floor: f64,
    pub aggregation: Aggregation,
}

impl Default for AbductionParams {
    fn default() -> Self {
        Self {
            decay: DecayParams::default(),
            cs_floor: 0.1,
            aggregation: Aggregation::Max,
        }
    }
}

impl AbductionParams {
    pub fn validate(&self) -> Result<()> {
        self.decay.validate()?;
        if !(self.cs_floor > 0.0 && self.cs_floor.is_finite()) {
            return Err(Error::Config(format!("cs_floor must be positive, got {}", self.cs_floor)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ActionMode {
    /// Score a fixed action vocabulary.
    Closed(BTreeSet<ConceptId>),
    /// Collect actions reachable from the observed objects within
    /// `hop_bound` affordance edges.
    Open { hop_bound: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionHypothesis {
    pub action: ConceptId,
    /// Aggregated score, `>= 0`.
    pub score: f64,
    /// `score` normalized over the whole candidate set.
    pub probability: f64,
    /// `(source, target)` pairs backing the hypothesis, strongest first.
    pub supporting_objects: Vec<(ConceptId, ConceptId)>,
    pub provenance: Vec<ContextualPath>,
}

/// Single-pair action score.
pub fn action_probability(
    graph: &KnowledgeGraph,
    embeddings: &EmbeddingTable,
    action: &ConceptId,
    source_obj: &ConceptId,
    target_obj: &ConceptId,
    params: &AbductionParams,
) -> Result<f64> {
    let (d_cs, _) = contextual_similarity(graph, target_obj, source_obj, &params.decay)?;
    pair_score(embeddings, action, source_obj, target_obj, d_cs, params.cs_floor)
}

fn pair_score(
    embeddings: &EmbeddingTable,
    action: &ConceptId,
    source_obj: &ConceptId,
    target_obj: &ConceptId,
    d_cs: f64,
    cs_floor: f64,
) -> Result<f64> {
    let to_source = relatedness(embeddings, action, source_obj)?.max(0.0);
    let to_target = relatedness(embeddings, action, target_obj)?.max(0.0);
    Ok(to_source * to_target / d_cs.max(cs_floor))
}

/// Concepts reachable from `objects` by following affordance edges
/// outward, at most `hop_bound` steps. Unknown objects are ignored.
pub fn reachable_actions(
    graph: &KnowledgeGraph,
    objects: &BTreeSet<ConceptId>,
    hop_bound: usize,
) -> BTreeSet<ConceptId> {
    let mut found = BTreeSet::new();
    let mut seen: BTreeSet<ConceptId> = objects.iter().filter(|o| graph.contains(o)).cloned().collect();
    let mut queue: VecDeque<(ConceptId, usize)> = seen.iter().map(|o| (o.clone(), 0)).collect();
    while let Some((node, depth)) = queue.pop_front() {
        if depth >= hop_bound {
            continue;
        }
        let Ok(edges) = graph.neighbors(&node, Some(&AFFORDANCE_RELATIONS), Direction::Out) else {
            continue;
        };
        for edge in edges {
            found.insert(edge.end.clone());
            if seen.insert(edge.end.clone()) {
                queue.push_back((edge.end.clone(), depth + 1));
            }
        }
    }
    found
}

struct PairContext<'a> {
    source: &'a ConceptId,
    target: &'a ConceptId,
    d_cs: f64,
    path: Option<ContextualPath>,
}

/// Ranks candidate actions for the observed object pairs, best first.
/// Equal scores are ordered by concept name.
pub fn candidate_actions(
    graph: &KnowledgeGraph,
    embeddings: &EmbeddingTable,
    object_pairs: &[(ConceptId, ConceptId)],
    mode: &ActionMode,
    top_k: usize,
    params: &AbductionParams,
) -> Result<Vec<ActionHypothesis>> {
    if object_pairs.is_empty() {
        return Err(Error::Config("candidate_actions needs at least one object pair".into()));
    }
    let candidates: Vec<ConceptId> = match mode {
        ActionMode::Closed(vocab) => {
            if vocab.is_empty() {
                return Err(Error::Config("closed-mode action vocabulary is empty".into()));
            }
            vocab.iter().cloned().collect()
        }
        ActionMode::Open { hop_bound } => {
            let objects: BTreeSet<ConceptId> = object_pairs
                .iter()
                .flat_map(|(s, t)| [s.clone(), t.clone()])
                .collect();
            reachable_actions(graph, &objects, *hop_bound)
                .into_iter()
                .filter(|a| embeddings.contains(a))
                .collect()
        }
    };

    let pairs = object_pairs
        .iter()
        .map(|(source, target)| {
            let (d_cs, path) = contextual_similarity(graph, target, source, &params.decay)?;
            Ok(PairContext {
                source,
                target,
                d_cs,
                path,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut hypotheses = Vec::with_capacity(candidates.len());
    for action in candidates {
        let mut per_pair = Vec::with_capacity(pairs.len());
        for (i, pair) in pairs.iter().enumerate() {
            let s = pair_score(embeddings, &action, pair.source, pair.target, pair.d_cs, params.cs_floor)?;
            per_pair.push((i, s));
        }
        let score = match params.aggregation {
            Aggregation::Max => per_pair.iter().map(|p| p.1).fold(0.0, f64::max),
            Aggregation::Mean => per_pair.iter().map(|p| p.1).sum::<f64>() / per_pair.len() as f64,
        };
        per_pair.sort_by(|a, b| b.1.total_cmp(&a.1));
        let keep = per_pair.iter().filter(|p| p.1 > 0.0).count().max(1);
        let support = &per_pair[..keep];
        hypotheses.push(ActionHypothesis {
            action,
            score,
            probability: 0.0,
            supporting_objects: support
                .iter()
                .map(|&(i, _)| (pairs[i].source.clone(), pairs[i].target.clone()))
                .collect(),
            provenance: support.iter().filter_map(|&(i, _)| pairs[i].path.clone()).collect(),
        });
    }

    let total: f64 = hypotheses.iter().map(|h| h.score).sum();
    if total > 0.0 {
        for h in &mut hypotheses {
            h.probability = h.score / total;
        }
    }
    hypotheses.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.action.cmp(&b.action)));
    hypotheses.truncate(top_k);
    Ok(hypotheses)
}
