//! Knowledge-driven correspondence between source and target concepts.
//!
//! `f_k(s, t) = logistic(d_cs(s, t) / max(d_rel(s, t), rel_floor))`, where
//! `d_rel` is embedding cosine and `d_cs` is the decayed sum of assertion
//! strengths along the shortest compositional path from `s` to `t`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::concept::ConceptId;
use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::knowledge::{ContextualPath, KnowledgeGraph};

/// Path decay `omega_k = gamma * (1 - epsilon)^k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecayParams {
    pub gamma: f64,
    pub epsilon: f64,
}

impl Default for DecayParams {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            epsilon: 0.5,
        }
    }
}

impl DecayParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::Config(format!("epsilon must be in [0, 1), got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// Parameters of the mapping score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MappingParams {
    pub decay: DecayParams,
    /// Lower clamp on `d_rel` before dividing.
    pub rel_floor: f64,
}

impl Default for MappingParams {
    fn default() -> Self {
        Self {
            decay: DecayParams::default(),
            rel_floor: 0.05,
        }
    }
}

impl MappingParams {
    pub fn validate(&self) -> Result<()> {
        self.decay.validate()?;
        if !(self.rel_floor > 0.0 && self.rel_floor <= 1.0) {
            return Err(Error::Config(format!("rel_floor must be in (0, 1], got {}", self.rel_floor)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingScore {
    pub source: ConceptId,
    pub target: ConceptId,
    pub d_rel: f64,
    pub d_cs: f64,
    pub f_k: f64,
    pub path: Option<ContextualPath>,
}

/// For every target concept, its source concepts ranked by `f_k`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VocabularyMapping {
    pub entries: BTreeMap<ConceptId, Vec<MappingScore>>,
}

impl VocabularyMapping {
    pub fn targets(&self) -> impl Iterator<Item = &ConceptId> {
        self.entries.keys()
    }

    pub fn ranked(&self, target: &ConceptId) -> &[MappingScore] {
        self.entries.get(target).map(Vec::as_slice).unwrap_or(&[])
    }

    /// `f_k` between `target` and `source` if the pair was kept.
    pub fn score(&self, target: &ConceptId, source: &ConceptId) -> Option<f64> {
        self.ranked(target)
            .iter()
            .find(|m| &m.source == source)
            .map(|m| m.f_k)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn relatedness(embeddings: &EmbeddingTable, a: &ConceptId, b: &ConceptId) -> Result<f64> {
    embeddings.cosine(a, b)
}

pub fn decay_weight(k: usize, params: &DecayParams) -> f64 {
    let exp = i32::try_from(k).unwrap_or(i32::MAX);
    params.gamma * (1.0 - params.epsilon).powi(exp)
}

/// Decayed assertion strength along the contextual path from `from` to
/// `to`. The `k`-th edge counted from `from` (0-based) gets weight
/// `omega_k`, so the score depends on direction.
pub fn contextual_similarity(
    graph: &KnowledgeGraph,
    from: &ConceptId,
    to: &ConceptId,
    params: &DecayParams,
) -> Result<(f64, Option<ContextualPath>)> {
    let Some(path) = graph.contextual_path(from, to)? else {
        return Ok((0.0, None));
    };
    let mut total = 0.0;
    for (k, pair) in path.nodes.windows(2).enumerate() {
        total += decay_weight(k, params) * graph.assertion_weight(&pair[0], &pair[1])?;
    }
    Ok((total, Some(path)))
}

pub fn map_score(
    graph: &KnowledgeGraph,
    embeddings: &EmbeddingTable,
    source: &ConceptId,
    target: &ConceptId,
    params: &MappingParams,
) -> Result<MappingScore> {
    let d_rel = relatedness(embeddings, source, target)?;
    let (d_cs, path) = contextual_similarity(graph, source, target, &params.decay)?;
    Ok(MappingScore {
        source: source.clone(),
        target: target.clone(),
        d_rel,
        d_cs,
        f_k: logistic(d_cs / d_rel.max(params.rel_floor)),
        path,
    })
}

/// Ranks source concepts for every target concept and keeps the best
/// `top_k` (at least one, so every target is covered). A concept present in
/// both vocabularies maps to itself with `f_k = 1`.
pub fn expand_vocabulary(
    graph: &KnowledgeGraph,
    embeddings: &EmbeddingTable,
    source_vocab: &BTreeSet<ConceptId>,
    target_vocab: &BTreeSet<ConceptId>,
    params: &MappingParams,
    top_k: usize,
) -> Result<VocabularyMapping> {
    if source_vocab.is_empty() || target_vocab.is_empty() {
        return Err(Error::Config("source and target vocabularies must be non-empty".into()));
    }
    let keep = top_k.max(1);
    let mut entries = BTreeMap::new();
    for target in target_vocab {
        let mut scores = Vec::with_capacity(source_vocab.len());
        for source in source_vocab {
            let score = if source == target {
                MappingScore {
                    source: source.clone(),
                    target: target.clone(),
                    d_rel: 1.0,
                    d_cs: 0.0,
                    f_k: 1.0,
                    path: None,
                }
            } else {
                map_score(graph, embeddings, source, target, params)?
            };
            scores.push(score);
        }
        // BTreeSet iteration already gives lexicographic order for ties.
        scores.sort_by(|a, b| b.f_k.total_cmp(&a.f_k));
        scores.truncate(keep);
        entries.insert(target.clone(), scores);
    }
    Ok(VocabularyMapping { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;
    use proptest::prelude::*;

    fn c(name: &str) -> ConceptId {
        ConceptId::new(name).unwrap()
    }

    fn set(names: &[&str]) -> BTreeSet<ConceptId> {
        names.iter().map(|n| c(n)).collect()
    }

    #[test]
    fn relatedness_on_fixture() {
        let emb = fixture::embeddings();
        assert_eq!(relatedness(&emb, &c("knife"), &c("knife")).unwrap(), 1.0);
        assert!((relatedness(&emb, &c("knife"), &c("fork")).unwrap() - 0.8).abs() < 1e-12);
        assert_eq!(relatedness(&emb, &c("spread"), &c("knife")).unwrap(), 0.0);
    }

    #[test]
    fn decay_closed_form() {
        let p = DecayParams::default();
        assert_eq!(decay_weight(0, &p), 1.0);
        assert_eq!(decay_weight(1, &p), 0.5);
        assert_eq!(decay_weight(3, &p), 0.125);
        let flat = DecayParams { gamma: 2.0, epsilon: 0.0 };
        assert_eq!(decay_weight(7, &flat), 2.0);
    }

    #[test]
    fn decay_params_validation() {
        assert!(DecayParams::default().validate().is_ok());
        assert!(DecayParams { gamma: 0.0, epsilon: 0.5 }.validate().is_err());
        assert!(DecayParams { gamma: 1.0, epsilon: 1.0 }.validate().is_err());
        assert!(DecayParams { gamma: 1.0, epsilon: -0.1 }.validate().is_err());
    }

    #[test]
    fn contextual_similarity_is_direction_dependent() {
        let kg = fixture::knowledge_graph();
        let p = DecayParams::default();
        let (ku, _) = contextual_similarity(&kg, &c("knife"), &c("utensil"), &p).unwrap();
        assert_eq!(ku, 2.0);
        let (kf, path) = contextual_similarity(&kg, &c("knife"), &c("fork"), &p).unwrap();
        assert_eq!(kf, 2.5);
        assert_eq!(path.unwrap().hops(), 2);
        let (fk, _) = contextual_similarity(&kg, &c("fork"), &c("knife"), &p).unwrap();
        assert_eq!(fk, 2.0);
        let (none, path) = contextual_similarity(&kg, &c("knife"), &c("cheese"), &p).unwrap();
        assert_eq!(none, 0.0);
        assert!(path.is_none());
    }

    #[test]
    fn map_score_fixture_values() {
        let kg = fixture::knowledge_graph();
        let emb = fixture::embeddings();
        let p = MappingParams::default();
        let m = map_score(&kg, &emb, &c("knife"), &c("fork"), &p).unwrap();
        // logistic(3.125)
        assert!((m.f_k - 0.957_912_272_084_381).abs() < 1e-12);
        assert!(m.path.is_some());
        let m = map_score(&kg, &emb, &c("knife"), &c("cheese"), &p).unwrap();
        assert_eq!(m.f_k, 0.5);
        assert!(m.path.is_none());
    }

    #[test]
    fn negative_relatedness_is_clamped() {
        // d_rel = -0.3 and d_cs = 1.0 gives ratio 20.
        assert!((logistic(1.0 / (-0.3f64).max(0.05)) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn expand_single_pair() {
        let kg = fixture::knowledge_graph();
        let emb = fixture::embeddings();
        let p = MappingParams::default();
        let m = expand_vocabulary(&kg, &emb, &set(&["knife"]), &set(&["fork"]), &p, 1).unwrap();
        let ranked = m.ranked(&c("fork"));
        assert_eq!(ranked.len(), 1);
        assert_eq!(ranked[0].source.as_str(), "knife");
        assert!((ranked[0].f_k - 0.957_912_272_084_381).abs() < 1e-12);
    }

    #[test]
    fn expand_identity_convention() {
        let kg = fixture::knowledge_graph();
        let emb = fixture::embeddings();
        let m = expand_vocabulary(&kg, &emb, &set(&["knife"]), &set(&["knife"]), &MappingParams::default(), 3)
            .unwrap();
        assert_eq!(m.score(&c("knife"), &c("knife")), Some(1.0));
    }

    #[test]
    fn expand_ranks_sources() {
        let kg = fixture::knowledge_graph();
        let emb = fixture::embeddings();
        let m = expand_vocabulary(
            &kg,
            &emb,
            &set(&["knife", "fork"]),
            &set(&["utensil"]),
            &MappingParams::default(),
            2,
        )
        .unwrap();
        let order: Vec<&str> = m.ranked(&c("utensil")).iter().map(|s| s.source.as_str()).collect();
        assert_eq!(order, ["knife", "fork"]);
    }

    #[test]
    fn expand_covers_every_target() {
        let kg = fixture::knowledge_graph();
        let emb = fixture::embeddings();
        let targets = set(&["fork", "utensil", "cheese", "bread", "spread"]);
        let m = expand_vocabulary(&kg, &emb, &set(&["knife"]), &targets, &MappingParams::default(), 0)
            .unwrap();
        for t in &targets {
            assert_eq!(m.ranked(t).len(), 1, "{t} missing");
        }
    }

    #[test]
    fn expand_rejects_empty_vocab() {
        let kg = fixture::knowledge_graph();
        let emb = fixture::embeddings();
        assert!(matches!(
            expand_vocabulary(&kg, &emb, &BTreeSet::new(), &set(&["fork"]), &MappingParams::default(), 1),
            Err(Error::Config(_))
        ));
    }

    proptest! {
        #[test]
        fn decay_strictly_decreasing(gamma in 0.01f64..10.0, eps in 0.01f64..0.99, k in 0usize..30) {
            let p = DecayParams { gamma, epsilon: eps };
            prop_assert!(decay_weight(k + 1, &p) < decay_weight(k, &p));
        }

        #[test]
        fn f_k_monotone(d_cs in -5.0f64..5.0, delta in 0.001f64..5.0, rel in 0.05f64..1.0, drel in 0.001f64..0.5) {
            // Increasing in d_cs.
            prop_assert!(logistic((d_cs + delta) / rel) >= logistic(d_cs / rel));
            // Decreasing in clamped d_rel when d_cs > 0.
            let pos = d_cs.abs() + 0.01;
            prop_assert!(logistic(pos / (rel + drel)) <= logistic(pos / rel));
        }
    }
}
