//! In-memory commonsense knowledge graph.
//!
//! Concepts and assertions are canonicalized on build: concepts are sorted
//! by name and assertions by `(start, end, relation)`, so two graphs built
//! from the same content compare equal regardless of input order. The graph
//! is immutable once built and can be shared freely between threads.

mod ingest;
mod path;
mod relation;

use std::collections::{BTreeSet, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::concept::ConceptId;
use crate::error::{Error, Result};

pub use ingest::{ingest_assertions, load_assertions, parse_assertions, AssertionFormat, Ingested};
pub use path::ContextualPath;
pub use relation::{Relation, UnknownRelation};

/// Hop bound used by [`KnowledgeGraph::contextual_path`] unless overridden.
pub const DEFAULT_HOP_BOUND: usize = 4;

/// One directed, weighted edge `start -[relation]-> end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub relation: Relation,
    pub start: ConceptId,
    pub end: ConceptId,
    pub weight: f64,
}

impl Assertion {
    pub fn new(relation: Relation, start: ConceptId, end: ConceptId, weight: f64) -> Self {
        Self {
            relation,
            start,
            end,
            weight,
        }
    }

    /// Weight with the sign flipped for `Not*` relations.
    pub fn signed_weight(&self) -> f64 {
        if self.relation.is_negated() {
            -self.weight
        } else {
            self.weight
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Out,
    In,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct EdgeEnds {
    start: usize,
    end: usize,
}

/// Accumulates assertions, keeping the maximum weight per `(relation, start, end)`.
#[derive(Debug, Default, Clone)]
pub struct GraphBuilder {
    edges: HashMap<(Relation, ConceptId, ConceptId), f64>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, assertion: Assertion) {
        let key = (assertion.relation, assertion.start, assertion.end);
        self.edges
            .entry(key)
            .and_modify(|w| *w = w.max(assertion.weight))
            .or_insert(assertion.weight);
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn build(self) -> KnowledgeGraph {
        let mut concepts = BTreeSet::new();
        for (_, start, end) in self.edges.keys() {
            concepts.insert(start.clone());
            concepts.insert(end.clone());
        }
        let concepts: Vec<ConceptId> = concepts.into_iter().collect();
        let index: HashMap<ConceptId, usize> = concepts
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i))
            .collect();

        let mut assertions: Vec<Assertion> = self
            .edges
            .into_iter()
            .map(|((relation, start, end), weight)| Assertion::new(relation, start, end, weight))
            .collect();
        assertions.sort_by(|a, b| {
            (&a.start, &a.end, a.relation).cmp(&(&b.start, &b.end, b.relation))
        });

        let mut outgoing = vec![Vec::new(); concepts.len()];
        let mut incoming = vec![Vec::new(); concepts.len()];
        let mut ends = Vec::with_capacity(assertions.len());
        for (i, a) in assertions.iter().enumerate() {
            let e = EdgeEnds {
                start: index[&a.start],
                end: index[&a.end],
            };
            outgoing[e.start].push(i);
            incoming[e.end].push(i);
            ends.push(e);
        }

        KnowledgeGraph {
            concepts,
            index,
            assertions,
            ends,
            outgoing,
            incoming,
            compositional: [Relation::IsA, Relation::HasProperty].into_iter().collect(),
            hop_bound: DEFAULT_HOP_BOUND,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    concepts: Vec<ConceptId>,
    index: HashMap<ConceptId, usize>,
    assertions: Vec<Assertion>,
    ends: Vec<EdgeEnds>,
    outgoing: Vec<Vec<usize>>,
    incoming: Vec<Vec<usize>>,
    compositional: BTreeSet<Relation>,
    hop_bound: usize,
}

impl PartialEq for KnowledgeGraph {
    fn eq(&self, other: &Self) -> bool {
        self.concepts == other.concepts
            && self.assertions == other.assertions
            && self.compositional == other.compositional
    }
}

impl KnowledgeGraph {
    pub fn from_assertions(assertions: impl IntoIterator<Item = Assertion>) -> Self {
        let mut builder = GraphBuilder::new();
        for a in assertions {
            builder.insert(a);
        }
        builder.build()
    }

    pub fn with_hop_bound(mut self, hop_bound: usize) -> Self {
        self.hop_bound = hop_bound;
        self
    }

    pub fn with_compositional(mut self, relations: impl IntoIterator<Item = Relation>) -> Self {
        self.compositional = relations.into_iter().collect();
        self
    }

    pub fn hop_bound(&self) -> usize {
        self.hop_bound
    }

    pub fn is_compositional(&self, relation: Relation) -> bool {
        self.compositional.contains(&relation)
    }

    pub fn compositional_relations(&self) -> &BTreeSet<Relation> {
        &self.compositional
    }

    /// Concepts in lexicographic order.
    pub fn concepts(&self) -> &[ConceptId] {
        &self.concepts
    }

    /// Assertions in canonical `(start, end, relation)` order.
    pub fn assertions(&self) -> &[Assertion] {
        &self.assertions
    }

    pub fn contains(&self, concept: &ConceptId) -> bool {
        self.index.contains_key(concept)
    }

    pub fn concept_count(&self) -> usize {
        self.concepts.len()
    }

    pub fn assertion_count(&self) -> usize {
        self.assertions.len()
    }

    pub(crate) fn node(&self, concept: &ConceptId) -> Result<usize> {
        self.index
            .get(concept)
            .copied()
            .ok_or_else(|| Error::MissingConcept(concept.clone()))
    }

    /// Strength of the strongest assertion between `a` and `b` in either
    /// direction, `0.0` when none exists. Negated relations count negatively.
    pub fn assertion_weight(&self, a: &ConceptId, b: &ConceptId) -> Result<f64> {
        let ia = self.node(a)?;
        let ib = self.node(b)?;
        let (from, to) = if self.degree(ia) <= self.degree(ib) {
            (ia, ib)
        } else {
            (ib, ia)
        };
        let best = self.outgoing[from]
            .iter()
            .filter(|&&e| self.ends[e].end == to)
            .chain(self.incoming[from].iter().filter(|&&e| self.ends[e].start == to))
            .map(|&e| self.assertions[e].signed_weight())
            .fold(None, |acc: Option<f64>, w| Some(acc.map_or(w, |m| m.max(w))));
        Ok(best.unwrap_or(0.0))
    }

    /// Edges touching `concept`, strongest first. Equal weights keep the
    /// canonical assertion order.
    pub fn neighbors(
        &self,
        concept: &ConceptId,
        relations: Option<&[Relation]>,
        direction: Direction,
    ) -> Result<Vec<&Assertion>> {
        let node = self.node(concept)?;
        let mut ids: Vec<usize> = match direction {
            Direction::Out => self.outgoing[node].clone(),
            Direction::In => self.incoming[node].clone(),
            Direction::Both => {
                let mut all: Vec<usize> = self.outgoing[node]
                    .iter()
                    .chain(&self.incoming[node])
                    .copied()
                    .collect();
                all.sort_unstable();
                all.dedup();
                all
            }
        };
        if let Some(filter) = relations {
            ids.retain(|&e| filter.contains(&self.assertions[e].relation));
        }
        ids.sort_by(|&x, &y| {
            self.assertions[y]
                .weight
                .total_cmp(&self.assertions[x].weight)
                .then(x.cmp(&y))
        });
        Ok(ids.into_iter().map(|e| &self.assertions[e]).collect())
    }

    /// Writes the graph in the 4-column TSV assertion format. Reading the
    /// output back yields an identical graph.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# relation\tstart\tend\tweight")?;
        for a in &self.assertions {
            writeln!(out, "{}\t{}\t{}\t{}", a.relation, a.start, a.end, a.weight)?;
        }
        Ok(())
    }

    fn degree(&self, node: usize) -> usize {
        self.outgoing[node].len() + self.incoming[node].len()
    }

    /// Edge ids incident to `node` paired with the node at the other end.
    fn incident(&self, node: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.outgoing[node]
            .iter()
            .map(move |&e| (e, self.ends[e].end))
            .chain(self.incoming[node].iter().map(move |&e| (e, self.ends[e].start)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;

    fn c(name: &str) -> ConceptId {
        ConceptId::new(name).unwrap()
    }

    #[test]
    fn assertion_weight_on_fixture() {
        let kg = fixture::knowledge_graph();
        assert_eq!(kg.assertion_weight(&c("knife"), &c("utensil")).unwrap(), 2.0);
        assert_eq!(kg.assertion_weight(&c("utensil"), &c("knife")).unwrap(), 2.0);
        assert_eq!(kg.assertion_weight(&c("knife"), &c("bread")).unwrap(), 0.0);
        assert_eq!(kg.assertion_weight(&c("cut"), &c("bread")).unwrap(), 2.0);
    }

    #[test]
    fn assertion_weight_unknown_concept() {
        let kg = fixture::knowledge_graph();
        match kg.assertion_weight(&c("knife"), &c("spoon")) {
            Err(Error::MissingConcept(name)) => assert_eq!(name.as_str(), "spoon"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negated_assertion_is_negative() {
        let kg = KnowledgeGraph::from_assertions([Assertion::new(
            Relation::NotCapableOf,
            c("spoon"),
            c("cut"),
            1.5,
        )]);
        assert_eq!(kg.assertion_weight(&c("spoon"), &c("cut")).unwrap(), -1.5);
        assert_eq!(kg.assertion_weight(&c("cut"), &c("spoon")).unwrap(), -1.5);
    }

    #[test]
    fn strongest_assertion_wins() {
        let kg = KnowledgeGraph::from_assertions([
            Assertion::new(Relation::NotCapableOf, c("spoon"), c("cut"), 1.5),
            Assertion::new(Relation::RelatedTo, c("cut"), c("spoon"), 0.3),
        ]);
        assert_eq!(kg.assertion_weight(&c("spoon"), &c("cut")).unwrap(), 0.3);
    }

    #[test]
    fn duplicate_edges_keep_max_weight() {
        let kg = KnowledgeGraph::from_assertions([
            Assertion::new(Relation::IsA, c("knife"), c("utensil"), 1.0),
            Assertion::new(Relation::IsA, c("knife"), c("utensil"), 2.0),
            Assertion::new(Relation::IsA, c("knife"), c("utensil"), 0.5),
        ]);
        assert_eq!(kg.assertion_count(), 1);
        assert_eq!(kg.assertions()[0].weight, 2.0);
    }

    #[test]
    fn neighbors_out_filtered() {
        let kg = fixture::knowledge_graph();
        let got = kg
            .neighbors(&c("knife"), Some(&[Relation::UsedFor]), Direction::Out)
            .unwrap();
        let got: Vec<(&str, f64)> = got.iter().map(|a| (a.end.as_str(), a.weight)).collect();
        assert_eq!(got, vec![("cut", 4.0), ("spread", 1.0)]);

        assert!(kg
            .neighbors(&c("cheese"), Some(&[Relation::IsA]), Direction::Out)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn neighbors_in_sorted_by_weight() {
        let kg = fixture::knowledge_graph();
        let got = kg.neighbors(&c("utensil"), None, Direction::In).unwrap();
        let starts: Vec<&str> = got.iter().map(|a| a.start.as_str()).collect();
        assert_eq!(starts, vec!["knife", "fork"]);
        assert!(got.iter().all(|a| a.relation == Relation::IsA));
    }

    #[test]
    fn neighbors_both_does_not_repeat_self_loops() {
        let kg = KnowledgeGraph::from_assertions([Assertion::new(
            Relation::RelatedTo,
            c("a"),
            c("a"),
            1.0,
        )]);
        assert_eq!(kg.neighbors(&c("a"), None, Direction::Both).unwrap().len(), 1);
    }

    #[test]
    fn tsv_round_trip() {
        let kg = fixture::knowledge_graph();
        let mut buf = Vec::new();
        kg.write_tsv(&mut buf).unwrap();
        let back = parse_assertions(std::str::from_utf8(&buf).unwrap(), AssertionFormat::Tsv)
            .unwrap()
            .value;
        assert_eq!(back, kg);
    }
}
