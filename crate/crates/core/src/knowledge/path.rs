use std::cmp::Ordering;
use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{Assertion, KnowledgeGraph};
use crate::concept::ConceptId;
use crate::error::Result;

/// A path between two concepts that passes through at least one
/// compositional assertion. `edges[i]` links `nodes[i]` and `nodes[i + 1]`
/// and may be traversed against its stored direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextualPath {
    pub nodes: Vec<ConceptId>,
    pub edges: Vec<Assertion>,
    pub has_compositional: bool,
}

impl ContextualPath {
    pub fn hops(&self) -> usize {
        self.edges.len()
    }
}

const UNREACHED: usize = usize::MAX;

struct Candidate {
    nodes: Vec<usize>,
    edges: Vec<usize>,
    weight: f64,
}

impl Candidate {
    /// Heavier total weight first, then lexicographic node sequence, then
    /// canonical edge order.
    fn better_than(&self, other: &Candidate) -> bool {
        match other.weight.total_cmp(&self.weight) {
            Ordering::Greater => false,
            Ordering::Less => true,
            Ordering::Equal => (&self.nodes, &self.edges) < (&other.nodes, &other.edges),
        }
    }
}

struct Search<'g> {
    graph: &'g KnowledgeGraph,
    target: usize,
    hops: usize,
    /// `remaining[v][c]`: fewest hops from `v` to the target, where `c == 1`
    /// means a compositional edge has already been crossed.
    remaining: Vec<[usize; 2]>,
    visited: Vec<bool>,
    nodes: Vec<usize>,
    edges: Vec<usize>,
    best: Option<Candidate>,
}

impl KnowledgeGraph {
    /// Shortest path from `from` to `to` containing at least one
    /// compositional assertion, within the graph's hop bound.
    pub fn contextual_path(
        &self,
        from: &ConceptId,
        to: &ConceptId,
    ) -> Result<Option<ContextualPath>> {
        self.contextual_path_within(from, to, self.hop_bound)
    }

    /// As [`contextual_path`](Self::contextual_path) with an explicit hop
    /// bound. Only simple paths are considered; ties on hop count go to the
    /// larger total edge weight, then the lexicographically smaller node
    /// sequence.
    pub fn contextual_path_within(
        &self,
        from: &ConceptId,
        to: &ConceptId,
        hop_bound: usize,
    ) -> Result<Option<ContextualPath>> {
        let source = self.node(from)?;
        let target = self.node(to)?;
        if source == target || hop_bound == 0 {
            return Ok(None);
        }

        let remaining = self.hops_to_target(target, hop_bound);
        let lower = remaining[source][0];
        if lower == UNREACHED {
            return Ok(None);
        }

        let mut search = Search {
            graph: self,
            target,
            hops: lower,
            remaining,
            visited: vec![false; self.concepts.len()],
            nodes: vec![source],
            edges: Vec::new(),
            best: None,
        };
        search.visited[source] = true;

        for hops in lower..=hop_bound {
            search.hops = hops;
            search.extend(source, false, 0.0);
            if let Some(best) = search.best.take() {
                return Ok(Some(self.materialize(best)));
            }
        }
        Ok(None)
    }

    /// Backward BFS over (node, crossed-compositional) states, capped at
    /// `hop_bound`. Walks are not required to be simple, so the result is a
    /// lower bound for simple paths.
    fn hops_to_target(&self, target: usize, hop_bound: usize) -> Vec<[usize; 2]> {
        let mut dist = vec![[UNREACHED; 2]; self.concepts.len()];
        let mut queue = VecDeque::new();
        dist[target][1] = 0;
        queue.push_back((target, 1usize));
        while let Some((node, crossed)) = queue.pop_front() {
            let d = dist[node][crossed];
            if d >= hop_bound {
                continue;
            }
            for (edge, prev) in self.incident(node) {
                let comp = self.is_compositional(self.assertions[edge].relation);
                // Moving prev -> node along `edge` turns state c into c || comp.
                let preds: &[usize] = match (crossed, comp) {
                    (1, true) => &[0, 1],
                    (1, false) => &[1],
                    (_, false) => &[0],
                    (_, true) => &[],
                };
                for &c in preds {
                    if dist[prev][c] == UNREACHED {
                        dist[prev][c] = d + 1;
                        queue.push_back((prev, c));
                    }
                }
            }
        }
        dist
    }

    fn materialize(&self, found: Candidate) -> ContextualPath {
        let edges: Vec<Assertion> = found
            .edges
            .iter()
            .map(|&e| self.assertions[e].clone())
            .collect();
        let has_compositional = edges.iter().any(|a| self.is_compositional(a.relation));
        ContextualPath {
            nodes: found.nodes.iter().map(|&n| self.concepts[n].clone()).collect(),
            edges,
            has_compositional,
        }
    }
}

impl Search<'_> {
    fn extend(&mut self, node: usize, crossed: bool, weight: f64) {
        let depth = self.edges.len();
        if node == self.target {
            if depth == self.hops && crossed {
                let candidate = Candidate {
                    nodes: self.nodes.clone(),
                    edges: self.edges.clone(),
                    weight,
                };
                if self.best.as_ref().is_none_or(|b| candidate.better_than(b)) {
                    self.best = Some(candidate);
                }
            }
            return;
        }
        let graph = self.graph;
        for (edge, next) in graph.incident(node) {
            if self.visited[next] {
                continue;
            }
            let assertion = &graph.assertions[edge];
            let crossed_next = crossed || graph.is_compositional(assertion.relation);
            let need = self.remaining[next][crossed_next as usize];
            if need == UNREACHED || depth + 1 + need > self.hops {
                continue;
            }
            self.visited[next] = true;
            self.nodes.push(next);
            self.edges.push(edge);
            self.extend(next, crossed_next, weight + assertion.signed_weight());
            self.edges.pop();
            self.nodes.pop();
            self.visited[next] = false;
        }
    }
}
