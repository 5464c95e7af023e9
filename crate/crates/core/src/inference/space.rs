use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::concept::ConceptId;
use crate::error::{Error, Result};
use crate::knowledge::Relation;
use crate::pattern::{
    config_energy, AssertionStrength, Arity, BondKind, Configuration, ConnectionType, Generator, GeneratorKind,
    SiteRole, Template,
};

/// Attempts a global proposal makes before giving up and keeping the state.
pub const GLOBAL_RETRIES: usize = 100;

/// A concept with its proposal weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub concept: ConceptId,
    pub score: f64,
}

impl Candidate {
    pub fn new(concept: ConceptId, score: f64) -> Self {
        Self { concept, score }
    }
}

/// A point in configuration space: a connector graph plus the pool index
/// populating each of its sites.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct State {
    pub connection: usize,
    pub template: Template,
    pub assignment: Vec<usize>,
}

/// Candidate pools, allowed connection types and the knowledge needed to
/// turn a [`State`] into a scored [`Configuration`].
pub struct SearchSpace<'a, S: ?Sized> {
    strength: &'a S,
    objects: Vec<Candidate>,
    actions: Vec<Candidate>,
    grounded: BTreeMap<ConceptId, Generator>,
    connection_types: Vec<ConnectionType>,
    arity: Arity,
    domain: String,
}

/// Sorts by concept and merges duplicates, keeping the larger score.
fn canonical_pool(mut pool: Vec<Candidate>) -> Vec<Candidate> {
    pool.sort_by(|a, b| a.concept.cmp(&b.concept).then(b.score.total_cmp(&a.score)));
    pool.dedup_by(|later, earlier| later.concept == earlier.concept);
    pool
}

fn draw<R: Rng + ?Sized>(pool: &[Candidate], rng: &mut R) -> Option<usize> {
    if pool.is_empty() {
        return None;
    }
    let weights: Vec<f64> = pool
        .iter()
        .map(|c| if c.score.is_finite() && c.score > 0.0 { c.score } else { 0.0 })
        .collect();
    match WeightedIndex::new(&weights) {
        Ok(dist) => Some(dist.sample(rng)),
        Err(_) => Some(rng.gen_range(0..pool.len())),
    }
}

impl<'a, S: AssertionStrength + ?Sized> SearchSpace<'a, S> {
    /// Pools are put in canonical order, so the search does not depend on
    /// the order candidates were supplied in. Grounded generators attach to
    /// the site holding the concept they ground.
    pub fn new(
        strength: &'a S,
        objects: Vec<Candidate>,
        actions: Vec<Candidate>,
        grounded: Vec<Generator>,
        connection_types: Vec<ConnectionType>,
        arity: Arity,
    ) -> Result<Self> {
        if objects.is_empty() || actions.is_empty() {
            return Err(Error::Config("annealing needs at least one object and one action candidate".into()));
        }
        if connection_types.is_empty() {
            return Err(Error::Config("no connection types configured".into()));
        }
        for ty in &connection_types {
            ty.validate()?;
        }
        arity.validate()?;
        let mut by_concept = BTreeMap::new();
        for g in grounded {
            if g.kind != GeneratorKind::Grounded {
                return Err(Error::Config(format!("`{}` is not a grounded generator", g.concept)));
            }
            by_concept.entry(g.concept.clone()).or_insert(g);
        }
        Ok(Self {
            strength,
            objects: canonical_pool(objects),
            actions: canonical_pool(actions),
            grounded: by_concept,
            connection_types,
            arity,
            domain: "target".into(),
        })
    }

    pub fn with_domain(mut self, domain: impl Into<String>) -> Self {
        self.domain = domain.into();
        self
    }

    pub fn objects(&self) -> &[Candidate] {
        &self.objects
    }

    pub fn actions(&self) -> &[Candidate] {
        &self.actions
    }

    pub fn connection_types(&self) -> &[ConnectionType] {
        &self.connection_types
    }

    pub fn strength(&self) -> &S {
        self.strength
    }

    fn pool(&self, role: SiteRole) -> &[Candidate] {
        match role {
            SiteRole::Object => &self.objects,
            SiteRole::Action => &self.actions,
        }
    }

    /// Builds the configuration for `state`: semantic sites in template
    /// order, then one grounded site per semantic site that has evidence.
    pub fn configuration(&self, state: &State) -> Result<Configuration> {
        let t = &state.template;
        if state.assignment.len() != t.roles.len() {
            return Err(Error::Structure("assignment does not match template".into()));
        }
        let mut sites = Vec::with_capacity(t.roles.len() * 2);
        for (role, &idx) in t.roles.iter().zip(&state.assignment) {
            let cand = self
                .pool(*role)
                .get(idx)
                .ok_or_else(|| Error::Structure(format!("no candidate {idx} for {role:?} site")))?;
            sites.push(match role {
                SiteRole::Object => Generator::object(cand.concept.clone(), self.domain.clone(), self.arity.object),
                SiteRole::Action => Generator::action(cand.concept.clone(), self.domain.clone(), self.arity.action),
            });
        }
        let mut grounding = Vec::new();
        for (i, g) in sites.iter().enumerate() {
            if let Some(evidence) = self.grounded.get(&g.concept) {
                let mut evidence = evidence.clone();
                evidence.bonds.truncate(self.arity.grounded.max(1));
                grounding.push((i, evidence));
            }
        }
        let semantic = sites.len();
        sites.extend(grounding.iter().map(|(_, g)| g.clone()));
        let mut config = Configuration::new(sites);
        for &(o, a) in &t.links {
            config.connect_sites(o, a, BondKind::Assertion(Relation::UsedFor))?;
        }
        for (k, (site, _)) in grounding.iter().enumerate() {
            config.connect_sites(semantic + k, *site, BondKind::Grounds)?;
        }
        Ok(config)
    }

    pub fn energy(&self, state: &State) -> Result<f64> {
        config_energy(&self.configuration(state)?, self.strength)
    }

    /// Draws a connector graph uniformly over connection types (then
    /// uniformly over sizes) and populates it from the pools. Retries on
    /// structurally invalid draws, then falls back to `current`.
    pub fn global_proposal<R: Rng + ?Sized>(&self, current: Option<&State>, rng: &mut R) -> Option<State> {
        for _ in 0..GLOBAL_RETRIES {
            let connection = rng.gen_range(0..self.connection_types.len());
            let ty = self.connection_types[connection];
            let size = rng.gen_range(ty.min_size..=ty.max_size);
            let Some(template) = ty.template(size) else { continue };
            let assignment: Option<Vec<usize>> = template.roles.iter().map(|r| draw(self.pool(*r), rng)).collect();
            let Some(assignment) = assignment else { continue };
            let state = State {
                connection,
                template,
                assignment,
            };
            if self.configuration(&state).is_ok() {
                return Some(state);
            }
        }
        current.cloned()
    }

    /// Replaces the generator on one uniformly chosen site by a pool draw
    /// weighted by candidate score. The connector graph is unchanged.
    pub fn local_proposal<R: Rng + ?Sized>(&self, current: &State, rng: &mut R) -> State {
        let mut next = current.clone();
        if next.assignment.is_empty() {
            return next;
        }
        let site = rng.gen_range(0..next.assignment.len());
        if let Some(idx) = draw(self.pool(next.template.roles[site]), rng) {
            next.assignment[site] = idx;
        }
        next
    }

    /// Noun and verb of a state: the first object and first action site.
    pub fn labels(&self, state: &State) -> (ConceptId, ConceptId) {
        let find = |role: SiteRole| {
            state
                .template
                .roles
                .iter()
                .zip(&state.assignment)
                .find(|(r, _)| **r == role)
                .map(|(_, &i)| self.pool(role)[i].concept.clone())
                .expect("every template has object and action sites")
        };
        (find(SiteRole::Object), find(SiteRole::Action))
    }
}
