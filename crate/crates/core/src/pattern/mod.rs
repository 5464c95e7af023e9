//! Generators, bonds and configurations with their semantic energies.
//!
//! A closed bond between generators `g_i` and `g_j` has energy
//! `tanh(phi(g_i, g_j))`; a configuration's energy is the negated sum over
//! its closed bonds, and `P(c)` is proportional to `exp(-E(c))`.

mod connection;
mod dot;

use serde::{Deserialize, Serialize};

use crate::concept::ConceptId;
use crate::error::{Error, Result};
use crate::knowledge::{KnowledgeGraph, Relation};

pub use connection::{ConnectionType, Family, SiteRole, Template};
pub use dot::to_dot;

/// Cap on `|logit(confidence)|` for grounding bonds.
pub const GROUNDING_CAP: f64 = 4.0;

/// Source of assertion strength `phi` between two concepts.
pub trait AssertionStrength {
    fn strength(&self, a: &ConceptId, b: &ConceptId) -> Result<f64>;
}

impl AssertionStrength for KnowledgeGraph {
    fn strength(&self, a: &ConceptId, b: &ConceptId) -> Result<f64> {
        self.assertion_weight(a, b)
    }
}

impl<T: AssertionStrength + ?Sized> AssertionStrength for &T {
    fn strength(&self, a: &ConceptId, b: &ConceptId) -> Result<f64> {
        (**self).strength(a, b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    Object,
    Action,
    Grounded,
}

impl GeneratorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GeneratorKind::Object => "object",
            GeneratorKind::Action => "action",
            GeneratorKind::Grounded => "grounded",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BondKind {
    Assertion(Relation),
    /// Links a grounded detection to the concept generator it supports.
    Grounds,
}

impl std::fmt::Display for BondKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BondKind::Assertion(r) => write!(f, "{r}"),
            BondKind::Grounds => f.write_str("Grounds"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BondDirection {
    Out,
    In,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BondState {
    Open,
    Closed(SlotRef),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SlotRef {
    pub site: usize,
    pub slot: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BondSlot {
    pub kind: BondKind,
    pub direction: BondDirection,
    pub state: BondState,
}

impl BondSlot {
    pub fn open(kind: BondKind, direction: BondDirection) -> Self {
        Self {
            kind,
            direction,
            state: BondState::Open,
        }
    }

    pub fn is_open(&self) -> bool {
        self.state == BondState::Open
    }
}

/// Bond relation function: same kind, opposite directions.
pub fn bond_compatible(a: &BondSlot, b: &BondSlot) -> bool {
    a.kind == b.kind && a.direction != b.direction
}

/// Number of bond slots per generator kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Arity {
    pub object: usize,
    pub action: usize,
    pub grounded: usize,
}

impl Default for Arity {
    fn default() -> Self {
        Self {
            object: 4,
            action: 6,
            grounded: 1,
        }
    }
}

impl Arity {
    pub fn validate(&self) -> Result<()> {
        if self.object < 2 || self.action < 2 || self.grounded < 1 {
            return Err(Error::Config(
                "arity must be >= 2 for objects and actions and >= 1 for grounded generators".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub concept: ConceptId,
    /// Vocabulary the concept was drawn from, e.g. `coco` or `kitchen`.
    pub domain: String,
    pub kind: GeneratorKind,
    /// Detection confidence in `[0, 1]`; only grounded generators carry one.
    pub confidence: Option<f64>,
    pub bonds: Vec<BondSlot>,
}

impl Generator {
    /// Object generator: one `Grounds` acceptor followed by `UsedFor` donors.
    pub fn object(concept: ConceptId, domain: impl Into<String>, arity: usize) -> Self {
        let mut bonds = vec![BondSlot::open(BondKind::Grounds, BondDirection::In)];
        bonds.extend((1..arity.max(2)).map(|_| {
            BondSlot::open(BondKind::Assertion(Relation::UsedFor), BondDirection::Out)
        }));
        Self {
            concept,
            domain: domain.into(),
            kind: GeneratorKind::Object,
            confidence: None,
            bonds,
        }
    }

    /// Action generator: one `Grounds` acceptor followed by `UsedFor` acceptors.
    pub fn action(concept: ConceptId, domain: impl Into<String>, arity: usize) -> Self {
        let mut bonds = vec![BondSlot::open(BondKind::Grounds, BondDirection::In)];
        bonds.extend((1..arity.max(2)).map(|_| {
            BondSlot::open(BondKind::Assertion(Relation::UsedFor), BondDirection::In)
        }));
        Self {
            concept,
            domain: domain.into(),
            kind: GeneratorKind::Action,
            confidence: None,
            bonds,
        }
    }

    /// Grounded generator with `Grounds` donor slots. The confidence is
    /// clamped into `[0, 1]`.
    pub fn grounded(concept: ConceptId, domain: impl Into<String>, confidence: f64, arity: usize) -> Self {
        let confidence = if confidence.is_nan() { 0.0 } else { confidence.clamp(0.0, 1.0) };
        Self {
            concept,
            domain: domain.into(),
            kind: GeneratorKind::Grounded,
            confidence: Some(confidence),
            bonds: (0..arity.max(1))
                .map(|_| BondSlot::open(BondKind::Grounds, BondDirection::Out))
                .collect(),
        }
    }

    pub fn arity(&self) -> usize {
        self.bonds.len()
    }

    /// First open slot that would accept a bond from `other`.
    pub fn open_slot_for(&self, other: &BondSlot) -> Option<usize> {
        self.bonds
            .iter()
            .position(|b| b.is_open() && bond_compatible(b, other))
    }

    fn reset_bonds(&mut self) {
        for b in &mut self.bonds {
            b.state = BondState::Open;
        }
    }
}

/// `clamp(logit(p), -GROUNDING_CAP, GROUNDING_CAP)`.
pub fn grounding_strength(confidence: f64) -> f64 {
    let p = confidence.clamp(0.0, 1.0);
    let logit = (p / (1.0 - p)).ln();
    if logit.is_nan() {
        0.0
    } else {
        logit.clamp(-GROUNDING_CAP, GROUNDING_CAP)
    }
}

/// `phi` for a bond between two generators: grounding strength when either
/// side is a grounded detection, assertion strength otherwise.
pub fn bond_strength<S: AssertionStrength + ?Sized>(strength: &S, a: &Generator, b: &Generator) -> Result<f64> {
    match (a.confidence, b.confidence) {
        (Some(p), _) if a.kind == GeneratorKind::Grounded => Ok(grounding_strength(p)),
        (_, Some(p)) if b.kind == GeneratorKind::Grounded => Ok(grounding_strength(p)),
        _ => strength.strength(&a.concept, &b.concept),
    }
}

/// Largest `f64` below one.
const UNIT_BELOW: f64 = 1.0 - f64::EPSILON / 2.0;

/// `tanh(phi)`, kept strictly inside `(-1, 1)` where `f64` would round to one.
pub fn semantic_energy(phi: f64) -> f64 {
    phi.tanh().clamp(-UNIT_BELOW, UNIT_BELOW)
}

/// `e_sem` of the bond between `a` and `b`.
pub fn bond_energy<S: AssertionStrength + ?Sized>(strength: &S, a: &Generator, b: &Generator) -> Result<f64> {
    Ok(semantic_energy(bond_strength(strength, a, b)?))
}

/// A closed bond, stored from its `Out` end to its `In` end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Connection {
    pub from: SlotRef,
    pub to: SlotRef,
}

/// Generators placed on the sites of a connector graph.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Configuration {
    sites: Vec<Generator>,
    connector: Vec<Connection>,
    #[serde(skip)]
    energy: Option<f64>,
}

impl PartialEq for Configuration {
    fn eq(&self, other: &Self) -> bool {
        self.sites == other.sites && self.connector == other.connector
    }
}

impl Configuration {
    pub fn new(mut sites: Vec<Generator>) -> Self {
        for g in &mut sites {
            g.reset_bonds();
        }
        Self {
            sites,
            connector: Vec::new(),
            energy: None,
        }
    }

    pub fn empty() -> Self {
        Self::new(Vec::new())
    }

    pub fn sites(&self) -> &[Generator] {
        &self.sites
    }

    pub fn connector(&self) -> &[Connection] {
        &self.connector
    }

    /// Closes a bond between `a` and `b`. Slots must exist, be open and be
    /// compatible; the `Out` end is recorded as `from`.
    pub fn connect(&mut self, a: SlotRef, b: SlotRef) -> Result<()> {
        let slot_a = *self.slot(a)?;
        let slot_b = *self.slot(b)?;
        if a.site == b.site {
            return Err(Error::Structure(format!("bond from site {} to itself", a.site)));
        }
        if !slot_a.is_open() || !slot_b.is_open() {
            return Err(Error::Structure(format!("slot {a:?} or {b:?} is already closed")));
        }
        if !bond_compatible(&slot_a, &slot_b) {
            return Err(Error::Structure(format!(
                "incompatible bonds {} {:?} and {} {:?}",
                slot_a.kind, slot_a.direction, slot_b.kind, slot_b.direction
            )));
        }
        let (from, to) = if slot_a.direction == BondDirection::Out { (a, b) } else { (b, a) };
        self.sites[from.site].bonds[from.slot].state = BondState::Closed(to);
        self.sites[to.site].bonds[to.slot].state = BondState::Closed(from);
        self.connector.push(Connection { from, to });
        self.energy = None;
        Ok(())
    }

    /// Connects the first open compatible slots on sites `a` and `b` for a
    /// bond of `kind`.
    pub fn connect_sites(&mut self, a: usize, b: usize, kind: BondKind) -> Result<()> {
        let site_a = self
            .sites
            .get(a)
            .ok_or_else(|| Error::Structure(format!("no site {a}")))?;
        let site_b = self
            .sites
            .get(b)
            .ok_or_else(|| Error::Structure(format!("no site {b}")))?;
        let slots = site_a.bonds.iter().enumerate().find_map(|(i, s)| {
            if s.kind != kind || !s.is_open() {
                return None;
            }
            site_b.open_slot_for(s).map(|j| (i, j))
        });
        let (sa, sb) = slots.ok_or_else(|| {
            Error::Structure(format!("no open {kind} slots between sites {a} and {b}"))
        })?;
        self.connect(SlotRef { site: a, slot: sa }, SlotRef { site: b, slot: sb })
    }

    fn slot(&self, at: SlotRef) -> Result<&BondSlot> {
        self.sites
            .get(at.site)
            .and_then(|g| g.bonds.get(at.slot))
            .ok_or_else(|| Error::Structure(format!("no slot {at:?}")))
    }

    /// Checks that every connection joins existing, compatible slots whose
    /// states point at each other, and that no closed slot is dangling.
    pub fn validate(&self) -> Result<()> {
        let mut closed = 0usize;
        for c in &self.connector {
            let from = self.slot(c.from)?;
            let to = self.slot(c.to)?;
            if from.state != BondState::Closed(c.to) || to.state != BondState::Closed(c.from) {
                return Err(Error::Structure(format!("bond {c:?} disagrees with slot states")));
            }
            if !bond_compatible(from, to) || from.direction != BondDirection::Out {
                return Err(Error::Structure(format!("bond {c:?} joins incompatible slots")));
            }
            closed += 2;
        }
        let marked = self
            .sites
            .iter()
            .flat_map(|g| &g.bonds)
            .filter(|b| !b.is_open())
            .count();
        if marked != closed {
            return Err(Error::Structure("closed slot without a matching bond".into()));
        }
        Ok(())
    }

    /// Recomputes the energy, caches it and returns it.
    pub fn evaluate<S: AssertionStrength + ?Sized>(&mut self, strength: &S) -> Result<f64> {
        let e = config_energy(self, strength)?;
        self.energy = Some(e);
        Ok(e)
    }

    pub fn cached_energy(&self) -> Option<f64> {
        self.energy
    }

    pub(crate) fn set_cached_energy(&mut self, energy: f64) {
        self.energy = Some(energy);
    }

    /// First site of the given kind.
    pub fn first_of(&self, kind: GeneratorKind) -> Option<&Generator> {
        self.sites.iter().find(|g| g.kind == kind)
    }

    /// Disjoint union: sites of `other` are appended and its bonds shifted.
    pub fn union(&self, other: &Configuration) -> Configuration {
        let offset = self.sites.len();
        let shift = |r: SlotRef| SlotRef { site: r.site + offset, slot: r.slot };
        let mut sites = self.sites.clone();
        sites.extend(other.sites.iter().cloned().map(|mut g| {
            for b in &mut g.bonds {
                if let BondState::Closed(r) = b.state {
                    b.state = BondState::Closed(shift(r));
                }
            }
            g
        }));
        let mut connector = self.connector.clone();
        connector.extend(other.connector.iter().map(|c| Connection {
            from: shift(c.from),
            to: shift(c.to),
        }));
        Configuration {
            sites,
            connector,
            energy: None,
        }
    }
}

/// `E(c) = -sum of e_sem over closed bonds`. Open bonds contribute nothing.
pub fn config_energy<S: AssertionStrength + ?Sized>(config: &Configuration, strength: &S) -> Result<f64> {
    config.validate()?;
    let mut total = 0.0;
    for c in &config.connector {
        total += bond_energy(strength, &config.sites[c.from.site], &config.sites[c.to.site])?;
    }
    Ok(-total)
}

/// Boltzmann weights `exp(-E) / sum exp(-E)`, computed via log-sum-exp.
pub fn boltzmann_probabilities(energies: &[f64], temperature: f64) -> Vec<f64> {
    if energies.is_empty() {
        return Vec::new();
    }
    let scaled: Vec<f64> = energies.iter().map(|e| -e / temperature).collect();
    let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_z = max + scaled.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    scaled.iter().map(|s| (s - log_z).exp()).collect()
}

/// Probability of `config` within `ensemble` at unit temperature.
pub fn config_probability<S: AssertionStrength + ?Sized>(
    config: &Configuration,
    ensemble: &[Configuration],
    strength: &S,
) -> Result<f64> {
    let position = ensemble
        .iter()
        .position(|c| c == config)
        .ok_or(Error::NotInEnsemble)?;
    let energies = ensemble
        .iter()
        .map(|c| config_energy(c, strength))
        .collect::<Result<Vec<_>>>()?;
    Ok(boltzmann_probabilities(&energies, 1.0)[position])
}
