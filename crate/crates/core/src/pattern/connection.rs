use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{BondKind, Configuration, GeneratorKind};
use crate::error::{Error, Result};
use crate::knowledge::Relation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// One action at the center, `size` objects bonded to it.
    Star,
    /// `size` sites alternating object, action, object, ...
    Chain,
    /// `ceil(size/2)` objects fully bonded to `floor(size/2)` actions.
    Bipartite,
}

/// A family of connector graphs with size bounds (the connection type).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectionType {
    pub family: Family,
    pub min_size: usize,
    pub max_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SiteRole {
    Object,
    Action,
}

impl SiteRole {
    pub fn kind(self) -> GeneratorKind {
        match self {
            SiteRole::Object => GeneratorKind::Object,
            SiteRole::Action => GeneratorKind::Action,
        }
    }
}

/// Concrete connector graph: site roles plus `UsedFor` links given as
/// `(object site, action site)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Template {
    pub roles: Vec<SiteRole>,
    pub links: Vec<(usize, usize)>,
}

impl ConnectionType {
    pub fn new(family: Family, min_size: usize, max_size: usize) -> Self {
        Self {
            family,
            min_size,
            max_size,
        }
    }

    pub fn fixed(family: Family, size: usize) -> Self {
        Self::new(family, size, size)
    }

    fn smallest(&self) -> usize {
        match self.family {
            Family::Star => 1,
            Family::Chain | Family::Bipartite => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_size < self.smallest() || self.max_size < self.min_size {
            return Err(Error::Config(format!(
                "{:?} connection type needs {} <= min_size <= max_size, got {}..={}",
                self.family,
                self.smallest(),
                self.min_size,
                self.max_size
            )));
        }
        Ok(())
    }

    pub fn sizes(&self) -> std::ops::RangeInclusive<usize> {
        self.min_size..=self.max_size
    }

    /// Connector graph of the given size, or `None` outside the bounds.
    pub fn template(&self, size: usize) -> Option<Template> {
        if !self.sizes().contains(&size) || size < self.smallest() {
            return None;
        }
        Some(match self.family {
            Family::Star => {
                let mut roles = vec![SiteRole::Action];
                roles.extend(std::iter::repeat_n(SiteRole::Object, size));
                Template {
                    roles,
                    links: (1..=size).map(|o| (o, 0)).collect(),
                }
            }
            Family::Chain => {
                let roles: Vec<SiteRole> = (0..size)
                    .map(|i| if i % 2 == 0 { SiteRole::Object } else { SiteRole::Action })
                    .collect();
                let links = (0..size - 1)
                    .map(|i| if i % 2 == 0 { (i, i + 1) } else { (i + 1, i) })
                    .collect();
                Template { roles, links }
            }
            Family::Bipartite => {
                let objects = size.div_ceil(2);
                let mut roles = vec![SiteRole::Object; objects];
                roles.extend(std::iter::repeat_n(SiteRole::Action, size - objects));
                let links = (0..objects)
                    .flat_map(|o| (objects..size).map(move |a| (o, a)))
                    .collect();
                Template { roles, links }
            }
        })
    }

    /// Family predicate: the non-grounded sites of `config` and their
    /// `UsedFor` bonds form exactly this family's graph at an allowed size.
    pub fn matches(&self, config: &Configuration) -> bool {
        let semantic: Vec<usize> = config
            .sites()
            .iter()
            .enumerate()
            .filter(|(_, g)| g.kind != GeneratorKind::Grounded)
            .map(|(i, _)| i)
            .collect();
        let local = |site: usize| semantic.iter().position(|&s| s == site);
        let size = match self.family {
            Family::Star => semantic.len().saturating_sub(1),
            Family::Chain | Family::Bipartite => semantic.len(),
        };
        let Some(template) = self.template(size) else {
            return false;
        };
        let roles_match = semantic
            .iter()
            .zip(&template.roles)
            .all(|(&site, role)| config.sites()[site].kind == role.kind());
        if !roles_match {
            return false;
        }
        let mut links = BTreeSet::new();
        for c in config.connector() {
            let kind = config.sites()[c.from.site].bonds[c.from.slot].kind;
            if kind != BondKind::Assertion(Relation::UsedFor) {
                continue;
            }
            match (local(c.from.site), local(c.to.site)) {
                (Some(o), Some(a)) => {
                    if !links.insert((o, a)) {
                        return false;
                    }
                }
                _ => return false,
            }
        }
        links == template.links.into_iter().collect()
    }
}
