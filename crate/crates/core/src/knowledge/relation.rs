use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

macro_rules! relations {
    ($($name:ident),+ $(,)?) => {
        /// ConceptNet 5 relation vocabulary (English core set plus the
        /// `Not*` negations).
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum Relation {
            $($name,)+
        }

        impl Relation {
            pub const ALL: &'static [Relation] = &[$(Relation::$name,)+];

            pub fn name(self) -> &'static str {
                match self {
                    $(Relation::$name => stringify!($name),)+
                }
            }
        }

        impl FromStr for Relation {
            type Err = UnknownRelation;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let bare = s.trim().strip_prefix("/r/").unwrap_or(s.trim());
                match bare {
                    $(stringify!($name) => Ok(Relation::$name),)+
                    _ => Err(UnknownRelation(bare.to_string())),
                }
            }
        }
    };
}

relations!(
    RelatedTo,
    FormOf,
    IsA,
    PartOf,
    HasA,
    UsedFor,
    CapableOf,
    AtLocation,
    Causes,
    HasSubevent,
    HasFirstSubevent,
    HasLastSubevent,
    HasPrerequisite,
    HasProperty,
    MotivatedByGoal,
    ObstructedBy,
    Desires,
    CreatedBy,
    Synonym,
    Antonym,
    DistinctFrom,
    DerivedFrom,
    SymbolOf,
    DefinedAs,
    MannerOf,
    LocatedNear,
    HasContext,
    SimilarTo,
    EtymologicallyRelatedTo,
    EtymologicallyDerivedFrom,
    CausesDesire,
    MadeOf,
    ReceivesAction,
    InstanceOf,
    Entails,
    NotDesires,
    NotUsedFor,
    NotCapableOf,
    NotHasProperty,
);

impl Relation {
    /// Negated relations (`NotCapableOf`, ...) contribute negative strength.
    pub fn is_negated(self) -> bool {
        self.name().starts_with("Not")
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown relation `{0}`")]
pub struct UnknownRelation(pub String);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_bare_and_uri_forms() {
        assert_eq!("IsA".parse::<Relation>().unwrap(), Relation::IsA);
        assert_eq!("/r/UsedFor".parse::<Relation>().unwrap(), Relation::UsedFor);
        assert!("/r/dbpedia/genre".parse::<Relation>().is_err());
        assert!("isa".parse::<Relation>().is_err());
    }

    #[test]
    fn names_round_trip() {
        for rel in Relation::ALL {
            assert_eq!(rel.name().parse::<Relation>().unwrap(), *rel);
        }
    }

    #[test]
    fn negation() {
        assert!(Relation::NotCapableOf.is_negated());
        assert!(!Relation::CapableOf.is_negated());
        assert!(!Relation::IsA.is_negated());
    }
}
