//! Pipeline configuration, read from TOML.
//!
//! ```toml
//! seed = 7
//! mode = "closed"
//!
//! [paths]
//! assertions = "kg.tsv"
//! embeddings = "numberbatch.txt"
//! detections = "detections.jsonl"
//! ground_truth = "gt.tsv"
//! actions = "actions.txt"
//!
//! [attention]
//! k = 10
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::abduction::{AbductionParams, Aggregation};
use crate::attention::AttentionParams;
use crate::correspondence::{DecayParams, MappingParams};
use crate::error::{Error, Result};
use crate::inference::AnnealSchedule;
use crate::knowledge::DEFAULT_HOP_BOUND;
use crate::pattern::{Arity, ConnectionType, Family};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub assertions: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub detections: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    /// Action vocabulary, required in closed mode.
    pub actions: Option<PathBuf>,
    /// Target object vocabulary. Falls back to the ground-truth nouns, then
    /// to the detected labels.
    pub objects: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Closed,
    Open,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub seed: u64,
    pub mode: Mode,
    /// Affordance hops followed in open mode.
    pub hop_bound: usize,
    /// Hop bound for contextual paths in the knowledge graph.
    pub path_hop_bound: usize,
    pub detection_threshold: f64,
    pub top_k_objects: usize,
    pub top_k_actions: usize,
    /// Source concepts kept per target in the vocabulary mapping.
    pub top_k_sources: usize,
    pub max_interpretations: usize,
    /// Cut-offs reported by the recognition metrics.
    pub eval_k: Vec<usize>,
    pub decay: DecayParams,
    pub rel_floor: f64,
    pub cs_floor: f64,
    pub aggregation: Aggregation,
    pub attention: AttentionParams,
    pub anneal: AnnealSchedule,
    pub arity: Arity,
    pub connection_types: Vec<ConnectionType>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            paths: Paths::default(),
            seed: 0,
            mode: Mode::Closed,
            hop_bound: 1,
            path_hop_bound: DEFAULT_HOP_BOUND,
            detection_threshold: 0.25,
            top_k_objects: 5,
            top_k_actions: 5,
            top_k_sources: 5,
            max_interpretations: 25,
            eval_k: vec![1, 5, 10],
            decay: DecayParams::default(),
            rel_floor: MappingParams::default().rel_floor,
            cs_floor: AbductionParams::default().cs_floor,
            aggregation: Aggregation::default(),
            attention: AttentionParams::default(),
            anneal: AnnealSchedule::default(),
            arity: Arity::default(),
            connection_types: vec![ConnectionType::new(Family::Star, 1, 2)],
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parses `path` and resolves relative paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(dir) = path.parent() {
            config.paths.resolve(dir);
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn mapping_params(&self) -> MappingParams {
        MappingParams {
            decay: self.decay,
            rel_floor: self.rel_floor,
        }
    }

    pub fn abduction_params(&self) -> AbductionParams {
        AbductionParams {
            decay: self.decay,
            cs_floor: self.cs_floor,
            aggregation: self.aggregation,
        }
    }

    /// Range checks on every parameter. File presence is checked by
    /// [`PipelineConfig::validate_paths`].
    pub fn validate(&self) -> Result<()> {
        self.mapping_params().validate()?;
        self.abduction_params().validate()?;
        self.attention.validate()?;
        self.anneal.validate()?;
        self.arity.validate()?;
        if self.connection_types.is_empty() {
            return Err(Error::Config("at least one connection type is required".into()));
        }
        for ty in &self.connection_types {
            ty.validate()?;
        }
        if !(0.0..=1.0).contains(&self.detection_threshold) {
            return Err(Error::Config(format!(
                "detection_threshold must be in [0, 1], got {}",
                self.detection_threshold
            )));
        }
        let counts = [
            ("top_k_objects", self.top_k_objects),
            ("top_k_actions", self.top_k_actions),
            ("top_k_sources", self.top_k_sources),
            ("max_interpretations", self.max_interpretations),
            ("path_hop_bound", self.path_hop_bound),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.mode == Mode::Open && self.hop_bound == 0 {
            return Err(Error::Config("open mode needs hop_bound >= 1".into()));
        }
        if self.eval_k.contains(&0) {
            return Err(Error::Config("eval_k entries must be at least 1".into()));
        }
        Ok(())
    }

    /// Required inputs are set and every configured file exists.
    pub fn validate_paths(&self) -> Result<()> {
        let p = &self.paths;
        let required = [
            ("assertions", &p.assertions),
            ("embeddings", &p.embeddings),
            ("detections", &p.detections),
        ];
        for (name, path) in required {
            if path.is_none() {
                return Err(Error::Config(format!("paths.{name} is required")));
            }
        }
        if self.mode == Mode::Closed && p.actions.is_none() {
            return Err(Error::Config("closed mode needs paths.actions".into()));
        }
        for path in p.iter() {
            if !path.is_file() {
                return Err(Error::Config(format!("{} does not exist", path.display())));
            }
        }
        Ok(())
    }
}

impl Paths {
    fn iter(&self) -> impl Iterator<Item = &PathBuf> {
        [
            &self.assertions,
            &self.embeddings,
            &self.detections,
            &self.ground_truth,
            &self.actions,
            &self.objects,
        ]
        .into_iter()
        .flatten()
    }

    pub fn resolve(&mut self, base: &Path) {
        for slot in [
            &mut self.assertions,
            &mut self.embeddings,
            &mut self.detections,
            &mut self.ground_truth,
            &mut self.actions,
            &mut self.objects,
        ]
        .into_iter()
        .flatten()
        {
            if slot.is_relative() {
                *slot = base.join(&*slot);
            }
        }
    }
}
